use kirchhoff::nonlinearity::{decompose, truncate, Nonlinearity, ProbeConfig, SourceTerm};
use kirchhoff::pohozaev::{evaluate, nondegeneracy_check, project_onto_p, KirchhoffParams};
use kirchhoff::radial::{dilate, gradient_integral, radial_integral, IntegrandMode, RadialGrid, RadialProfile};
use kirchhoff::rescaling::{check_relaxed_condition, find_tbar, thresholds, InnerFunction, KirchhoffModel, ScanConfig};
use proptest::prelude::*;

fn gaussian(dim: usize, amp: f64, width: f64) -> RadialProfile {
    let grid = RadialGrid::graded(dim, 10.0 * width, 800, 1.5).unwrap();
    RadialProfile::from_fn(
        grid,
        move |r| amp * (-(r / width).powi(2)).exp(),
        move |r| -2.0 * r / (width * width) * amp * (-(r / width).powi(2)).exp(),
    )
    .unwrap()
}

fn cubic_primitive(s: f64) -> f64 {
    0.25 * s.powi(4) - 0.5 * s * s
}

fn quadratic_root(a: f64, b: f64, d: f64) -> f64 {
    ((b * b * d * d + 4.0 * a).sqrt() - b * d) / (2.0 * a)
}

fn inner(k: usize) -> InnerFunction {
    [InnerFunction::Identity, InnerFunction::Square, InnerFunction::Sqrt, InnerFunction::Log1p][k].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dilation_scaling_laws(dim in 3usize..=5, t in 0.2f64..5.0, amp in 0.5f64..3.0, width in 0.5f64..2.0) {
        let u = gaussian(dim, amp, width);
        let w = dilate(&u, t).unwrap();
        let n = dim as f64;
        let (du, dw) = (gradient_integral(&u).unwrap(), gradient_integral(&w).unwrap());
        prop_assert!((dw - t.powf(2.0 - n) * du).abs() <= 1e-11 * dw);
        let gu = radial_integral(&u, |s| s * s, IntegrandMode::Values).unwrap();
        let gw = radial_integral(&w, |s| s * s, IntegrandMode::Values).unwrap();
        prop_assert!((gw - t.powf(-n) * gu).abs() <= 1e-11 * gw);
    }

    #[test]
    fn three_dimensional_root_is_the_quadratic_root(a in 0.1f64..10.0, b in 0.1f64..10.0, d in 0.1f64..10.0) {
        let model = KirchhoffModel::kirchhoff(a, b).unwrap();
        let res = find_tbar(&model, d, 3, &ScanConfig::default()).unwrap();
        prop_assert_eq!(res.roots.len(), 1);
        prop_assert!((res.roots[0] - quadratic_root(a, b, d)).abs() < 1e-10);
    }

    #[test]
    fn four_dimensional_root(a in 0.1f64..10.0, b in 0.0f64..1.0, d in 0.1f64..10.0) {
        let model = KirchhoffModel::kirchhoff(a, b).unwrap();
        let res = find_tbar(&model, d, 4, &ScanConfig::default()).unwrap();
        if b * d < 1.0 - 1e-9 {
            prop_assert_eq!(res.roots.len(), 1);
            prop_assert!((res.roots[0] - ((1.0 - b * d) / a).sqrt()).abs() < 1e-10);
        } else if b * d > 1.0 + 1e-9 {
            prop_assert!(res.roots.is_empty());
        }
    }

    #[test]
    fn root_decreases_with_b(a in 0.1f64..10.0, b in 0.1f64..10.0, db in 0.01f64..1.0, d in 0.1f64..10.0) {
        let cfg = ScanConfig::default();
        let t1 = find_tbar(&KirchhoffModel::kirchhoff(a, b).unwrap(), d, 3, &cfg).unwrap().roots[0];
        let t2 = find_tbar(&KirchhoffModel::kirchhoff(a, b + db).unwrap(), d, 3, &cfg).unwrap().roots[0];
        prop_assert!(t2 < t1);
    }

    #[test]
    fn relaxed_condition_matches_root_existence(a in 0.1f64..10.0, b in 0.1f64..10.0, d in 0.1f64..10.0) {
        let model = KirchhoffModel::kirchhoff(a, b).unwrap();
        let cfg = ScanConfig::default();
        let relaxed = check_relaxed_condition(&model, d, 5, &cfg).unwrap();
        prop_assume!((relaxed.min_value - 1.0).abs() > 1e-6);
        let roots = find_tbar(&model, d, 5, &cfg).unwrap();
        prop_assert_eq!(relaxed.holds, !roots.roots.is_empty());
        prop_assert!(roots.roots.is_empty() || roots.roots.len() == 2);
        for t in roots.roots {
            prop_assert!((t * t * model.eval(t.powi(-3) * d) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn delta1_certificate(a in 0.05f64..10.0, d in 0.05f64..10.0, frac in 0.0f64..=1.0, k in 0usize..4, dim in 3usize..=5) {
        let f = inner(k);
        let probe = thresholds(&KirchhoffModel::affine(a, 1.0, f.clone()).unwrap(), d, dim, &ScanConfig::default()).unwrap();
        let delta1 = probe.delta1.unwrap();
        let b = frac * delta1;
        let report = thresholds(&KirchhoffModel::affine(a, b, f).unwrap(), d, dim, &ScanConfig::default()).unwrap();
        prop_assert!(report.b_within_delta1);
        prop_assert!(report.psi_at_half_inv_a <= 1.0 + 1e-12);
        prop_assert!(report.delta1_certified);
    }

    #[test]
    fn projection_is_idempotent(dim in 3usize..=4, a in 0.1f64..5.0, frac in 0.0f64..0.999, amp in 3.5f64..6.0, width in 0.5f64..2.0) {
        let u = gaussian(dim, amp, width);
        let b = if dim == 3 {
            2.0 * frac
        } else {
            // dilations reach the Pohozaev set only for b < 4∫G/D²
            let base = evaluate(&u, &KirchhoffParams::new(a, 0.0, 4).unwrap(), cubic_primitive).unwrap();
            frac * 4.0 * base.g_int / (base.d * base.d)
        };
        let params = KirchhoffParams::new(a, b, dim).unwrap();
        let first = project_onto_p(&u, &params, cubic_primitive).unwrap();
        let second = project_onto_p(&first.projected, &params, cubic_primitive).unwrap();
        prop_assert!((second.theta - 1.0).abs() < 1e-9);
        let report = evaluate(&first.projected, &params, cubic_primitive).unwrap();
        prop_assert!((report.action - report.reduced_energy).abs() <= 1e-9 * a * report.d);
        prop_assert!(nondegeneracy_check(&report, 1e-12).unwrap().holds);
        if dim == 4 {
            prop_assert_eq!(report.reduced_energy, a * report.d / 4.0);
        }
    }

    #[test]
    fn decomposition_identities(s in -5.0f64..5.0, kappa in 0.01f64..0.15) {
        for nl in [Nonlinearity::cubic(3).unwrap(), Nonlinearity::cubic_quintic(kappa, 3).unwrap()] {
            let tnl = truncate(&nl, &ProbeConfig::default()).unwrap();
            let dec = decompose(&tnl).unwrap();
            let m = dec.mass();
            prop_assert!(dec.g1(s) >= 0.0);
            // one rounding of the defining subtraction g2 = g1 - g̃
            let ulp = f64::EPSILON * dec.g1(s).abs().max(dec.g2(s).abs());
            prop_assert!((dec.g1(s) - dec.g2(s) - tnl.g(s)).abs() <= ulp);
            if s >= 0.0 {
                prop_assert!(dec.g2(s) >= m * s - 1e-12 * (1.0 + s.abs()));
                prop_assert!(dec.big_g2(s) >= 0.5 * m * s * s - 1e-12 * (1.0 + s * s));
            }
        }
    }

    #[test]
    fn truncation_is_idempotent(kappa in 0.01f64..0.15) {
        let cfg = ProbeConfig::default();
        let t = truncate(&Nonlinearity::cubic_quintic(kappa, 3).unwrap(), &cfg).unwrap();
        let again = t.retruncate(&cfg).unwrap();
        prop_assert_eq!(again.s0(), t.s0());
        prop_assert!(t.s0().is_finite());
        prop_assert!(t.g(t.s0() * 1.5) == 0.0 && t.g(-1.0) == 0.0);
    }
}
