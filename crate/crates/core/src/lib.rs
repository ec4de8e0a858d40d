//! Positive radial solutions and ground states of the autonomous
//! Kirchhoff equation `−M(∫|∇u|²) Δu = g(u)` on `R^N`, built by rescaling
//! the radial ground state of `−Δv = g(v)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod nonlinearity;
pub mod numeric;
pub mod pohozaev;
pub mod radial;
pub mod rescaling;
pub mod verify;
