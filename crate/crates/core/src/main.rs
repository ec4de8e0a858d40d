fn main() {
    std::process::exit(kirchhoff::cli::run(std::env::args_os()));
}
