fn main() {
    std::process::exit(epsw_core::cli::run(std::env::args_os()));
}
