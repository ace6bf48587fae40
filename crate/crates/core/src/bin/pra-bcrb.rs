fn main() {
    std::process::exit(pra_bcrb::cli::run_from_args(std::env::args_os()));
}
