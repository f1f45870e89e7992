fn main() {
    std::process::exit(omisim::cli::run_cli(std::env::args()));
}
