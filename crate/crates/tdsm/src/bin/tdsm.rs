fn main() {
    std::process::exit(tdsm::cli::run(std::env::args()));
}
