fn main() {
    std::process::exit(prbm::cli::run(std::env::args_os()));
}
