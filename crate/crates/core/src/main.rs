fn main() {
    std::process::exit(thoughtprune::cli::run(std::env::args_os()));
}
