fn main() {
    std::process::exit(balancing_weights::cli::run(std::env::args_os()));
}
