fn main() {
    std::process::exit(mgmoments::cli::run(std::env::args_os()));
}
