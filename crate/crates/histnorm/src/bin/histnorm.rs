fn main() {
    std::process::exit(histnorm::cli::run(std::env::args_os()));
}
