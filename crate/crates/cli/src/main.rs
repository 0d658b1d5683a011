fn main() {
    std::process::exit(qng_cli::run(std::env::args_os()));
}
