fn main() {
    std::process::exit(escfr_cli::run(std::env::args_os()));
}
