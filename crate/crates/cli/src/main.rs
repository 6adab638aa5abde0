fn main() {
    std::process::exit(binutil_cli::run(std::env::args_os()));
}
