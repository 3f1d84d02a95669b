fn main() {
    std::process::exit(lpbal_cli::run(std::env::args_os()));
}
