fn main() {
    std::process::exit(greenfix_cli::run_cli(std::env::args_os()));
}
