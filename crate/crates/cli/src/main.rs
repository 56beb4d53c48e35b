fn main() {
    std::process::exit(promptner_cli::run_cli(std::env::args_os()));
}
