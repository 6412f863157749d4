fn main() {
    std::process::exit(hessloc::cli::run_cli(std::env::args_os()));
}
