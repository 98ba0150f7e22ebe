fn main() {
    if let Err(e) = attenmia_cli::run_args(std::env::args_os()) {
        eprintln!("{}", e.line());
        std::process::exit(e.exit_code());
    }
}
