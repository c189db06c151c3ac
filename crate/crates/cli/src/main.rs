fn main() {
    let code = fbgsq_cli::run_command(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
