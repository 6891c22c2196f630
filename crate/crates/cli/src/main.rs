fn main() -> std::process::ExitCode {
    cautious_cli::main_with_args(std::env::args_os())
}
