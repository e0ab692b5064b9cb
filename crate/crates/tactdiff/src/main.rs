fn main() -> std::process::ExitCode {
    tactdiff::cli::main_with_args(std::env::args_os())
}
