fn main() -> std::process::ExitCode {
    lamqsd_cli::main_with_args()
}
