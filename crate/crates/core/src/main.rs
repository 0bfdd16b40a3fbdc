fn main() -> std::process::ExitCode {
    senseforge::cli::main()
}
