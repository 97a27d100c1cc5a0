fn main() -> std::process::ExitCode {
    sbq_core::cli::main()
}
