fn main() -> std::process::ExitCode {
    soapbench::cli::main()
}
