fn main() -> std::process::ExitCode {
    redsearch::cli::main()
}
