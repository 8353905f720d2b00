fn main() -> std::process::ExitCode {
    faasim::cli::main()
}
