fn main() -> std::process::ExitCode {
    rbergomi_cli::run()
}
