fn main() -> std::process::ExitCode {
    cryo_mbir::harness::cli::main()
}
