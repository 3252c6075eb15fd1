fn main() -> std::process::ExitCode {
    motion_deconv::cli::run(std::env::args_os())
}
