fn main() -> std::process::ExitCode {
    copula_proc::cli::run(std::env::args_os())
}
