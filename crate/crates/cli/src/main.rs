fn main() {
    std::process::exit(qcfd_cli::run_command(std::env::args_os()));
}
