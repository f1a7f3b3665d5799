fn main() {
    std::process::exit(narrembed_cli::main_with_args(std::env::args_os()));
}
