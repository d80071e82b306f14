fn main() {
    std::process::exit(contactopt_cli::main_with_args(std::env::args_os()));
}
