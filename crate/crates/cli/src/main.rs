fn main() {
    std::process::exit(kronkge_cli::main_with_args(std::env::args_os()));
}
