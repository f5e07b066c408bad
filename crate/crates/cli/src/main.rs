fn main() {
    std::process::exit(uijepa_cli::main_with_args(std::env::args_os()));
}
