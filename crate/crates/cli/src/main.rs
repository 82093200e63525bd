fn main() {
    std::process::exit(entgen_cli::main_with_args(std::env::args_os()));
}
