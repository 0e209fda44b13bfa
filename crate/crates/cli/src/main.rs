fn main() {
    std::process::exit(urtlab_cli::main_with(std::env::args_os()));
}
