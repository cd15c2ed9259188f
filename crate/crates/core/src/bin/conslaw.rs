fn main() {
    std::process::exit(conslaw::cli::main_with_args(std::env::args_os()));
}
