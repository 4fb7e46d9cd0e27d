fn main() {
    std::process::exit(subunitary::cli::main_with_args(std::env::args_os()));
}
