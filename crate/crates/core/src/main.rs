fn main() {
    std::process::exit(symkit::cli::main_with_args(std::env::args_os()));
}
