fn main() {
    std::process::exit(dockaug::cli::main_with_args(std::env::args_os()));
}
