fn main() {
    std::process::exit(gtattr::cli::main_with_args(std::env::args_os()));
}
