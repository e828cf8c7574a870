fn main() {
    std::process::exit(thinstrip::cli::main_with_args(std::env::args_os()));
}
