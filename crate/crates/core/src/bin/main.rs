fn main() {
    std::process::exit(fhdyn::cli::main_with_args(std::env::args_os()));
}
