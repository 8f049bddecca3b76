fn main() {
    std::process::exit(sensing_xlab::cli::main_with_args(std::env::args_os()));
}
