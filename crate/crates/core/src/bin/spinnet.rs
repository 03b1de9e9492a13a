fn main() {
    std::process::exit(spinnet::cli::main_with_args(std::env::args_os()));
}
