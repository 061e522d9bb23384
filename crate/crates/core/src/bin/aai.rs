fn main() {
    std::process::exit(aai_core::cli::main_from_args(std::env::args_os()));
}
