fn main() {
    std::process::exit(locdep::cli::main_with_args(std::env::args_os()));
}
