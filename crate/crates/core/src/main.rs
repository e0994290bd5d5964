fn main() {
    std::process::exit(burstlr::cli::main_with_args(std::env::args_os()));
}
