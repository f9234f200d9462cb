fn main() {
    std::process::exit(dpnls::cli::main_with(std::env::args_os()));
}
