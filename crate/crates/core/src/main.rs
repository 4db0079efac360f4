fn main() {
    std::process::exit(charfol::cli::main_with_args(std::env::args_os()));
}
