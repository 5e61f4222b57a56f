fn main() {
    std::process::exit(hjbi::cli::run(std::env::args_os()));
}
