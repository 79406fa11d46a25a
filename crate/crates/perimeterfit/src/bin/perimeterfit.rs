fn main() {
    std::process::exit(perimeterfit::cli::run(std::env::args_os()));
}
