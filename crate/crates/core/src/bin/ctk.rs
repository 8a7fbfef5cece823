fn main() {
    std::process::exit(ctk::cli::run(std::env::args_os()));
}
