fn main() {
    std::process::exit(magnet::cli::run(std::env::args_os()));
}
