fn main() {
    std::process::exit(sfe::cli::run(std::env::args_os()));
}
