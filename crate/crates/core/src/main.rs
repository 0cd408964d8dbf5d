fn main() {
    std::process::exit(spencer_core::cli::run(std::env::args_os()));
}
