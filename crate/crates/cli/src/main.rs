fn main() {
    std::process::exit(kmr_cli::run(std::env::args_os()));
}
