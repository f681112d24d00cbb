fn main() {
    std::process::exit(zsl::cli::run(std::env::args_os()));
}
