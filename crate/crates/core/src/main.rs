fn main() {
    std::process::exit(mmdse::cli::run(std::env::args_os()));
}
