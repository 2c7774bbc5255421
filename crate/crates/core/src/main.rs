fn main() {
    std::process::exit(mbl::cli::run(std::env::args_os()));
}
