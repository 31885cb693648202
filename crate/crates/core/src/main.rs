fn main() {
    std::process::exit(motionseg::cli::run(std::env::args_os()));
}
