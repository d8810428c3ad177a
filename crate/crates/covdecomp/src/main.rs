fn main() {
    std::process::exit(covdecomp::cli::run(std::env::args()));
}
