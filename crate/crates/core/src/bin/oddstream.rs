fn main() {
    std::process::exit(oddstream::cli::run());
}
