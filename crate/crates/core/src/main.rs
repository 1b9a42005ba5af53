fn main() {
    std::process::exit(adan::cli::main());
}
