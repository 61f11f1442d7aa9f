fn main() {
    std::process::exit(parasphere::cli::main());
}
