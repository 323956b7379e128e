fn main() {
    std::process::exit(csad::cli::main());
}
