fn main() {
    std::process::exit(hofem::cli::main());
}
