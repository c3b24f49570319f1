fn main() {
    std::process::exit(msdoas::cli::main());
}
