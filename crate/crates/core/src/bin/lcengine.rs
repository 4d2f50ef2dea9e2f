fn main() {
    std::process::exit(lcengine::cli::main());
}
