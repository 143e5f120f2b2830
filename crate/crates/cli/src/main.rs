fn main() {
    std::process::exit(modqed_cli::run());
}
