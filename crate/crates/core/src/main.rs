fn main() {
    std::process::exit(hoc::cli::run());
}
