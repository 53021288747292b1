fn main() {
    std::process::exit(affine_riccati::cli::run());
}
