fn main() {
    std::process::exit(qprior::harness::run());
}
