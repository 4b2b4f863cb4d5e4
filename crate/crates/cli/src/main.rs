fn main() {
    std::process::exit(mixclean_cli::run());
}
