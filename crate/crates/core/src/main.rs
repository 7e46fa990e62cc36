fn main() {
    std::process::exit(privcov::cli::run());
}
