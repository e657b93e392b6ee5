fn main() {
    std::process::exit(rsskit::cli::main_with_std());
}
