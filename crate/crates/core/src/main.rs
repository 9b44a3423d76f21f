fn main() {
    std::process::exit(genregraph::cli::run(std::env::args_os()));
}
