fn main() {
    std::process::exit(simplicial_cli::run(std::env::args_os()));
}
