fn main() {
    std::process::exit(bernstein::cli::run(std::env::args_os()));
}
