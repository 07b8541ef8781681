fn main() {
    std::process::exit(softcoord::cli::run(std::env::args_os()));
}
