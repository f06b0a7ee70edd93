fn main() {
    std::process::exit(ccinfer::cli::run(std::env::args_os()));
}
