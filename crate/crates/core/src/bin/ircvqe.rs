fn main() {
    std::process::exit(ircvqe::cli::run(std::env::args_os()));
}
