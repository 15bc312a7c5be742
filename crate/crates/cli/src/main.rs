fn main() {
    std::process::exit(crossner_cli::run(std::env::args_os()));
}
