fn main() {
    std::process::exit(onebit_cli::run(std::env::args_os()));
}
