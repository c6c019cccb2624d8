fn main() {
    std::process::exit(wtx_cli::run(std::env::args_os()));
}
