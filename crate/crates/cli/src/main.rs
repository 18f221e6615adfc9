fn main() {
    std::process::exit(flimdeconv_cli::run(std::env::args_os()));
}
