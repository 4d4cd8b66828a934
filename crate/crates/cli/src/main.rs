fn main() {
    std::process::exit(sfcgan_cli::run(std::env::args_os()));
}
