fn main() {
    std::process::exit(atomexp_cli::app::run(std::env::args_os()));
}
