fn main() {
    std::process::exit(woldkit_cli::run(std::env::args_os()));
}
