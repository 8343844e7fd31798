fn main() {
    std::process::exit(schrscale::cli::run(std::env::args_os()));
}
