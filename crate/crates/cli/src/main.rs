fn main() {
    std::process::exit(coalsim_cli::args::execute(std::env::args_os()));
}
