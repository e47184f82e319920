fn main() {
    std::process::exit(l2dens::cli::run_cli(std::env::args_os()));
}
