fn main() {
    std::process::exit(rlfbm::experiments::cli::cli_main(std::env::args_os()));
}
