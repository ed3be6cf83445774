fn main() {
    std::process::exit(isvrg_cli::cli_main());
}
