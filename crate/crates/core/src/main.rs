fn main() {
    std::process::exit(cosmo_rul::runner::cli_main(std::env::args_os()));
}
