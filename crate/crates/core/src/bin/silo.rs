fn main() {
    std::process::exit(silo::harness::cli_main(std::env::args_os()));
}
