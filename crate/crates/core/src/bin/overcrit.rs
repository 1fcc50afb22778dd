fn main() {
    std::process::exit(overcrit::experiments::cli_main(std::env::args_os()));
}
