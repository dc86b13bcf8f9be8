fn main() {
    std::process::exit(qgas::runner::cli_main(std::env::args()));
}
