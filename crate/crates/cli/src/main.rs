fn main() {
    std::process::exit(kcoddp_cli::commands::cli_dispatch(std::env::args()));
}
