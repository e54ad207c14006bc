fn main() {
    if let Err(e) = trustgame::cli::run_from_env() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
