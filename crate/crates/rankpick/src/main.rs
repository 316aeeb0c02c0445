fn main() {
    std::process::exit(rankpick::cli::run_main());
}
