fn main() {
    std::process::exit(herald_sim::cli::run_from_env());
}
