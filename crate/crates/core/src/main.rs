fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DISRUPTR_LOG", "warn")).init();
    std::process::exit(disruptr::cli::run(std::env::args().collect()));
}
