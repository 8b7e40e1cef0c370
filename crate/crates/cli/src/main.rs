fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DPWKIT_LOG", "warn")).init();
    std::process::exit(dpwkit_cli::run(std::env::args_os()));
}
