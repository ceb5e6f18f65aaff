fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("WPT_LOG"))
        .format_timestamp(None)
        .init();
    std::process::exit(wpt_energy::cli::run(std::env::args_os()));
}
