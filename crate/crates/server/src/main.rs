use clap::Parser;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    epicontrol_server::cli::run(epicontrol_server::cli::Cli::parse())
}
