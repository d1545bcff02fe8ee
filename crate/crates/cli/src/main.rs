use clap::Parser;

fn main() -> anyhow::Result<()> {
    pgcn_cli::run(pgcn_cli::Cli::parse())
}
