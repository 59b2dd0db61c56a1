use clap::Parser;

fn main() {
    let cli = gcs_cli::commands::Cli::parse();
    std::process::exit(gcs_cli::commands::run(&cli));
}
