use clap::Parser;

fn main() {
    let cli = rbmo_lab::Cli::parse();
    std::process::exit(rbmo_lab::run(&cli));
}
