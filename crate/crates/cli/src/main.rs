use clap::Parser;

fn main() {
    let cli = centralizer::Cli::parse();
    std::process::exit(centralizer::run(&cli));
}
