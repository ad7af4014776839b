use clap::Parser;

fn main() {
    let cli = voltlift::cli::Cli::parse();
    std::process::exit(voltlift::cli::run(&cli));
}
