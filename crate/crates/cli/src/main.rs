use clap::Parser;

fn main() {
    let cli = refit::Cli::parse();
    if let Err(error) = refit::run(cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
