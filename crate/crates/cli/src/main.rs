use clap::Parser;

fn main() {
    let cli = ardent_cli::Cli::parse();
    if let Err(e) = ardent_cli::run(cli) {
        eprintln!("ardent: {e}");
        std::process::exit(e.exit_code());
    }
}
