use clap::Parser;

fn main() {
    let cli = biatt::cli::Cli::parse();
    if let Err(e) = biatt::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
