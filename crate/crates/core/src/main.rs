use clap::Parser;

fn main() {
    let cli = match bellboot::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(), // usage errors exit 2, --help/--version exit 0
    };
    if let Err(e) = bellboot::cli::execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
