use clap::Parser;

fn main() {
    let cli = kdlab::cli::Cli::parse();
    match kdlab::cli::run(&cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
