use clap::Parser;
use kdepth_cli::{run, Cli, EXIT_OK, EXIT_REJECT};

fn main() {
    // Clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let code = match run(&cli) {
        Ok((config, outcome)) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            match outcome.reject {
                Some(true) if config.exit_on_reject => EXIT_REJECT,
                _ => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("kdepth: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
