use clap::Parser;
use tpsim_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = cli.resolve_config().and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(report) => print!("{report}"),
        Err(e) => {
            eprintln!("tpsim: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
