use clap::Parser;
use vlc_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
        }
        Err(e) => {
            eprintln!("vlc {}: {}", cli.command.name(), e.to_string().replace('\n', " "));
            std::process::exit(e.exit_code());
        }
    }
}
