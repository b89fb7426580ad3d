use clap::Parser;
use mammoseg_cli::{run_batch, serve, Cli, Command};

fn main() {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(args) => match args.validate() {
            Ok(()) => run_batch(args),
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Serve(args) => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            serve(args)
        }
    };
    std::process::exit(code);
}
