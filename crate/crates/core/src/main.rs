use mimo_pjadmm::cli::{run_cli, CliError};

fn main() {
    match run_cli(std::env::args_os()) {
        Ok(()) => {}
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
