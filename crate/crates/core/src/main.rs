use hgmt::cli::{self, CliError};

fn main() {
    if let Err(e) = cli::run(std::env::args_os()) {
        match e {
            CliError::Usage(e) => e.exit(),
            other => {
                eprintln!("{other}");
                std::process::exit(other.exit_code());
            }
        }
    }
}
