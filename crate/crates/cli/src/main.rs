//! `fracvar`: batch front-end for operator evaluations, Euler-Lagrange
//! residuals, direct-method solves and weak-convergence studies.
//!
//! Exit status: 0 success, 2 malformed flags/config/input, 3 numeric
//! parameters outside a module's domain, 4 solver did not converge (the
//! artifacts are still written), 1 anything else. Failures print one JSON
//! object `{"error": {"code", "kind", "message"}}` on stderr.

mod args;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracvar::FracError;

use args::{empty_command, read_config, Cli};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self { code: 2, kind: "config", message }
    }

    pub fn not_converged(message: String) -> Self {
        Self { code: 4, kind: "non-convergence", message }
    }

    fn to_json(&self) -> String {
        serde_json::json!({ "error": { "code": self.code, "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl From<FracError> for CliError {
    fn from(e: FracError) -> Self {
        let (code, kind) = match &e {
            e if e.is_domain_error() => (3, "domain"),
            FracError::Parse(_) | FracError::Json(_) | FracError::Csv(_) | FracError::UnknownLagrangian(_) => (2, "config"),
            _ => (1, "io"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::config(e.to_string().trim_end().to_string())),
    };
    match dispatch(cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.code)
}

fn dispatch(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (config_command, config) = match &cli.config {
        Some(path) => read_config(path)?,
        None => (None, Default::default()),
    };
    let command = match (cli.command, config_command) {
        (Some(c), Some(named)) if c.name() != named => {
            return Err(CliError::config(format!("command '{}' given, but the config file names '{named}'", c.name())));
        }
        (Some(c), _) => c,
        (None, Some(named)) => empty_command(&named)?,
        (None, None) => return Err(CliError::config("no command given (deriv, residual, solve, prop-check, theorem-check)".into())),
    };
    let out = cli.out.unwrap_or_else(|| PathBuf::from("."));
    run::run(command, config, &out)
}
