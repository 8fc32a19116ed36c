//! Command-line flags and their JSON config mirror.
//!
//! Every subcommand's flags are optional at the clap level. A config file
//! supplies the same keys (long flag names, e.g. `"max-iter"`, `"N"`); flags
//! given on the command line win. The merged object is then deserialized
//! into a strict parameter struct, so a missing required value is reported
//! the same way whether it came from flags or from the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fracvar::MemoryWindow;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "FRACVAR_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fracvar", version, about = "Fractional variational calculus on uniform grids")]
pub struct Cli {
    /// JSON file with the same keys as the long flags, plus `command`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory [default: current directory].
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fractional derivative of a sampled function; writes derivative.csv.
    Deriv(DerivArgs),
    /// Euler-Lagrange residual of a candidate; writes residual.json.
    Residual(ResidualArgs),
    /// Direct-method solve; writes result.json and solution.csv.
    Solve(SolveArgs),
    /// Weak convergence of the expansion of the right RL derivative; writes convergence.csv.
    PropCheck(PropCheckArgs),
    /// Weak convergence of the truncated Euler-Lagrange equation; writes convergence.csv.
    TheoremCheck(TheoremCheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Deriv(_) => "deriv",
            Command::Residual(_) => "residual",
            Command::Solve(_) => "solve",
            Command::PropCheck(_) => "prop-check",
            Command::TheoremCheck(_) => "theorem-check",
        }
    }
}

/// `a,A,B,b` on the command line, `{"a": .., "A": .., "B": .., "b": ..}` in JSON.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowArg(pub MemoryWindow);

impl std::str::FromStr for WindowArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [a, aa, bb, b] => MemoryWindow::new(a, aa, bb, b).map(WindowArg).map_err(|e| e.to_string()),
            _ => Err(format!("expected four comma-separated values a,A,B,b, got {}", v.len())),
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DerivArgs {
    /// CSV with header `t,u` on a uniform grid.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// left | right
    #[arg(long)]
    pub side: Option<String>,
    /// rl | caputo | riesz-caputo
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DerivParams {
    pub input: PathBuf,
    pub alpha: f64,
    #[serde(default = "default_side")]
    pub side: String,
    #[serde(default = "default_kind")]
    pub kind: String,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ResidualArgs {
    /// CSV candidate `t,u`; not used by `approx-N`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub lagrangian: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// rl | corrected | action | approx-N
    #[arg(long)]
    pub formulation: Option<String>,
    /// Derivative kind for `p`; defaults to the Lagrangian's own.
    #[arg(long)]
    pub kind: Option<String>,
    /// Memory window `a,A,B,b` for `action`; defaults to the input's span.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<WindowArg>,
    /// Polynomial candidate (ascending coefficients) for `approx-N`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u_poly: Option<Vec<f64>>,
    /// Grid intervals for `approx-N` on [0, 1].
    #[arg(long)]
    pub n: Option<usize>,
    /// Fraction of nodes masked at each end.
    #[arg(long)]
    pub mask: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ResidualParams {
    pub input: Option<PathBuf>,
    pub lagrangian: String,
    pub alpha: f64,
    #[serde(default = "default_formulation")]
    pub formulation: String,
    pub kind: Option<String>,
    pub window: Option<WindowArg>,
    pub u_poly: Option<Vec<f64>>,
    #[serde(default = "default_study_n")]
    pub n: usize,
    #[serde(default = "default_mask")]
    pub mask: f64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
#[command(allow_negative_numbers = true)]
pub struct SolveArgs {
    #[arg(long)]
    pub lagrangian: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Grid intervals on [a, B].
    #[arg(long)]
    pub n: Option<usize>,
    /// Pinned value u(a).
    #[arg(long)]
    pub left: Option<f64>,
    /// Pinned value u(B); free when omitted.
    #[arg(long)]
    pub right: Option<f64>,
    /// Memory window `a,A,B,b`; defaults to 0,0,1,1.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<WindowArg>,
    #[arg(long)]
    pub kind: Option<String>,
    /// Initial guess as `t,u` CSV on the problem grid.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub gtol: Option<f64>,
    #[arg(long)]
    pub mask: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolveParams {
    pub lagrangian: String,
    pub alpha: f64,
    pub n: usize,
    pub left: f64,
    pub right: Option<f64>,
    pub window: Option<WindowArg>,
    pub kind: Option<String>,
    pub initial: Option<PathBuf>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub gtol: Option<f64>,
    #[serde(default = "default_mask")]
    pub mask: f64,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PropCheckArgs {
    /// F as ascending polynomial coefficients, e.g. `1,-4,6,-4,1` for (1-t)^4.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f_poly: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Expansion orders to study.
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Monomial test functions t^k; defaults to the witness family.
    #[arg(long, value_delimiter = ',')]
    pub phi_degrees: Option<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PropCheckParams {
    pub f_poly: Vec<f64>,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_study_n")]
    pub n: usize,
    pub phi_degrees: Option<Vec<u32>>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TheoremCheckArgs {
    #[arg(long)]
    pub lagrangian: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Candidate u as ascending polynomial coefficients [default: 1].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u_poly: Option<Vec<f64>>,
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub phi_degrees: Option<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TheoremCheckParams {
    pub lagrangian: String,
    pub alpha: f64,
    #[serde(default = "default_u_poly")]
    pub u_poly: Vec<f64>,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_study_n")]
    pub n: usize,
    pub phi_degrees: Option<Vec<u32>>,
}

fn default_side() -> String {
    "left".into()
}

fn default_kind() -> String {
    "rl".into()
}

fn default_formulation() -> String {
    "corrected".into()
}

fn default_study_n() -> usize {
    fracvar::weak::DEFAULT_STUDY_N
}

fn default_mask() -> f64 {
    fracvar::EndpointMask::default().fraction
}

fn default_max_iter() -> usize {
    fracvar::solver::SolveOptions::default().max_iter
}

fn default_u_poly() -> Vec<f64> {
    vec![1.0]
}

/// Overlays the flags that were given on the config object and parses the
/// result into the strict parameter type.
pub fn merge<A: Serialize, P: DeserializeOwned>(flags: &A, mut config: Map<String, Value>) -> Result<P, CliError> {
    let Value::Object(given) = serde_json::to_value(flags).expect("flags serialize") else {
        unreachable!("flag structs serialize as objects")
    };
    for (k, v) in given {
        if !v.is_null() {
            config.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(config)).map_err(|e| CliError::config(format!("parameters: {e}")))
}

/// Reads a config file into its `command` (if any) and remaining keys.
pub fn read_config(path: &std::path::Path) -> Result<(Option<String>, Map<String, Value>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::config(format!("config {}: expected a JSON object", path.display())));
    };
    let command = match map.remove("command") {
        None => None,
        Some(Value::String(s)) => Some(s),
        Some(other) => return Err(CliError::config(format!("config: `command` must be a string, got {other}"))),
    };
    Ok((command, map))
}

/// An empty flag set for a command named only in the config file.
pub fn empty_command(name: &str) -> Result<Command, CliError> {
    let cli = Cli::try_parse_from(["fracvar", name]).map_err(|_| CliError::config(format!("config: unknown command '{name}'")))?;
    cli.command.ok_or_else(|| CliError::config("config: no command".into()))
}
