use std::path::{Path, PathBuf};

use fracvar::euler_lagrange::{residual_approx_n_with, residual_corrected_with, residual_generalized_with, residual_rl_with, ElOptions, Formulation};
use fracvar::expansion::SmoothFunctionModel;
use fracvar::lagrangian::builtin;
use fracvar::operators::derivative;
use fracvar::solver::{solve_direct, Boundary, ProblemConfig, SolveOptions};
use fracvar::weak::{proposition_check, theorem_check, write_records, ConvergenceRecord, TestFunction};
use fracvar::{DerivativeKind, EndpointMask, FractionalOrder, GridFunction, GridShape, MemoryWindow, Side};
use serde_json::{Map, Value};

use crate::args::{merge, Command, DerivParams, PropCheckParams, ResidualParams, SolveParams, TheoremCheckParams};
use crate::CliError;

/// Analyticity window declared for polynomial inputs on [0, 1].
const POLY_WINDOW: (f64, f64) = (-1.5, 2.5);

pub fn run(command: Command, config: Map<String, Value>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Deriv(flags) => deriv(merge(&flags, config)?, out),
        Command::Residual(flags) => residual(merge(&flags, config)?, out),
        Command::Solve(flags) => solve(merge(&flags, config)?, out),
        Command::PropCheck(flags) => prop_check(merge(&flags, config)?, out),
        Command::TheoremCheck(flags) => theorem_check_cmd(merge(&flags, config)?, out),
    }
}

fn parse<T: std::str::FromStr<Err = fracvar::FracError>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(CliError::from)
}

fn input_path(path: &Path) -> Result<PathBuf, CliError> {
    path.canonicalize().map_err(|e| CliError::config(format!("input {}: {e}", path.display())))
}

fn prepare_out(out: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::config(format!("output directory {}: {e}", out.display())))?;
    Ok(out.to_path_buf())
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, CliError> {
    std::fs::write(&path, text).map_err(|e| CliError { code: 1, kind: "io", message: format!("{}: {e}", path.display()) })?;
    Ok(path)
}

fn deriv(p: DerivParams, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let input = input_path(&p.input)?;
    let side: Side = parse(&p.side)?;
    let kind: DerivativeKind = parse(&p.kind)?;
    let order = FractionalOrder::new(p.alpha)?;
    let out = prepare_out(out)?;
    let u = GridFunction::load_csv(input)?;
    let d = derivative(&u, order, kind, side)?;
    Ok(vec![write(out.join("derivative.csv"), &d.to_csv_string())?])
}

fn residual(p: ResidualParams, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let order = FractionalOrder::new(p.alpha)?;
    let formulation: Formulation = parse(&p.formulation)?;
    let entry = builtin(&p.lagrangian, order)?;
    let kind = match &p.kind {
        Some(k) => parse(k)?,
        None => entry.kind,
    };
    let opts = ElOptions { mask: EndpointMask::new(p.mask)?, kind };
    let input = p.input.as_deref().map(input_path).transpose()?;
    let out = prepare_out(out)?;
    let load = || -> Result<GridFunction, CliError> {
        let path = input.as_ref().ok_or_else(|| CliError::config(format!("formulation '{formulation}' needs --input")))?;
        Ok(GridFunction::load_csv(path)?)
    };
    let l = &entry.lagrangian;
    let mut written = Vec::new();
    match formulation {
        Formulation::Rl => written.push(write(out.join("residual.json"), &residual_rl_with(l, &load()?, order, &opts)?.to_json())?),
        Formulation::Corrected => {
            written.push(write(out.join("residual.json"), &residual_corrected_with(l, &load()?, order, &opts)?.to_json())?)
        }
        Formulation::Action => {
            let u = load()?;
            let window = match p.window {
                Some(w) => w.0,
                None => MemoryWindow::classical(u.a(), u.b())?,
            };
            let (action, memory) = residual_generalized_with(l, &u, order, &window, &opts)?;
            written.push(write(out.join("residual.json"), &action.to_json())?);
            if let Some(m) = memory {
                written.push(write(out.join("memory_residual.json"), &m.to_json())?);
            }
        }
        Formulation::Memory => {
            return Err(CliError::config("the memory residual is written alongside --formulation action".into()));
        }
        Formulation::Approx(n_terms) => {
            let coeffs = p.u_poly.ok_or_else(|| CliError::config("approx-N needs --u-poly".into()))?;
            let u = SmoothFunctionModel::polynomial(coeffs, POLY_WINDOW)?;
            let shape = GridShape::new(0.0, 1.0, p.n)?;
            let report = residual_approx_n_with(l, &u, order, n_terms, shape, opts.mask)?;
            written.push(write(out.join("residual.json"), &report.to_json())?);
        }
    }
    Ok(written)
}

fn solve(p: SolveParams, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let config = ProblemConfig {
        lagrangian: p.lagrangian,
        alpha: p.alpha,
        window: p.window.map(|w| w.0),
        kind: p.kind.as_deref().map(parse).transpose()?,
        boundary: Boundary { left: p.left, right: p.right },
        n: p.n,
        optimizer: SolveOptions { gtol: p.gtol, max_iter: p.max_iter, mask: EndpointMask::new(p.mask)?, ..SolveOptions::default() },
    };
    let spec = config.to_spec()?;
    let initial = match &p.initial {
        Some(path) => GridFunction::load_csv(input_path(path)?)?,
        None => spec.default_initial()?,
    };
    let out = prepare_out(out)?;
    let result = solve_direct(&spec, &initial, &config.optimizer)?;
    result.save(&out)?;
    if !result.converged {
        return Err(CliError::not_converged(format!(
            "stopped ({:?}) after {} iterations with gradient sup {:.3e} above {:.3e}; artifacts written to {}",
            result.stop,
            result.iterations,
            result.grad_sup,
            result.gtol,
            out.display()
        )));
    }
    Ok(vec![out.join("result.json"), out.join("solution.csv")])
}

fn test_functions(degrees: Option<Vec<u32>>) -> Vec<TestFunction> {
    match degrees {
        Some(d) => d.into_iter().map(TestFunction::monomial).collect(),
        None => TestFunction::witness_family(),
    }
}

fn write_study(out: &Path, records: &[ConvergenceRecord]) -> Result<Vec<PathBuf>, CliError> {
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    Ok(vec![write(out.join("convergence.csv"), &text)?])
}

fn prop_check(p: PropCheckParams, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let order = FractionalOrder::new(p.alpha)?;
    let big_f = SmoothFunctionModel::polynomial(p.f_poly, POLY_WINDOW)?;
    let shape = GridShape::new(0.0, 1.0, p.n)?;
    let out = prepare_out(out)?;
    let records = proposition_check(&big_f, order, &test_functions(p.phi_degrees), &p.n_list, shape)?;
    write_study(&out, &records)
}

fn theorem_check_cmd(p: TheoremCheckParams, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let order = FractionalOrder::new(p.alpha)?;
    let l = builtin(&p.lagrangian, order)?.lagrangian;
    let u = SmoothFunctionModel::polynomial(p.u_poly, POLY_WINDOW)?;
    let shape = GridShape::new(0.0, 1.0, p.n)?;
    let out = prepare_out(out)?;
    let records = theorem_check(&l, &u, order, &test_functions(p.phi_degrees), &p.n_list, shape)?;
    write_study(&out, &records)
}
