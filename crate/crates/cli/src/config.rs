//! Problem file schema (JSON) and conversion into the solver's domain
//! types. All matrices are dense row-major lists of rows; the right-hand
//! side is either a sampled CSV or an exponential-polynomial expression.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use opde3::boundary::BoundaryTerm;
use opde3::expoly::{ExpPoly, ExpPolyTerm};
use opde3::linalg::Matrix;
use opde3::perturbed::Perturbation;
use opde3::{BoundaryOperator, GridFunction, GridSpec, HVector, Operator};

pub const SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B1")]
    pub b1: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B2")]
    pub b2: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B3")]
    pub b3: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K")]
    pub k: Option<Vec<BoundaryTermSpec>>,
    pub kappa_cert: Option<f64>,
    pub f: Option<RhsSpec>,
    pub grid: Option<GridOverride>,
    pub tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryTermSpec {
    pub c: Vec<Vec<f64>>,
    pub d: usize,
    pub t: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsSpec {
    Samples { path: PathBuf },
    Expr { kind: ExprKind, terms: Vec<ExpPolyTermSpec> },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExprKind {
    ExpPoly,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpPolyTermSpec {
    pub coeff_vector: Vec<f64>,
    pub rate: f64,
    pub power: u32,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    #[serde(rename = "T")]
    pub t_max: Option<f64>,
    #[serde(rename = "N")]
    pub n_samples: Option<usize>,
    pub pad_factor: Option<usize>,
}

/// Fully constructed problem ready for the solver pipeline.
pub struct LoadedProblem {
    pub a: Operator,
    pub k: BoundaryOperator,
    pub perturbation: Perturbation,
    pub grid: GridSpec,
    pub tol: f64,
    pub f: Option<GridFunction>,
    /// Set when the right-hand side came from an expression, so oracle
    /// norms stay exactly integrable.
    pub f_expr: Option<ExpPoly>,
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let spec: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| format!("{} is not a valid problem file: {e}", path.display()))?;
    build_problem(spec, path.parent().unwrap_or_else(|| Path::new(".")))
}

pub fn build_problem(spec: ProblemFile, base_dir: &Path) -> Result<LoadedProblem, String> {
    if spec.version != SUPPORTED_VERSION {
        return Err(format!(
            "unsupported problem file version {} (expected {SUPPORTED_VERSION})",
            spec.version
        ));
    }
    let n = spec.n;
    if n == 0 {
        return Err("dimension n must be positive".into());
    }
    let a_matrix = matrix_from(&spec.a, n, "A")?;
    let a = Operator::from_matrix(a_matrix).map_err(|e| format!("operator A: {e}"))?;

    let build_b = |name: &str, m: &Option<Vec<Vec<f64>>>| -> Result<Matrix, String> {
        match m {
            Some(rows) => matrix_from(rows, n, name),
            None => Ok(Matrix::zeros(n)),
        }
    };
    let perturbation = Perturbation::new(
        build_b("B1", &spec.b1)?,
        build_b("B2", &spec.b2)?,
        build_b("B3", &spec.b3)?,
    )
    .map_err(|e| e.to_string())?;

    let mut terms = Vec::new();
    for (idx, t) in spec.k.iter().flatten().enumerate() {
        let weight = matrix_from(&t.c, n, &format!("K[{idx}].c"))?;
        let term = BoundaryTerm::new(weight, t.d, t.t)
            .map_err(|e| format!("K[{idx}]: {e}"))?;
        terms.push(term);
    }
    let k = match spec.kappa_cert {
        Some(cert) => {
            if !(cert >= 0.0 && cert.is_finite()) {
                return Err(format!("kappa_cert must be a finite non-negative real, got {cert}"));
            }
            BoundaryOperator::with_cert(terms, cert)
        }
        None => BoundaryOperator::new(terms),
    };

    let defaults = GridSpec::default_for(&a);
    let over = spec.grid.unwrap_or_default();

    // a sampled rhs pins T and N from its own time column
    let (f, f_expr, grid) = match spec.f {
        None => {
            let grid = grid_from(&over, defaults)?;
            (None, None, grid)
        }
        Some(RhsSpec::Expr { kind: ExprKind::ExpPoly, terms }) => {
            let grid = grid_from(&over, defaults)?;
            if terms.is_empty() {
                return Err("expression rhs needs at least one term".into());
            }
            for (i, t) in terms.iter().enumerate() {
                if t.coeff_vector.len() != n {
                    return Err(format!(
                        "f.terms[{i}].coeff_vector has length {}, expected {n}",
                        t.coeff_vector.len()
                    ));
                }
                if !(t.rate > 0.0) {
                    return Err(format!(
                        "f.terms[{i}].rate must be positive for decay, got {}",
                        t.rate
                    ));
                }
            }
            let expr = ExpPoly::new(
                terms
                    .into_iter()
                    .map(|t| ExpPolyTerm { coeff: t.coeff_vector, rate: t.rate, power: t.power })
                    .collect(),
            );
            (Some(expr.sample(grid)), Some(expr), grid)
        }
        Some(RhsSpec::Samples { path }) => {
            let full = if path.is_absolute() { path } else { base_dir.join(path) };
            let (times, rows) = read_samples_csv(&full, n)?;
            let n_samples = times.len();
            let t_max = *times.last().unwrap();
            let grid = GridSpec::new(t_max, n_samples, over.pad_factor.unwrap_or(2))
                .map_err(|e| format!("sampled rhs grid: {e}"))?;
            let dt = grid.dt();
            for (j, &t) in times.iter().enumerate() {
                if (t - dt * j as f64).abs() > 1e-9 * t_max.max(1.0) {
                    return Err(format!(
                        "sampled rhs is not on a uniform grid at row {j} (t = {t})"
                    ));
                }
            }
            if let Some(t_over) = over.t_max {
                if (t_over - t_max).abs() > 1e-9 * t_max.max(1.0) {
                    return Err(format!(
                        "grid.T = {t_over} conflicts with the sampled rhs (T = {t_max})"
                    ));
                }
            }
            if let Some(n_over) = over.n_samples {
                if n_over != n_samples {
                    return Err(format!(
                        "grid.N = {n_over} conflicts with the sampled rhs (N = {n_samples})"
                    ));
                }
            }
            let values = rows.into_iter().map(|r| HVector::from_real(&r)).collect();
            (Some(GridFunction::new(grid, values)), None, grid)
        }
    };

    let tol = spec.tol.unwrap_or(1e-6);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(format!("tol must be a positive real, got {tol}"));
    }

    Ok(LoadedProblem { a, k, perturbation, grid, tol, f, f_expr })
}

fn grid_from(over: &GridOverride, defaults: GridSpec) -> Result<GridSpec, String> {
    GridSpec::new(
        over.t_max.unwrap_or(defaults.t_max),
        over.n_samples.unwrap_or(defaults.n_samples),
        over.pad_factor.unwrap_or(defaults.pad_factor),
    )
    .map_err(|e| e.to_string())
}

fn matrix_from(rows: &[Vec<f64>], n: usize, name: &str) -> Result<Matrix, String> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{name} must be an {n}x{n} matrix"));
    }
    Matrix::from_rows(rows).map_err(|e| format!("{name}: {e}"))
}

/// Read a `t,re_u1..re_un` CSV produced by the solver (or compatible).
pub fn read_samples_csv(path: &Path, n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read samples {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("samples file is empty")?;
    let expected: String = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("re_u{i}")))
        .collect::<Vec<_>>()
        .join(",");
    if header.trim() != expected {
        return Err(format!(
            "unexpected samples header `{}` (expected `{expected}`)",
            header.trim()
        ));
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(format!("row {}: expected {} fields", lineno + 2, n + 1));
        }
        let parse = |s: &str| -> Result<f64, String> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("row {}: bad number `{s}`: {e}", lineno + 2))
        };
        times.push(parse(fields[0])?);
        rows.push(fields[1..].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?);
    }
    if times.len() < 2 {
        return Err("samples file needs at least two rows".into());
    }
    Ok((times, rows))
}
