//! Deterministic JSON output: every float rendered with 12 significant
//! digits in scientific notation, so identical inputs produce
//! byte-identical reports.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use opde3::analyzer::{CheckResult, SolvabilityReport, Verdict};
use opde3::perturbed::IterationStats;
use opde3::space::fmt_exp;

/// Compact JSON with pinned float formatting.
struct SciFormatter;

impl Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            // 11 digits after the point = 12 significant digits
            writer.write_all(fmt_exp(value, 11).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value.serialize(&mut ser).expect("report serialization cannot fail");
    String::from_utf8(out).expect("serde_json emits utf-8")
}

/// Report written by the solve command.
#[derive(Serialize)]
pub struct SolveReport {
    pub kappa: f64,
    pub alpha: f64,
    pub verdict: Verdict,
    pub forced: bool,
    pub w23_norm: f64,
    pub f_l2_norm: f64,
    /// Exact half-line norm when the rhs was an expression; sampled data
    /// has no closed form and is reported oracle-free.
    pub f_l2_norm_exact: Option<f64>,
    pub residual: f64,
    pub residual_allowed: f64,
    pub boundary_value_norm: f64,
    pub boundary_slope_mismatch: f64,
    pub decay_warning: bool,
    pub iteration_stats: IterationStats,
}

/// Report written by the verify command.
#[derive(Serialize)]
pub struct VerifyReport {
    pub mode: String,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub analysis: Option<SolvabilityReport>,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}
