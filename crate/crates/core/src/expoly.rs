//! Exponential-polynomial right-hand sides: finite sums of terms
//! `v * t^p * e^{-r t}` with vector coefficients. These stay exactly
//! integrable, which keeps oracle checks closed-form.

use crate::operator::HVector;
use crate::space::{GridFunction, GridSpec};

/// One term `coeff * t^power * e^{-rate * t}`.
#[derive(Debug, Clone)]
pub struct ExpPolyTerm {
    pub coeff: Vec<f64>,
    pub rate: f64,
    pub power: u32,
}

/// Sum of exponential-polynomial terms, all with positive decay rates.
#[derive(Debug, Clone)]
pub struct ExpPoly {
    pub terms: Vec<ExpPolyTerm>,
}

impl ExpPoly {
    pub fn new(terms: Vec<ExpPolyTerm>) -> Self {
        assert!(!terms.is_empty(), "at least one term required");
        let dim = terms[0].coeff.len();
        assert!(terms.iter().all(|t| t.coeff.len() == dim));
        assert!(terms.iter().all(|t| t.rate > 0.0), "rates must be positive for decay");
        ExpPoly { terms }
    }

    pub fn dim(&self) -> usize {
        self.terms[0].coeff.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for term in &self.terms {
            let s = t.powi(term.power as i32) * (-term.rate * t).exp();
            for (o, c) in v.iter_mut().zip(&term.coeff) {
                *o += s * c;
            }
        }
        v
    }

    pub fn sample(&self, grid: GridSpec) -> GridFunction {
        let values = grid.times().map(|t| HVector::from_real(&self.eval(t))).collect();
        GridFunction::new(grid, values)
    }

    /// Exact L2(0, inf) norm via int_0^inf t^m e^{-s t} dt = m! / s^(m+1).
    pub fn l2_norm_exact(&self) -> f64 {
        let mut total = 0.0;
        for a in &self.terms {
            for b in &self.terms {
                let dot: f64 = a.coeff.iter().zip(&b.coeff).map(|(x, y)| x * y).sum();
                if dot == 0.0 {
                    continue;
                }
                let m = a.power + b.power;
                let s = a.rate + b.rate;
                total += dot * factorial(m) / s.powi(m as i32 + 1);
            }
        }
        total.max(0.0).sqrt()
    }
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(|k| k as f64).product()
}
