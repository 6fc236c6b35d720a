//! The full equation u''' - A^3 u + A_1 u'' + A_2 u' + A_3 u = f with the
//! same boundary conditions as the principal problem.
//!
//! Writing the lower-order part as P1 and the principal part as P0, the
//! substitution v = P0 u turns the equation into v + P1 P0^{-1} v = f,
//! solved by the outer fixed point v <- f - P1 P0^{-1} v. It contracts
//! whenever the aggregate bound alpha(kappa) built from the solvability
//! constants and the factor norms stays below 1.

use serde::Serialize;

use crate::analyzer;
use crate::boundary::BoundaryOperator;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::operator::{Operator, ScaleIndex};
use crate::principal::{
    solve_principal_with, CorrectionContext, PrincipalProblem, PrincipalSolution, TransformPlan,
};
use crate::space::{differentiate, GridFunction, GridSpec, W23Element};

/// Default cap on outer fixed-point iterations.
pub const DEFAULT_ITERATION_CAP: usize = 500;

/// Lower-order coefficients given as relative factors: the coefficient of
/// u^(3-j) is `b_j * A^j`, so boundedness of the factors is what the
/// solvability condition consumes.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub b1: Matrix,
    pub b2: Matrix,
    pub b3: Matrix,
}

impl Perturbation {
    pub fn zero(dim: usize) -> Self {
        Perturbation { b1: Matrix::zeros(dim), b2: Matrix::zeros(dim), b3: Matrix::zeros(dim) }
    }

    pub fn new(b1: Matrix, b2: Matrix, b3: Matrix) -> Result<Self> {
        if b1.dim() != b2.dim() || b1.dim() != b3.dim() {
            return Err(Error::DimensionMismatch {
                context: "perturbation factors must share one dimension".into(),
            });
        }
        Ok(Perturbation { b1, b2, b3 })
    }

    pub fn dim(&self) -> usize {
        self.b1.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.b1.is_zero() && self.b2.is_zero() && self.b3.is_zero()
    }

    /// Spectral norms (|b1|, |b2|, |b3|).
    pub fn factor_norms(&self) -> [f64; 3] {
        [self.b1.spectral_norm(), self.b2.spectral_norm(), self.b3.spectral_norm()]
    }

    /// P1 u = b1 A u'' + b2 A^2 u' + b3 A^3 u sampled on the grid.
    pub fn apply(&self, a: &Operator, u: &W23Element) -> GridFunction {
        let s1 = ScaleIndex::new(1.0).expect("valid");
        let s2 = ScaleIndex::new(2.0).expect("valid");
        let grid = u.grid();
        let values = (0..grid.n_samples)
            .map(|j| {
                let t1 = crate::boundary::mat_mul_hvec(&self.b1, &a.apply_power(s1, &u.d2.values[j]));
                let t2 = crate::boundary::mat_mul_hvec(&self.b2, &a.apply_power(s2, &u.d1.values[j]));
                let t3 = crate::boundary::mat_mul_hvec(&self.b3, &u.a3u.values[j]);
                t1.add(&t2).add(&t3)
            })
            .collect();
        GridFunction::new(grid, values)
    }
}

/// The full perturbed problem.
#[derive(Debug, Clone)]
pub struct FullProblem {
    pub a: Operator,
    pub k: BoundaryOperator,
    pub perturbation: Perturbation,
    pub f: GridFunction,
    pub grid: GridSpec,
    pub tol: f64,
    pub iteration_cap: usize,
}

impl FullProblem {
    pub fn new(
        a: Operator,
        k: BoundaryOperator,
        perturbation: Perturbation,
        f: GridFunction,
        tol: f64,
    ) -> Result<Self> {
        if perturbation.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "perturbation dimension {} vs operator dimension {}",
                    perturbation.dim(),
                    a.dim()
                ),
            });
        }
        if f.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                context: format!("rhs dimension {} vs operator dimension {}", f.dim(), a.dim()),
            });
        }
        let grid = f.grid;
        Ok(FullProblem {
            a,
            k,
            perturbation,
            f,
            grid,
            tol,
            iteration_cap: DEFAULT_ITERATION_CAP,
        })
    }
}

/// Outer-iteration record serialized into solve reports.
#[derive(Debug, Clone, Serialize)]
pub struct IterationStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub contraction_ratios: Vec<f64>,
}

/// Certified output of the full solve.
#[derive(Debug)]
pub struct FullSolution {
    pub u: W23Element,
    pub stats: IterationStats,
    /// Certification numbers of the last inner principal solve.
    pub principal: PrincipalSolution,
    /// Full-equation residual |u''' - A^3 u + P1 u - f|, finite-difference
    /// route, and its allowance (10x the iteration tolerance).
    pub residual: f64,
    pub residual_allowed: f64,
    /// Estimated boundary norm and contraction bound used for the gate.
    pub kappa: f64,
    pub alpha: f64,
}

/// Solve the full problem. Refuses when the contraction bound alpha is not
/// certified below 1 unless `force` is set; a forced run still reports the
/// observed ratios so the caller can see whether it contracted anyway.
pub fn solve_full(p: &FullProblem, force: bool) -> Result<FullSolution> {
    let ctx = CorrectionContext::new(&p.a, &p.k, &p.grid)?;
    let plan = TransformPlan::new(&p.grid);
    let kappa = ctx.kappa();
    let b_norms = p.perturbation.factor_norms();
    let alpha = analyzer::contraction_bound(kappa, b_norms)?;
    if alpha >= 1.0 && !force {
        return Err(Error::NotCertified { alpha });
    }

    let f_norm = p.f.l2_norm();
    let stop = p.tol * f_norm;
    // the iteration may be asked to converge below the per-solve
    // finite-difference certification floor; intermediate solves certify
    // at the default tolerance and the final output is gated strictly
    // against the requested one below
    let inner_tol = p.tol.max(1e-6);
    let mut v = p.f.clone();
    let mut prev_delta = f64::INFINITY;
    let mut ratios = Vec::new();
    let mut rising = 0usize;
    let mut final_delta = 0.0;
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        if iterations > p.iteration_cap {
            return Err(Error::IterationCapExceeded { cap: p.iteration_cap, last_update: final_delta });
        }
        let inner = PrincipalProblem {
            a: p.a.clone(),
            k: p.k.clone(),
            f: v.clone(),
            grid: p.grid,
            tol: inner_tol,
        };
        let sol = solve_principal_with(&inner, &ctx, &plan)?;
        let p1u = p.perturbation.apply(&p.a, &sol.u);
        let v_next = p.f.sub(&p1u);
        let delta = v_next.sub(&v).l2_norm();
        final_delta = delta;
        if prev_delta.is_finite() && prev_delta > 0.0 {
            let ratio = delta / prev_delta;
            ratios.push(ratio);
            if ratio >= 1.0 {
                rising += 1;
                if rising >= 5 {
                    return Err(Error::NotContracting { ratio, consecutive: rising });
                }
            } else {
                rising = 0;
            }
        }
        prev_delta = delta;
        v = v_next;
        if delta <= stop {
            break;
        }
    }

    // final pass: u = P0^{-1} v for the converged v
    let inner = PrincipalProblem {
        a: p.a.clone(),
        k: p.k.clone(),
        f: v.clone(),
        grid: p.grid,
        tol: inner_tol,
    };
    let principal = solve_principal_with(&inner, &ctx, &plan)?;
    let u = principal.u.clone();

    // strict gates on the requested tolerance: both boundary limits and
    // the full-equation residual through the independent derivative route
    if principal.boundary_value_norm > p.tol {
        return Err(Error::BoundaryConditionViolated {
            which: "u(0) = 0",
            achieved: principal.boundary_value_norm,
            allowed: p.tol,
        });
    }
    if principal.boundary_slope_mismatch > p.tol {
        return Err(Error::BoundaryConditionViolated {
            which: "u'(0) = K u",
            achieved: principal.boundary_slope_mismatch,
            allowed: p.tol,
        });
    }
    let fd3 = differentiate(&u.u, 3);
    let p1u = p.perturbation.apply(&p.a, &u);
    let residual = fd3.sub(&u.a3u).add(&p1u).sub(&p.f).l2_norm();
    let residual_allowed = 10.0 * p.tol * f_norm;
    if residual > residual_allowed {
        return Err(Error::ResidualExceeded { achieved: residual, allowed: residual_allowed });
    }

    Ok(FullSolution {
        u,
        stats: IterationStats {
            iterations,
            final_residual: final_delta,
            contraction_ratios: ratios,
        },
        principal,
        residual,
        residual_allowed,
        kappa,
        alpha,
    })
}
