//! Spectral calculus for the self-adjoint positive-definite operator that
//! generates the Hilbert scale: fractional powers, decaying complex
//! exponential actions, and the damped oscillation kernel.
//!
//! All actions are computed in the cached eigenbasis; that is the definition
//! of the scale, not an approximation choice.

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{jacobi_eigen, Matrix};

/// Relative tolerance for accepting an input matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative eigendecomposition reconstruction error guaranteed at construction.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Element of the state space: coordinates in the standard basis.
///
/// Coordinates are complex internally; user-facing constructors take real
/// data and public solver outputs strip certified-small imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct HVector {
    pub coords: Vec<Complex64>,
}

impl HVector {
    pub fn zeros(dim: usize) -> Self {
        HVector { coords: vec![Complex64::new(0.0, 0.0); dim] }
    }

    pub fn from_real(coords: &[f64]) -> Self {
        HVector { coords: coords.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn from_complex(coords: Vec<Complex64>) -> Self {
        HVector { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Plain Euclidean norm (the H-norm of the standard basis coordinates).
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.re).collect()
    }

    pub fn imag_magnitude(&self) -> f64 {
        self.coords.iter().map(|c| c.im * c.im).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &HVector) -> HVector {
        assert_eq!(self.dim(), other.dim());
        HVector {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &HVector) -> HVector {
        assert_eq!(self.dim(), other.dim());
        HVector {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> HVector {
        HVector { coords: self.coords.iter().map(|a| a * s).collect() }
    }

    pub fn conj(&self) -> HVector {
        HVector { coords: self.coords.iter().map(|a| a.conj()).collect() }
    }
}

/// Exponent of the Hilbert scale; non-negative and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleIndex(f64);

impl ScaleIndex {
    pub fn new(gamma: f64) -> Result<Self, Error> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidScaleIndex { gamma });
        }
        Ok(ScaleIndex(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Self-adjoint positive-definite operator with cached eigendecomposition.
///
/// Immutable after construction; all operations are pure and the type is
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct Operator {
    dim: usize,
    matrix: Matrix,
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    eigenvectors: Matrix,
    mu0: f64,
}

impl Operator {
    /// Validate, eigendecompose and cache a symmetric positive-definite matrix.
    pub fn from_matrix(matrix: Matrix) -> Result<Self, Error> {
        let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
        let asym = matrix.max_asymmetry();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { max_asymmetry: asym / scale });
        }
        let (eigenvalues, eigenvectors) = jacobi_eigen(&matrix);
        let mu0 = eigenvalues[0];
        if mu0 <= 0.0 {
            return Err(Error::NotPositiveDefinite { eigenvalue: mu0 });
        }
        debug_assert!({
            let n = matrix.dim();
            let mut err = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let r: f64 = (0..n)
                        .map(|k| eigenvectors[(i, k)] * eigenvalues[k] * eigenvectors[(j, k)])
                        .sum();
                    err = err.max((r - matrix[(i, j)]).abs());
                }
            }
            err <= RECONSTRUCTION_TOL * matrix.frobenius_norm().max(f64::MIN_POSITIVE)
        });
        Ok(Operator { dim: matrix.dim(), matrix, eigenvalues, eigenvectors, mu0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue; the lower bound of the spectrum.
    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    /// Entry of the orthonormal eigenvector matrix (eigenvectors as columns).
    pub fn eigenvectors_entry(&self, row: usize, col: usize) -> f64 {
        self.eigenvectors[(row, col)]
    }

    /// Coordinates of `x` in the eigenbasis.
    pub fn to_eigen(&self, x: &HVector) -> Vec<Complex64> {
        assert_eq!(x.dim(), self.dim, "vector dimension must match the operator");
        let n = self.dim;
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| self.eigenvectors[(i, k)] * x.coords[i])
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Reassemble a vector from eigenbasis coordinates.
    pub fn from_eigen(&self, coeffs: &[Complex64]) -> HVector {
        let n = self.dim;
        assert_eq!(coeffs.len(), n);
        let coords = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| self.eigenvectors[(i, k)] * coeffs[k])
                    .sum::<Complex64>()
            })
            .collect();
        HVector { coords }
    }

    /// A^gamma x through the eigendecomposition. gamma = 0 is the identity.
    pub fn apply_power(&self, gamma: ScaleIndex, x: &HVector) -> HVector {
        self.apply_power_raw(gamma.value(), x)
    }

    /// Powers with arbitrary real exponent; negative exponents realize the
    /// inverse (always defined since the spectrum is positive).
    pub(crate) fn apply_power_raw(&self, gamma: f64, x: &HVector) -> HVector {
        if gamma == 0.0 {
            return x.clone();
        }
        let mut coeffs = self.to_eigen(x);
        for (c, &lambda) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= lambda.powf(gamma);
        }
        self.from_eigen(&coeffs)
    }

    pub fn apply_inverse(&self, x: &HVector) -> HVector {
        self.apply_power_raw(-1.0, x)
    }

    /// Norm of the scale space with exponent `gamma`: |A^gamma x|.
    pub fn scale_norm(&self, gamma: ScaleIndex, x: &HVector) -> f64 {
        let g = gamma.value();
        self.to_eigen(x)
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &lambda)| lambda.powf(2.0 * g) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// e^{omega A t} x for Re(omega) <= 0.
    pub fn complex_exp(&self, omega: Complex64, t: f64, x: &HVector) -> Result<HVector, Error> {
        if omega.re > 0.0 {
            return Err(Error::GrowthRejected { re_omega: omega.re });
        }
        let mut coeffs = self.to_eigen(x);
        for (c, &lambda) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= (omega * lambda * t).exp();
        }
        Ok(self.from_eigen(&coeffs))
    }

    /// e^{-alpha A t} sin(beta A t) x; callers compose with `apply_power`
    /// when a leading power of the operator is wanted.
    pub fn damped_sine(&self, alpha: f64, beta: f64, t: f64, x: &HVector) -> HVector {
        assert!(alpha > 0.0, "damping rate must be positive");
        let mut coeffs = self.to_eigen(x);
        for (c, &lambda) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= (-alpha * lambda * t).exp() * (beta * lambda * t).sin();
        }
        self.from_eigen(&coeffs)
    }
}
