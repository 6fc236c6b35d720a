//! Shared oracle machinery for solver integration tests. Everything here is
//! independent of the solver path it checks: closed forms come from
//! characteristic roots and undetermined coefficients, norms from exact
//! integrals.
//!
//! Compiled once per test target, so not every helper is used everywhere.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

use opde3::linalg::Matrix;
use opde3::{GridSpec, HVector, Operator};

pub fn scalar_operator(value: f64) -> Operator {
    let mut m = Matrix::zeros(1);
    m[(0, 0)] = value;
    Operator::from_matrix(m).unwrap()
}

/// Random symmetric positive-definite operator with eigenvalues in
/// [lo, hi]: draw a random orthogonal basis by Gram-Schmidt and conjugate
/// a random diagonal.
pub fn random_spd_operator(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Operator {
    let eigs: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
    let basis = random_orthogonal(rng, dim);
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..dim {
                s += basis[(i, k)] * eigs[k] * basis[(j, k)];
            }
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    Operator::from_matrix(m).unwrap()
}

pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
        let mut ok = true;
        for _ in 0..dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
            let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n < 1e-6 {
                ok = false;
                break;
            }
            v.iter_mut().for_each(|a| *a /= n);
            cols.push(v);
        }
        if ok {
            let mut m = Matrix::zeros(dim);
            for (k, c) in cols.iter().enumerate() {
                for i in 0..dim {
                    m[(i, k)] = c[i];
                }
            }
            return m;
        }
    }
}

pub fn random_unit_hvector(rng: &mut impl Rng, dim: usize) -> HVector {
    loop {
        let coords: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = HVector::from_real(&coords);
        if v.norm() > 1e-3 {
            return v.scale(Complex64::new(1.0 / v.norm(), 0.0));
        }
    }
}

/// Closed-form solution of the scalar problem
///   u''' - a^3 u + b3 a^3 u = e^{-r t},  u(0) = 0, u'(0) = 0,
/// via characteristic roots: the particular branch P e^{-r t} with
/// P = 1 / chi(-r), chi(s) = s^3 + (b3 - 1) a^3, plus the two decaying
/// homogeneous modes rho w₁, rho w₂ with rho = ((1 - b3) a^3)^{1/3};
/// coefficients fixed by the two boundary conditions. Requires b3 < 1.
pub struct ScalarOracle {
    p: f64,
    r: f64,
    c: Complex64,
    s1: Complex64,
}

impl ScalarOracle {
    pub fn new(a: f64, b3: f64, r: f64) -> Self {
        assert!(b3 < 1.0, "oracle needs a positive-definite principal part");
        let chi_neg_r = -r * r * r + (b3 - 1.0) * a * a * a;
        assert!(chi_neg_r.abs() > 1e-12);
        let p = 1.0 / chi_neg_r;
        let rho = ((1.0 - b3) * a * a * a).powf(1.0 / 3.0);
        let s1 = Complex64::new(-0.5, 0.5 * 3f64.sqrt()) * rho;
        // u(0) = 0:  p + 2 Re(c) = 0
        // u'(0) = 0: -r p + 2 Re(c s1) = 0
        let re_c = -p / 2.0;
        let im_c = (re_c * s1.re - r * p / 2.0) / s1.im;
        ScalarOracle { p, r, c: Complex64::new(re_c, im_c), s1 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.p * (-self.r * t).exp() + 2.0 * (self.c * (self.s1 * t).exp()).re
    }
}

pub fn default_grid_for(a: &Operator) -> GridSpec {
    GridSpec::default_for(a)
}

pub fn max_abs_diff(xs: impl Iterator<Item = (f64, f64)>) -> f64 {
    xs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
