//! Small dense linear algebra kernels: row-major matrices, a cyclic Jacobi
//! eigensolver for symmetric matrices, spectral-norm power iteration, and a
//! banded Cholesky solver used by the boundary-norm estimator.
//!
//! Everything here targets desk-scale problems (matrix dimension <= 64,
//! banded systems with a few thousand unknowns); no attempt is made to
//! compete with LAPACK.

use serde::{Deserialize, Serialize};

/// Dense real square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from rows; every row must have the same length as the row count.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, String> {
        let dim = rows.len();
        if dim == 0 {
            return Err("matrix must have at least one row".into());
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(format!(
                    "matrix must be square: got row of length {} in a {}-row matrix",
                    row.len(),
                    dim
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// y = M x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// y = M^T x
    pub fn mul_vec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let xi = x[i];
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&a| a == 0.0)
    }

    /// Spectral norm (largest singular value) by power iteration on M^T M.
    pub fn spectral_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.dim;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.01).collect();
        let nrm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let s = nrm(&v);
        v.iter_mut().for_each(|a| *a /= s);
        let mut sigma2 = 0.0;
        for _ in 0..10_000 {
            let w = self.mul_vec_t(&self.mul_vec(&v));
            let s2: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            let wn = nrm(&w);
            if wn == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|a| a / wn).collect();
            if (s2 - sigma2).abs() <= 1e-14 * s2.abs().max(1e-300) {
                sigma2 = s2;
                break;
            }
            sigma2 = s2;
        }
        sigma2.max(0.0).sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = String;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, String> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Vec<Vec<f64>> {
        (0..m.dim).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted ascending and the matching orthonormal
/// eigenvectors as the columns of the returned matrix.
pub fn jacobi_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.dim;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    if n == 1 {
        return (vec![a[(0, 0)]], v);
    }
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        if off(&a) <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // Standard two-sided rotation that zeroes a[p][q].
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, new_col)] = v[(row, old_col)];
        }
    }
    (eigenvalues, vectors)
}

/// Symmetric positive-definite banded matrix stored by diagonals:
/// `bands[d][i] = M[i + d][i]` for d = 0..=bandwidth (lower triangle).
pub struct BandedSpd {
    n: usize,
    bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedSpd {
    pub fn new(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth).map(|d| vec![0.0; n - d]).collect();
        BandedSpd { n, bandwidth, bands }
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.bandwidth, "entry outside band");
        self.bands[d][lo] += value;
    }

    /// In-place banded Cholesky; returns Err if a pivot is not positive.
    pub fn cholesky(mut self) -> Result<BandedChol, String> {
        let (n, bw) = (self.n, self.bandwidth);
        for j in 0..n {
            let mut d = self.bands[0][j];
            let start = j.saturating_sub(bw);
            for k in start..j {
                let l = self.bands[j - k][k];
                d -= l * l;
            }
            if d <= 0.0 {
                return Err(format!("matrix not positive definite at pivot {j}"));
            }
            let d = d.sqrt();
            self.bands[0][j] = d;
            let top = (j + bw + 1).min(n);
            for i in j + 1..top {
                let mut s = self.bands[i - j][j];
                let start = i.saturating_sub(bw).max(start);
                for k in start..j {
                    if i - k <= bw {
                        s -= self.bands[i - k][k] * self.bands[j - k][k];
                    }
                }
                self.bands[i - j][j] = s / d;
            }
        }
        Ok(BandedChol { n, bandwidth: bw, bands: self.bands })
    }
}

/// Cholesky factor of a [`BandedSpd`]; solves M x = b.
pub struct BandedChol {
    n: usize,
    bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedChol {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, bw) = (self.n, self.bandwidth);
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            for k in start..i {
                s -= self.bands[i - k][k] * x[k];
            }
            x[i] = s / self.bands[0][i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let top = (i + bw + 1).min(n);
            let mut s = x[i];
            for k in i + 1..top {
                s -= self.bands[k - i][i] * x[k];
            }
            x[i] = s / self.bands[0][i];
        }
        x
    }
}

/// Finite-difference weights on arbitrary nodes (Fornberg's recurrence).
///
/// Returns the weights `w` such that `sum_k w[k] f(nodes[k])` approximates
/// the `order`-th derivative of `f` at `z`.
pub fn fd_weights(z: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_identity() {
        let (vals, vecs) = jacobi_eigen(&Matrix::identity(2));
        assert_eq!(vals, vec![1.0, 1.0]);
        assert_eq!(vecs, Matrix::identity(2));
    }

    #[test]
    fn jacobi_2x2_hand_computed() {
        // [[2,1],[1,2]] has characteristic polynomial l^2 - 4l + 3 = (l-1)(l-3)
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = jacobi_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        // reconstruction
        for i in 0..2 {
            for j in 0..2 {
                let r: f64 = (0..2).map(|k| vecs[(i, k)] * vals[k] * vecs[(j, k)]).sum();
                assert!((r - m[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in [1usize, 2, 3, 5, 8] {
            let mut m = Matrix::zeros(n);
            for i in 0..n {
                for j in 0..=i {
                    let v = rnd();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let (vals, vecs) = jacobi_eigen(&m);
            let norm = m.frobenius_norm().max(1e-12);
            for i in 0..n {
                for j in 0..n {
                    let r: f64 = (0..n).map(|k| vecs[(i, k)] * vals[k] * vecs[(j, k)]).sum();
                    assert!(
                        (r - m[(i, j)]).abs() <= 1e-12 * norm,
                        "reconstruction off at ({i},{j})"
                    );
                }
            }
            for w in vals.windows(2) {
                assert!(w[0] <= w[1], "eigenvalues not sorted");
            }
        }
    }

    #[test]
    fn spectral_norm_diagonal() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -5.0]]).unwrap();
        assert!((m.spectral_norm() - 5.0).abs() < 1e-10);
        assert_eq!(Matrix::zeros(3).spectral_norm(), 0.0);
    }

    #[test]
    fn banded_solve_tridiagonal() {
        // -u'' style tridiagonal system against a dense-free hand solve
        let n = 6;
        let mut m = BandedSpd::new(n, 1);
        for i in 0..n {
            m.add(i, i, 2.0);
            if i + 1 < n {
                m.add(i + 1, i, -1.0);
            }
        }
        let chol = m.cholesky().unwrap();
        let b = vec![1.0; n];
        let x = chol.solve(&b);
        // verify M x = b
        for i in 0..n {
            let mut r = 2.0 * x[i];
            if i > 0 {
                r -= x[i - 1];
            }
            if i + 1 < n {
                r -= x[i + 1];
            }
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_weights_first_derivative() {
        // centered 5-point first derivative: (1, -8, 0, 8, -1)/12h
        let nodes: Vec<f64> = (-2..=2).map(|i| i as f64).collect();
        let w = fd_weights(0.0, &nodes, 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fd_weights_differentiate_polynomial() {
        // 7-point one-sided third derivative must be exact on t^5
        let nodes: Vec<f64> = (0..7).map(|i| 0.1 * i as f64).collect();
        let w = fd_weights(0.0, &nodes, 3);
        let d3: f64 = w.iter().zip(&nodes).map(|(wk, t)| wk * t.powi(5)).sum();
        assert!((d3 - 0.0).abs() < 1e-9); // d3/dt3 t^5 at 0 = 60 t^2 = 0
        let d3b: f64 = w.iter().zip(&nodes).map(|(wk, t)| wk * t.powi(3)).sum();
        assert!((d3b - 6.0).abs() < 1e-9);
    }
}
