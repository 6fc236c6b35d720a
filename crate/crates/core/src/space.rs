//! Vector-valued functions on the truncated half-line: uniform grids,
//! quadrature norms, high-order finite-difference derivatives, traces, and
//! the third-order Sobolev elements the solvers produce and consume.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::fd_weights;
use crate::operator::{HVector, Operator, ScaleIndex};

/// Fraction of the peak magnitude the final sample may carry before a grid
/// function is flagged as not decayed.
pub const TAIL_TOL: f64 = 1e-6;

/// Stencil width used by [`differentiate`]; one-sided variants of the same
/// width cover the first and last points, giving at least fourth-order
/// accuracy for derivatives up to order three.
pub(crate) const STENCIL_POINTS: usize = 7;

/// Uniform grid over [0, T] with transform padding metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Truncation time.
    pub t_max: f64,
    /// Number of samples; a power of two, at least 256.
    pub n_samples: usize,
    /// Padding multiple for transform-based operations.
    pub pad_factor: usize,
}

impl GridSpec {
    pub fn new(t_max: f64, n_samples: usize, pad_factor: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidGrid { reason: format!("T must be positive, got {t_max}") });
        }
        if n_samples < 256 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid {
                reason: format!("N must be a power of two >= 256, got {n_samples}"),
            });
        }
        if pad_factor < 2 {
            return Err(Error::InvalidGrid {
                reason: format!("pad factor must be at least 2, got {pad_factor}"),
            });
        }
        Ok(GridSpec { t_max, n_samples, pad_factor })
    }

    /// Default grid for an operator: T = max(40 / mu0, 10), N = 4096, pad 2,
    /// so that homogeneous decay e^{-mu0 T / 2} is below 1e-8.
    pub fn default_for(a: &Operator) -> Self {
        GridSpec { t_max: (40.0 / a.mu0()).max(10.0), n_samples: 4096, pad_factor: 2 }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.n_samples - 1) as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.dt() * j as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|j| self.time(j))
    }

    /// Quadrature weights over [0, T]: composite trapezoid with
    /// fourth-order Gregory endpoint corrections (first and last three
    /// weights adjusted to 3/8, 7/6, 23/24). The plain trapezoid endpoint
    /// error dt^2 f'(0) / 12 would cap norm accuracy near 1e-5 on the
    /// default grids; the corrected weights reach below 1e-8.
    pub fn quad_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let n = self.n_samples;
        let mut w = vec![dt; n];
        for (offset, c) in [(0, 3.0 / 8.0), (1, 7.0 / 6.0), (2, 23.0 / 24.0)] {
            w[offset] = dt * c;
            w[n - 1 - offset] = dt * c;
        }
        w
    }
}

/// Sampled vector-valued function on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<HVector>,
    /// True when the tail magnitude |u(T)| is below [`TAIL_TOL`] times the
    /// peak magnitude over the grid.
    pub decay_ok: bool,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<HVector>) -> Self {
        assert_eq!(values.len(), grid.n_samples, "sample count must match the grid");
        let dim = values[0].dim();
        assert!(values.iter().all(|v| v.dim() == dim), "all samples must share one dimension");
        let peak = values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        let decay_ok = values.last().unwrap().norm() <= TAIL_TOL * peak;
        GridFunction { grid, values, decay_ok }
    }

    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        GridFunction::new(grid, vec![HVector::zeros(dim); grid.n_samples])
    }

    /// Sample a real-valued function of time.
    pub fn from_fn(grid: GridSpec, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let values = grid
            .times()
            .map(|t| {
                let v = f(t);
                assert_eq!(v.len(), dim);
                HVector::from_real(&v)
            })
            .collect();
        GridFunction::new(grid, values)
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    /// L2(0, T) norm by trapezoid quadrature of the squared pointwise norm.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .quad_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.coords.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// L2 inner product Re(f, g) over [0, T].
    pub fn l2_inner_re(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.grid, other.grid);
        self.grid
            .quad_weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| {
                w * a
                    .coords
                    .iter()
                    .zip(&b.coords)
                    .map(|(x, y)| (x.conj() * y).re)
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.add(b)).collect();
        GridFunction::new(self.grid, values)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.sub(b)).collect();
        GridFunction::new(self.grid, values)
    }

    pub fn scale(&self, s: Complex64) -> GridFunction {
        GridFunction::new(self.grid, self.values.iter().map(|v| v.scale(s)).collect())
    }

    /// Apply a spectral power of the operator sample-wise.
    pub fn apply_power(&self, a: &Operator, gamma: ScaleIndex) -> GridFunction {
        let values = self.values.iter().map(|v| a.apply_power(gamma, v)).collect();
        GridFunction::new(self.grid, values)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.imag_magnitude()).fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Value at time t by linear interpolation between grid neighbours.
    pub fn eval(&self, t: f64) -> Result<HVector> {
        if t < 0.0 || t > self.grid.t_max * (1.0 + 1e-12) {
            return Err(Error::EvaluationOutsideGrid { t, t_max: self.grid.t_max });
        }
        let pos = t / self.grid.dt();
        let j = (pos.floor() as usize).min(self.grid.n_samples - 2);
        let w = pos - j as f64;
        let lo = &self.values[j];
        let hi = &self.values[j + 1];
        Ok(lo.scale(Complex64::new(1.0 - w, 0.0)).add(&hi.scale(Complex64::new(w, 0.0))))
    }

    /// CSV export: header `t,re_u1..re_un`, one row per sample, all columns
    /// in `%.12e` scientific format.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let n = self.dim();
        write!(out, "t")?;
        for i in 1..=n {
            write!(out, ",re_u{i}")?;
        }
        writeln!(out)?;
        for (t, v) in self.grid.times().zip(&self.values) {
            write!(out, "{}", fmt_e12(t))?;
            for c in &v.coords {
                write!(out, ",{}", fmt_e12(c.re))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// C-style `%.12e` formatting (two-digit signed exponent).
pub fn fmt_e12(x: f64) -> String {
    fmt_exp(x, 12)
}

/// Scientific notation with `digits` places after the point and a C-style
/// signed two-digit exponent.
pub fn fmt_exp(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", digits, x);
    let (mantissa, exp) = s.split_once('e').expect("scientific format always contains e");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// Differentiate a sampled function with centered stencils at interior
/// points and one-sided stencils of the same width at the first and last
/// points (fourth order or better for orders 1..=3).
pub fn differentiate(f: &GridFunction, order: usize) -> GridFunction {
    assert!((1..=3).contains(&order), "derivative order must be 1, 2 or 3");
    let n = f.grid.n_samples;
    let dim = f.dim();
    let dt = f.grid.dt();
    let stencils = DerivativeStencils::new(dt, order);
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let (lo, weights) = stencils.row(j, n);
        let mut out = HVector::zeros(dim);
        for (k, &w) in weights.iter().enumerate() {
            for (o, c) in out.coords.iter_mut().zip(&f.values[lo + k].coords) {
                *o += w * c;
            }
        }
        values.push(out);
    }
    GridFunction::new(f.grid, values)
}

/// Precomputed stencil weights for one derivative order on a uniform grid.
pub(crate) struct DerivativeStencils {
    /// Rows for offsets 0..STENCIL_POINTS of the stencil window start; the
    /// interior row sits at index STENCIL_POINTS / 2.
    rows: Vec<Vec<f64>>,
}

impl DerivativeStencils {
    pub(crate) fn new(dt: f64, order: usize) -> Self {
        let nodes: Vec<f64> = (0..STENCIL_POINTS).map(|k| k as f64 * dt).collect();
        let rows = (0..STENCIL_POINTS)
            .map(|at| fd_weights(nodes[at], &nodes, order))
            .collect();
        DerivativeStencils { rows }
    }

    /// Window start and weights for evaluating at sample `j` of `n`.
    pub(crate) fn row(&self, j: usize, n: usize) -> (usize, &[f64]) {
        assert!(n >= STENCIL_POINTS, "grid shorter than the stencil");
        let half = STENCIL_POINTS / 2;
        let lo = j.saturating_sub(half).min(n - STENCIL_POINTS);
        (lo, &self.rows[j - lo])
    }
}

/// Which boundary trace to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// u(0); lands in the scale space with exponent 5/2.
    Value,
    /// u'(0); lands in the scale space with exponent 3/2.
    Derivative,
}

/// A boundary trace together with the scale exponent its norm lives in.
#[derive(Debug, Clone)]
pub struct Trace {
    pub value: HVector,
    pub scale: ScaleIndex,
}

/// Element of the third-order Sobolev space: the function, its first three
/// derivatives, and the image under the cubed operator, all on one grid.
#[derive(Debug, Clone)]
pub struct W23Element {
    pub u: GridFunction,
    pub d1: GridFunction,
    pub d2: GridFunction,
    pub d3: GridFunction,
    pub a3u: GridFunction,
}

impl W23Element {
    /// Build from raw samples; derivatives come from [`differentiate`].
    pub fn from_values(u: GridFunction, a: &Operator) -> Self {
        let d1 = differentiate(&u, 1);
        let d2 = differentiate(&u, 2);
        let d3 = differentiate(&u, 3);
        let a3u = u.apply_power(a, ScaleIndex::new(3.0).expect("3 is a valid scale index"));
        W23Element { u, d1, d2, d3, a3u }
    }

    /// Assemble from explicitly known derivative grids (solver outputs).
    pub fn from_parts(
        u: GridFunction,
        d1: GridFunction,
        d2: GridFunction,
        d3: GridFunction,
        a3u: GridFunction,
    ) -> Self {
        assert_eq!(u.grid, d1.grid);
        assert_eq!(u.grid, d2.grid);
        assert_eq!(u.grid, d3.grid);
        assert_eq!(u.grid, a3u.grid);
        W23Element { u, d1, d2, d3, a3u }
    }

    pub fn grid(&self) -> GridSpec {
        self.u.grid
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// Sobolev norm: (|u'''|^2 + |A^3 u|^2)^(1/2) in L2 quadrature.
    pub fn w23_norm(&self) -> f64 {
        let d3 = self.d3.l2_norm();
        let a3 = self.a3u.l2_norm();
        (d3 * d3 + a3 * a3).sqrt()
    }

    /// Boundary trace via one-sided stencils on the value grid, tagged with
    /// the scale exponent the trace inherits from the solution space.
    pub fn trace(&self, which: TraceKind) -> Trace {
        match which {
            TraceKind::Value => Trace {
                value: self.u.values[0].clone(),
                scale: ScaleIndex::new(2.5).expect("valid"),
            },
            TraceKind::Derivative => {
                let stencils = DerivativeStencils::new(self.u.grid.dt(), 1);
                let (lo, weights) = stencils.row(0, self.u.grid.n_samples);
                let mut value = HVector::zeros(self.dim());
                for (k, &w) in weights.iter().enumerate() {
                    for (o, c) in value.coords.iter_mut().zip(&self.u.values[lo + k].coords) {
                        *o += w * c;
                    }
                }
                Trace { value, scale: ScaleIndex::new(1.5).expect("valid") }
            }
        }
    }

    /// Max relative gap between the stored first derivative and a fresh
    /// finite-difference pass at interior points (the consistency contract).
    pub fn derivative_consistency(&self) -> f64 {
        let fd = differentiate(&self.u, 1);
        let peak = self.d1.max_norm().max(1e-300);
        let n = self.u.grid.n_samples;
        (STENCIL_POINTS..n - STENCIL_POINTS)
            .map(|j| fd.values[j].sub(&self.d1.values[j]).norm() / peak)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn scalar_op(v: f64) -> Operator {
        let mut m = Matrix::zeros(1);
        m[(0, 0)] = v;
        Operator::from_matrix(m).unwrap()
    }

    fn grid(t_max: f64, n: usize) -> GridSpec {
        GridSpec::new(t_max, n, 2).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 1024, 2).is_err());
        assert!(GridSpec::new(10.0, 100, 2).is_err());
        assert!(GridSpec::new(10.0, 1000, 2).is_err()); // not a power of two
        assert!(GridSpec::new(10.0, 1024, 1).is_err());
        assert!(GridSpec::new(10.0, 1024, 2).is_ok());
    }

    #[test]
    fn l2_norm_zero_function() {
        let f = GridFunction::zeros(grid(10.0, 256), 2);
        assert_eq!(f.l2_norm(), 0.0);
        assert!(f.decay_ok);
    }

    #[test]
    fn l2_norm_exponential() {
        // int_0^inf e^{-2t} dt = 1/2
        let f = GridFunction::from_fn(grid(30.0, 4096), 1, |t| vec![(-t).exp()]);
        assert!((f.l2_norm() - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn l2_norm_damped_sine_matches_three_eighths() {
        // |e^{-t/2} sin(sqrt(3) t / 2)|_{L2}^2 = 3/8 for unit scalar operator
        let f = GridFunction::from_fn(grid(60.0, 8192), 1, |t| {
            vec![(-t / 2.0).exp() * (3f64.sqrt() * t / 2.0).sin()]
        });
        assert!((f.l2_norm() - (3.0f64 / 8.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn quadrature_refinement_converges() {
        let coarse = GridFunction::from_fn(grid(30.0, 2048), 1, |t| vec![(-t).exp()]);
        let fine = GridFunction::from_fn(grid(30.0, 4096), 1, |t| vec![(-t).exp()]);
        let exact = 0.5f64.sqrt();
        let e_coarse = (coarse.l2_norm() - exact).abs();
        let e_fine = (fine.l2_norm() - exact).abs();
        assert!(e_coarse >= 3.0 * e_fine, "coarse {e_coarse:.3e} fine {e_fine:.3e}");
    }

    #[test]
    fn differentiate_linear_and_constant() {
        let g = grid(10.0, 512);
        let f = GridFunction::from_fn(g, 1, |t| vec![t]);
        let d1 = differentiate(&f, 1);
        for j in 4..508 {
            assert!((d1.values[j].coords[0].re - 1.0).abs() < 1e-9);
        }
        let c = GridFunction::from_fn(g, 1, |t| vec![3.5 + 0.0 * t]);
        for order in 1..=3 {
            // stencil weights scale like 1/dt^order, so exact cancellation
            // leaves roundoff of that magnitude
            let d = differentiate(&c, order);
            assert!(d.max_norm() < 1e-8, "order {order}");
        }
    }

    #[test]
    fn differentiate_exponential_third_order() {
        let g = grid(30.0, 4096);
        let f = GridFunction::from_fn(g, 1, |t| vec![(-t).exp()]);
        let d3 = differentiate(&f, 3);
        for j in 7..2000 {
            let expect = -(-g.time(j)).exp();
            let rel = (d3.values[j].coords[0].re - expect).abs() / expect.abs();
            assert!(rel < 1e-5, "j={j} rel={rel:.2e}");
        }
    }

    #[test]
    fn traces_of_t_exp() {
        let a = scalar_op(1.0);
        let g = grid(40.0, 4096);
        let u = W23Element::from_values(
            GridFunction::from_fn(g, 1, |t| vec![t * (-t).exp()]),
            &a,
        );
        let g0 = u.trace(TraceKind::Value);
        let g1 = u.trace(TraceKind::Derivative);
        assert!(g0.value.norm() < 1e-12);
        assert!((g1.value.coords[0].re - 1.0).abs() < 1e-6);
        assert_eq!(g0.scale.value(), 2.5);
        assert_eq!(g1.scale.value(), 1.5);

        let u2 = W23Element::from_values(
            GridFunction::from_fn(g, 1, |t| vec![t * t * (-t).exp()]),
            &a,
        );
        assert!(u2.trace(TraceKind::Derivative).value.norm() < 1e-6);
    }

    #[test]
    fn w23_norm_exponential_cases() {
        let g = grid(40.0, 4096);
        let f = GridFunction::from_fn(g, 1, |t| vec![(-t).exp()]);
        let a1 = scalar_op(1.0);
        let u = W23Element::from_values(f.clone(), &a1);
        assert!((u.w23_norm() - 1.0).abs() < 1e-5);

        let a2 = scalar_op(2.0);
        let u = W23Element::from_values(f, &a2);
        assert!((u.w23_norm() - (65.0f64 / 2.0).sqrt()).abs() < 1e-4);

        let z = W23Element::from_values(GridFunction::zeros(g, 1), &a1);
        assert_eq!(z.w23_norm(), 0.0);
    }

    #[test]
    fn derivative_consistency_is_zero_for_fd_built_elements() {
        let a = scalar_op(1.0);
        let u = W23Element::from_values(
            GridFunction::from_fn(grid(20.0, 1024), 1, |t| vec![(-t).exp() * (0.5 * t).cos()]),
            &a,
        );
        assert!(u.derivative_consistency() < 1e-14);
    }

    #[test]
    fn eval_interpolates() {
        let g = grid(10.0, 256);
        let f = GridFunction::from_fn(g, 1, |t| vec![2.0 * t]);
        let v = f.eval(g.dt() * 10.5).unwrap();
        assert!((v.coords[0].re - 2.0 * g.dt() * 10.5).abs() < 1e-12);
        assert!(f.eval(-1.0).is_err());
        assert!(f.eval(11.0).is_err());
    }

    #[test]
    fn csv_format() {
        let g = grid(10.0, 256);
        let f = GridFunction::from_fn(g, 2, |t| vec![t, -t]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,re_u1,re_u2");
        assert_eq!(lines.next().unwrap(), "0.000000000000e+00,0.000000000000e+00,-0.000000000000e+00");
        assert_eq!(text.lines().count(), 257);
    }

    #[test]
    fn fmt_e12_matches_c_style() {
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e12(-0.5), "-5.000000000000e-01");
        assert_eq!(fmt_e12(1.5e-12), "1.500000000000e-12");
        assert_eq!(fmt_e12(6.022e23), "6.022000000000e+23");
    }

    #[test]
    fn parseval_consistency_for_vanishing_boundary() {
        // plain sum over the padded extension equals the quadrature norm
        // when the function vanishes to high order at both ends of [0, T]
        let g = grid(40.0, 1024);
        let f = GridFunction::from_fn(g, 1, |t| vec![t * t * t * (-t).exp()]);
        let n = g.n_samples;
        let m = 2 * g.pad_factor * (n - 1);
        let mut padded = vec![Complex64::new(0.0, 0.0); m];
        let j0 = g.pad_factor * (n - 1);
        for (k, v) in f.values.iter().enumerate() {
            padded[j0 + k] = v.coords[0];
        }
        let mut planner = rustfft::FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut padded);
        let dt = g.dt();
        let transform_norm =
            (padded.iter().map(|c| c.norm_sqr()).sum::<f64>() * dt / m as f64).sqrt();
        let rel = (transform_norm - f.l2_norm()).abs() / f.l2_norm();
        assert!(rel < 1e-6, "Parseval mismatch {rel:.2e}");
    }
}
