//! Assembly of the verification suite: given an operator, a boundary
//! operator and a perturbation (from a problem file or generated from a
//! seed), run every certified check deterministically and collect the
//! results.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use opde3::analyzer::{
    self, verify_contraction, verify_damped_sine_identity, verify_estimates,
    verify_homogeneous_uniqueness, verify_kernel_difference_norm, CheckResult,
    SolvabilityReport, Verdict,
};
use opde3::boundary::BoundaryTerm;
use opde3::linalg::Matrix;
use opde3::perturbed::Perturbation;
use opde3::{BoundaryOperator, GridSpec, HVector, Operator};

pub struct SuiteInputs {
    pub a: Operator,
    pub k: BoundaryOperator,
    pub perturbation: Perturbation,
    pub grid: GridSpec,
}

/// Deterministic random instance for `verify --random`.
pub fn random_inputs(n: usize, seed: u64) -> SuiteInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // instance stream, disjoint from sample streams
    let a = random_spd_operator(&mut rng, n, 0.6, 3.0);
    let grid = GridSpec::default_for(&a);
    let kappa_target = rng.gen_range(0.0..0.6);
    let k = random_boundary_operator(&mut rng, &a, &grid, kappa_target);
    let kappa = k.estimate_kappa(&a, &grid).expect("generated operator is evaluable");
    let alpha_target = rng.gen_range(0.2..0.6);
    let raw = Perturbation::new(
        random_matrix(&mut rng, n, 1.0),
        random_matrix(&mut rng, n, 1.0),
        random_matrix(&mut rng, n, 1.0),
    )
    .expect("square matrices");
    let alpha0 = analyzer::contraction_bound(kappa, raw.factor_norms())
        .expect("kappa below one by construction");
    let s = alpha_target / alpha0;
    let perturbation =
        Perturbation::new(raw.b1.scale(s), raw.b2.scale(s), raw.b3.scale(s)).expect("square");
    SuiteInputs { a, k, perturbation, grid }
}

/// Run the whole suite: closed-form damped-sine identities, the kernel
/// difference norm, the derivative-ratio/coercivity/boundary-identity
/// batch, the outer contraction, and homogeneous uniqueness.
pub fn run_suite(
    inputs: &SuiteInputs,
    samples: usize,
    seed: u64,
) -> Result<(SolvabilityReport, Vec<CheckResult>), String> {
    let a = &inputs.a;
    let report = analyzer::analyze(a, &inputs.k, &inputs.perturbation, &inputs.grid)
        .map_err(|e| e.to_string())?;

    let mut checks = Vec::new();

    // closed-form integral identities need no solver and run even when the
    // instance itself is not solvable
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1dEA);
        rng.set_stream(s as u64);
        let alpha = rng.gen_range(0.3..1.5);
        let beta = rng.gen_range(0.2..1.0);
        let x = random_unit_hvector(&mut rng, a.dim());
        let t_max = (12.0 / (alpha * a.mu0())).max(10.0);
        let grid = GridSpec::new(t_max, 8192, 2).map_err(|e| e.to_string())?;
        let mut check = verify_damped_sine_identity(a, alpha, beta, &x, &grid);
        check.name = format!("damped_sine_identity[{s}]");
        checks.push(check);

        let grid_c = GridSpec::new((24.0 / a.mu0()).max(10.0), 8192, 2)
            .map_err(|e| e.to_string())?;
        let mut special =
            verify_damped_sine_identity(a, 0.5, 3f64.sqrt() / 2.0, &x, &grid_c);
        special.name = format!("damped_sine_special_case[{s}]");
        checks.push(special);

        let mut kd = verify_kernel_difference_norm(a, &x, &inputs.grid);
        kd.name = format!("kernel_difference_norm[{s}]");
        checks.push(kd);
    }

    if report.verdict == Verdict::KappaTooLarge {
        return Ok((report, checks));
    }

    checks.extend(
        verify_estimates(a, &inputs.k, samples, &inputs.grid, seed).map_err(|e| e.to_string())?,
    );
    checks.push(
        verify_homogeneous_uniqueness(a, &inputs.k, &inputs.grid, 0).map_err(|e| e.to_string())?,
    );

    if report.verdict == Verdict::Solvable {
        checks.extend(
            verify_contraction(
                a,
                &inputs.k,
                &inputs.perturbation,
                samples,
                &inputs.grid,
                seed,
            )
            .map_err(|e| e.to_string())?,
        );
    }

    Ok((report, checks))
}

fn random_matrix(rng: &mut impl Rng, dim: usize, scale: f64) -> Matrix {
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = scale * rng.gen_range(-1.0..1.0);
        }
    }
    m
}

fn random_spd_operator(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Operator {
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
    Operator::from_matrix(m).expect("symmetric positive definite by construction")
}

fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> Matrix {
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

fn random_unit_hvector(rng: &mut impl Rng, dim: usize) -> HVector {
    use opde3::Complex64;
    loop {
        let coords: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = HVector::from_real(&coords);
        if v.norm() > 1e-3 {
            return v.scale(Complex64::new(1.0 / v.norm(), 0.0));
        }
    }
}

fn random_boundary_operator(
    rng: &mut impl Rng,
    a: &Operator,
    grid: &GridSpec,
    target: f64,
) -> BoundaryOperator {
    if target == 0.0 {
        return BoundaryOperator::zero();
    }
    loop {
        let n_terms = rng.gen_range(1..=2);
        let terms = (0..n_terms)
            .map(|_| {
                let weight = random_matrix(rng, a.dim(), 1.0);
                let order = rng.gen_range(0..=2usize);
                let time = rng.gen_range(0.0..2.0 / a.mu0());
                BoundaryTerm::new(weight, order, time).expect("valid term")
            })
            .collect();
        let k = BoundaryOperator::new(terms);
        let base = k.estimate_kappa(a, grid).expect("evaluable");
        if base > 1e-8 {
            return k.scaled(target / base);
        }
    }
}
