//! End-to-end runs of the randomized verification suite on fixed seeds.

mod common;

use common::{random_spd_operator, random_unit_hvector, scalar_operator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opde3::analyzer::{
    verify_contraction, verify_damped_sine_identity, verify_estimates,
    verify_homogeneous_uniqueness, verify_kernel_difference_norm,
};
use opde3::boundary::BoundaryTerm;
use opde3::linalg::Matrix;
use opde3::perturbed::Perturbation;
use opde3::{BoundaryOperator, GridSpec};

fn small_boundary_operator(dim: usize, strength: f64) -> BoundaryOperator {
    let mut c = Matrix::zeros(dim);
    for i in 0..dim {
        c[(i, i)] = strength * (0.5 + 0.1 * i as f64);
        if i + 1 < dim {
            c[(i, i + 1)] = 0.3 * strength;
        }
    }
    BoundaryOperator::new(vec![BoundaryTerm::new(c, 1, 0.0).unwrap()])
}

#[test]
fn estimate_suite_passes_on_scalar_instance() {
    let a = scalar_operator(1.0);
    let grid = GridSpec::default_for(&a);
    let k = small_boundary_operator(1, 0.2);
    let checks = verify_estimates(&a, &k, 12, &grid, 42).unwrap();
    assert_eq!(checks.len(), 12 * 8);
    for c in &checks {
        assert!(c.pass, "{} failed: observed {} bound {}", c.name, c.observed, c.bound);
    }
}

#[test]
fn estimate_suite_passes_on_vector_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_spd_operator(&mut rng, 3, 0.7, 2.8);
    let grid = GridSpec::default_for(&a);
    let k = small_boundary_operator(3, 0.1);
    let kappa = k.estimate_kappa(&a, &grid).unwrap();
    assert!(kappa < 1.0);
    let checks = verify_estimates(&a, &k, 8, &grid, 7).unwrap();
    for c in &checks {
        assert!(c.pass, "{} failed: observed {} bound {}", c.name, c.observed, c.bound);
    }
}

#[test]
fn contraction_suite_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_spd_operator(&mut rng, 2, 0.8, 2.0);
    let grid = GridSpec::default_for(&a);
    let k = small_boundary_operator(2, 0.15);
    let mut b1 = Matrix::zeros(2);
    b1[(0, 0)] = 0.05;
    let mut b3 = Matrix::zeros(2);
    b3[(0, 0)] = 0.3;
    b3[(1, 1)] = 0.15;
    let pert = Perturbation::new(b1, Matrix::zeros(2), b3).unwrap();
    let checks = verify_contraction(&a, &k, &pert, 6, &grid, 3).unwrap();
    assert_eq!(checks.len(), 18);
    for c in &checks {
        assert!(c.pass, "{} failed: observed {} bound {}", c.name, c.observed, c.bound);
    }
}

#[test]
fn uniqueness_check_passes_for_random_boundary_operators() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for label in 0..4 {
        let a = random_spd_operator(&mut rng, 2, 0.7, 2.4);
        let grid = GridSpec::default_for(&a);
        let k = small_boundary_operator(2, 0.05 + 0.1 * label as f64);
        let check = verify_homogeneous_uniqueness(&a, &k, &grid, label).unwrap();
        assert!(check.pass, "{}: {}", check.name, check.observed);
    }
}

#[test]
fn damped_sine_identity_random_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let dim = 1 + (rng.next_u32() as usize) % 4;
        let a = random_spd_operator(&mut rng, dim, 0.6, 3.2);
        use rand::Rng;
        let alpha = rng.gen_range(0.3..1.5);
        let beta = rng.gen_range(0.2..1.2);
        let x = random_unit_hvector(&mut rng, dim);
        let t_max = (40.0 / a.mu0()).max(12.0 / (alpha * a.mu0()));
        let grid = GridSpec::new(t_max, 8192, 2).unwrap();
        let check = verify_damped_sine_identity(&a, alpha, beta, &x, &grid);
        assert!(
            check.pass,
            "alpha={alpha} beta={beta}: observed {} bound {}",
            check.observed, check.bound
        );
    }
}

#[test]
fn kernel_difference_norm_random_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let dim = 1 + (rng.next_u32() as usize) % 4;
        let a = random_spd_operator(&mut rng, dim, 0.6, 3.0);
        let x = random_unit_hvector(&mut rng, dim);
        let grid = GridSpec::default_for(&a);
        let check = verify_kernel_difference_norm(&a, &x, &grid);
        assert!(check.pass, "observed {} bound {}", check.observed, check.bound);
    }
}

use rand::RngCore;
