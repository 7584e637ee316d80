//! Random instances and independent oracles shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spectral_mvo::stats::structure_project;
use spectral_mvo::{AugmentedVector, EstimatorMode, FrequencyGrid, SpectralMoments};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cnormal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_augmented(rng: &mut ChaCha8Rng, half: usize) -> AugmentedVector {
    AugmentedVector::from_upper(DVector::from_fn(half, |_, _| cnormal(rng)))
}

/// `(1/K) Σ z̲z̲ᴴ` over `K = 2·dim` random conjugate-symmetric vectors:
/// positive definite with probability one and augmented by construction.
pub fn random_augmented_cov(rng: &mut ChaCha8Rng, half: usize) -> DMatrix<Complex64> {
    let k = 4 * half;
    let mut cov = DMatrix::<Complex64>::zeros(2 * half, 2 * half);
    for _ in 0..k {
        let z = random_augmented(rng, half).to_stacked();
        cov += &z * z.adjoint();
    }
    structure_project(&(cov / Complex64::new(k as f64, 0.0))).unwrap()
}

/// Distinct periods drawn from 2..=24, `m` of them.
pub fn random_periods(rng: &mut ChaCha8Rng, m: usize) -> Vec<u64> {
    let mut pool: Vec<u64> = (3..=24).collect();
    let mut out = Vec::new();
    for _ in 0..m {
        let i = rng.random_range(0..pool.len());
        out.push(pool.swap_remove(i));
    }
    out
}

pub fn random_moments(rng: &mut ChaCha8Rng, m: usize, n: usize) -> SpectralMoments {
    let periods = random_periods(rng, m);
    let grid = FrequencyGrid::from_periods(&periods, "").unwrap();
    let mean = random_augmented(rng, m * n);
    let cov = random_augmented_cov(rng, m * n);
    SpectralMoments::new(grid, n, mean, cov, 100, EstimatorMode::Literal).unwrap()
}

/// Real coordinates `u = [Re w; Im w]` of the upper half: `w̲ = J u` with
/// `J = [[I, jI], [I, −jI]]`. Returns `(Q, q)` such that the variance is
/// `uᵀQu` and the objective `Re(m̲ᴴw̲)` is `qᵀu`.
pub fn real_problem(
    cov: &DMatrix<Complex64>,
    mean: &DVector<Complex64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = cov.nrows() / 2;
    let j = Complex64::new(0.0, 1.0);
    let mut jm = DMatrix::<Complex64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        jm[(i, i)] = Complex64::new(1.0, 0.0);
        jm[(i, k + i)] = j;
        jm[(k + i, i)] = Complex64::new(1.0, 0.0);
        jm[(k + i, k + i)] = -j;
    }
    let q_mat = (jm.adjoint() * cov * &jm).map(|z| z.re);
    let q_mat = (&q_mat + q_mat.transpose()) * 0.5;
    let q_vec = (mean.adjoint() * &jm).transpose().map(|z| z.re);
    (q_mat, q_vec)
}

pub fn weights_from_real(u: &DVector<f64>) -> AugmentedVector {
    let k = u.len() / 2;
    AugmentedVector::from_upper(DVector::from_fn(k, |i, _| Complex64::new(u[i], u[k + i])))
}

/// Maximise `qᵀu` subject to `uᵀQu = σ₀²` by projected gradient ascent on
/// the sphere `‖Q^{1/2}u‖ = σ₀`, best of `restarts` random starts. Returns
/// the best objective found.
pub fn sphere_ascent(
    q_mat: &DMatrix<f64>,
    q: &DVector<f64>,
    sigma0: f64,
    restarts: usize,
    seed: u64,
) -> f64 {
    let eig = SymmetricEigen::new(q_mat.clone());
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let q_inv_half = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    // in whitened coordinates v = Q^{1/2}u the objective is gᵀv
    let g = &q_inv_half * q;
    let mut rng = rng(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..restarts {
        let mut v = DVector::from_fn(q.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        v *= sigma0 / v.norm();
        let step = sigma0 / g.norm();
        for _ in 0..10_000 {
            let tangent = &g - &v * (g.dot(&v) / (sigma0 * sigma0));
            if tangent.norm() <= 1e-15 * g.norm() {
                break;
            }
            let next = &v + tangent * step;
            v = &next * (sigma0 / next.norm());
        }
        let u = &q_inv_half * &v;
        best = best.max(q.dot(&u));
    }
    best
}

/// Largest objective over `count` random points scaled onto the constraint
/// surface.
pub fn random_feasible_best(
    cov: &DMatrix<Complex64>,
    mean: &DVector<Complex64>,
    sigma0: f64,
    count: usize,
    seed: u64,
) -> f64 {
    let mut rng = rng(seed);
    let k = mean.len() / 2;
    (0..count)
        .map(|_| {
            let z = random_augmented(&mut rng, k).to_stacked();
            let v = z.dotc(&(cov * &z)).re;
            let z = z * Complex64::new(sigma0 / v.sqrt(), 0.0);
            mean.dotc(&z).re
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `‖A − B‖∞` as the largest absolute row sum.
pub fn inf_norm_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let d = a - b;
    d.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
