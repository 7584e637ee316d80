//! Synthetic nonstationary signals with prescribed spectral statistics.
//!
//! A [`SynthSpec`] fixes a spectral mean `m̲` and an augmented spectral
//! covariance `R̲` on a grid. Each sample is
//!
//! ```text
//! x(t) = Φ̲(t) (m̲ + s̲(t)),   s̲(t) ~ zero-mean complex Gaussian with E[s̲s̲ᴴ] = R̲
//! ```
//!
//! so the time-domain mean is a real harmonic signal and the time-domain
//! covariance is a sum of cyclostationary components. Noise draws are white
//! in `t` unless an AR(1) coefficient is set.
//!
//! Improper draws go through the real composite `u = [Re z; Im z]`. With
//! `J = [[I, jI], [I, −jI]]` we have `s̲ = J u`, hence
//! `E[uuᵀ] = ¼ Jᴴ R̲ J`, which is real symmetric and is factorised by an
//! eigendecomposition.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::augmented::AugmentedVector;
use crate::basis::{apply_basis, bin_phasors, require_symmetric, split_real, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::panel::{monthly_stamps, PricePanel, ReturnsPanel, Stamp};
use crate::stats::{structure_project, structure_residual};

/// Eigenvalues of `R̲` in `[−CLIP_TOL, 0)` are treated as rounding noise.
pub const CLIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    grid: FrequencyGrid,
    n_assets: usize,
    spectral_mean: AugmentedVector,
    spectral_cov: DMatrix<Complex64>,
    horizon: usize,
    seed: u64,
    ar_coefficient: f64,
}

impl SynthSpec {
    pub fn new(
        grid: FrequencyGrid,
        n_assets: usize,
        spectral_mean: AugmentedVector,
        spectral_cov: DMatrix<Complex64>,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_assets == 0 {
            return Err(Error::validation(
                "synthetic signal needs at least one asset",
            ));
        }
        if horizon == 0 {
            return Err(Error::validation("horizon must be at least one sample"));
        }
        let dim = 2 * grid.len() * n_assets;
        if spectral_mean.len() != dim {
            return Err(Error::validation(format!(
                "spectral mean has length {}, expected {dim}",
                spectral_mean.len()
            )));
        }
        if spectral_cov.nrows() != dim || spectral_cov.ncols() != dim {
            return Err(Error::validation(format!(
                "spectral covariance is {}×{}, expected {dim}×{dim}",
                spectral_cov.nrows(),
                spectral_cov.ncols()
            )));
        }
        require_symmetric(&spectral_mean)?;
        let drift = structure_residual(&spectral_cov);
        if drift > 1e-9 * spectral_cov.camax().max(f64::MIN_POSITIVE) {
            return Err(Error::validation(format!(
                "spectral covariance lacks augmented Hermitian structure (residual {drift:e})"
            )));
        }
        Ok(Self {
            spectral_mean: spectral_mean.symmetrized(),
            spectral_cov: structure_project(&spectral_cov)?,
            grid,
            n_assets,
            horizon,
            seed,
            ar_coefficient: 0.0,
        })
    }

    /// Correlate successive noise draws: `s̲(t) = ρ s̲(t−1) + √(1−ρ²) ε(t)`.
    pub fn with_ar_coefficient(mut self, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::validation(format!(
                "AR coefficient {rho} is outside [0, 1)"
            )));
        }
        self.ar_coefficient = rho;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::validation("horizon must be at least one sample"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn spectral_mean(&self) -> &AugmentedVector {
        &self.spectral_mean
    }

    pub fn spectral_cov(&self) -> &DMatrix<Complex64> {
        &self.spectral_cov
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ar_coefficient(&self) -> f64 {
        self.ar_coefficient
    }

    /// Factorise the covariance once for repeated draws.
    pub fn sampler(&self) -> Result<NoiseSampler> {
        NoiseSampler::new(&self.spectral_cov, self.seed)
    }
}

/// Draws of `s̲(t)` for one seed. Every `t` uses its own RNG stream, so a
/// draw does not depend on which other times were sampled.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    factor: DMatrix<f64>,
    half: usize,
    seed: u64,
}

impl NoiseSampler {
    pub fn new(cov: &DMatrix<Complex64>, seed: u64) -> Result<Self> {
        let half = cov.nrows() / 2;
        let composite = real_composite(cov);
        let eig = SymmetricEigen::new(composite);
        let mut scales = Vec::with_capacity(eig.eigenvalues.len());
        for &lam in eig.eigenvalues.iter() {
            // eigenvalues of R̲ are twice those of the composite
            let lam_aug = 2.0 * lam;
            if lam_aug < -CLIP_TOL {
                return Err(Error::NotPositiveSemiDefinite {
                    eigenvalue: lam_aug,
                });
            }
            if lam_aug < 0.0 {
                log::warn!("clipping covariance eigenvalue {lam_aug:e} to zero");
            }
            scales.push(lam.max(0.0).sqrt());
        }
        let mut factor = eig.eigenvectors;
        for (j, mut col) in factor.column_iter_mut().enumerate() {
            col *= scales[j];
        }
        Ok(Self { factor, half, seed })
    }

    /// One draw of `s̲(t)`.
    pub fn draw(&self, t: usize) -> AugmentedVector {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t as u64);
        let eps = DVector::from_fn(2 * self.half, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = &self.factor * eps;
        let k = self.half;
        AugmentedVector::from_upper(DVector::from_fn(k, |i, _| Complex64::new(u[i], u[k + i])))
    }
}

/// `¼ Jᴴ R̲ J` for `J = [[I, jI], [I, −jI]]`, written out blockwise.
fn real_composite(cov: &DMatrix<Complex64>) -> DMatrix<f64> {
    let k = cov.nrows() / 2;
    let r = cov.view((0, 0), (k, k));
    let p = cov.view((0, k), (k, k));
    // E[aaᵀ] = ½ Re(R + P), E[bbᵀ] = ½ Re(R − P), E[abᵀ] = ½ Im(P − R)
    let mut c = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let (rij, pij) = (r[(i, j)], p[(i, j)]);
            c[(i, j)] = 0.5 * (rij.re + pij.re);
            c[(k + i, k + j)] = 0.5 * (rij.re - pij.re);
            c[(i, k + j)] = 0.5 * (pij.im - rij.im);
            c[(k + i, j)] = 0.5 * (pij.im + rij.im);
        }
    }
    // exact symmetry for the eigensolver
    (&c + c.transpose()) * 0.5
}

/// A single noise draw at time `t`; factorises the covariance on every call.
/// Use [`SynthSpec::sampler`] in loops.
pub fn sample_spectral_noise(spec: &SynthSpec, t: usize) -> Result<AugmentedVector> {
    Ok(spec.sampler()?.draw(t))
}

/// One `T × N` realization, timestamps `0..T`.
pub fn synthesize_panel(spec: &SynthSpec) -> Result<ReturnsPanel> {
    realize(spec, &spec.sampler()?)
}

fn realize(spec: &SynthSpec, sampler: &NoiseSampler) -> Result<ReturnsPanel> {
    let (n, k) = (spec.n_assets, spec.grid.len() * spec.n_assets);
    let rho = spec.ar_coefficient;
    let innovation = (1.0 - rho * rho).sqrt();
    let mean_up = spec.spectral_mean.upper();
    let mut state = DVector::<Complex64>::zeros(k);
    let mut out = DMatrix::zeros(spec.horizon, n);
    for t in 0..spec.horizon {
        let eps = sampler.draw(t);
        state = if t == 0 {
            eps.upper().clone()
        } else {
            state * Complex64::new(rho, 0.0) + eps.upper() * Complex64::new(innovation, 0.0)
        };
        let total = AugmentedVector::from_upper(mean_up + &state);
        let values = apply_basis(&bin_phasors(&spec.grid, t as i64), n, &total);
        let (real, residual) = split_real(&values);
        if residual > SYMMETRY_TOL * real.amax().max(1.0) {
            return Err(Error::SymmetryViolation { residual });
        }
        out.row_mut(t).copy_from(&real.transpose());
    }
    ReturnsPanel::from_matrix(out)
}

/// `count` independent realizations with seeds `seed + index`, generated in
/// parallel.
pub fn synthesize_ensemble(spec: &SynthSpec, count: usize) -> Result<Vec<ReturnsPanel>> {
    let sampler = spec.sampler()?;
    (0..count)
        .into_par_iter()
        .map(|r| {
            let seed = spec.seed.wrapping_add(r as u64);
            realize(
                spec,
                &NoiseSampler {
                    seed,
                    ..sampler.clone()
                },
            )
        })
        .collect()
}

/// Integer periods of the demonstration scenario, longest first.
pub const EXAMPLE1_PERIODS: [u64; 7] = [48, 16, 12, 8, 6, 4, 3];

/// Default horizon of the demonstration scenario.
pub const EXAMPLE1_HORIZON: usize = 12_000;

/// Where things live in [`example1_scenario`]. Indices are bin positions in
/// increasing frequency order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example1Layout {
    /// Bins carrying a deterministic harmonic.
    pub harmonic_bins: [usize; 2],
    /// Bin whose noise is strongly improper.
    pub cyclostationary_bin: usize,
    /// Bin sharing the amplitude-modulated component with the one above.
    pub modulation_partner_bin: usize,
    /// Bins with proper, uncorrelated noise only.
    pub proper_bins: Vec<usize>,
}

pub fn example1_layout() -> Example1Layout {
    Example1Layout {
        harmonic_bins: [2, 4],
        cyclostationary_bin: 0,
        modulation_partner_bin: 1,
        proper_bins: vec![2, 3, 4, 5, 6],
    }
}

/// Two harmonics buried in cyclostationary noise with 100 times their power.
///
/// The noise has two parts. An amplitude-modulated part
/// `ξ(t)·(cos ω₁t + ½ cos 3ω₁t)` with white real `ξ` puts a rank-one
/// dual-frequency covariance on bins 48 and 16; its pseudo-covariance at the
/// slow bin is large relative to the covariance. Five higher bins carry
/// proper, uncorrelated noise. The harmonics sit at periods 12 and 6 with
/// real spectral means, so their only trace in the absolute spectrum is a
/// tiny bump on top of the noise floor.
pub fn example1_scenario() -> SynthSpec {
    let grid = FrequencyGrid::from_periods(&EXAMPLE1_PERIODS, "sample").expect("static grid");
    let m = grid.len();
    let layout = example1_layout();
    let modulation_var = 1.0;
    let proper_var = 0.06;
    let v = [1.0, 0.5];

    let mut v_aug = DVector::<Complex64>::zeros(2 * m);
    v_aug[layout.cyclostationary_bin] = Complex64::new(v[0], 0.0);
    v_aug[layout.modulation_partner_bin] = Complex64::new(v[1], 0.0);
    for i in 0..m {
        v_aug[m + i] = v_aug[i].conj();
    }
    let mut cov = &v_aug * v_aug.adjoint() * Complex64::new(modulation_var, 0.0);
    for &b in &layout.proper_bins {
        cov[(b, b)] += proper_var;
        cov[(m + b, m + b)] += proper_var;
    }

    // Time-averaged power of one bin is (R + |m|²) / M, so
    // noise = Σ R / M and each harmonic contributes |m|² / M.
    let noise_power = (modulation_var * (v[0] * v[0] + v[1] * v[1])
        + proper_var * layout.proper_bins.len() as f64)
        / m as f64;
    let harmonic = (noise_power / 100.0 / 2.0 * m as f64).sqrt();
    let mut mean = DVector::<Complex64>::zeros(m);
    for &b in &layout.harmonic_bins {
        mean[b] = Complex64::new(harmonic, 0.0);
    }
    SynthSpec::new(
        grid,
        1,
        AugmentedVector::from_upper(mean),
        cov,
        EXAMPLE1_HORIZON,
        1,
    )
    .expect("static scenario is valid")
}

/// Configuration of a seeded seasonal market.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalMarket {
    pub n_assets: usize,
    /// Seasonal periods in months.
    pub periods: Vec<u64>,
    /// Number of monthly returns.
    pub months: usize,
    /// Date of the first price; returns start one month later.
    pub start: NaiveDate,
    /// Per-asset, per-period seasonal amplitude drawn uniformly from this range.
    pub amplitude: (f64, f64),
    /// Monthly volatility of the noise.
    pub volatility: f64,
    /// Pairwise correlation of the noise across assets.
    pub correlation: f64,
    /// Constant monthly drift shared by all assets.
    pub drift: f64,
    pub seed: u64,
}

impl Default for SeasonalMarket {
    fn default() -> Self {
        Self {
            n_assets: 5,
            periods: vec![12, 6],
            months: 120,
            start: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            amplitude: (0.01, 0.02),
            volatility: 0.04,
            correlation: 0.3,
            drift: 0.005,
            seed: 0,
        }
    }
}

impl SeasonalMarket {
    /// Spectral description of the seasonal part and the noise.
    pub fn spec(&self) -> Result<SynthSpec> {
        if self.n_assets == 0 || self.months == 0 {
            return Err(Error::validation("market needs assets and months"));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return Err(Error::validation("correlation must lie in [0, 1)"));
        }
        let grid = FrequencyGrid::from_periods(&self.periods, "month")?;
        let (m, n) = (grid.len(), self.n_assets);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        // a·cos(ωt + φ) has spectral mean a·√(2M)/2·e^{jφ}
        let coeff = (2.0 * m as f64).sqrt() / 2.0;
        let mean = DVector::from_fn(m * n, |_, _| {
            let a = rng.random_range(self.amplitude.0..=self.amplitude.1);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(a * coeff, phi)
        });
        // proper noise, equal share per bin; time-domain variance Σ R / M
        let var = self.volatility * self.volatility;
        let k = m * n;
        let mut cov = DMatrix::<Complex64>::zeros(2 * k, 2 * k);
        for b in 0..m {
            for i in 0..n {
                for j in 0..n {
                    let c = if i == j { var } else { var * self.correlation };
                    cov[(b * n + i, b * n + j)] = Complex64::new(c, 0.0);
                    cov[(k + b * n + i, k + b * n + j)] = Complex64::new(c, 0.0);
                }
            }
        }
        SynthSpec::new(
            grid,
            n,
            AugmentedVector::from_upper(mean),
            cov,
            self.months,
            self.seed,
        )
    }

    /// Monthly returns, dated from one month after `start`.
    pub fn returns(&self) -> Result<ReturnsPanel> {
        let raw = synthesize_panel(&self.spec()?)?;
        let data = raw.returns().add_scalar(self.drift);
        let stamps: Vec<Stamp> = monthly_stamps(self.start, self.months + 1).split_off(1);
        let names = (1..=self.n_assets).map(|i| format!("asset_{i}")).collect();
        ReturnsPanel::new(stamps, data, names, 12, 0)
    }

    /// Prices starting at 100 on `start`, compounding [`SeasonalMarket::returns`].
    pub fn prices(&self) -> Result<PricePanel> {
        let r = self.returns()?;
        if let Some(v) = r.returns().iter().find(|v| **v <= -1.0) {
            return Err(Error::validation(format!(
                "synthetic return {v} wipes out a price"
            )));
        }
        let n = self.n_assets;
        let mut prices = DMatrix::from_element(self.months + 1, n, 100.0);
        for t in 0..self.months {
            for i in 0..n {
                prices[(t + 1, i)] = prices[(t, i)] * (1.0 + r.returns()[(t, i)]);
            }
        }
        PricePanel::new(
            monthly_stamps(self.start, self.months + 1),
            prices,
            r.asset_names().to_vec(),
        )
    }
}
