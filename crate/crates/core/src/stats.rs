//! Centred augmented spectral moments.
//!
//! Method-of-moments estimators over a window of `T` samples:
//!
//! ```text
//! m̲̂ = (1/T) Σ_t Φ̲ᴴ(t) x(t)
//! R̲̂ = (1/T) Σ_t Φ̲ᴴ(t) ŝ(t) ŝᵀ(t) Φ̲(t),   ŝ(t) = x(t) − Φ̲(t) m̲̂
//! ```
//!
//! Because `(1/T) Σ Φ̲ᴴ Φ̲ = I / (2M)` on a commensurate window, these
//! recover representation coefficients attenuated by `1/(2M)`.
//! [`EstimatorMode::Consistent`] rescales the mean by `2M` and the covariance
//! by `(2M)²`; the default keeps the literal form.
//!
//! The covariance is assembled from `z(t) = Φ̲ᴴ(t) ŝ(t)`, whose lower half is
//! the conjugate of its upper half because `ŝ(t)` is real. Only the `R`
//! (upper-upper) and `P` (upper-lower) blocks are accumulated; the other two
//! are their conjugates, so the augmented block structure is exact.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::augmented::AugmentedVector;
use crate::basis::{apply_basis, bin_phasors, require_symmetric};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::panel::ReturnsPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorMode {
    /// Plain time averages.
    #[default]
    Literal,
    /// Time averages rescaled to coefficient scale.
    Consistent,
}

impl EstimatorMode {
    /// Multiplier applied to the mean estimate.
    pub fn mean_scale(self, grid: &FrequencyGrid) -> f64 {
        match self {
            EstimatorMode::Literal => 1.0,
            EstimatorMode::Consistent => grid.augmentation(),
        }
    }

    /// Multiplier applied to second-moment estimates.
    pub fn covariance_scale(self, grid: &FrequencyGrid) -> f64 {
        self.mean_scale(grid).powi(2)
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorMode::Literal => "literal",
            EstimatorMode::Consistent => "consistent",
        })
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "literal" => Ok(EstimatorMode::Literal),
            "consistent" => Ok(EstimatorMode::Consistent),
            other => Err(Error::validation(format!(
                "unknown estimator mode '{other}' (expected literal or consistent)"
            ))),
        }
    }
}

/// Augmented spectral mean and covariance over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMoments {
    grid: FrequencyGrid,
    n_assets: usize,
    mean: AugmentedVector,
    covariance: DMatrix<Complex64>,
    sample_count: usize,
    mode: EstimatorMode,
}

/// Tolerance used when validating externally supplied moments.
const STRUCTURE_TOL: f64 = 1e-9;

impl SpectralMoments {
    /// Validate and assemble moments. The covariance must already have
    /// augmented block structure (up to a small relative tolerance).
    pub fn new(
        grid: FrequencyGrid,
        n_assets: usize,
        mean: AugmentedVector,
        covariance: DMatrix<Complex64>,
        sample_count: usize,
        mode: EstimatorMode,
    ) -> Result<Self> {
        let dim = 2 * grid.len() * n_assets;
        if n_assets == 0 {
            return Err(Error::validation("moments need at least one asset"));
        }
        if mean.len() != dim {
            return Err(Error::validation(format!(
                "mean has length {}, expected 2MN = {dim}",
                mean.len()
            )));
        }
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::validation(format!(
                "covariance is {}×{}, expected {dim}×{dim}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        require_symmetric(&mean)?;
        let scale = covariance.camax().max(f64::MIN_POSITIVE);
        let drift = structure_residual(&covariance);
        if drift > STRUCTURE_TOL * scale {
            return Err(Error::validation(format!(
                "covariance lacks augmented Hermitian structure (residual {drift:e})"
            )));
        }
        Ok(Self {
            grid,
            n_assets,
            mean: mean.symmetrized(),
            covariance: structure_project(&covariance)?,
            sample_count,
            mode,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_bins(&self) -> usize {
        self.grid.len()
    }

    pub fn mean(&self) -> &AugmentedVector {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<Complex64> {
        &self.covariance
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    /// `m(ω_m)`, the spectral mean of bin `m`.
    pub fn bin_mean(&self, m: usize) -> DVector<Complex64> {
        self.mean
            .upper()
            .rows(m * self.n_assets, self.n_assets)
            .into_owned()
    }

    /// `R(ω_m, ω_n)`; the diagonal `m == n` is the spectral covariance.
    pub fn r_block(&self, m: usize, n: usize) -> DMatrix<Complex64> {
        let k = self.n_assets;
        self.covariance.view((m * k, n * k), (k, k)).into_owned()
    }

    /// `P(ω_m, ω_n)`; the diagonal `m == n` is the spectral pseudo-covariance.
    pub fn p_block(&self, m: usize, n: usize) -> DMatrix<Complex64> {
        let k = self.n_assets;
        let half = self.covariance.nrows() / 2;
        self.covariance
            .view((m * k, half + n * k), (k, k))
            .into_owned()
    }

    /// Spectral norms `(‖R(ω_m)‖₂, ‖P(ω_m)‖₂)` per bin.
    pub fn bin_norms(&self) -> Vec<(f64, f64)> {
        (0..self.n_bins())
            .map(|m| {
                (
                    spectral_norm(&self.r_block(m, m)),
                    spectral_norm(&self.p_block(m, m)),
                )
            })
            .collect()
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Absolute (non-centred) second spectral moment per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    grid: FrequencyGrid,
    blocks: Vec<DMatrix<Complex64>>,
}

impl PsdMatrix {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// `R̃(ω_m)` as an `N × N` matrix.
    pub fn bin(&self, m: usize) -> &DMatrix<Complex64> {
        &self.blocks[m]
    }

    pub fn bins(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }
}

/// The trailing rows of `panel` whose count is the largest multiple of the
/// grid's least common period. Grids without integer periods use the whole
/// panel. Returns the window and the number of leading rows discarded.
pub fn commensurate_window(
    panel: &ReturnsPanel,
    grid: &FrequencyGrid,
) -> Result<(ReturnsPanel, usize)> {
    let t = panel.len();
    if t == 0 {
        return Err(Error::EmptyInput("returns panel has no rows".into()));
    }
    let used = match grid.lcm_period() {
        Some(l) => (t as u64 / l * l) as usize,
        None => t,
    };
    if used == 0 {
        return Err(Error::EmptyInput(format!(
            "{t} samples is shorter than the least common period {} of the grid",
            grid.lcm_period().unwrap_or(0)
        )));
    }
    if used < 2 {
        return Err(Error::validation("estimation needs at least two samples"));
    }
    let discarded = t - used;
    if discarded > 0 {
        log::warn!(
            "snapping estimation window to {used} samples ({discarded} leading samples discarded)"
        );
    }
    Ok((panel.slice_rows(discarded, used)?, discarded))
}

fn real_row(panel: &ReturnsPanel, r: usize) -> impl Iterator<Item = f64> + '_ {
    panel
        .returns()
        .row(r)
        .into_iter()
        .copied()
        .collect::<Vec<_>>()
        .into_iter()
}

/// Spectral mean estimate over the commensurate window of `panel`.
pub fn estimate_spectral_mean(
    panel: &ReturnsPanel,
    grid: &FrequencyGrid,
    mode: EstimatorMode,
) -> Result<AugmentedVector> {
    let (window, _) = commensurate_window(panel, grid)?;
    Ok(mean_over(&window, grid, mode))
}

fn mean_over(window: &ReturnsPanel, grid: &FrequencyGrid, mode: EstimatorMode) -> AugmentedVector {
    let n = window.n_assets();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len() * n];
    for r in 0..window.len() {
        let phasors = bin_phasors(grid, window.time_index(r));
        let x: Vec<f64> = real_row(window, r).collect();
        for (m, phi) in phasors.iter().enumerate() {
            let pc = phi.conj();
            for (i, &xi) in x.iter().enumerate() {
                acc[m * n + i] += pc * xi;
            }
        }
    }
    let scale = mode.mean_scale(grid) / window.len() as f64;
    AugmentedVector::from_upper(DVector::from_iterator(
        acc.len(),
        acc.into_iter().map(|z| z * scale),
    ))
}

/// Accumulated `(R, P)` halves, unscaled sums over the window.
fn accumulate_second_moments<F>(
    window: &ReturnsPanel,
    grid: &FrequencyGrid,
    mut centre: F,
) -> (DMatrix<Complex64>, DMatrix<Complex64>)
where
    F: FnMut(i64, &[Complex64], &mut [f64]),
{
    let n = window.n_assets();
    let half = grid.len() * n;
    let mut r_acc = DMatrix::<Complex64>::zeros(half, half);
    let mut p_acc = DMatrix::<Complex64>::zeros(half, half);
    let mut z = vec![Complex64::new(0.0, 0.0); half];
    let mut s = vec![0.0; n];
    for r in 0..window.len() {
        let t = window.time_index(r);
        let phasors = bin_phasors(grid, t);
        for (i, v) in s.iter_mut().enumerate() {
            *v = window.returns()[(r, i)];
        }
        centre(t, &phasors, &mut s);
        for (m, phi) in phasors.iter().enumerate() {
            let pc = phi.conj();
            for i in 0..n {
                z[m * n + i] = pc * s[i];
            }
        }
        for b in 0..half {
            let zb = z[b];
            let zbc = zb.conj();
            for a in 0..half {
                r_acc[(a, b)] += z[a] * zbc;
                p_acc[(a, b)] += z[a] * zb;
            }
        }
    }
    (r_acc, p_acc)
}

fn assemble_augmented(r: &DMatrix<Complex64>, p: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let half = r.nrows();
    let mut out = DMatrix::zeros(2 * half, 2 * half);
    out.view_mut((0, 0), (half, half)).copy_from(r);
    out.view_mut((0, half), (half, half)).copy_from(p);
    out.view_mut((half, 0), (half, half))
        .copy_from(&p.map(|z| z.conj()));
    out.view_mut((half, half), (half, half))
        .copy_from(&r.map(|z| z.conj()));
    out
}

/// Raw (pre-projection) covariance estimate. Exposed to tests only.
fn raw_covariance(
    window: &ReturnsPanel,
    grid: &FrequencyGrid,
    mean: &AugmentedVector,
    mode: EstimatorMode,
) -> DMatrix<Complex64> {
    let n = window.n_assets();
    let (r, p) = accumulate_second_moments(window, grid, |_, phasors, s| {
        let h = apply_basis(phasors, n, mean);
        for (si, hi) in s.iter_mut().zip(h) {
            *si -= hi.re;
        }
    });
    let scale = mode.covariance_scale(grid) / window.len() as f64;
    assemble_augmented(&r, &p) * Complex64::new(scale, 0.0)
}

/// Spectral covariance estimate centred on `mean`, which must come from the
/// same panel, grid and mode.
pub fn estimate_spectral_covariance(
    panel: &ReturnsPanel,
    grid: &FrequencyGrid,
    mean: &AugmentedVector,
    mode: EstimatorMode,
) -> Result<SpectralMoments> {
    let n = panel.n_assets();
    let dim = 2 * grid.len() * n;
    if mean.len() != dim {
        return Err(Error::validation(format!(
            "mean has length {}, expected 2MN = {dim}",
            mean.len()
        )));
    }
    require_symmetric(mean)?;
    let (window, _) = commensurate_window(panel, grid)?;
    let cov = structure_project(&raw_covariance(&window, grid, mean, mode))?;
    Ok(SpectralMoments {
        grid: grid.clone(),
        n_assets: n,
        mean: mean.symmetrized(),
        covariance: cov,
        sample_count: window.len(),
        mode,
    })
}

/// Two-pass estimate of mean then covariance on one window.
pub fn estimate_moments(
    panel: &ReturnsPanel,
    grid: &FrequencyGrid,
    mode: EstimatorMode,
) -> Result<SpectralMoments> {
    let (window, _) = commensurate_window(panel, grid)?;
    let mean = mean_over(&window, grid, mode);
    estimate_spectral_covariance(&window, grid, &mean, mode)
}

/// `R̃(ω_m) = m(ω_m) mᴴ(ω_m) + R(ω_m)` for every bin.
pub fn compute_psd(moments: &SpectralMoments) -> PsdMatrix {
    let blocks = (0..moments.n_bins())
        .map(|m| {
            let mu = moments.bin_mean(m);
            &mu * mu.adjoint() + moments.r_block(m, m)
        })
        .collect();
    PsdMatrix {
        grid: moments.grid.clone(),
        blocks,
    }
}

/// Direct absolute-moment estimate `(1/T) Σ_t (Φ_mᴴ(t) x(t)) (Φ_mᴴ(t) x(t))ᴴ`
/// per bin, on the same commensurate window and scale as the moment
/// estimators.
pub fn direct_psd(
    panel: &ReturnsPanel,
    grid: &FrequencyGrid,
    mode: EstimatorMode,
) -> Result<PsdMatrix> {
    let (window, _) = commensurate_window(panel, grid)?;
    let (r, _) = accumulate_second_moments(&window, grid, |_, _, _| {});
    let scale = Complex64::new(mode.covariance_scale(grid) / window.len() as f64, 0.0);
    let n = window.n_assets();
    let blocks = (0..grid.len())
        .map(|m| r.view((m * n, m * n), (n, n)).into_owned() * scale)
        .collect();
    Ok(PsdMatrix {
        grid: grid.clone(),
        blocks,
    })
}

/// Largest elementwise deviation of `raw` from its structure projection.
pub fn structure_residual(raw: &DMatrix<Complex64>) -> f64 {
    match structure_project(raw) {
        Ok(p) => (raw - p).camax(),
        Err(_) => f64::INFINITY,
    }
}

/// Re-impose Hermitian symmetry and augmented block structure
/// `[[R, P], [P*, R*]]` on a square matrix of even size. This is the
/// orthogonal projection onto that (real-linear) subspace, hence idempotent
/// and non-expansive.
pub fn structure_project(raw: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if raw.nrows() != raw.ncols() || !raw.nrows().is_multiple_of(2) {
        return Err(Error::validation(format!(
            "augmented covariance must be square with even size, got {}×{}",
            raw.nrows(),
            raw.ncols()
        )));
    }
    let half = raw.nrows() / 2;
    let herm = (raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let a = herm.view((0, 0), (half, half));
    let b = herm.view((0, half), (half, half));
    let c = herm.view((half, 0), (half, half));
    let d = herm.view((half, half), (half, half));
    let r = (a + d.map(|z| z.conj())) * Complex64::new(0.5, 0.0);
    let p = (b + c.map(|z| z.conj())) * Complex64::new(0.5, 0.0);
    Ok(assemble_augmented(&r, &p))
}
