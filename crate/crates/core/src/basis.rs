//! The augmented spectral basis.
//!
//! For sample index `t`, a grid `ω_1..ω_M` and `N` assets the basis is the
//! `N × 2MN` matrix
//!
//! ```text
//! Φ̲(t) = [ Φ(t) | Φ*(t) ],   Φ(t) = (1/√(2M)) [ e^{jω_1 t} I_N  …  e^{jω_M t} I_N ]
//! ```
//!
//! Its rows are orthonormal (`Φ̲ Φ̲ᴴ = I_N`), so `Φ̲ᴴ` is a right inverse and
//! the least-squares spectrum of a time-domain vector is simply `Φ̲ᴴ x`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::augmented::AugmentedVector;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Absolute tolerance for conjugate-symmetry and realness checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AugmentedSpectralBasis {
    t: i64,
    grid: FrequencyGrid,
    n_assets: usize,
    values: DMatrix<Complex64>,
}

impl AugmentedSpectralBasis {
    pub fn t(&self) -> i64 {
        self.t
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    /// The `N × 2MN` matrix.
    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }
}

/// Per-bin coefficients `e^{jω_m t} / √(2M)`.
pub(crate) fn bin_phasors(grid: &FrequencyGrid, t: i64) -> Vec<Complex64> {
    let scale = 1.0 / grid.augmentation().sqrt();
    (0..grid.len())
        .map(|m| Complex64::from_polar(scale, grid.phase(m, t)))
        .collect()
}

/// `Φ̲(t) v` evaluated blockwise, without materialising the basis. Returns
/// the complex result; callers decide how to treat the imaginary part.
pub(crate) fn apply_basis(
    phasors: &[Complex64],
    n_assets: usize,
    spectrum: &AugmentedVector,
) -> Vec<Complex64> {
    let (up, lo) = (spectrum.upper(), spectrum.lower());
    let mut out = vec![Complex64::new(0.0, 0.0); n_assets];
    for (m, phi) in phasors.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            let k = m * n_assets + i;
            *o += phi * up[k] + phi.conj() * lo[k];
        }
    }
    out
}

/// Real part of a complex vector together with its largest imaginary magnitude.
pub(crate) fn split_real(values: &[Complex64]) -> (DVector<f64>, f64) {
    let residual = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    (
        DVector::from_iterator(values.len(), values.iter().map(|z| z.re)),
        residual,
    )
}

pub(crate) fn require_symmetric(spectrum: &AugmentedVector) -> Result<()> {
    if spectrum.is_conjugate_symmetric() {
        return Ok(());
    }
    let residual = spectrum.symmetry_residual();
    if residual > SYMMETRY_TOL * spectrum.max_abs().max(1.0) {
        return Err(Error::SymmetryViolation { residual });
    }
    Ok(())
}

pub fn build_basis(
    t: i64,
    grid: &FrequencyGrid,
    n_assets: usize,
) -> Result<AugmentedSpectralBasis> {
    if n_assets == 0 {
        return Err(Error::validation("basis needs at least one asset"));
    }
    let m_bins = grid.len();
    let half = m_bins * n_assets;
    let phasors = bin_phasors(grid, t);
    let mut values = DMatrix::zeros(n_assets, 2 * half);
    for (m, phi) in phasors.iter().enumerate() {
        for i in 0..n_assets {
            values[(i, m * n_assets + i)] = *phi;
            values[(i, half + m * n_assets + i)] = phi.conj();
        }
    }
    Ok(AugmentedSpectralBasis {
        t,
        grid: grid.clone(),
        n_assets,
        values,
    })
}

/// Map an augmented spectrum to its real time-domain value `x(t) = Φ̲(t) x̲`.
pub fn synthesize_time_value(
    basis: &AugmentedSpectralBasis,
    spectrum: &AugmentedVector,
) -> Result<DVector<f64>> {
    if spectrum.len() != basis.values.ncols() {
        return Err(Error::validation(format!(
            "spectrum length {} does not match basis width {}",
            spectrum.len(),
            basis.values.ncols()
        )));
    }
    require_symmetric(spectrum)?;
    let x = &basis.values * spectrum.to_stacked();
    let (real, residual) = split_real(x.as_slice());
    if residual > SYMMETRY_TOL * real.amax().max(1.0) {
        return Err(Error::SymmetryViolation { residual });
    }
    Ok(real)
}

/// Least-squares spectrum `Φ̲ᴴ(t) x` of a real time-domain vector.
pub fn project_spectrum(
    basis: &AugmentedSpectralBasis,
    x: &DVector<f64>,
) -> Result<AugmentedVector> {
    if x.len() != basis.n_assets {
        return Err(Error::validation(format!(
            "time-domain vector has {} entries, basis expects {}",
            x.len(),
            basis.n_assets
        )));
    }
    let half = basis.values.ncols() / 2;
    let xc = x.map(|v| Complex64::new(v, 0.0));
    let stacked = basis.values.adjoint() * xc;
    // The lower half is the conjugate of the upper one by construction.
    Ok(AugmentedVector::from_upper(
        stacked.rows(0, half).into_owned(),
    ))
}
