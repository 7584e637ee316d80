//! Variance-targeted mean-variance portfolios.
//!
//! Both the spectral and the classical problem are solved in the form
//!
//! ```text
//! maximise  Re(mᴴw)   subject to  wᴴRw = σ₀²
//! ```
//!
//! whose solution is `w = σ₀ R⁻¹m / √(mᴴR⁻¹m)` with multiplier
//! `λ = √(mᴴR⁻¹m) / (2σ₀)`. In the spectral case `m`, `R` and `w` are
//! augmented, the weights are conjugate-symmetric and the time-domain
//! allocation is recovered as `w(t) = Φ̲(t) w̲`.
//!
//! No leverage or long-only constraints are imposed; the net exposure of a
//! spectral allocation moves with the calendar.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::augmented::AugmentedVector;
use crate::basis::{apply_basis, bin_phasors, require_symmetric, split_real};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::stats::{EstimatorMode, SpectralMoments};

/// Means with norm at or below this carry no return direction.
pub const DEGENERATE_MEAN_TOL: f64 = 1e-14;

/// Relative scale of the automatic ridge.
pub const AUTO_RIDGE_SCALE: f64 = 1e-8;

/// Regularisation added to the covariance diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Ridge {
    /// `1e-8 · trace(R) / dim`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Ridge {
    fn resolve(self, trace: f64, dim: usize) -> f64 {
        match self {
            Ridge::Auto => AUTO_RIDGE_SCALE * trace.max(0.0) / dim.max(1) as f64,
            Ridge::Fixed(e) => e,
        }
    }
}

impl fmt::Display for Ridge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ridge::Auto => f.write_str("auto"),
            Ridge::Fixed(e) => write!(f, "{e}"),
        }
    }
}

impl FromStr for Ridge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Ridge::Auto);
        }
        let e: f64 = s.parse().map_err(|_| {
            Error::validation(format!("ridge '{s}' is neither 'auto' nor a number"))
        })?;
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::validation(format!(
                "ridge {e} must be finite and non-negative"
            )));
        }
        Ok(Ridge::Fixed(e))
    }
}

/// Target volatility per sample period and covariance regularisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSpec {
    sigma0: f64,
    ridge: Ridge,
}

impl RiskSpec {
    pub fn new(sigma0: f64, ridge: Ridge) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::validation(format!(
                "target volatility {sigma0} must be positive"
            )));
        }
        if let Ridge::Fixed(e) = ridge {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::validation(format!(
                    "ridge {e} must be finite and non-negative"
                )));
            }
        }
        Ok(Self { sigma0, ridge })
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn ridge(&self) -> Ridge {
        self.ridge
    }
}

/// Solution of the variance-targeted problem for any scalar field.
struct Targeted<T: ComplexField> {
    weights: DVector<T>,
    /// `mᴴ(R + εI)⁻¹m`
    quad: f64,
    ridge: f64,
}

fn variance_targeted<T>(
    cov: &DMatrix<T>,
    mean: &DVector<T>,
    sigma0: f64,
    ridge: Ridge,
) -> Result<Targeted<T>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let dim = mean.len();
    if cov.nrows() != dim || cov.ncols() != dim {
        return Err(Error::validation(format!(
            "covariance is {}×{} but mean has length {dim}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let norm = mean.norm();
    if !norm.is_finite() || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(
            "mean or covariance contains non-finite values",
        ));
    }
    if norm <= DEGENERATE_MEAN_TOL {
        return Err(Error::DegenerateMean { norm });
    }
    let trace: f64 = (0..dim).map(|i| cov[(i, i)].real()).sum();
    let eps = ridge.resolve(trace, dim);
    let mut a = (cov + cov.adjoint()).map(|v| v * T::from_real(0.5));
    for i in 0..dim {
        a[(i, i)] += T::from_real(eps);
    }

    let singular = |detail: String| {
        let hint = if eps == 0.0 {
            "; retry with a positive ridge"
        } else {
            ""
        };
        Error::Singular {
            detail: format!("{detail}{hint}"),
        }
    };
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| singular("Cholesky factorisation failed".into()))?;
    let pivots: Vec<f64> = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v.real().powi(2))
        .collect();
    let (lo, hi) = pivots.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| {
        (lo.min(p), hi.max(p))
    });
    if lo.is_nan() || lo <= 1e-15 * hi {
        return Err(singular(format!("pivot ratio {:e}", lo / hi)));
    }

    let mut y = chol.solve(mean);
    // one step of iterative refinement
    let residual = mean - &a * &y;
    y += chol.solve(&residual);

    let quad = mean.dotc(&y).real();
    if quad.is_nan() || quad <= 0.0 {
        return Err(singular(format!("mᴴR⁻¹m = {quad:e}")));
    }
    let mut w = y.map(|v| v * T::from_real(sigma0 / quad.sqrt()));
    rescale_to_target(&mut w, &a, sigma0);
    Ok(Targeted {
        weights: w,
        quad,
        ridge: eps,
    })
}

/// Scale `w` so that `wᴴAw = σ₀²` up to rounding.
fn rescale_to_target<T>(w: &mut DVector<T>, a: &DMatrix<T>, sigma0: f64)
where
    T: ComplexField<RealField = f64> + Copy,
{
    let v = w.dotc(&(a * &*w)).real();
    if v > 0.0 {
        let s = sigma0 / v.sqrt();
        w.apply(|x| *x *= T::from_real(s));
    }
}

/// Optimal augmented spectral weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    grid: FrequencyGrid,
    n_assets: usize,
    weights: AugmentedVector,
    lambda: f64,
    mode: EstimatorMode,
    sigma0: f64,
    ridge: f64,
}

impl SpectralWeights {
    /// Assemble weights from known parts, e.g. after reading them back.
    pub fn from_parts(
        grid: FrequencyGrid,
        n_assets: usize,
        weights: AugmentedVector,
        lambda: f64,
        mode: EstimatorMode,
        sigma0: f64,
        ridge: f64,
    ) -> Result<Self> {
        if weights.len() != 2 * grid.len() * n_assets {
            return Err(Error::validation(format!(
                "weights have length {}, expected {}",
                weights.len(),
                2 * grid.len() * n_assets
            )));
        }
        require_symmetric(&weights)?;
        Ok(Self {
            grid,
            n_assets,
            weights: weights.symmetrized(),
            lambda,
            mode,
            sigma0,
            ridge,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn weights(&self) -> &AugmentedVector {
        &self.weights
    }

    /// The realised Lagrange multiplier.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// The ridge actually added to the covariance diagonal.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// `w̲ᴴ(R̲ + εI)w̲` for a covariance of matching size.
    pub fn variance(&self, cov: &DMatrix<Complex64>) -> f64 {
        let w = self.weights.to_stacked();
        let mut v = w.dotc(&(cov * &w)).re;
        v += self.ridge * w.norm_squared();
        v
    }
}

pub fn solve_spectral_mvo(moments: &SpectralMoments, risk: &RiskSpec) -> Result<SpectralWeights> {
    let mean = moments.mean().to_stacked();
    let cov = moments.covariance();
    let sol = variance_targeted(cov, &mean, risk.sigma0, risk.ridge)?;
    // repair float drift in the conjugate symmetry, then restore the target
    let sym = AugmentedVector::from_stacked(&sol.weights)?.symmetrized();
    let mut stacked = sym.to_stacked();
    let mut a = cov.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += Complex64::new(sol.ridge, 0.0);
    }
    rescale_to_target(&mut stacked, &a, risk.sigma0);
    Ok(SpectralWeights {
        grid: moments.grid().clone(),
        n_assets: moments.n_assets(),
        weights: AugmentedVector::from_upper(stacked.rows(0, sym.half_len()).into_owned()),
        lambda: sol.quad.sqrt() / (2.0 * risk.sigma0),
        mode: moments.mode(),
        sigma0: risk.sigma0,
        ridge: sol.ridge,
    })
}

/// Time-domain weights `w(t)` for a contiguous range of sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPath {
    start: i64,
    weights: DMatrix<f64>,
    max_imag_residual: f64,
}

impl AllocationPath {
    /// Sample index of the first row.
    pub fn start(&self) -> i64 {
        self.start
    }

    /// `T × N`, row `r` holding `w(start + r)`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn max_imag_residual(&self) -> f64 {
        self.max_imag_residual
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }
}

pub fn retrieve_allocation(
    weights: &SpectralWeights,
    t_range: Range<i64>,
) -> Result<AllocationPath> {
    if t_range.end < t_range.start {
        return Err(Error::validation(format!(
            "time range {}..{} is reversed",
            t_range.start, t_range.end
        )));
    }
    let n = weights.n_assets;
    let len = (t_range.end - t_range.start) as usize;
    let mut out = DMatrix::zeros(len, n);
    let mut worst = 0.0f64;
    for (r, t) in t_range.clone().enumerate() {
        let values = apply_basis(&bin_phasors(&weights.grid, t), n, &weights.weights);
        let (real, residual) = split_real(&values);
        worst = worst.max(residual);
        out.row_mut(r).copy_from(&real.transpose());
    }
    Ok(AllocationPath {
        start: t_range.start,
        weights: out,
        max_imag_residual: worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    ClassicalMvo,
    EqualWeight,
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::ClassicalMvo => "classical-mvo",
            WeightScheme::EqualWeight => "equal-weight",
        })
    }
}

/// Time-invariant holdings.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticWeights {
    weights: DVector<f64>,
    scheme: WeightScheme,
}

impl StaticWeights {
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }
}

/// Classical Markowitz portfolio in the same variance-targeted form as the
/// spectral one, so that backtests compare the modelling and not the scaling.
pub fn solve_classical_mvo(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    risk: &RiskSpec,
) -> Result<StaticWeights> {
    let sol = variance_targeted(cov, mean, risk.sigma0, risk.ridge)?;
    Ok(StaticWeights {
        weights: sol.weights,
        scheme: WeightScheme::ClassicalMvo,
    })
}

pub fn equal_weight(n_assets: usize) -> Result<StaticWeights> {
    if n_assets == 0 {
        return Err(Error::validation(
            "equal weighting needs at least one asset",
        ));
    }
    Ok(StaticWeights {
        weights: DVector::from_element(n_assets, 1.0 / n_assets as f64),
        scheme: WeightScheme::EqualWeight,
    })
}
