//! Augmented complex vectors `[z; z*]`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A complex vector stacked with a second half that is (usually) its
/// conjugate. Spectral means, LS spectrum estimates and spectral portfolio
/// weights are all instances.
///
/// Entry `m * N + i` of either half belongs to frequency bin `m` and asset `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedVector {
    upper: DVector<Complex64>,
    lower: DVector<Complex64>,
    conjugate_symmetric: bool,
}

impl AugmentedVector {
    /// Conjugate-symmetric vector `[upper; conj(upper)]`.
    pub fn from_upper(upper: DVector<Complex64>) -> Self {
        let lower = upper.map(|z| z.conj());
        Self {
            upper,
            lower,
            conjugate_symmetric: true,
        }
    }

    /// Arbitrary pair of halves. The symmetry flag is not set even if the
    /// halves happen to be conjugates; see [`AugmentedVector::symmetry_residual`].
    pub fn from_parts(upper: DVector<Complex64>, lower: DVector<Complex64>) -> Result<Self> {
        if upper.len() != lower.len() {
            return Err(Error::validation(format!(
                "augmented halves differ in length ({} vs {})",
                upper.len(),
                lower.len()
            )));
        }
        Ok(Self {
            upper,
            lower,
            conjugate_symmetric: false,
        })
    }

    /// Split a stacked length-`2K` vector into halves.
    pub fn from_stacked(stacked: &DVector<Complex64>) -> Result<Self> {
        if !stacked.len().is_multiple_of(2) {
            return Err(Error::validation(
                "stacked augmented vector must have even length",
            ));
        }
        let k = stacked.len() / 2;
        Self::from_parts(
            stacked.rows(0, k).into_owned(),
            stacked.rows(k, k).into_owned(),
        )
    }

    pub fn zeros(half_len: usize) -> Self {
        Self::from_upper(DVector::zeros(half_len))
    }

    pub fn upper(&self) -> &DVector<Complex64> {
        &self.upper
    }

    pub fn lower(&self) -> &DVector<Complex64> {
        &self.lower
    }

    /// Length of one half (`MN`).
    pub fn half_len(&self) -> usize {
        self.upper.len()
    }

    /// Full augmented length (`2MN`).
    pub fn len(&self) -> usize {
        2 * self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// Whether conjugate symmetry is enforced by construction.
    pub fn is_conjugate_symmetric(&self) -> bool {
        self.conjugate_symmetric
    }

    /// `max |lower - conj(upper)|`.
    pub fn symmetry_residual(&self) -> f64 {
        self.upper
            .iter()
            .zip(self.lower.iter())
            .map(|(u, l)| (l - u.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Average with the swap-conjugate of itself, which yields the nearest
    /// conjugate-symmetric vector.
    pub fn symmetrized(&self) -> Self {
        let upper = self.upper.zip_map(&self.lower, |u, l| (u + l.conj()) * 0.5);
        Self::from_upper(upper)
    }

    /// Stack into a single length-`2K` vector.
    pub fn to_stacked(&self) -> DVector<Complex64> {
        let k = self.upper.len();
        DVector::from_fn(2 * k, |r, _| {
            if r < k {
                self.upper[r]
            } else {
                self.lower[r - k]
            }
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            upper: &self.upper * Complex64::new(factor, 0.0),
            lower: &self.lower * Complex64::new(factor, 0.0),
            conjugate_symmetric: self.conjugate_symmetric,
        }
    }

    /// Euclidean norm of the stacked vector.
    pub fn norm(&self) -> f64 {
        (self.upper.norm_squared() + self.lower.norm_squared()).sqrt()
    }

    /// Largest entry magnitude across both halves.
    pub fn max_abs(&self) -> f64 {
        self.upper
            .iter()
            .chain(self.lower.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}
