//! Discrete angular-frequency grids.
//!
//! A grid holds `M` angular frequencies in `(0, π]`, strictly increasing. The
//! DC bin is never part of a grid: a constant offset has no conjugate partner
//! and would break the `2M` column count of the augmented basis.
//!
//! Grids are normally built from integer periods measured in samples
//! (`ω = 2π / period`). Such grids are commensurate: any window whose length
//! is a multiple of [`FrequencyGrid::lcm_period`] makes the basis columns
//! exactly orthogonal under time averaging.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    periods: Option<Vec<u64>>,
    label: String,
}

impl FrequencyGrid {
    /// Build a grid from integer periods (in samples). Periods are sorted so
    /// that the angular frequencies come out increasing.
    pub fn from_periods(periods: &[u64], label: impl Into<String>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::validation(
                "frequency grid needs at least one period",
            ));
        }
        let mut sorted = periods.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::validation(format!(
                    "duplicate period {} in grid",
                    w[0]
                )));
            }
        }
        if let Some(&p) = sorted.iter().find(|&&p| p < 2) {
            return Err(Error::validation(format!(
                "period {p} is below the Nyquist limit of 2 samples"
            )));
        }
        if sorted.contains(&2) {
            log::warn!("grid contains the Nyquist period (2 samples); its conjugate pair is degenerate in phase");
        }
        let omegas = sorted.iter().map(|&p| 2.0 * PI / p as f64).collect();
        Ok(Self {
            omegas,
            periods: Some(sorted),
            label: label.into(),
        })
    }

    /// Build a grid from raw angular frequencies (radians per sample).
    pub fn from_omegas(omegas: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::validation(
                "frequency grid needs at least one frequency",
            ));
        }
        for (i, &w) in omegas.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 || w > PI {
                return Err(Error::validation(format!(
                    "frequency {w} at position {i} is outside (0, π]"
                )));
            }
        }
        for w in omegas.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::validation(
                    "frequencies must be strictly increasing without duplicates",
                ));
            }
        }
        if omegas.contains(&PI) {
            log::warn!(
                "grid contains the Nyquist frequency; its conjugate pair is degenerate in phase"
            );
        }
        Ok(Self {
            omegas,
            periods: None,
            label: label.into(),
        })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Periods in samples, longest first, when the grid was built from periods.
    pub fn periods(&self) -> Option<&[u64]> {
        self.periods.as_deref()
    }

    /// Unit tag for reporting (e.g. "month").
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of bins `M`.
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Normalisation constant `2M` of the augmented basis.
    pub fn augmentation(&self) -> f64 {
        2.0 * self.omegas.len() as f64
    }

    /// Least common period of the grid, in samples.
    pub fn lcm_period(&self) -> Option<u64> {
        self.periods
            .as_ref()
            .map(|ps| ps.iter().fold(1u64, |acc, &p| lcm(acc, p)))
    }

    pub fn has_nyquist(&self) -> bool {
        self.omegas.iter().any(|&w| (w - PI).abs() < 1e-15)
    }

    /// Phase angle `ω_m t` of bin `m`, reduced exactly modulo the period when
    /// one is known so that sample paths are bit-exactly periodic.
    pub fn phase(&self, bin: usize, t: i64) -> f64 {
        match &self.periods {
            Some(ps) => {
                let p = ps[bin] as i64;
                2.0 * PI * (t.rem_euclid(p) as f64) / p as f64
            }
            None => self.omegas[bin] * t as f64,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}
