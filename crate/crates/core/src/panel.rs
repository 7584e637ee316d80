//! Time-indexed price and return panels.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Months, NaiveDate};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A row timestamp: an ISO-8601 date or a plain integer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stamp {
    Date(NaiveDate),
    Index(i64),
}

impl Stamp {
    /// Month of the year (1–12) for dates.
    pub fn month(&self) -> Option<u32> {
        match self {
            Stamp::Date(d) => Some(d.month()),
            Stamp::Index(_) => None,
        }
    }

    fn same_kind(&self, other: &Stamp) -> bool {
        matches!(
            (self, other),
            (Stamp::Date(_), Stamp::Date(_)) | (Stamp::Index(_), Stamp::Index(_))
        )
    }
}

impl fmt::Display for Stamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stamp::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Stamp::Index(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for Stamp {
    type Err = Error;

    /// Accepts `YYYY-MM-DD`, `YYYY-MM` (first of the month) or an integer.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Stamp::Date(d));
        }
        if let Ok(d) = NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d") {
            return Ok(Stamp::Date(d));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Stamp::Index(i));
        }
        Err(Error::validation(format!("unrecognised timestamp '{s}'")))
    }
}

/// `count` consecutive monthly dates starting at `start`.
pub fn monthly_stamps(start: NaiveDate, count: usize) -> Vec<Stamp> {
    (0..count)
        .map(|k| Stamp::Date(start + Months::new(k as u32)))
        .collect()
}

pub fn index_stamps(count: usize) -> Vec<Stamp> {
    (0..count as i64).map(Stamp::Index).collect()
}

fn check_stamps(stamps: &[Stamp]) -> Result<()> {
    for (i, w) in stamps.windows(2).enumerate() {
        if !w[0].same_kind(&w[1]) {
            return Err(Error::validation(format!(
                "row {}: mixed date and index timestamps",
                i + 1
            )));
        }
        if w[1] <= w[0] {
            return Err(Error::validation(format!(
                "row {}: timestamp {} does not increase on {}",
                i + 1,
                w[1],
                w[0]
            )));
        }
    }
    Ok(())
}

fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("asset_{i}")).collect()
}

/// Strictly positive prices, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    timestamps: Vec<Stamp>,
    prices: DMatrix<f64>,
    asset_names: Vec<String>,
}

impl PricePanel {
    pub fn new(
        timestamps: Vec<Stamp>,
        prices: DMatrix<f64>,
        asset_names: Vec<String>,
    ) -> Result<Self> {
        if timestamps.len() != prices.nrows() {
            return Err(Error::validation(format!(
                "{} timestamps for {} price rows",
                timestamps.len(),
                prices.nrows()
            )));
        }
        if asset_names.len() != prices.ncols() {
            return Err(Error::validation(format!(
                "{} asset names for {} price columns",
                asset_names.len(),
                prices.ncols()
            )));
        }
        if prices.ncols() == 0 {
            return Err(Error::validation("price panel has no assets"));
        }
        check_stamps(&timestamps)?;
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::validation(format!(
                "price {p} is not strictly positive"
            )));
        }
        Ok(Self {
            timestamps,
            prices,
            asset_names,
        })
    }

    pub fn timestamps(&self) -> &[Stamp] {
        &self.timestamps
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn len(&self) -> usize {
        self.prices.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.nrows() == 0
    }

    pub fn n_assets(&self) -> usize {
        self.prices.ncols()
    }
}

/// Per-period returns, one column per asset.
///
/// `origin` is the index of the first row on the global sample clock used by
/// the spectral basis. A panel built from prices starts at zero; the
/// out-of-sample half of a split continues where the in-sample half ends, so
/// basis phases stay aligned across the split.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    timestamps: Vec<Stamp>,
    returns: DMatrix<f64>,
    asset_names: Vec<String>,
    periods_per_year: u32,
    origin: i64,
}

impl ReturnsPanel {
    pub fn new(
        timestamps: Vec<Stamp>,
        returns: DMatrix<f64>,
        asset_names: Vec<String>,
        periods_per_year: u32,
        origin: i64,
    ) -> Result<Self> {
        if timestamps.len() != returns.nrows() {
            return Err(Error::validation(format!(
                "{} timestamps for {} return rows",
                timestamps.len(),
                returns.nrows()
            )));
        }
        if asset_names.len() != returns.ncols() {
            return Err(Error::validation(format!(
                "{} asset names for {} return columns",
                asset_names.len(),
                returns.ncols()
            )));
        }
        if returns.ncols() == 0 {
            return Err(Error::validation("returns panel has no assets"));
        }
        if periods_per_year == 0 {
            return Err(Error::validation("periods_per_year must be positive"));
        }
        check_stamps(&timestamps)?;
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "returns panel contains non-finite values",
            ));
        }
        Ok(Self {
            timestamps,
            returns,
            asset_names,
            periods_per_year,
            origin,
        })
    }

    /// Wrap a raw `T × N` signal with integer timestamps `0..T`, generic asset
    /// names and a monthly calendar.
    pub fn from_matrix(returns: DMatrix<f64>) -> Result<Self> {
        let t = returns.nrows();
        let n = returns.ncols();
        Self::new(index_stamps(t), returns, default_names(n), 12, 0)
    }

    pub fn timestamps(&self) -> &[Stamp] {
        &self.timestamps
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn periods_per_year(&self) -> u32 {
        self.periods_per_year
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.returns.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.nrows() == 0
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Global clock index of row `r`.
    pub fn time_index(&self, row: usize) -> i64 {
        self.origin + row as i64
    }

    /// Rows `start..start + len`, keeping the global clock.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::validation(format!(
                "row range {}..{} exceeds panel length {}",
                start,
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            timestamps: self.timestamps[start..start + len].to_vec(),
            returns: self.returns.rows(start, len).into_owned(),
            asset_names: self.asset_names.clone(),
            periods_per_year: self.periods_per_year,
            origin: self.origin + start as i64,
        })
    }

    pub fn with_periods_per_year(mut self, periods_per_year: u32) -> Result<Self> {
        if periods_per_year == 0 {
            return Err(Error::validation("periods_per_year must be positive"));
        }
        self.periods_per_year = periods_per_year;
        Ok(self)
    }

    /// Copy with every column shifted by `offset`.
    pub fn shifted(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.n_assets() {
            return Err(Error::validation(
                "offset length does not match asset count",
            ));
        }
        let mut returns = self.returns.clone();
        for (j, mut col) in returns.column_iter_mut().enumerate() {
            col.add_scalar_mut(-offset[j]);
        }
        Ok(Self {
            returns,
            ..self.clone()
        })
    }

    /// Per-asset time average.
    pub fn column_means(&self) -> Vec<f64> {
        self.returns.column_iter().map(|c| c.mean()).collect()
    }
}
