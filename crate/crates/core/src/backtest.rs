//! In-sample estimation, out-of-sample evaluation.
//!
//! Returns are indexed on one clock: `t = 0` is the first in-sample return
//! and the index runs on without a break into the out-of-sample period. The
//! spectral allocation is a deterministic function of `t` fixed at the
//! in-sample close, and `w(t)` is held over the return interval ending at
//! `t`, so evaluation never looks ahead.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result, StageExt};
use crate::grid::FrequencyGrid;
use crate::optimizer::{
    equal_weight, retrieve_allocation, solve_classical_mvo, solve_spectral_mvo, AllocationPath,
    Ridge, RiskSpec, SpectralWeights, StaticWeights,
};
use crate::panel::{PricePanel, ReturnsPanel, Stamp};
use crate::stats::{estimate_moments, EstimatorMode, SpectralMoments};

/// Simple returns `(p(t) − p(t−1)) / p(t−1)`, stamped at `t`.
pub fn compute_returns(prices: &PricePanel, periods_per_year: u32) -> Result<ReturnsPanel> {
    let t = prices.len();
    if t < 2 {
        return Err(Error::EmptyInput(
            "need at least two prices to form a return".into(),
        ));
    }
    let p = prices.prices();
    let r = DMatrix::from_fn(t - 1, prices.n_assets(), |i, j| {
        (p[(i + 1, j)] - p[(i, j)]) / p[(i, j)]
    });
    ReturnsPanel::new(
        prices.timestamps()[1..].to_vec(),
        r,
        prices.asset_names().to_vec(),
        periods_per_year,
        0,
    )
}

/// Rows strictly before `boundary`, and rows at or after it.
pub fn split_sample(
    returns: &ReturnsPanel,
    boundary: Stamp,
) -> Result<(ReturnsPanel, ReturnsPanel)> {
    let stamps = returns.timestamps();
    let (first, last) = match (stamps.first(), stamps.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::EmptyInput("cannot split an empty panel".into())),
    };
    if std::mem::discriminant(&boundary) != std::mem::discriminant(&first) {
        return Err(Error::validation(format!(
            "boundary {boundary} is not the same kind of timestamp as the data"
        )));
    }
    if boundary <= first || boundary > last {
        return Err(Error::validation(format!(
            "boundary {boundary} must lie after {first} and no later than {last}"
        )));
    }
    let cut = stamps.partition_point(|s| *s < boundary);
    let n = returns.len();
    Ok((
        returns.slice_rows(0, cut)?,
        returns.slice_rows(cut, n - cut)?,
    ))
}

/// What to hold at each out-of-sample time.
#[derive(Debug, Clone, Copy)]
pub enum Allocation<'a> {
    Path(&'a AllocationPath),
    Static(&'a StaticWeights),
}

/// Portfolio returns `w(t)ᵀ x(t)` over `returns_out`.
pub fn run_strategy(
    returns_out: &ReturnsPanel,
    allocation: Allocation<'_>,
) -> Result<DVector<f64>> {
    let x = returns_out.returns();
    let n = returns_out.n_assets();
    match allocation {
        Allocation::Static(w) => {
            if w.weights().len() != n {
                return Err(Error::validation(format!(
                    "{} static weights for {n} assets",
                    w.weights().len()
                )));
            }
            Ok(x * w.weights())
        }
        Allocation::Path(path) => {
            if path.start() != returns_out.origin()
                || path.len() != returns_out.len()
                || path.weights().ncols() != n
            {
                return Err(Error::validation(format!(
                    "allocation covers t = {}..{} ({} assets) but returns cover t = {}..{} ({n} assets)",
                    path.start(),
                    path.start() + path.len() as i64,
                    path.weights().ncols(),
                    returns_out.origin(),
                    returns_out.origin() + returns_out.len() as i64
                )));
            }
            Ok(DVector::from_fn(x.nrows(), |t, _| {
                x.row(t).dot(&path.weights().row(t))
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sharpe {
    Value(f64),
    /// The series has no variation.
    Undefined,
}

impl Sharpe {
    pub fn value(&self) -> Option<f64> {
        match self {
            Sharpe::Value(v) => Some(*v),
            Sharpe::Undefined => None,
        }
    }
}

impl fmt::Display for Sharpe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sharpe::Value(v) => write!(f, "{v:.4}"),
            Sharpe::Undefined => f.write_str("undefined"),
        }
    }
}

fn mean_std(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Annualised Sharpe ratio `mean / std · √periods_per_year`, sample std.
pub fn sharpe_ratio(series: &[f64], periods_per_year: u32) -> Result<Sharpe> {
    if series.len() < 2 {
        return Err(Error::validation("Sharpe ratio needs at least two returns"));
    }
    let (mean, std) = mean_std(series);
    if std.is_nan() || std <= 1e-12 * mean.abs() {
        return Ok(Sharpe::Undefined);
    }
    Ok(Sharpe::Value(mean / std * (periods_per_year as f64).sqrt()))
}

/// A named set of grid periods, e.g. `A,S` → {12, 6} on monthly data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridChoice {
    pub label: String,
    pub periods: Vec<u64>,
}

impl GridChoice {
    /// Parse a comma list of period letters (`A`, `S`, `Q`) or integers.
    /// Letters map to one year, half a year and a quarter in samples.
    pub fn parse(text: &str, periods_per_year: u32) -> Result<Self> {
        let ppy = periods_per_year as u64;
        let mut labels = Vec::new();
        let mut periods = Vec::new();
        for raw in text.split(',') {
            let tok = raw.trim();
            let period = match tok.to_ascii_uppercase().as_str() {
                "A" => ppy,
                "S" if ppy.is_multiple_of(2) => ppy / 2,
                "Q" if ppy.is_multiple_of(4) => ppy / 4,
                "S" | "Q" => {
                    return Err(Error::validation(format!(
                        "'{tok}' needs periods per year divisible by {}",
                        if tok.eq_ignore_ascii_case("S") { 2 } else { 4 }
                    )))
                }
                _ => tok.parse::<u64>().map_err(|_| {
                    Error::validation(format!("grid entry '{tok}' is not A, S, Q or an integer"))
                })?,
            };
            labels.push(tok.to_ascii_uppercase());
            periods.push(period);
        }
        // validate
        FrequencyGrid::from_periods(&periods, "")?;
        Ok(Self {
            label: labels.join(", "),
            periods,
        })
    }

    /// Parse `;`-separated grids, e.g. `A;A,S;A,S,Q`.
    pub fn parse_list(text: &str, periods_per_year: u32) -> Result<Vec<Self>> {
        let grids: Vec<Self> = text
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| Self::parse(s, periods_per_year))
            .collect::<Result<_>>()?;
        if grids.is_empty() {
            return Err(Error::validation("no grid given"));
        }
        Ok(grids)
    }

    pub fn grid(&self, unit: &str) -> Result<FrequencyGrid> {
        FrequencyGrid::from_periods(&self.periods, unit)
    }

    pub fn strategy_name(&self) -> String {
        format!("Spectral MVO ({})", self.label)
    }

    pub fn slug(&self) -> String {
        let parts: Vec<String> = self.label.split(", ").map(str::to_string).collect();
        format!("spectral_{}", parts.join("_"))
    }
}

impl FromStr for GridChoice {
    type Err = Error;

    /// Monthly interpretation of letters.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 12)
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Prices(PricePanel),
    Returns(ReturnsPanel),
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub data: DataSource,
    pub periods_per_year: u32,
    pub grids: Vec<GridChoice>,
    pub boundary: Stamp,
    /// Annualised target volatility, e.g. 0.01 for 1% per annum.
    pub sigma0_annual: f64,
    pub mode: EstimatorMode,
    pub ridge: Ridge,
    /// Subtract the in-sample mean of each asset before spectral estimation.
    pub demean: bool,
}

impl ProtocolConfig {
    pub fn new(data: DataSource, boundary: Stamp) -> Self {
        Self {
            data,
            periods_per_year: 12,
            grids: ["A", "A,S", "A,S,Q"]
                .iter()
                .map(|g| GridChoice::parse(g, 12).expect("static grids"))
                .collect(),
            boundary,
            sigma0_annual: 0.01,
            mode: EstimatorMode::Literal,
            ridge: Ridge::Auto,
            demean: false,
        }
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0_annual / (self.periods_per_year as f64).sqrt()
    }
}

/// Spectral model fitted for one strategy.
#[derive(Debug, Clone)]
pub struct SpectralFit {
    pub grid: GridChoice,
    pub moments: SpectralMoments,
    pub weights: SpectralWeights,
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub name: String,
    pub slug: String,
    /// Out-of-sample portfolio returns.
    pub returns: DVector<f64>,
    /// Compounded growth `Π(1 + r) − 1` after each out-of-sample period.
    pub cumulative: Vec<f64>,
    pub sharpe: Sharpe,
    /// Annualised realised volatility.
    pub volatility: f64,
    /// `T_out × N` weights held over each out-of-sample period.
    pub allocation: DMatrix<f64>,
    pub spectral: Option<SpectralFit>,
}

#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub strategies: Vec<StrategyResult>,
    pub asset_names: Vec<String>,
    pub out_timestamps: Vec<Stamp>,
    /// Global time index of the first out-of-sample return.
    pub out_origin: i64,
    pub in_sample_len: usize,
    pub boundary: Stamp,
    pub grids: Vec<GridChoice>,
    pub periods_per_year: u32,
    pub sigma0_annual: f64,
    pub sigma0: f64,
    pub mode: EstimatorMode,
    pub ridge: Ridge,
    pub demean: bool,
}

impl BacktestReport {
    pub fn strategy(&self, slug: &str) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.slug == slug)
    }
}

/// In-sample sample mean and covariance (denominator `T − 1`).
pub fn sample_moments(panel: &ReturnsPanel) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let t = panel.len();
    if t < 2 {
        return Err(Error::validation(
            "sample covariance needs at least two returns",
        ));
    }
    let x = panel.returns();
    let mean = DVector::from_vec(panel.column_means());
    let mut centred = x.clone();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let cov = centred.transpose() * &centred / (t as f64 - 1.0);
    Ok((mean, cov))
}

fn finish(
    name: String,
    slug: String,
    returns: DVector<f64>,
    allocation: DMatrix<f64>,
    spectral: Option<SpectralFit>,
    ppy: u32,
) -> Result<StrategyResult> {
    let sharpe = sharpe_ratio(returns.as_slice(), ppy)?;
    let (_, std) = mean_std(returns.as_slice());
    let mut growth = 1.0;
    let cumulative = returns
        .iter()
        .map(|r| {
            growth *= 1.0 + r;
            growth - 1.0
        })
        .collect();
    Ok(StrategyResult {
        name,
        slug,
        returns,
        cumulative,
        sharpe,
        volatility: std * (ppy as f64).sqrt(),
        allocation,
        spectral,
    })
}

fn spectral_strategy(
    choice: &GridChoice,
    estimation: &ReturnsPanel,
    out: &ReturnsPanel,
    config: &ProtocolConfig,
    risk: &RiskSpec,
) -> Result<StrategyResult> {
    let stage = format!("{} ", choice.strategy_name());
    let grid = choice.grid("period").stage(&format!("{stage}grid"))?;
    let moments =
        estimate_moments(estimation, &grid, config.mode).stage(&format!("{stage}estimation"))?;
    let weights = solve_spectral_mvo(&moments, risk).stage(&format!("{stage}optimisation"))?;
    let start = out.origin();
    let path = retrieve_allocation(&weights, start..start + out.len() as i64)?;
    let returns =
        run_strategy(out, Allocation::Path(&path)).stage(&format!("{stage}evaluation"))?;
    finish(
        choice.strategy_name(),
        choice.slug(),
        returns,
        path.weights().clone(),
        Some(SpectralFit {
            grid: choice.clone(),
            moments,
            weights,
        }),
        config.periods_per_year,
    )
}

fn static_strategy(
    name: &str,
    slug: &str,
    w: &StaticWeights,
    out: &ReturnsPanel,
    ppy: u32,
) -> Result<StrategyResult> {
    let returns = run_strategy(out, Allocation::Static(w))?;
    let allocation = DMatrix::from_fn(out.len(), w.weights().len(), |_, j| w.weights()[j]);
    finish(name.into(), slug.into(), returns, allocation, None, ppy)
}

/// Full protocol: estimate on the in-sample half, evaluate every strategy on
/// the out-of-sample half.
pub fn run_protocol(config: &ProtocolConfig) -> Result<BacktestReport> {
    if config.grids.is_empty() {
        return Err(Error::validation(
            "protocol needs at least one spectral grid",
        ));
    }
    if !(config.sigma0_annual.is_finite() && config.sigma0_annual > 0.0) {
        return Err(Error::validation(format!(
            "annual target volatility {} must be positive",
            config.sigma0_annual
        )));
    }
    let returns = match &config.data {
        DataSource::Prices(p) => compute_returns(p, config.periods_per_year).stage("returns")?,
        DataSource::Returns(r) => r.clone().with_periods_per_year(config.periods_per_year)?,
    };
    let (ins, out) = split_sample(&returns, config.boundary).stage("split")?;
    if out.len() < 2 {
        return Err(
            Error::validation("out-of-sample period needs at least two returns").in_stage("split"),
        );
    }
    let risk = RiskSpec::new(config.sigma0(), config.ridge)?;

    let estimation = if config.demean {
        ins.shifted(&ins.column_means())?
    } else {
        ins.clone()
    };
    let mut strategies: Vec<StrategyResult> = config
        .grids
        .par_iter()
        .map(|g| spectral_strategy(g, &estimation, &out, config, &risk))
        .collect::<Result<_>>()?;

    let (mean, cov) = sample_moments(&ins).stage("MVO estimation")?;
    let mvo = solve_classical_mvo(&mean, &cov, &risk).stage("MVO optimisation")?;
    strategies.push(static_strategy(
        "MVO",
        "mvo",
        &mvo,
        &out,
        config.periods_per_year,
    )?);
    let ew = equal_weight(out.n_assets())?;
    strategies.push(static_strategy(
        "EW",
        "ew",
        &ew,
        &out,
        config.periods_per_year,
    )?);

    Ok(BacktestReport {
        strategies,
        asset_names: returns.asset_names().to_vec(),
        out_timestamps: out.timestamps().to_vec(),
        out_origin: out.origin(),
        in_sample_len: ins.len(),
        boundary: config.boundary,
        grids: config.grids.clone(),
        periods_per_year: config.periods_per_year,
        sigma0_annual: config.sigma0_annual,
        sigma0: config.sigma0(),
        mode: config.mode,
        ridge: config.ridge,
        demean: config.demean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::WeightScheme;
    use crate::panel::{index_stamps, monthly_stamps};
    use chrono::NaiveDate;

    fn prices(rows: &[&[f64]]) -> PricePanel {
        let n = rows[0].len();
        let m = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
        PricePanel::new(
            index_stamps(rows.len()),
            m,
            (0..n).map(|i| format!("a{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn simple_returns() {
        let r = compute_returns(&prices(&[&[100.0], &[110.0]]), 12).unwrap();
        assert!((r.returns()[(0, 0)] - 0.10).abs() < 1e-15);
        let r = compute_returns(&prices(&[&[100.0], &[110.0], &[99.0]]), 12).unwrap();
        assert!((r.returns()[(1, 0)] + 0.10).abs() < 1e-15);
        let flat = compute_returns(&prices(&[&[5.0, 2.0], &[5.0, 2.0], &[5.0, 2.0]]), 12).unwrap();
        assert!(flat.returns().iter().all(|v| *v == 0.0));
        assert_eq!(flat.timestamps()[0], Stamp::Index(1));
    }

    #[test]
    fn split_protocol_dates() {
        let start = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        let stamps = monthly_stamps(start, 125);
        let p = PricePanel::new(
            stamps,
            DMatrix::from_fn(125, 1, |r, _| 100.0 + r as f64),
            vec!["x".into()],
        )
        .unwrap();
        let r = compute_returns(&p, 12).unwrap();
        let boundary: Stamp = "2015-01-01".parse().unwrap();
        let (ins, out) = split_sample(&r, boundary).unwrap();
        assert_eq!(ins.timestamps().last().unwrap().to_string(), "2014-12-01");
        assert_eq!(out.timestamps()[0].to_string(), "2015-01-01");
        assert_eq!(out.timestamps().last().unwrap().to_string(), "2020-05-01");
        assert_eq!(ins.len() + out.len(), r.len());
        assert_eq!(out.origin(), ins.len() as i64);
        assert!(split_sample(&r, r.timestamps()[0]).is_err());
        assert!(split_sample(&r, "2030-01-01".parse().unwrap()).is_err());
        assert!(split_sample(&r, Stamp::Index(3)).is_err());
    }

    #[test]
    fn strategies_on_small_cases() {
        let out =
            ReturnsPanel::from_matrix(DMatrix::from_row_slice(2, 2, &[0.1, -0.1, 0.02, 0.04]))
                .unwrap();
        let ew = equal_weight(2).unwrap();
        let r = run_strategy(&out, Allocation::Static(&ew)).unwrap();
        assert!(r[0].abs() < 1e-17);
        assert_eq!(ew.scheme(), WeightScheme::EqualWeight);

        let single =
            ReturnsPanel::from_matrix(DMatrix::from_column_slice(3, 1, &[0.01, -0.02, 0.5]))
                .unwrap();
        let one = equal_weight(1).unwrap();
        let r = run_strategy(&single, Allocation::Static(&one)).unwrap();
        assert_eq!(r.as_slice(), single.returns().as_slice());
        assert!(run_strategy(&out, Allocation::Static(&one)).is_err());
    }

    #[test]
    fn sharpe_examples() {
        assert_eq!(
            sharpe_ratio(&[0.01, -0.01, 0.01, -0.01], 12).unwrap(),
            Sharpe::Value(0.0)
        );
        assert_eq!(sharpe_ratio(&[0.01; 6], 12).unwrap(), Sharpe::Undefined);
        let s = sharpe_ratio(&[0.01, 0.02, 0.03], 12)
            .unwrap()
            .value()
            .unwrap();
        assert!((s - 2.0 * 12f64.sqrt()).abs() < 1e-12);
        assert!(sharpe_ratio(&[0.01], 12).is_err());
    }

    #[test]
    fn grid_choices() {
        let g = GridChoice::parse("A,S,Q", 12).unwrap();
        assert_eq!(g.periods, vec![12, 6, 3]);
        assert_eq!(g.strategy_name(), "Spectral MVO (A, S, Q)");
        assert_eq!(g.slug(), "spectral_A_S_Q");
        let list = GridChoice::parse_list("A;A,S;12,5", 12).unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[2].periods, vec![12, 5]);
        assert_eq!(list[2].slug(), "spectral_12_5");
        assert_eq!(GridChoice::parse("A,S", 4).unwrap().periods, vec![4, 2]);
        assert!(GridChoice::parse("Q", 6).is_err());
        assert!(GridChoice::parse("A,12", 12).is_err());
        assert!(GridChoice::parse("X", 12).is_err());
    }

    #[test]
    fn sample_moments_unbiased() {
        let p = ReturnsPanel::from_matrix(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 2.0, 1.0, 3.0, 5.0],
        ))
        .unwrap();
        let (m, c) = sample_moments(&p).unwrap();
        assert_eq!(m.as_slice(), &[2.0, 2.0]);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c[(0, 1)] - 2.5).abs() < 1e-15);
        assert!((c[(1, 1)] - 7.0).abs() < 1e-15);
    }
}
