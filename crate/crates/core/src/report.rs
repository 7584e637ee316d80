//! Text and CSV artifacts of a backtest.
//!
//! | file | columns |
//! |---|---|
//! | `report.txt` | `key: value` lines, then the Sharpe table |
//! | `cumulative_returns.csv` | `date`, one column per strategy slug |
//! | `allocations_<slug>.csv` | `date`, one column per asset |
//! | `allocation_by_month.csv` | `strategy`, `month`, one column per asset |
//! | `plot_sharpe.csv` | `strategy`, `sharpe` |
//! | `spectral_moments.csv` | moments of the largest grid, see [`crate::moments_io`] |
//! | `spectral_weights_<slug>.csv` | weights of each spectral strategy |
//!
//! Nothing time-dependent is written, so identical inputs give identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::backtest::{BacktestReport, Sharpe, StrategyResult};
use crate::error::{Error, Result};
use crate::ingest::{write_panel_csv, write_text};
use crate::moments_io::{write_moments_csv, write_weights_csv};
use crate::panel::Stamp;

fn sharpe_cell(s: &Sharpe) -> String {
    match s {
        Sharpe::Value(v) => format!("{v:.4}"),
        Sharpe::Undefined => "undefined".into(),
    }
}

/// Body of `report.txt`.
pub fn report_text(report: &BacktestReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("boundary", report.boundary.to_string());
    kv("in_sample_returns", report.in_sample_len.to_string());
    kv(
        "out_of_sample_returns",
        report.out_timestamps.len().to_string(),
    );
    if let (Some(a), Some(b)) = (report.out_timestamps.first(), report.out_timestamps.last()) {
        kv("out_of_sample_first", a.to_string());
        kv("out_of_sample_last", b.to_string());
    }
    kv("out_of_sample_time_index", report.out_origin.to_string());
    kv("periods_per_year", report.periods_per_year.to_string());
    let grids: Vec<String> = report
        .grids
        .iter()
        .map(|g| {
            let ps: Vec<String> = g.periods.iter().map(u64::to_string).collect();
            format!("{} = {}", g.label, ps.join(","))
        })
        .collect();
    kv("grids", grids.join("; "));
    kv("sigma0_annual", format!("{}", report.sigma0_annual));
    kv("sigma0_per_period", format!("{:.6e}", report.sigma0));
    kv("estimator_mode", report.mode.to_string());
    kv("ridge", report.ridge.to_string());
    kv("demean", report.demean.to_string());
    kv("assets", report.asset_names.join(","));
    for s in &report.strategies {
        let p = format!("strategy.{}", s.slug);
        kv(&format!("{p}.name"), s.name.clone());
        kv(&format!("{p}.sharpe"), sharpe_cell(&s.sharpe));
        kv(
            &format!("{p}.volatility_annual"),
            format!("{:.6e}", s.volatility),
        );
        kv(
            &format!("{p}.cumulative_return"),
            format!("{:.6e}", s.cumulative.last().copied().unwrap_or(0.0)),
        );
        if let Some(fit) = &s.spectral {
            kv(
                &format!("{p}.estimation_samples"),
                fit.moments.sample_count().to_string(),
            );
            kv(
                &format!("{p}.lambda"),
                format!("{:.6e}", fit.weights.lambda()),
            );
            kv(
                &format!("{p}.ridge_applied"),
                format!("{:.6e}", fit.weights.ridge()),
            );
        }
    }
    out.push('\n');
    out.push_str("Sharpe ratio (annualised, out of sample)\n");
    let names: Vec<&str> = report.strategies.iter().map(|s| s.name.as_str()).collect();
    let _ = writeln!(out, "| {} |", names.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(names.len()));
    let cells: Vec<String> = report
        .strategies
        .iter()
        .map(|s| sharpe_cell(&s.sharpe))
        .collect();
    let _ = writeln!(out, "| {} |", cells.join(" | "));
    out
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Month of the year for dates, otherwise the position within the year of
/// the global sample index (1-based).
fn month_key(stamp: &Stamp, t: i64, ppy: u32) -> u32 {
    stamp
        .month()
        .unwrap_or_else(|| t.rem_euclid(ppy as i64) as u32 + 1)
}

/// Average weights per month of the year.
pub fn allocation_by_month(
    report: &BacktestReport,
    strategy: &StrategyResult,
) -> BTreeMap<u32, Vec<f64>> {
    let n = strategy.allocation.ncols();
    let mut acc: BTreeMap<u32, (Vec<f64>, usize)> = BTreeMap::new();
    for (r, stamp) in report.out_timestamps.iter().enumerate() {
        let key = month_key(stamp, report.out_origin + r as i64, report.periods_per_year);
        let e = acc.entry(key).or_insert_with(|| (vec![0.0; n], 0));
        for j in 0..n {
            e.0[j] += strategy.allocation[(r, j)];
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, c))| (k, sum.into_iter().map(|v| v / c as f64).collect()))
        .collect()
}

/// Write every artifact into `dir`, creating it if needed. Returns the
/// paths written.
pub fn write_report(dir: impl AsRef<Path>, report: &BacktestReport) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("cannot create {}", dir.display()), e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        write_text(&p, &body)?;
        written.push(p);
        Ok(())
    };

    emit("report.txt".into(), report_text(report))?;

    let mut header = vec!["date".to_string()];
    header.extend(report.strategies.iter().map(|s| s.slug.clone()));
    let rows = report.out_timestamps.iter().enumerate().map(|(r, stamp)| {
        let mut row = vec![stamp.to_string()];
        row.extend(
            report
                .strategies
                .iter()
                .map(|s| s.cumulative[r].to_string()),
        );
        row
    });
    emit("cumulative_returns.csv".into(), csv_text(&header, rows))?;

    let plot = report.strategies.iter().map(|s| {
        vec![
            s.name.clone(),
            s.sharpe.value().map(|v| v.to_string()).unwrap_or_default(),
        ]
    });
    emit(
        "plot_sharpe.csv".into(),
        csv_text(&["strategy".into(), "sharpe".into()], plot),
    )?;

    let mut header = vec!["strategy".to_string(), "month".to_string()];
    header.extend(report.asset_names.iter().cloned());
    let mut rows = Vec::new();
    for s in &report.strategies {
        for (month, w) in allocation_by_month(report, s) {
            let mut row = vec![s.slug.clone(), month.to_string()];
            row.extend(w.iter().map(f64::to_string));
            rows.push(row);
        }
    }
    emit(
        "allocation_by_month.csv".into(),
        csv_text(&header, rows.into_iter()),
    )?;

    for s in &report.strategies {
        let p = dir.join(format!("allocations_{}.csv", s.slug));
        write_alloc(&p, report, &s.allocation)?;
        written.push(p);
        if let Some(fit) = &s.spectral {
            let p = dir.join(format!("spectral_weights_{}.csv", s.slug));
            write_weights_csv(&p, &fit.weights)?;
            written.push(p);
        }
    }

    let largest = report
        .strategies
        .iter()
        .filter_map(|s| s.spectral.as_ref())
        .max_by_key(|f| f.grid.periods.len());
    if let Some(fit) = largest {
        let p = dir.join("spectral_moments.csv");
        write_moments_csv(&p, &fit.moments)?;
        written.push(p);
    }
    Ok(written)
}

fn write_alloc(path: &Path, report: &BacktestReport, alloc: &DMatrix<f64>) -> Result<()> {
    write_panel_csv(
        path,
        "date",
        &report.out_timestamps,
        alloc,
        &report.asset_names,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::{run_protocol, DataSource, ProtocolConfig};
    use crate::synth::SeasonalMarket;

    fn small_report() -> BacktestReport {
        let market = SeasonalMarket {
            periods: vec![12, 6, 3],
            months: 72,
            seed: 3,
            ..Default::default()
        };
        let cfg = ProtocolConfig::new(
            DataSource::Prices(market.prices().unwrap()),
            "2013-01-01".parse().unwrap(),
        );
        run_protocol(&cfg).unwrap()
    }

    #[test]
    fn text_layout() {
        let rep = small_report();
        let text = report_text(&rep);
        assert!(text.contains("boundary: 2013-01-01\n"));
        assert!(text.contains("estimator_mode: literal\n"));
        let table: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("Sharpe ratio"))
            .collect();
        assert_eq!(
            table[1],
            "| Spectral MVO (A) | Spectral MVO (A, S) | Spectral MVO (A, S, Q) | MVO | EW |"
        );
        assert_eq!(table[3].matches('|').count(), 6);
    }

    #[test]
    fn files_and_month_table() {
        let rep = small_report();
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(dir.path(), &rep).unwrap();
        let names: Vec<String> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for expected in [
            "report.txt",
            "cumulative_returns.csv",
            "plot_sharpe.csv",
            "allocation_by_month.csv",
            "allocations_spectral_A_S_Q.csv",
            "allocations_ew.csv",
            "spectral_weights_spectral_A.csv",
            "spectral_moments.csv",
        ] {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
        let months = fs::read_to_string(dir.path().join("allocation_by_month.csv")).unwrap();
        // 5 strategies × 12 months + header
        assert_eq!(months.lines().count(), 61);
        let moments =
            crate::moments_io::read_moments_csv(dir.path().join("spectral_moments.csv")).unwrap();
        assert_eq!(moments.n_bins(), 3);
        // spectral allocations repeat with the calendar
        let by_month = allocation_by_month(&rep, rep.strategy("spectral_A_S_Q").unwrap());
        let jan = &by_month[&1];
        let first_jan = rep
            .out_timestamps
            .iter()
            .position(|s| s.month() == Some(1))
            .unwrap();
        let direct = rep
            .strategy("spectral_A_S_Q")
            .unwrap()
            .allocation
            .row(first_jan);
        for j in 0..jan.len() {
            assert!((jan[j] - direct[j]).abs() < 1e-12);
        }
    }
}
