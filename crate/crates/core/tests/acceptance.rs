//! Acceptance suite. Each criterion prints one PASS or FAIL line with the
//! measured quantities; the process exits non-zero if any criterion fails.
//! Run with `cargo test --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use spectral_mvo::backtest::{run_protocol, DataSource, GridChoice, ProtocolConfig};
use spectral_mvo::ingest::ingest_prices_csv;
use spectral_mvo::report::write_report;
use spectral_mvo::stats::spectral_norm;
use spectral_mvo::synth::{example1_layout, EXAMPLE1_PERIODS};
use spectral_mvo::{
    build_basis, compute_psd, direct_psd, estimate_moments, estimate_spectral_mean,
    example1_scenario, project_spectrum, retrieve_allocation, solve_spectral_mvo, synthesize_panel,
    synthesize_time_value, EstimatorMode, FrequencyGrid, ReturnsPanel, Ridge, RiskSpec,
    SeasonalMarket, Stamp, SynthSpec,
};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    let in_time = elapsed <= limit;
    let pass = pass && in_time;
    println!(
        "{} [{id:>2}] {title}: {detail}; {:.2} s (limit {} s{})",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn basis_orthonormality() -> Outcome {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=8);
        let mut omegas: Vec<f64> = (0..m).map(|_| rng.random_range(1e-3..PI)).collect();
        omegas.sort_by(f64::total_cmp);
        omegas.dedup();
        let grid = FrequencyGrid::from_omegas(omegas, "").unwrap();
        let t = rng.random_range(-100_000i64..=100_000);
        let b = build_basis(t, &grid, n).unwrap();
        let gram = b.values() * b.values().adjoint();
        worst = worst.max(inf_norm_diff(&gram, &DMatrix::identity(n, n)));
    }
    outcome(
        worst <= 1e-12,
        format!("max ‖ΦΦᴴ − I‖∞ = {worst:.2e} over 100 cases (tol 1e-12)"),
    )
}

fn round_trip() -> Outcome {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=8);
        let periods = random_periods(&mut rng, m);
        let grid = FrequencyGrid::from_periods(&periods, "").unwrap();
        let t = rng.random_range(-10_000i64..=10_000);
        let b = build_basis(t, &grid, n).unwrap();
        let x = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let back = synthesize_time_value(&b, &project_spectrum(&b, &x).unwrap()).unwrap();
        worst = worst.max((back - x).amax());
    }
    outcome(
        worst <= 1e-12,
        format!("max |x − Φ̲Φ̲ᴴx| = {worst:.2e} over 100 cases (tol 1e-12)"),
    )
}

fn psd_entanglement() -> Outcome {
    // harmonic plus proper noise, N = 2, 100 full periods of the grid
    let grid = FrequencyGrid::from_periods(&[12, 6, 3], "").unwrap();
    let mut r = rng(3);
    let mean = random_augmented(&mut r, 6).scaled(0.3);
    let cov = random_augmented_cov(&mut r, 6);
    let spec = SynthSpec::new(grid.clone(), 2, mean, cov, 1200, 3).unwrap();
    let panel = synthesize_panel(&spec).unwrap();
    let mut worst = 0.0f64;
    for mode in [EstimatorMode::Literal, EstimatorMode::Consistent] {
        let moments = estimate_moments(&panel, &grid, mode).unwrap();
        let model = compute_psd(&moments);
        let direct = direct_psd(&panel, &grid, mode).unwrap();
        for m in 0..grid.len() {
            worst = worst.max((direct.bin(m) - model.bin(m)).camax());
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |direct PSD − (m̂m̂ᴴ + R̂)| = {worst:.3e} over bins and modes (tol 1e-6)"),
    )
}

fn example1_identifiability() -> Outcome {
    let lcm: usize = 48;
    let spec = example1_scenario().with_horizon(4000 * lcm).unwrap();
    let panel = synthesize_panel(&spec).unwrap();
    let grid = FrequencyGrid::from_periods(&EXAMPLE1_PERIODS, "").unwrap();
    let moments = estimate_moments(&panel, &grid, EstimatorMode::Literal).unwrap();
    let layout = example1_layout();

    let mags: Vec<f64> = (0..grid.len())
        .map(|m| moments.bin_mean(m).norm())
        .collect();
    let mut order: Vec<usize> = (0..mags.len()).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
    let mut top = [order[0], order[1]];
    top.sort();
    let ranked = top == layout.harmonic_bins;
    let mean_ratio = layout
        .harmonic_bins
        .iter()
        .map(|&b| mags[b])
        .fold(f64::INFINITY, f64::min)
        / median(&mags);

    let psd = compute_psd(&moments);
    let levels: Vec<f64> = (0..grid.len()).map(|m| psd.bin(m)[(0, 0)].re).collect();
    let psd_ratio = layout
        .harmonic_bins
        .iter()
        .map(|&b| levels[b])
        .fold(0.0, f64::max)
        / median(&levels);

    let norms = moments.bin_norms();
    let ratio = |b: usize| norms[b].1 / norms[b].0;
    let cyclo = ratio(layout.cyclostationary_bin);
    let proper = layout
        .proper_bins
        .iter()
        .map(|&b| ratio(b))
        .fold(0.0, f64::max);

    let pass = ranked && mean_ratio > 10.0 && psd_ratio < 2.0 && cyclo > 0.5 && proper < 0.1;
    outcome(
        pass,
        format!(
            "T = {}: harmonic bins ranked 1–2 by |m̂|: {ranked}; |m̂| peak/median = {mean_ratio:.2} (> 10); \
             PSD peak/median = {psd_ratio:.4} (< 2); ‖P̂‖/‖R̂‖ = {cyclo:.3} at the improper bin (> 0.5), \
             max {proper:.4} on proper bins (< 0.1)",
            panel.len()
        ),
    )
}

fn calibration() -> Outcome {
    let mut worst_lit = 0.0f64;
    let mut worst_con = 0.0f64;
    // period 2 is left out: cos(πt) is its own conjugate partner and its
    // coefficient is a/√(2M), twice the general value
    for periods in [vec![12u64], vec![12, 6, 4], vec![20, 10, 5, 4]] {
        let grid = FrequencyGrid::from_periods(&periods, "").unwrap();
        let lcm = grid.lcm_period().unwrap() as usize;
        let c = grid.augmentation();
        for (m, &omega) in grid.omegas().iter().enumerate() {
            for a in [0.37, 2.5] {
                let t_len = 50 * lcm;
                let panel = ReturnsPanel::from_matrix(DMatrix::from_fn(t_len, 1, |t, _| {
                    a * (omega * t as f64).cos()
                }))
                .unwrap();
                let lit = estimate_spectral_mean(&panel, &grid, EstimatorMode::Literal).unwrap();
                let con = estimate_spectral_mean(&panel, &grid, EstimatorMode::Consistent).unwrap();
                let expect_lit = a / (2.0 * c.sqrt());
                let expect_con = a * c.sqrt() / 2.0;
                worst_lit =
                    worst_lit.max((lit.upper()[m] - Complex64::new(expect_lit, 0.0)).norm());
                worst_con =
                    worst_con.max((con.upper()[m] - Complex64::new(expect_con, 0.0)).norm());
            }
        }
    }
    outcome(
        worst_lit <= 1e-8 && worst_con <= 1e-8,
        format!(
            "max |m̂ − a/(2√(2M))| = {worst_lit:.2e} (literal), max |m̂ − a√(2M)/2| = {worst_con:.2e} (consistent); tol 1e-8"
        ),
    )
}

fn optimizer_exactness() -> Outcome {
    let mut rng = rng(6);
    let sigma0 = 0.05;
    let risk = RiskSpec::new(sigma0, Ridge::Fixed(0.0)).unwrap();
    let (mut worst_c, mut worst_rel, mut beaten) = (0.0f64, 0.0f64, 0);
    for case in 0..50 {
        let (m, n) = loop {
            let m = rng.random_range(1..=6);
            let n = rng.random_range(1..=6);
            if 2 * m * n <= 12 {
                break (m, n);
            }
        };
        let mo = random_moments(&mut rng, m, n);
        let w = solve_spectral_mvo(&mo, &risk).unwrap();
        let ws = w.weights().to_stacked();
        let var = ws.dotc(&(mo.covariance() * &ws)).re;
        worst_c = worst_c.max((var - sigma0 * sigma0).abs());
        let mean = mo.mean().to_stacked();
        let obj = mean.dotc(&ws).re;
        let (qm, q) = real_problem(mo.covariance(), &mean);
        let oracle = sphere_ascent(&qm, &q, sigma0, 10, case);
        worst_rel = worst_rel.max((obj - oracle).abs() / oracle.abs());
        let random_best = random_feasible_best(mo.covariance(), &mean, sigma0, 1000, 1000 + case);
        if random_best > obj {
            beaten += 1;
        }
    }
    outcome(
        worst_c <= 1e-10 && worst_rel <= 1e-6 && beaten == 0,
        format!(
            "50 instances: max |w̲ᴴR̲w̲ − σ₀²| = {worst_c:.2e} (tol 1e-10); max relative gap to sphere-ascent oracle = \
             {worst_rel:.2e} (tol 1e-6); beaten by a random feasible point in {beaten} instances"
        ),
    )
}

fn allocation_realness() -> Outcome {
    let mut rng = rng(7);
    let (mut worst_imag, mut worst_period) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=3);
        let mo = random_moments(&mut rng, m, n);
        let w = solve_spectral_mvo(&mo, &RiskSpec::new(0.01, Ridge::Auto).unwrap()).unwrap();
        let l = mo.grid().lcm_period().unwrap() as i64;
        let start = rng.random_range(-500i64..500);
        let path = retrieve_allocation(&w, start..start + 3 * l).unwrap();
        worst_imag = worst_imag.max(path.max_imag_residual());
        let rows = path.len() - l as usize;
        for r in 0..rows {
            let d = (path.weights().row(r) - path.weights().row(r + l as usize)).amax();
            worst_period = worst_period.max(d);
        }
    }
    outcome(
        worst_imag <= 1e-12 && worst_period <= 1e-12,
        format!("max imaginary residual = {worst_imag:.2e}; max |w(t) − w(t + L)| = {worst_period:.2e} (tol 1e-12)"),
    )
}

fn synthetic_market() -> Outcome {
    let (mut beat_mvo, mut beat_ew) = (0, 0);
    let mut checked = true;
    for seed in 0..100u64 {
        let market = SeasonalMarket {
            n_assets: 5,
            periods: vec![12, 6],
            months: 120,
            seed,
            ..Default::default()
        };
        let mut cfg = ProtocolConfig::new(
            DataSource::Prices(market.prices().unwrap()),
            "2015-02-01".parse::<Stamp>().unwrap(),
        );
        cfg.grids = vec![GridChoice::parse("A,S", 12).unwrap()];
        let rep = run_protocol(&cfg).unwrap();
        checked &= rep.in_sample_len == 60 && rep.out_timestamps.len() == 60;
        let sharpe = |slug: &str| {
            rep.strategy(slug)
                .unwrap()
                .sharpe
                .value()
                .unwrap_or(f64::NEG_INFINITY)
        };
        let spectral = sharpe("spectral_A_S");
        beat_mvo += (spectral > sharpe("mvo")) as u32;
        beat_ew += (spectral > sharpe("ew")) as u32;
    }
    outcome(
        checked && beat_mvo >= 85 && beat_ew >= 70,
        format!("spectral (A, S) beats MVO in {beat_mvo}/100 (≥ 85) and EW in {beat_ew}/100 (≥ 70); 60/60 split: {checked}"),
    )
}

fn invariant_suite() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let mut rng = rng(9);
    for seed in 0..200u64 {
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=3);
        let periods = random_periods(&mut rng, m);
        let grid = FrequencyGrid::from_periods(&periods, "").unwrap();
        let lcm = grid.lcm_period().unwrap() as usize;
        let k = m * n;
        let spec = SynthSpec::new(
            grid.clone(),
            n,
            random_augmented(&mut rng, k).scaled(0.2),
            random_augmented_cov(&mut rng, k),
            lcm * rng.random_range(2..=6),
            seed,
        )
        .unwrap();
        let panel = synthesize_panel(&spec).unwrap();
        let mode = if seed % 2 == 0 {
            EstimatorMode::Literal
        } else {
            EstimatorMode::Consistent
        };
        let mo = estimate_moments(&panel, &grid, mode).unwrap();
        let cov = mo.covariance();
        let scale = cov.camax().max(1e-300);
        let tol = 1e-12 * scale;

        let a = cov.view((0, 0), (k, k));
        let b = cov.view((0, k), (k, k));
        let c = cov.view((k, 0), (k, k));
        let d = cov.view((k, k), (k, k));
        let mut check = |ok: bool, what: &str| {
            if !ok {
                failures.push(format!("seed {seed}: {what}"));
            }
        };
        check(
            (d - a.map(|z| z.conj())).camax() <= tol,
            "lower-right block is not conj(R)",
        );
        check(
            (c - b.map(|z| z.conj())).camax() <= tol,
            "lower-left block is not conj(P)",
        );
        check((cov - cov.adjoint()).camax() <= tol, "not Hermitian");
        for u in 0..m {
            for v in 0..m {
                let r_uv = mo.r_block(u, v);
                let r_vu = mo.r_block(v, u);
                check((r_uv - r_vu.adjoint()).camax() <= tol, "R(ω,ν) ≠ R(ν,ω)ᴴ");
                let p_uv = mo.p_block(u, v);
                let p_vu = mo.p_block(v, u);
                check((p_uv - p_vu.transpose()).camax() <= tol, "P(ω,ν) ≠ P(ν,ω)ᵀ");
            }
            let (rn, pn) = (
                spectral_norm(&mo.r_block(u, u)),
                spectral_norm(&mo.p_block(u, u)),
            );
            check(pn <= rn * (1.0 + 1e-12), "‖P‖ > ‖R‖");
        }
        check(
            mo.mean().is_conjugate_symmetric() && mo.mean().symmetry_residual() == 0.0,
            "mean not conjugate-symmetric",
        );
        let w = solve_spectral_mvo(&mo, &RiskSpec::new(0.01, Ridge::Auto).unwrap()).unwrap();
        check(
            w.weights().is_conjugate_symmetric() && w.weights().symmetry_residual() == 0.0,
            "weights not conjugate-symmetric",
        );
    }
    let shown = failures
        .iter()
        .take(3)
        .cloned()
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        failures.is_empty(),
        format!(
            "200 randomized estimation runs, {} violations{}",
            failures.len(),
            if shown.is_empty() {
                String::new()
            } else {
                format!(": {shown}")
            }
        ),
    )
}

fn data_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_monthly.csv")
}

fn protocol_fidelity() -> Outcome {
    let prices = ingest_prices_csv(data_path()).unwrap().panel;
    let mut cfg = ProtocolConfig::new(DataSource::Prices(prices), "2015-01-01".parse().unwrap());
    cfg.grids = GridChoice::parse_list("A;A,S;A,S,Q", 12).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_report(d.path(), &run_protocol(&cfg).unwrap()).unwrap();
    }
    let read = |i: usize, name: &str| fs::read_to_string(dirs[i].path().join(name)).unwrap();
    let mut problems = Vec::new();

    let report = read(0, "report.txt");
    let table: Vec<&str> = report
        .lines()
        .skip_while(|l| !l.starts_with("Sharpe ratio"))
        .collect();
    let expected_header =
        "| Spectral MVO (A) | Spectral MVO (A, S) | Spectral MVO (A, S, Q) | MVO | EW |";
    if table.len() < 4 || table[1] != expected_header {
        problems.push("Sharpe table header".to_string());
    } else {
        let cells: Vec<&str> = table[3]
            .trim_matches('|')
            .split('|')
            .map(str::trim)
            .collect();
        if cells.len() != 5 || cells.iter().any(|c| c.parse::<f64>().is_err()) {
            problems.push(format!("Sharpe table row '{}'", table[3]));
        }
    }
    let plot = read(0, "plot_sharpe.csv");
    if plot.lines().count() != 6 || plot.lines().next() != Some("strategy,sharpe") {
        problems.push("plot_sharpe.csv layout".into());
    }
    let months = read(0, "allocation_by_month.csv");
    let mut lines = months.lines();
    let header_ok = lines.next() == Some("strategy,month,asset_1,asset_2,asset_3,asset_4,asset_5");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let months_ok = rows.len() == 60
        && rows.iter().all(|r| r.len() == 7)
        && (1..=12).all(|mo| rows.iter().filter(|r| r[1] == mo.to_string()).count() == 5);
    if !(header_ok && months_ok) {
        problems.push("allocation_by_month.csv layout".into());
    }
    let mut names: Vec<String> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in &names {
        if read(0, name) != read(1, name) {
            problems.push(format!("{name} differs between runs"));
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} files, five-column Sharpe table, 12-month allocation table, identical across runs{}",
            names.len(),
            if problems.is_empty() { String::new() } else { format!("; problems: {}", problems.join(", ")) }
        ),
    )
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "basis orthonormality", s(1), basis_orthonormality),
        run(2, "projection round trip", s(1), round_trip),
        run(3, "PSD entanglement identity", s(5), psd_entanglement),
        run(
            4,
            "example-1 identifiability",
            s(10),
            example1_identifiability,
        ),
        run(5, "estimator calibration", s(1), calibration),
        run(6, "optimizer exactness", s(30), optimizer_exactness),
        run(
            7,
            "allocation realness and periodicity",
            s(1),
            allocation_realness,
        ),
        run(8, "synthetic-market advantage", s(120), synthetic_market),
        run(9, "invariant suite", s(60), invariant_suite),
        run(10, "protocol fidelity", s(10), protocol_fidelity),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
