//! `specmvo`: synthesize data, estimate spectral moments and run the
//! in-sample / out-of-sample backtest from the command line.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for bad input or
//! usage.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spectral_mvo::backtest::compute_returns;
use spectral_mvo::ingest::{
    ingest_prices_csv, ingest_returns_csv, write_prices_csv, write_returns_csv,
};
use spectral_mvo::moments_io::write_moments_csv;
use spectral_mvo::report::write_report;
use spectral_mvo::stats::spectral_norm;
use spectral_mvo::synth::example1_layout;
use spectral_mvo::{
    compute_psd, estimate_moments, example1_scenario, run_protocol, synthesize_panel, DataSource,
    EstimatorMode, GridChoice, ProtocolConfig, Ridge, SeasonalMarket, Stamp,
};

#[derive(Parser, Debug)]
#[command(
    name = "specmvo",
    version,
    about = "Spectral mean-variance portfolio experiments"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic panel.
    Synth(SynthArgs),
    /// Estimate spectral moments of a panel on one grid.
    Estimate(EstimateArgs),
    /// Estimate in sample, evaluate spectral MVO, MVO and EW out of sample.
    ///
    /// Spectral weights are mapped to time through the augmented basis,
    /// w(t) = [Φ(t) | Φ*(t)] w̲, so the holdings are real and repeat with
    /// the common period of the grid. The non-augmented Φ(t) alone has the
    /// wrong width for w̲.
    Backtest(BacktestArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Literal,
    Consistent,
}

impl From<ModeArg> for EstimatorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Literal => EstimatorMode::Literal,
            ModeArg::Consistent => EstimatorMode::Consistent,
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[group(required = true, multiple = false, id = "scenario")]
struct Scenario {
    /// Two harmonics buried in cyclostationary noise of 100× their power.
    #[arg(long)]
    example1: bool,
    /// A seasonal multi-asset market of monthly prices.
    #[arg(long)]
    market: bool,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[command(flatten)]
    scenario: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of samples (returns).
    #[arg(short = 'T', long = "horizon", value_parser = clap::value_parser!(u64).range(1..))]
    horizon: Option<u64>,
    /// AR(1) coefficient of the spectral noise (example1 only).
    #[arg(long, default_value_t = 0.0)]
    ar: f64,
    /// Market: number of assets.
    #[arg(long, default_value_t = 5)]
    assets: usize,
    /// Market: seasonal periods in months, comma separated.
    #[arg(long, default_value = "12,6")]
    periods: String,
    /// Market: date of the first price.
    #[arg(long, default_value = "2010-01-01")]
    start: String,
    /// Market: write returns instead of prices.
    #[arg(long)]
    returns: bool,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    /// Input CSV (returns unless --prices is given).
    #[arg(short, long)]
    input: PathBuf,
    /// Treat the input as prices and convert to returns first.
    #[arg(long)]
    prices: bool,
    /// Grid periods: A, S, Q or integers, comma separated.
    #[arg(long, default_value = "A,S,Q")]
    grid: String,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..))]
    periods_per_year: u32,
    #[arg(long, value_enum, default_value = "literal")]
    mode: ModeArg,
    /// Subtract each asset's mean before estimation.
    #[arg(long)]
    demean: bool,
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BacktestArgs {
    /// Price CSV: `date,ASSET1,...`.
    #[arg(long, required_unless_present = "returns", conflicts_with = "returns")]
    prices: Option<PathBuf>,
    /// Returns CSV instead of prices.
    #[arg(long)]
    returns: Option<PathBuf>,
    /// First out-of-sample timestamp.
    #[arg(long)]
    boundary: String,
    /// Spectral grids separated by ';', e.g. "A;A,S;A,S,Q".
    #[arg(long, default_value = "A;A,S;A,S,Q")]
    grid: String,
    /// Annualised target volatility.
    #[arg(long, default_value_t = 0.01)]
    sigma0_annual: f64,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..))]
    periods_per_year: u32,
    #[arg(long, value_enum, default_value = "literal")]
    mode: ModeArg,
    /// "auto" or a non-negative number.
    #[arg(long, default_value = "auto")]
    ridge: String,
    #[arg(long)]
    demean: bool,
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Serialize)]
struct Echo<'a, T: Serialize> {
    program: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a T,
    resolved: serde_json::Value,
}

fn write_echo<T: Serialize>(
    dir: &Path,
    command: &str,
    args: &T,
    resolved: serde_json::Value,
) -> Result<()> {
    let echo = Echo {
        program: "specmvo",
        version: env!("CARGO_PKG_VERSION"),
        command,
        args,
        resolved,
    };
    let path = dir.join("config_echo.json");
    fs::write(&path, serde_json::to_string_pretty(&echo)? + "\n").map_err(|e| {
        spectral_mvo::Error::Io {
            context: format!("cannot write {}", path.display()),
            source: e,
        }
    })?;
    Ok(())
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        spectral_mvo::Error::Io {
            context: format!("cannot create {}", dir.display()),
            source: e,
        }
        .into()
    })
}

fn input_error(msg: String) -> anyhow::Error {
    spectral_mvo::Error::Validation(msg).into()
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    make_dir(&args.out)?;
    let path = args.out.join("synthetic.csv");
    let resolved;
    if args.scenario.example1 {
        let horizon = args
            .horizon
            .unwrap_or(spectral_mvo::synth::EXAMPLE1_HORIZON as u64) as usize;
        let spec = example1_scenario()
            .with_horizon(horizon)?
            .with_seed(args.seed)
            .with_ar_coefficient(args.ar)?;
        let panel = synthesize_panel(&spec)?;
        write_returns_csv(&path, &panel)?;
        let layout = example1_layout();
        resolved = serde_json::json!({
            "scenario": "example1",
            "horizon": horizon,
            "periods": spec.grid().periods(),
            "harmonic_bins": layout.harmonic_bins,
            "cyclostationary_bin": layout.cyclostationary_bin,
        });
    } else {
        let start: Stamp = args.start.parse()?;
        let Stamp::Date(start) = start else {
            return Err(input_error(format!(
                "--start '{}' is not a date",
                args.start
            )));
        };
        let periods: Vec<u64> = GridChoice::parse(&args.periods, 12)?.periods;
        let cfg = SeasonalMarket {
            n_assets: args.assets,
            periods: periods.clone(),
            months: args.horizon.unwrap_or(120) as usize,
            start,
            seed: args.seed,
            ..Default::default()
        };
        if args.returns {
            write_returns_csv(&path, &cfg.returns()?)?;
        } else {
            write_prices_csv(&path, &cfg.prices()?)?;
        }
        resolved = serde_json::json!({
            "scenario": "market",
            "months": cfg.months,
            "periods": periods,
            "amplitude": [cfg.amplitude.0, cfg.amplitude.1],
            "volatility": cfg.volatility,
            "correlation": cfg.correlation,
            "drift": cfg.drift,
        });
    }
    write_echo(&args.out, "synth", args, resolved)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let choice = GridChoice::parse(&args.grid, args.periods_per_year)?;
    let grid = choice.grid("period")?;
    let mode: EstimatorMode = args.mode.into();
    let mut panel = if args.prices {
        let ingested = ingest_prices_csv(&args.input)?;
        compute_returns(&ingested.panel, args.periods_per_year)?
    } else {
        ingest_returns_csv(&args.input, args.periods_per_year)?.panel
    };
    if args.demean {
        panel = panel.shifted(&panel.column_means())?;
    }
    make_dir(&args.out)?;
    let moments = estimate_moments(&panel, &grid, mode).context("estimation")?;
    write_moments_csv(args.out.join("spectral_moments.csv"), &moments)?;

    let psd = compute_psd(&moments);
    let norms = moments.bin_norms();
    let mean_norms: Vec<f64> = (0..moments.n_bins())
        .map(|m| moments.bin_mean(m).norm())
        .collect();
    let mut order: Vec<usize> = (0..mean_norms.len()).collect();
    order.sort_by(|&a, &b| mean_norms[b].total_cmp(&mean_norms[a]));
    let mut rank = vec![0; order.len()];
    for (r, &b) in order.iter().enumerate() {
        rank[b] = r + 1;
    }
    let periods = grid.periods().unwrap_or(&[]);
    let mut table =
        String::from("bin,period,omega,mean_abs,mean_rank,cov_norm,pcov_norm,psd_norm\n");
    for m in 0..moments.n_bins() {
        table.push_str(&format!(
            "{m},{},{},{:e},{},{:e},{:e},{:e}\n",
            periods.get(m).map(u64::to_string).unwrap_or_default(),
            grid.omegas()[m],
            mean_norms[m],
            rank[m],
            norms[m].0,
            norms[m].1,
            spectral_norm(psd.bin(m)),
        ));
    }
    fs::write(args.out.join("summary.csv"), &table).map_err(|e| spectral_mvo::Error::Io {
        context: "cannot write summary.csv".into(),
        source: e,
    })?;
    println!(
        "{:>4} {:>7} {:>12} {:>5} {:>12} {:>12} {:>12}",
        "bin", "period", "|m|", "rank", "||R||", "||P||", "PSD"
    );
    for m in 0..moments.n_bins() {
        println!(
            "{:>4} {:>7} {:>12.4e} {:>5} {:>12.4e} {:>12.4e} {:>12.4e}",
            m,
            periods.get(m).map(u64::to_string).unwrap_or_default(),
            mean_norms[m],
            rank[m],
            norms[m].0,
            norms[m].1,
            spectral_norm(psd.bin(m)),
        );
    }
    let resolved = serde_json::json!({
        "periods": choice.periods,
        "samples_used": moments.sample_count(),
        "samples_available": panel.len(),
    });
    write_echo(&args.out, "estimate", args, resolved)?;
    Ok(())
}

fn cmd_backtest(args: &BacktestArgs) -> Result<()> {
    let grids = GridChoice::parse_list(&args.grid, args.periods_per_year)?;
    let ridge: Ridge = args.ridge.parse()?;
    let boundary: Stamp = args.boundary.parse()?;
    if !(args.sigma0_annual.is_finite() && args.sigma0_annual > 0.0) {
        return Err(input_error(format!(
            "--sigma0-annual {} must be positive",
            args.sigma0_annual
        )));
    }
    let data = match (&args.prices, &args.returns) {
        (Some(p), _) => DataSource::Prices(ingest_prices_csv(p)?.panel),
        (None, Some(r)) => DataSource::Returns(ingest_returns_csv(r, args.periods_per_year)?.panel),
        (None, None) => {
            return Err(input_error(
                "either --prices or --returns is required".into(),
            ))
        }
    };
    let config = ProtocolConfig {
        data,
        periods_per_year: args.periods_per_year,
        grids,
        boundary,
        sigma0_annual: args.sigma0_annual,
        mode: args.mode.into(),
        ridge,
        demean: args.demean,
    };
    let report = run_protocol(&config)?;
    let files = write_report(&args.out, &report)?;
    let resolved = serde_json::json!({
        "grids": config.grids.iter().map(|g| serde_json::json!({"label": g.label, "periods": g.periods})).collect::<Vec<_>>(),
        "sigma0_per_period": config.sigma0(),
        "in_sample_returns": report.in_sample_len,
        "out_of_sample_returns": report.out_timestamps.len(),
    });
    write_echo(&args.out, "backtest", args, resolved)?;
    for s in &report.strategies {
        println!("{:<26} Sharpe {}", s.name, s.sharpe);
    }
    println!("{}", files[0].display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spectral_mvo::Error>() {
        Some(e) if e.is_input_error() => 2,
        Some(_) => 1,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Backtest(a) => cmd_backtest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // our error messages already embed their causes
            let mut shown: Vec<String> = Vec::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !shown.last().is_some_and(|prev| prev.contains(&cause)) {
                    shown.push(cause);
                }
            }
            eprintln!("error: {}", shown.join(": "));
            ExitCode::from(exit_code(&e))
        }
    }
}
