//! Mean-variance portfolio optimisation in the augmented complex spectral
//! domain.
//!
//! Asset returns are represented on a small grid of cyclical frequencies
//! through an augmented basis `[Φ | Φ*]`. Estimating the spectral mean,
//! covariance and pseudo-covariance on that grid and solving a
//! variance-targeted mean-variance problem there yields a frequency-domain
//! portfolio whose time-domain weights vary with the calendar.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`], [`augmented`], [`basis`]: the frequency grid and the basis.
//! - [`stats`]: centred spectral moments, absolute moments and structure repair.
//! - [`synth`]: synthetic signals with prescribed spectral statistics.
//! - [`optimizer`]: spectral and classical mean-variance solvers.
//! - [`panel`], [`ingest`], [`backtest`], [`report`]: the out-of-sample protocol.

pub mod augmented;
pub mod backtest;
pub mod basis;
pub mod error;
pub mod grid;
pub mod ingest;
pub mod moments_io;
pub mod optimizer;
pub mod panel;
pub mod report;
pub mod stats;
pub mod synth;

pub use augmented::AugmentedVector;
pub use backtest::{run_protocol, BacktestReport, DataSource, GridChoice, ProtocolConfig, Sharpe};
pub use basis::{build_basis, project_spectrum, synthesize_time_value, AugmentedSpectralBasis};
pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use optimizer::{
    equal_weight, retrieve_allocation, solve_classical_mvo, solve_spectral_mvo, AllocationPath,
    Ridge, RiskSpec, SpectralWeights, StaticWeights,
};
pub use panel::{PricePanel, ReturnsPanel, Stamp};
pub use stats::{
    compute_psd, direct_psd, estimate_moments, estimate_spectral_covariance,
    estimate_spectral_mean, structure_project, EstimatorMode, PsdMatrix, SpectralMoments,
};
pub use synth::{example1_scenario, synthesize_panel, SeasonalMarket, SynthSpec};
