//! Lossless CSV form of spectral moments and spectral weights.
//!
//! A file opens with `# key: value` metadata lines followed by a table
//!
//! ```text
//! kind,row,col,re,im
//! mean,0,,0.0123,-0.0045
//! cov,0,0,0.51,0
//! ```
//!
//! Indices refer to the stacked augmented vector of length `2MN`: entry
//! `m*N + i` is bin `m`, asset `i` of the upper half and `MN + m*N + i` its
//! conjugate. Floats are written in shortest round-trip form, so reading a
//! file back reproduces the values bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::augmented::AugmentedVector;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::ingest::write_text;
use crate::optimizer::SpectralWeights;
use crate::stats::{EstimatorMode, SpectralMoments};

const MOMENTS_FORMAT: &str = "spectral-moments v1";
const WEIGHTS_FORMAT: &str = "spectral-weights v1";

fn grid_header(out: &mut String, grid: &FrequencyGrid) {
    match grid.periods() {
        Some(ps) => {
            let list: Vec<String> = ps.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "# periods: {}", list.join(";"));
        }
        None => {
            let list: Vec<String> = grid.omegas().iter().map(|w| format!("{w:?}")).collect();
            let _ = writeln!(out, "# omegas: {}", list.join(";"));
        }
    }
    let _ = writeln!(out, "# label: {}", grid.label());
    let _ = writeln!(out, "# n_bins: {}", grid.len());
}

fn vector_rows(out: &mut String, kind: &str, v: &DVector<Complex64>) {
    for (i, z) in v.iter().enumerate() {
        let _ = writeln!(out, "{kind},{i},,{:?},{:?}", z.re, z.im);
    }
}

pub fn moments_to_csv(moments: &SpectralMoments) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format: {MOMENTS_FORMAT}");
    grid_header(&mut out, moments.grid());
    let _ = writeln!(out, "# n_assets: {}", moments.n_assets());
    let _ = writeln!(out, "# sample_count: {}", moments.sample_count());
    let _ = writeln!(out, "# mode: {}", moments.mode());
    out.push_str("kind,row,col,re,im\n");
    vector_rows(&mut out, "mean", &moments.mean().to_stacked());
    let cov = moments.covariance();
    for r in 0..cov.nrows() {
        for c in 0..cov.ncols() {
            let z = cov[(r, c)];
            let _ = writeln!(out, "cov,{r},{c},{:?},{:?}", z.re, z.im);
        }
    }
    out
}

pub fn weights_to_csv(weights: &SpectralWeights) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format: {WEIGHTS_FORMAT}");
    grid_header(&mut out, weights.grid());
    let _ = writeln!(out, "# n_assets: {}", weights.n_assets());
    let _ = writeln!(out, "# mode: {}", weights.mode());
    let _ = writeln!(out, "# lambda: {:?}", weights.lambda());
    let _ = writeln!(out, "# sigma0: {:?}", weights.sigma0());
    let _ = writeln!(out, "# ridge: {:?}", weights.ridge());
    out.push_str("kind,row,col,re,im\n");
    vector_rows(&mut out, "weight", &weights.weights().to_stacked());
    out
}

pub fn write_moments_csv(path: impl AsRef<Path>, moments: &SpectralMoments) -> Result<()> {
    write_text(path.as_ref(), &moments_to_csv(moments))
}

pub fn write_weights_csv(path: impl AsRef<Path>, weights: &SpectralWeights) -> Result<()> {
    write_text(path.as_ref(), &weights_to_csv(weights))
}

struct Parsed {
    meta: HashMap<String, String>,
    vectors: HashMap<String, Vec<(usize, Complex64)>>,
    matrix: Vec<(usize, usize, Complex64)>,
}

fn parse(text: &str, source: &str) -> Result<Parsed> {
    let bad = |row: usize, message: String| Error::Ingest {
        path: source.to_string(),
        row,
        message,
    };
    let mut meta = HashMap::new();
    let mut vectors: HashMap<String, Vec<(usize, Complex64)>> = HashMap::new();
    let mut matrix = Vec::new();
    let mut seen_header = false;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .split_once(':')
                .ok_or_else(|| bad(lineno, format!("malformed metadata line '{line}'")))?;
            meta.insert(key.trim().to_string(), value.trim().to_string());
            continue;
        }
        if !seen_header {
            if line != "kind,row,col,re,im" {
                return Err(bad(
                    lineno,
                    format!("expected column header, found '{line}'"),
                ));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(lineno, format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| bad(lineno, format!("'{s}' is not a number")))
        };
        let idx = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| bad(lineno, format!("'{s}' is not an index")))
        };
        let z = Complex64::new(num(f[3])?, num(f[4])?);
        if f[2].is_empty() {
            vectors
                .entry(f[0].to_string())
                .or_default()
                .push((idx(f[1])?, z));
        } else {
            matrix.push((idx(f[1])?, idx(f[2])?, z));
        }
    }
    Ok(Parsed {
        meta,
        vectors,
        matrix,
    })
}

impl Parsed {
    fn get(&self, key: &str, source: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::validation(format!("{source}: missing '# {key}:' line")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str, source: &str) -> Result<T> {
        self.get(key, source)?
            .parse()
            .map_err(|_| Error::validation(format!("{source}: '{key}' is not a number")))
    }

    fn grid(&self, source: &str) -> Result<FrequencyGrid> {
        let label = self.meta.get("label").cloned().unwrap_or_default();
        let grid = if let Some(list) = self.meta.get("periods") {
            let ps = list
                .split(';')
                .map(|p| p.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::validation(format!("{source}: bad period list '{list}'")))?;
            FrequencyGrid::from_periods(&ps, label)?
        } else {
            let list = self.get("omegas", source)?;
            let ws = list
                .split(';')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::validation(format!("{source}: bad frequency list '{list}'")))?;
            FrequencyGrid::from_omegas(ws, label)?
        };
        let declared: usize = self.number("n_bins", source)?;
        if declared != grid.len() {
            return Err(Error::validation(format!(
                "{source}: n_bins {declared} disagrees with the grid ({})",
                grid.len()
            )));
        }
        Ok(grid)
    }

    fn vector(&self, kind: &str, dim: usize, source: &str) -> Result<AugmentedVector> {
        let mut v = DVector::from_element(dim, Complex64::new(f64::NAN, 0.0));
        for &(i, z) in self.vectors.get(kind).map(Vec::as_slice).unwrap_or(&[]) {
            if i >= dim {
                return Err(Error::validation(format!(
                    "{source}: {kind} index {i} out of range"
                )));
            }
            v[i] = z;
        }
        if v.iter().any(|z| z.re.is_nan()) {
            return Err(Error::validation(format!(
                "{source}: {kind} entries are incomplete"
            )));
        }
        AugmentedVector::from_stacked(&v)
    }
}

fn read(path: &Path) -> Result<(String, String)> {
    let source = path.display().to_string();
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(format!("cannot read {source}"), e))?;
    Ok((text, source))
}

pub fn moments_from_csv(text: &str, source: &str) -> Result<SpectralMoments> {
    let p = parse(text, source)?;
    let format = p.get("format", source)?;
    if format != MOMENTS_FORMAT {
        return Err(Error::validation(format!(
            "{source}: unexpected format '{format}'"
        )));
    }
    let grid = p.grid(source)?;
    let n: usize = p.number("n_assets", source)?;
    let dim = 2 * grid.len() * n;
    let mean = p.vector("mean", dim, source)?;
    let mut cov = DMatrix::from_element(dim, dim, Complex64::new(f64::NAN, 0.0));
    for &(r, c, z) in &p.matrix {
        if r >= dim || c >= dim {
            return Err(Error::validation(format!(
                "{source}: covariance index ({r}, {c}) out of range"
            )));
        }
        cov[(r, c)] = z;
    }
    if cov.iter().any(|z| z.re.is_nan()) {
        return Err(Error::validation(format!(
            "{source}: covariance entries are incomplete"
        )));
    }
    let mode: EstimatorMode = p.get("mode", source)?.parse()?;
    let count: usize = p.number("sample_count", source)?;
    SpectralMoments::new(grid, n, mean, cov, count, mode)
}

pub fn weights_from_csv(text: &str, source: &str) -> Result<SpectralWeights> {
    let p = parse(text, source)?;
    let format = p.get("format", source)?;
    if format != WEIGHTS_FORMAT {
        return Err(Error::validation(format!(
            "{source}: unexpected format '{format}'"
        )));
    }
    let grid = p.grid(source)?;
    let n: usize = p.number("n_assets", source)?;
    let w = p.vector("weight", 2 * grid.len() * n, source)?;
    SpectralWeights::from_parts(
        grid,
        n,
        w,
        p.number("lambda", source)?,
        p.get("mode", source)?.parse()?,
        p.number("sigma0", source)?,
        p.number("ridge", source)?,
    )
}

pub fn read_moments_csv(path: impl AsRef<Path>) -> Result<SpectralMoments> {
    let (text, source) = read(path.as_ref())?;
    moments_from_csv(&text, &source)
}

pub fn read_weights_csv(path: impl AsRef<Path>) -> Result<SpectralWeights> {
    let (text, source) = read(path.as_ref())?;
    weights_from_csv(&text, &source)
}
