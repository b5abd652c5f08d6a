//! Measurement records: simulation with shot noise, CSV/JSON storage and
//! parametric bootstrap.
//!
//! A record stores, per axis `θ` and per `k`, the empirical means of two
//! `±1`-valued observables whose expectations are `Re C(k_θ)` and
//! `Im C(k_θ)`. Only `k ≥ 0` is stored; negative `k` follow from
//! `C(-k) = C(k)*`.
//!
//! On disk a record is a CSV file with header
//! `theta_rad,k,re_mean,im_mean,shots_re,shots_im` plus a JSON sidecar with
//! the same stem holding the label and metadata.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DemargError, Result};
use crate::fock_core::{Convention, DensityMatrix};
use crate::phasespace::{
    characteristic, marginal_analytic, CharacteristicCurve, CharacteristicSample, MarginalData, MarginalDistribution,
};
use crate::C64;

/// Column names of the CSV format, in canonical order.
pub const CSV_COLUMNS: [&str; 6] = ["theta_rad", "k", "re_mean", "im_mean", "shots_re", "shots_im"];

/// One `k` point of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub k: f64,
    pub re_mean: f64,
    pub im_mean: f64,
    pub shots_re: u64,
    pub shots_im: u64,
}

/// All `k` points measured along one quadrature axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAxis {
    pub theta: f64,
    pub samples: Vec<MeasurementSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub convention: Convention,
    /// Free-form; left empty by the simulator so that output is reproducible.
    pub timestamp: Option<String>,
    pub source: String,
    pub seed: Option<u64>,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            convention: Convention::HalfQuadrature,
            timestamp: None,
            source: "unknown".into(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub state_label: String,
    pub axes: Vec<MeasurementAxis>,
    pub metadata: Metadata,
}

impl MeasurementSample {
    fn check(&self) -> std::result::Result<(), String> {
        if self.shots_re == 0 || self.shots_im == 0 {
            return Err(format!("shots must be ≥ 1 (got {}, {})", self.shots_re, self.shots_im));
        }
        if !self.k.is_finite() || self.k < 0.0 {
            return Err(format!("k must be finite and ≥ 0, got {}", self.k));
        }
        for (name, v) in [("re_mean", self.re_mean), ("im_mean", self.im_mean)] {
            if !v.is_finite() || v.abs() > 1.0 {
                return Err(format!("{name} = {v} is not a mean of ±1 outcomes"));
            }
        }
        Ok(())
    }
}

impl MeasurementAxis {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(DemargError::Validation(format!("axis θ={} has no samples", self.theta)));
        }
        if !self.theta.is_finite() {
            return Err(DemargError::Validation("axis angle is not finite".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.check()
                .map_err(|e| DemargError::Validation(format!("axis θ={}, sample {i}: {e}", self.theta)))?;
        }
        if self.samples.windows(2).any(|w| w[1].k <= w[0].k) {
            return Err(DemargError::Validation(format!(
                "axis θ={}: k values must be strictly increasing",
                self.theta
            )));
        }
        Ok(())
    }

    /// Characteristic cut with binomial standard errors.
    pub fn to_curve(&self) -> Result<CharacteristicCurve> {
        let samples = self
            .samples
            .iter()
            .map(|s| CharacteristicSample {
                k: s.k,
                value: C64::new(s.re_mean, s.im_mean),
                sigma_re: ((1.0 - s.re_mean * s.re_mean).max(0.0) / s.shots_re as f64).sqrt(),
                sigma_im: ((1.0 - s.im_mean * s.im_mean).max(0.0) / s.shots_im as f64).sqrt(),
                shots: s.shots_re.min(s.shots_im),
            })
            .collect();
        CharacteristicCurve::new(self.theta, samples)
    }
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(DemargError::Validation("record has no axes".into()));
        }
        self.axes.iter().try_for_each(MeasurementAxis::validate)
    }

    pub fn curves(&self) -> Result<Vec<CharacteristicCurve>> {
        self.axes.iter().map(MeasurementAxis::to_curve).collect()
    }
}

/// 30 uniform points on `(0, 3]`.
pub fn default_k_grid() -> Vec<f64> {
    (1..=30).map(|i| i as f64 * 0.1).collect()
}

/// Six axes `iπ/6`, `i = 0..6`.
pub fn default_axes() -> Vec<f64> {
    (0..6).map(|i| i as f64 * std::f64::consts::PI / 6.0).collect()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn binomial_mean<R: Rng>(rng: &mut R, shots: u64, mean: f64) -> f64 {
    let p = (0.5 * (1.0 + mean)).clamp(0.0, 1.0);
    let hits = Binomial::new(shots, p).expect("p clamped to [0,1]").sample(rng);
    2.0 * hits as f64 / shots as f64 - 1.0
}

/// Simulated measurement of one axis. Each `k` point draws `shots`
/// outcomes for the real and for the imaginary part. Every point uses its
/// own counter-based stream, so the result does not depend on scheduling.
pub fn simulate_measurement(
    rho: &DensityMatrix,
    theta: f64,
    k_grid: &[f64],
    shots: u64,
    seed: u64,
) -> Result<MeasurementAxis> {
    simulate_axis(rho, theta, k_grid, shots, seed, 0)
}

fn simulate_axis(
    rho: &DensityMatrix,
    theta: f64,
    k_grid: &[f64],
    shots: u64,
    seed: u64,
    axis_index: u64,
) -> Result<MeasurementAxis> {
    if shots == 0 {
        return Err(DemargError::Validation("shots must be ≥ 1".into()));
    }
    if rho.is_fictitious() {
        return Err(DemargError::Validation("cannot measure a fictitious operator".into()));
    }
    let samples: Vec<MeasurementSample> = k_grid
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let c = characteristic(rho, theta, k);
            let mut rng = stream_rng(seed, (axis_index << 32) | i as u64);
            MeasurementSample {
                k,
                re_mean: binomial_mean(&mut rng, shots, c.re),
                im_mean: binomial_mean(&mut rng, shots, c.im),
                shots_re: shots,
                shots_im: shots,
            }
        })
        .collect();
    if let Some(&k_last) = k_grid.last() {
        let tail = characteristic(rho, theta, k_last).norm();
        if tail > 5e-2 {
            log::warn!("|C| = {tail:.3e} at the last k = {k_last}; the grid does not reach the decay");
        }
    }
    let axis = MeasurementAxis { theta, samples };
    axis.validate()?;
    Ok(axis)
}

/// Simulated record over several axes with a shared seed.
pub fn simulate_record(
    rho: &DensityMatrix,
    label: &str,
    thetas: &[f64],
    k_grid: &[f64],
    shots: u64,
    seed: u64,
) -> Result<MeasurementRecord> {
    let axes = thetas
        .iter()
        .enumerate()
        .map(|(a, &t)| simulate_axis(rho, t, k_grid, shots, seed, a as u64 + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementRecord {
        state_label: label.to_string(),
        axes,
        metadata: Metadata {
            source: "simulated".into(),
            seed: Some(seed),
            ..Metadata::default()
        },
    })
}

/// Path of the JSON sidecar belonging to a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    state_label: String,
    metadata: Metadata,
}

/// Writes the CSV file and its sidecar.
pub fn save_records(record: &MeasurementRecord, path: &Path) -> Result<()> {
    record.validate()?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for axis in &record.axes {
        for s in &axis.samples {
            w.write_record([
                axis.theta.to_string(),
                s.k.to_string(),
                s.re_mean.to_string(),
                s.im_mean.to_string(),
                s.shots_re.to_string(),
                s.shots_im.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let side = Sidecar {
        state_label: record.state_label.clone(),
        metadata: record.metadata.clone(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Reads a CSV record and, when present, its sidecar. Rows with the same
/// consecutive `theta_rad` form one axis. Errors name the offending line.
pub fn load_records(path: &Path) -> Result<MeasurementRecord> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut col: HashMap<&str, usize> = HashMap::new();
    for name in CSV_COLUMNS {
        match headers.iter().position(|h| h == name) {
            Some(i) => {
                col.insert(name, i);
            }
            None => {
                return Err(DemargError::Validation(format!(
                    "{}: missing column '{name}'",
                    path.display()
                )))
            }
        }
    }
    let mut axes: Vec<MeasurementAxis> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec?;
        let field = |name: &str| -> Result<&str> {
            rec.get(col[name]).ok_or_else(|| {
                DemargError::Validation(format!("{}:{line}: missing value for '{name}'", path.display()))
            })
        };
        let float = |name: &str| -> Result<f64> {
            let s = field(name)?;
            s.parse::<f64>().map_err(|_| {
                DemargError::Validation(format!("{}:{line}: '{name}' = '{s}' is not a number", path.display()))
            })
        };
        let count = |name: &str| -> Result<u64> {
            let s = field(name)?;
            s.parse::<u64>().map_err(|_| {
                DemargError::Validation(format!(
                    "{}:{line}: '{name}' = '{s}' is not a non-negative integer",
                    path.display()
                ))
            })
        };
        let theta = float("theta_rad")?;
        let sample = MeasurementSample {
            k: float("k")?,
            re_mean: float("re_mean")?,
            im_mean: float("im_mean")?,
            shots_re: count("shots_re")?,
            shots_im: count("shots_im")?,
        };
        sample
            .check()
            .map_err(|e| DemargError::Validation(format!("{}:{line}: {e}", path.display())))?;
        match axes.last_mut() {
            Some(a) if a.theta == theta => {
                let prev = a.samples[a.samples.len() - 1].k;
                if sample.k <= prev {
                    return Err(DemargError::Validation(format!(
                        "{}:{line}: k = {} does not increase (previous {prev})",
                        path.display(),
                        sample.k
                    )));
                }
                a.samples.push(sample);
            }
            _ => axes.push(MeasurementAxis {
                theta,
                samples: vec![sample],
            }),
        }
    }
    let side = sidecar_path(path);
    let (state_label, metadata) = if side.exists() {
        let s: Sidecar = serde_json::from_str(&std::fs::read_to_string(&side)?)?;
        (s.state_label, s.metadata)
    } else {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
        (stem.to_string(), Metadata::default())
    };
    let record = MeasurementRecord {
        state_label,
        axes,
        metadata,
    };
    record.validate()?;
    Ok(record)
}

/// One parametric resample: every mean is redrawn from
/// `Binomial(shots, (1 + mean)/2)`.
pub fn resample_axis<R: Rng>(axis: &MeasurementAxis, rng: &mut R) -> MeasurementAxis {
    MeasurementAxis {
        theta: axis.theta,
        samples: axis
            .samples
            .iter()
            .map(|s| MeasurementSample {
                re_mean: binomial_mean(rng, s.shots_re, s.re_mean),
                im_mean: binomial_mean(rng, s.shots_im, s.im_mean),
                ..*s
            })
            .collect(),
    }
}

/// Bootstrap summary of a scalar analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Analysis of the original data.
    pub estimate: f64,
    /// Mean over resamples.
    pub mean: f64,
    /// Sample standard deviation over resamples.
    pub sigma: f64,
    pub resamples: usize,
}

/// Parametric bootstrap of `analysis` over one axis. Resample `i` uses
/// stream `i` of the seeded generator.
pub fn bootstrap<F>(axis: &MeasurementAxis, resamples: usize, seed: u64, analysis: F) -> Result<BootstrapResult>
where
    F: Fn(&MeasurementAxis) -> Result<f64> + Sync,
{
    bootstrap_many(std::slice::from_ref(axis), resamples, seed, |a| analysis(&a[0]))
}

/// As [`bootstrap`] for an analysis that consumes several axes at once.
pub fn bootstrap_many<F>(axes: &[MeasurementAxis], resamples: usize, seed: u64, analysis: F) -> Result<BootstrapResult>
where
    F: Fn(&[MeasurementAxis]) -> Result<f64> + Sync,
{
    if resamples < 2 {
        return Err(DemargError::Validation(format!(
            "bootstrap needs at least 2 resamples to define a spread, got {resamples}"
        )));
    }
    let estimate = analysis(axes)?;
    let values = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let re: Vec<MeasurementAxis> = axes.iter().map(|a| resample_axis(a, &mut rng)).collect();
            analysis(&re)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sigma) = mean_std(&values);
    Ok(BootstrapResult {
        estimate,
        mean,
        sigma,
        resamples,
    })
}

/// Mean and sample standard deviation (`n - 1` denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `n` quadrature outcomes `x_θ` drawn from the marginal of `ρ`.
pub fn sample_quadratures(rho: &DensityMatrix, theta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if rho.is_fictitious() {
        return Err(DemargError::Validation("cannot sample a fictitious operator".into()));
    }
    sample_marginal(&marginal_analytic(rho, theta), n, seed)
}

/// `n` draws from a marginal by inverse transform sampling on a fine grid.
pub fn sample_marginal(m: &MarginalDistribution, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (lo, hi) = match &m.data {
        MarginalData::Analytic { ctilde } => {
            let half = 0.5 * (2.0 * ctilde.len() as f64 + 1.0).sqrt() + 4.0;
            (-half, half)
        }
        MarginalData::Sampled { x, .. } => (x[0], x[x.len() - 1]),
    };
    const POINTS: usize = 8001;
    let h = (hi - lo) / (POINTS - 1) as f64;
    let xs: Vec<f64> = (0..POINTS).map(|i| lo + i as f64 * h).collect();
    let dens: Vec<f64> = xs.iter().map(|&x| m.density(x).max(0.0)).collect();
    let mut cdf = vec![0.0; POINTS];
    for i in 1..POINTS {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
    }
    let total = cdf[POINTS - 1];
    if !(total > 0.0) {
        return Err(DemargError::Validation("marginal has no positive mass to sample".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let out = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c < u).clamp(1, POINTS - 1);
            let span = cdf[i] - cdf[i - 1];
            let t = if span > 0.0 { (u - cdf[i - 1]) / span } else { 0.5 };
            xs[i - 1] + t * h
        })
        .collect();
    Ok(out)
}

/// Parametric resample of a characteristic cut using the recorded shot
/// counts. Points with `shots = 0` (noise-free) are kept as they are.
pub fn resample_curve<R: Rng>(curve: &CharacteristicCurve, rng: &mut R) -> CharacteristicCurve {
    CharacteristicCurve {
        theta: curve.theta,
        samples: curve
            .samples
            .iter()
            .map(|s| {
                if s.shots == 0 {
                    return *s;
                }
                CharacteristicSample {
                    value: C64::new(
                        binomial_mean(rng, s.shots, s.value.re),
                        binomial_mean(rng, s.shots, s.value.im),
                    ),
                    ..*s
                }
            })
            .collect(),
    }
}

/// Seeded generator on an independent stream.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    stream_rng(seed, stream)
}
