//! Auxiliary nonclassicality tests on the same single-marginal data.
//!
//! * KLM positivity of `M_jk = C(ξ_j - ξ_k) e^{(ξ_j ξ_k* - ξ_j* ξ_k)/2}` on a
//!   square lattice of the fictitious characteristic function.
//! * Hankel matrices of the deconvolved moments
//!   `⟨x̃^m⟩ = 2^{-3m/2} ⟨H_m(√2 x)⟩`, which are moments of the marginal of
//!   the P function and must be positive for classical states.
//! * The uncertainty relation of the fictitious Wigner function and the
//!   fraction `η_sq` of squeezed axes of a Gaussian state.
//!
//! The 2-D characteristic plane uses `ξ = k_y - i k_x`, so the cut along
//! `k_y = 0` is the measured `C(k_θ)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_pipeline::{mean_std, resample_curve, sample_marginal, seeded_stream};
use crate::demarg_maps::MapKind;
use crate::error::{DemargError, Result};
use crate::fock_core::{hermitian_eigenvalues, DensityMatrix, GaussianParams};
use crate::phasespace::{characteristic, characteristic_xi, CharacteristicCurve, MarginalDistribution};
use crate::special::hermite_polys;
use crate::{CMatrix, C64};

/// Outcome of a threshold test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    /// `true` when the test certifies the property it looks for.
    pub verdict: bool,
    pub witness: f64,
    pub sigma: f64,
    pub threshold: f64,
    /// Signed distance of the witness past the threshold, positive when the
    /// verdict holds before accounting for `sigma`.
    pub margin: f64,
}

/// Where characteristic values come from.
#[derive(Debug, Clone, Copy)]
pub enum CharSource<'a> {
    /// `tr[ρ D(ξ)]` of a physical state on the whole plane.
    State(&'a DensityMatrix),
    /// Fictitious state built from the exact cut of `ρ` along `θ`.
    Fictitious { rho: &'a DensityMatrix, theta: f64, kind: MapKind },
    /// Fictitious state built from a measured cut.
    Measured { curve: &'a CharacteristicCurve, kind: MapKind },
}

fn cut_value(source: &CharSource<'_>, k: f64) -> Result<C64> {
    match source {
        CharSource::State(_) => unreachable!("not a cut"),
        CharSource::Fictitious { rho, theta, .. } => Ok(characteristic(rho, *theta, k)),
        CharSource::Measured { curve, .. } => curve.value_at(k),
    }
}

/// Characteristic function at `ξ = k_y - i k_x`.
pub fn char_value(source: &CharSource<'_>, xi: C64) -> Result<C64> {
    let (kx, ky) = (-xi.im, xi.re);
    match source {
        CharSource::State(rho) => Ok(characteristic_xi(rho, xi)),
        CharSource::Fictitious { kind, .. } | CharSource::Measured { kind, .. } => {
            let cx = cut_value(source, kx)?;
            match kind {
                MapKind::Dm2 => Ok(cx * (-0.5 * ky * ky).exp()),
                MapKind::Dm1 => Ok(cx * cut_value(source, ky)?),
            }
        }
    }
}

/// KLM matrix on an `n × n` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct KlmMatrix {
    pub points: Vec<C64>,
    pub elements: CMatrix,
    pub d: f64,
    pub lambda_min: f64,
}

/// Square `n × n` lattice of spacing `d` centred at the origin of the
/// `(k_x, k_y)` plane.
pub fn klm_lattice(n: usize, d: f64) -> Vec<C64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let kx = (i as f64 - c) * d;
            let ky = (j as f64 - c) * d;
            pts.push(C64::new(ky, -kx));
        }
    }
    pts
}

/// Builds the KLM matrix. Fails with a coverage error when a lattice
/// difference falls outside measured data.
pub fn klm_matrix(source: &CharSource<'_>, n: usize, d: f64) -> Result<KlmMatrix> {
    if n == 0 || !(d > 0.0) {
        return Err(DemargError::Validation(format!("need n ≥ 1 and d > 0, got n={n}, d={d}")));
    }
    let points = klm_lattice(n, d);
    let size = points.len();
    let mut m = CMatrix::zeros(size, size);
    for j in 0..size {
        for k in j..size {
            let (a, b) = (points[j], points[k]);
            let phase = ((a * b.conj() - a.conj() * b) * 0.5).exp();
            let v = char_value(source, a - b)? * phase;
            m[(j, k)] = v;
            m[(k, j)] = v.conj();
        }
    }
    let lambda_min = hermitian_eigenvalues(&m)[0];
    Ok(KlmMatrix {
        points,
        elements: m,
        d,
        lambda_min,
    })
}

/// One row of a KLM scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlmPoint {
    pub d: f64,
    pub lambda_min: f64,
    pub sigma: f64,
}

/// Default lattice spacings: 20 values on `[0.1, 2.0]`, keeping those whose
/// lattice stays inside `k_max` when a limit is given.
pub fn default_d_range(n: usize, k_max: Option<f64>) -> Vec<f64> {
    (0..20)
        .map(|i| 0.1 + i as f64 * 0.1)
        .filter(|&d| match k_max {
            Some(k) if n > 1 => (n as f64 - 1.0) * d <= k * (1.0 + 1e-12),
            _ => true,
        })
        .collect()
}

/// `λ_min(d)` over a range of spacings. For measured curves `σ` is the
/// spread over `resamples` parametric resamples; exact sources get `σ = 0`.
pub fn klm_test(
    source: &CharSource<'_>,
    n: usize,
    d_values: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<Vec<KlmPoint>> {
    d_values
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let lambda_min = klm_matrix(source, n, d)?.lambda_min;
            let sigma = match source {
                CharSource::Measured { curve, kind } if resamples >= 2 => {
                    let vals = (0..resamples)
                        .map(|r| {
                            let mut rng = seeded_stream(seed, ((i as u64) << 32) | r as u64);
                            let c = resample_curve(curve, &mut rng);
                            let s = CharSource::Measured { curve: &c, kind: *kind };
                            klm_matrix(&s, n, d).map(|m| m.lambda_min)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    mean_std(&vals).1
                }
                _ => 0.0,
            };
            Ok(KlmPoint { d, lambda_min, sigma })
        })
        .collect()
}

/// 3σ verdict over a KLM scan: nonclassical if some `λ_min + 3σ < 0`.
pub fn klm_verdict(points: &[KlmPoint]) -> CriterionReport {
    let worst = points
        .iter()
        .min_by(|a, b| (a.lambda_min + 3.0 * a.sigma).total_cmp(&(b.lambda_min + 3.0 * b.sigma)))
        .copied()
        .unwrap_or(KlmPoint {
            d: f64::NAN,
            lambda_min: 0.0,
            sigma: 0.0,
        });
    let margin = -(worst.lambda_min + 3.0 * worst.sigma);
    CriterionReport {
        criterion: "klm".into(),
        verdict: margin > 1e-9,
        witness: worst.lambda_min,
        sigma: worst.sigma,
        threshold: 0.0,
        margin,
    }
}

/// Input to the deconvolved-moment estimator.
#[derive(Debug, Clone, Copy)]
pub enum MomentInput<'a> {
    /// Quadrature outcomes; `N` is their number.
    Samples(&'a [f64]),
    /// A marginal with a nominal shot count for the error estimate. With
    /// `shots = 0` the errors are reported as zero.
    Marginal { marginal: &'a MarginalDistribution, shots: usize },
}

/// Deconvolved moments, their statistical errors and Hankel eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub m_max: usize,
    pub tilde_moments: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `(n, λ_min)` of the `n × n` Hankel matrix for `n ∈ {3, 5, 7}` that fit.
    pub matrices: Vec<(usize, f64)>,
    pub shots: usize,
    #[serde(skip)]
    origin: Option<MomentOrigin>,
}

#[derive(Debug, Clone, PartialEq)]
enum MomentOrigin {
    Samples(Arc<Vec<f64>>),
    Marginal(Arc<MarginalDistribution>),
}

fn hermite_scale(m: usize) -> f64 {
    2f64.powf(-1.5 * m as f64)
}

fn moments_from_samples(xs: &[f64], m_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut s1 = vec![0.0; m_max + 1];
    let mut s2 = vec![0.0; m_max + 1];
    for &x in xs {
        let h = hermite_polys(m_max, std::f64::consts::SQRT_2 * x);
        for m in 0..=m_max {
            s1[m] += h[m];
            s2[m] += h[m] * h[m];
        }
    }
    let n = xs.len() as f64;
    (s1.iter().map(|v| v / n).collect(), s2.iter().map(|v| v / n).collect())
}

/// Leading `n × n` Hankel matrix `M_ij = ⟨x̃^{i+j}⟩` and its minimum eigenvalue.
pub fn hankel_lambda_min(tilde: &[f64], n: usize) -> Result<f64> {
    if tilde.len() < 2 * n - 1 {
        return Err(DemargError::Validation(format!(
            "{n}x{n} moment matrix needs moments up to order {}",
            2 * n - 2
        )));
    }
    let h = DMatrix::from_fn(n, n, |i, j| tilde[i + j]);
    Ok(h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

/// `⟨x̃^m⟩ = 2^{-3m/2}⟨H_m(√2 x)⟩` and
/// `Δ_m = 2^{-3m/2} sqrt((⟨H_m²⟩ - ⟨H_m⟩²)/N)` for `m = 0..=m_max`.
pub fn tilde_moments(input: MomentInput<'_>, m_max: usize) -> Result<MomentReport> {
    let (mean, second, shots, origin) = match input {
        MomentInput::Samples(xs) => {
            if xs.is_empty() {
                return Err(DemargError::Validation("no quadrature samples".into()));
            }
            let (a, b) = moments_from_samples(xs, m_max);
            (a, b, xs.len(), MomentOrigin::Samples(Arc::new(xs.to_vec())))
        }
        MomentInput::Marginal { marginal, shots } => {
            let v = marginal.expectations(2 * (m_max + 1), |x, out| {
                let h = hermite_polys(m_max, std::f64::consts::SQRT_2 * x);
                for m in 0..=m_max {
                    out[m] = h[m];
                    out[m_max + 1 + m] = h[m] * h[m];
                }
            });
            let norm = v[0];
            let a = v[..=m_max].iter().map(|x| x / norm).collect();
            let b = v[m_max + 1..].iter().map(|x| x / norm).collect();
            (a, b, shots, MomentOrigin::Marginal(Arc::new(marginal.clone())))
        }
    };
    let tilde: Vec<f64> = (0..=m_max).map(|m| hermite_scale(m) * mean[m]).collect();
    let deltas = (0..=m_max)
        .map(|m| {
            if shots == 0 {
                0.0
            } else {
                hermite_scale(m) * ((second[m] - mean[m] * mean[m]).max(0.0) / shots as f64).sqrt()
            }
        })
        .collect();
    let matrices = [3usize, 5, 7]
        .iter()
        .filter(|&&n| 2 * n - 2 <= m_max)
        .map(|&n| hankel_lambda_min(&tilde, n).map(|l| (n, l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentReport {
        m_max,
        tilde_moments: tilde,
        deltas,
        matrices,
        shots,
        origin: Some(origin),
    })
}

/// Minimum eigenvalue of the `n × n` Hankel moment matrix with a bootstrap
/// error. Sample data are resampled with replacement; marginals are
/// resampled by drawing `shots` outcomes from the marginal itself.
pub fn moment_matrix_test(r: &MomentReport, n: usize, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    let lambda = hankel_lambda_min(&r.tilde_moments, n)?;
    if r.shots == 0 || resamples < 2 {
        return Ok((lambda, 0.0));
    }
    let order = 2 * n - 2;
    let vals = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let xs: Vec<f64> = match &r.origin {
                Some(MomentOrigin::Samples(s)) => {
                    let mut rng = seeded_stream(seed, i as u64);
                    (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect()
                }
                Some(MomentOrigin::Marginal(m)) => sample_marginal(m, r.shots, seed.wrapping_add(i as u64))?,
                None => {
                    return Err(DemargError::Validation(
                        "moment report carries no data to resample".into(),
                    ))
                }
            };
            let (mean, _) = moments_from_samples(&xs, order);
            let tilde: Vec<f64> = mean.iter().enumerate().map(|(m, v)| hermite_scale(m) * v).collect();
            hankel_lambda_min(&tilde, n)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((lambda, mean_std(&vals).1))
}

/// Uncertainty relation `sqrt(V_x V_y) ≥ 1/4` of the fictitious Wigner
/// function: `V_y = V_x` under DM1 and `V_y = 1/4` under DM2. The verdict
/// is `true` when the relation is violated.
pub fn uncertainty_check(m: &MarginalDistribution, kind: MapKind) -> CriterionReport {
    let vx = m.variance();
    let vy = match kind {
        MapKind::Dm1 => vx,
        MapKind::Dm2 => 0.25,
    };
    let witness = (vx * vy).max(0.0).sqrt();
    let margin = 0.25 - witness;
    CriterionReport {
        criterion: format!("uncertainty-{kind:?}").to_lowercase(),
        verdict: margin > 1e-9,
        witness,
        sigma: 0.0,
        threshold: 0.25,
        margin,
    }
}

/// Fraction of quadrature axes on which a Gaussian state is squeezed,
/// `η_sq = arccos((cosh 2r - μ)/sinh 2r)/π`; zero when no axis is squeezed.
pub fn squeezing_success_probability(p: &GaussianParams) -> Result<f64> {
    if !(p.r > 0.0) || !p.r.is_finite() {
        return Err(DemargError::Validation(format!("squeezing needs r > 0, got {}", p.r)));
    }
    let arg = ((2.0 * p.r).cosh() - p.mu()) / (2.0 * p.r).sinh();
    if arg >= 1.0 {
        return Ok(0.0);
    }
    Ok(arg.clamp(-1.0, 1.0).acos() / std::f64::consts::PI)
}
