//! Phase randomization and the Gaussian bounds on DM2 negativity.
//!
//! A Gaussian marginal of variance `V` has DM2 negativity
//! `max(1/(4√V) - 1/2, 0)`. Averaging over a full phase randomization of a
//! squeezed vacuum and using convexity gives
//! `B(r) = (1/π)[e^r F(θ_c, 1 - e^{4r}) - θ_c]`, `θ_c = arccos(tanh r)/2`,
//! whose maximum over `r` is the bound `B_G`. For `N` discrete rotations the
//! bound is obtained numerically by running the DM2 pipeline on the rotated
//! mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::CriterionReport;
use crate::demarg_maps::{golden_max, max_negativity, MapKind};
use crate::error::{DemargError, Result};
use crate::fock_core::{squeezed_thermal_state, DensityMatrix, GaussianParams};
use crate::quadrature::gauss_legendre;
use crate::special::elliptic_f;
use crate::{CMatrix, C64};

/// Number of phase rotations `θ_k = kπ/N` in a randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotations {
    Finite(usize),
    Infinite,
}

impl std::fmt::Display for Rotations {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rotations::Finite(n) => write!(f, "{n}"),
            Rotations::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Rotations {
    type Err = DemargError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" => Ok(Rotations::Infinite),
            other => match other.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Rotations::Finite(n)),
                _ => Err(DemargError::Validation(format!(
                    "rotations must be a positive integer or 'inf', got '{s}'"
                ))),
            },
        }
    }
}

/// `(1/N) Σ_k e^{-iπ d k/N}`, in closed form so that vanishing entries are
/// exactly zero. It is 1 when `d` is a multiple of `2N`, 0 for the other
/// even `d`, and `2/(N(1 - e^{-iπd/N}))` for odd `d`.
pub fn rotation_factor(d: i64, n: usize) -> C64 {
    let n_i = n as i64;
    if d.rem_euclid(2 * n_i) == 0 {
        return C64::new(1.0, 0.0);
    }
    if d % 2 == 0 {
        return C64::new(0.0, 0.0);
    }
    let w = C64::from_polar(1.0, -std::f64::consts::PI * d as f64 / n as f64);
    C64::new(2.0, 0.0) / ((C64::new(1.0, 0.0) - w) * n as f64)
}

/// `(1/N) Σ_k e^{-iθ_k n̂} ρ e^{iθ_k n̂}`; `Infinite` keeps the diagonal.
pub fn phase_randomize(rho: &DensityMatrix, rotations: Rotations) -> Result<DensityMatrix> {
    let d = rho.dim();
    let m = match rotations {
        Rotations::Finite(0) => {
            return Err(DemargError::Validation("need at least one rotation".into()));
        }
        Rotations::Finite(n) => CMatrix::from_fn(d, d, |i, j| rho.get(i, j) * rotation_factor(i as i64 - j as i64, n)),
        Rotations::Infinite => CMatrix::from_fn(d, d, |i, j| if i == j { rho.get(i, j) } else { C64::new(0.0, 0.0) }),
    };
    DensityMatrix::from_matrix(m, rho.is_fictitious())
}

/// DM2 negativity of a Gaussian marginal with variance `v`.
pub fn gaussian_dm2_negativity(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(DemargError::Validation(format!("variance must be positive, got {v}")));
    }
    Ok((0.25 / v.sqrt() - 0.5).max(0.0))
}

/// Boundary angle `θ_c = arccos(tanh r)/2` of the squeezed sector.
pub fn critical_angle(r: f64) -> f64 {
    0.5 * r.tanh().acos()
}

/// Closed-form bound for a fully randomized squeezed vacuum.
pub fn gaussian_bound_full(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let tc = critical_angle(r);
    let m = 1.0 - (4.0 * r).exp();
    (r.exp() * elliptic_f(tc, m) - tc) / std::f64::consts::PI
}

/// The same bound by direct quadrature of `(2/π)∫_0^{θ_c} N_DM2(V_θ) dθ`.
pub fn gaussian_bound_direct(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let tc = critical_angle(r);
    let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let f = |t: f64| 0.5 / (c - s * (2.0 * t).cos()).sqrt() - 0.5;
    2.0 / std::f64::consts::PI * gauss_legendre(f, 0.0, tc, 400)
}

/// `(r*, B_G)`: golden-section maximum of [`gaussian_bound_full`] on `[0.1, 2]`.
pub fn gaussian_bound_maximum() -> (f64, f64) {
    golden_max(gaussian_bound_full, 0.1, 2.0, 1e-10)
}

/// Settings of the numerical finite-`N` bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteBoundConfig {
    /// Fock dimension of the squeezed vacuum.
    pub state_dim: usize,
    /// Leading block of the fictitious operator that is diagonalized.
    pub out_dim: usize,
    /// Grid points per period `π/N` before golden refinement.
    pub theta_points: usize,
}

impl Default for FiniteBoundConfig {
    fn default() -> Self {
        FiniteBoundConfig {
            state_dim: 112,
            out_dim: 40,
            theta_points: 12,
        }
    }
}

/// Bound against energy `n = sinh² r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundCurve {
    pub n_rotations: Rotations,
    pub energy_grid: Vec<f64>,
    pub bound: Vec<f64>,
    pub max_bound: f64,
}

/// `max_θ` DM2 negativity of an `N`-fold rotated squeezed vacuum.
pub fn finite_bound_at(n: usize, r: f64, cfg: &FiniteBoundConfig) -> Result<f64> {
    if n == 0 {
        return Err(DemargError::Validation("need at least one rotation".into()));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let rho = squeezed_thermal_state(&GaussianParams::squeezed_vacuum(r, 0.0)?, cfg.state_dim)?;
    let sigma = phase_randomize(&rho, Rotations::Finite(n))?;
    let period = std::f64::consts::PI / n as f64;
    let (v, _) = max_negativity(&sigma, MapKind::Dm2, Some(cfg.out_dim), cfg.theta_points, period)?;
    Ok(v)
}

/// Bound curve on a grid of squeeze parameters. `Infinite` uses the closed
/// form; finite `N` runs the DM2 pipeline at every grid point.
pub fn gaussian_bound_finite(
    rotations: Rotations,
    r_grid: &[f64],
    cfg: &FiniteBoundConfig,
) -> Result<GaussianBoundCurve> {
    if r_grid.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(DemargError::Validation("squeeze parameters must be finite and ≥ 0".into()));
    }
    let bound: Vec<f64> = match rotations {
        Rotations::Infinite => r_grid.iter().map(|&r| gaussian_bound_full(r)).collect(),
        Rotations::Finite(n) => r_grid
            .par_iter()
            .map(|&r| finite_bound_at(n, r, cfg))
            .collect::<Result<Vec<f64>>>()?,
    };
    let max_bound = match rotations {
        Rotations::Infinite => gaussian_bound_maximum().1,
        Rotations::Finite(_) => bound.iter().copied().fold(0.0, f64::max),
    };
    Ok(GaussianBoundCurve {
        n_rotations: rotations,
        energy_grid: r_grid.iter().map(|r| r.sinh().powi(2)).collect(),
        bound,
        max_bound,
    })
}

/// Squeeze parameter with energy `n = sinh² r`.
pub fn squeeze_for_energy(n: f64) -> f64 {
    n.max(0.0).sqrt().asinh()
}

/// Threshold for a test state of mean energy `energy`: `B_G` under full
/// randomization, otherwise the finite-`N` bound of the squeezed vacuum of
/// the same energy.
pub fn gaussian_threshold(rotations: Rotations, energy: f64, cfg: &FiniteBoundConfig) -> Result<f64> {
    match rotations {
        Rotations::Infinite => Ok(gaussian_bound_maximum().1),
        Rotations::Finite(n) => finite_bound_at(n, squeeze_for_energy(energy), cfg),
    }
}

/// Genuine non-Gaussianity: the witness must exceed the Gaussian threshold
/// by more than 3σ.
pub fn genuine_non_gaussianity_verdict(
    neg: f64,
    sigma: f64,
    rotations: Rotations,
    energy: f64,
) -> Result<CriterionReport> {
    if !(sigma >= 0.0) || !energy.is_finite() || energy < 0.0 {
        return Err(DemargError::Validation(format!(
            "need σ ≥ 0 and energy ≥ 0, got σ={sigma}, energy={energy}"
        )));
    }
    let threshold = gaussian_threshold(rotations, energy, &FiniteBoundConfig::default())?;
    let margin = neg - 3.0 * sigma - threshold;
    Ok(CriterionReport {
        criterion: format!("genuine-non-gaussianity-n{rotations}"),
        verdict: margin > 0.0,
        witness: neg,
        sigma,
        threshold,
        margin: neg - threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_core::fock_state;

    #[test]
    fn randomization_factors() {
        // Even offsets vanish unless divisible by 2N; odd offsets survive.
        assert_eq!(rotation_factor(12, 6), C64::new(1.0, 0.0));
        assert_eq!(rotation_factor(2, 6), C64::new(0.0, 0.0));
        for n in 1..8 {
            for d in -20i64..20 {
                let direct: C64 = (0..n)
                    .map(|k| C64::from_polar(1.0, -std::f64::consts::PI * (d * k as i64) as f64 / n as f64))
                    .sum::<C64>()
                    / n as f64;
                assert!((direct - rotation_factor(d, n)).norm() < 1e-13, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn dephasing_superposition() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)]).unwrap();
        let d = phase_randomize(&psi, Rotations::Infinite).unwrap();
        assert!((d.get(0, 0).re - 0.5).abs() < 1e-15 && (d.get(2, 2).re - 0.5).abs() < 1e-15);
        assert_eq!(d.get(0, 2), C64::new(0.0, 0.0));
        assert_eq!(phase_randomize(&psi, Rotations::Finite(1)).unwrap(), psi);
        let f = fock_state(3, 5).unwrap();
        assert_eq!(phase_randomize(&f, Rotations::Finite(6)).unwrap(), f);
    }

    #[test]
    fn gaussian_negativity_law() {
        assert_eq!(gaussian_dm2_negativity(0.25).unwrap(), 0.0);
        assert!((gaussian_dm2_negativity(1.0 / 16.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(gaussian_dm2_negativity(0.0).is_err());
        let mut prev = 0.0;
        for k in 1..30 {
            let v = 0.25 * 0.5f64.powi(k);
            let n = gaussian_dm2_negativity(v).unwrap();
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        assert_eq!(gaussian_bound_full(0.0), 0.0);
        for r in [0.05, 0.1, 0.5, 1.0, 1.5, 2.0, 3.0] {
            let a = gaussian_bound_full(r);
            let b = gaussian_bound_direct(r);
            assert!((a - b).abs() < 1e-8, "r={r}: {a} vs {b}");
        }
        // Independent evaluation with scipy's ellipkinc.
        assert!((gaussian_bound_full(0.1) - 0.0152655).abs() < 1e-6);
        assert!((gaussian_bound_full(0.5) - 0.0616706).abs() < 1e-6);
        assert!((gaussian_bound_full(1.0) - 0.0867044).abs() < 1e-6);
    }

    #[test]
    fn bound_maximum() {
        let (r, b) = gaussian_bound_maximum();
        assert!((b - 0.0887).abs() < 5e-4);
        assert!((b - 0.088663).abs() < 1e-5);
        assert!((r - 1.21394).abs() < 1e-3);
        // Decreasing after the peak.
        assert!(gaussian_bound_full(2.0) < b && gaussian_bound_full(4.0) < gaussian_bound_full(2.0));
    }
}
