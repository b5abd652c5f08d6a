//! State generators and property checks shared by the acceptance target and
//! the property suites.
#![allow(dead_code)]

use demarg_core::criteria::{klm_matrix, tilde_moments, CharSource, MomentInput};
use demarg_core::demarg_maps::{dm_analytic, dm_block, MapKind};
use demarg_core::fock_core::{coherent_amplitudes, displacement_operator, phase_rotate, DensityMatrix};
use demarg_core::phasespace::marginal_analytic;
use demarg_core::{CMatrix, C64};
use rand::Rng;
use rand_distr::StandardNormal;

pub const KINDS: [MapKind; 2] = [MapKind::Dm1, MapKind::Dm2];

/// `G G† / tr` for a `dim × dim` matrix filled from `params` (real and
/// imaginary parts interleaved, at least `2 dim²` values).
pub fn fds_from_params(dim: usize, params: &[f64]) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        C64::new(params[k], params[k + 1])
    });
    let m = &g * g.adjoint();
    let t = m.trace().re;
    DensityMatrix::from_matrix(m / C64::new(t, 0.0), false).expect("Gram matrix is Hermitian")
}

/// Random mixed state supported on `|0⟩..|N⟩`, `N` uniform in `1..=max_n`.
pub fn random_fds<R: Rng>(rng: &mut R, max_n: usize) -> DensityMatrix {
    let n = rng.random_range(1..=max_n);
    let dim = n + 1;
    let params: Vec<f64> = (0..2 * dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    fds_from_params(dim, &params)
}

/// `Σ w_i |α_i⟩⟨α_i|` with normalized weights.
pub fn coherent_mixture(alphas: &[C64], weights: &[f64], dim: usize) -> DensityMatrix {
    let total: f64 = weights.iter().sum();
    let mut m = CMatrix::zeros(dim, dim);
    for (a, w) in alphas.iter().zip(weights) {
        let v = coherent_amplitudes(*a, dim);
        m += CMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj() * (w / total));
    }
    DensityMatrix::hermitized(m, false)
}

pub fn random_coherent_mixture<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let k = rng.random_range(1..=3);
    let alphas: Vec<C64> = (0..k)
        .map(|_| C64::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)))
        .collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    coherent_mixture(&alphas, &weights, dim)
}

/// Working dimension for classical states in the property checks.
pub const CLASSICAL_DIM: usize = 40;
const CLASSICAL_BLOCK: usize = 12;

pub fn classicality_check(rho: &DensityMatrix, theta: f64) -> Result<(), String> {
    for kind in KINDS {
        let n = dm_block(rho, theta, kind, CLASSICAL_BLOCK)
            .negativity()
            .map_err(|e| e.to_string())?;
        if n > 1e-9 {
            return Err(format!("{kind:?} negativity {n:e} of a classical state at θ={theta}"));
        }
    }
    Ok(())
}

pub fn convexity_check(a: &DensityMatrix, b: &DensityMatrix, p: f64, theta: f64) -> Result<(), String> {
    let mix = a.mix(b, p).map_err(|e| e.to_string())?;
    for kind in KINDS {
        let n = |r: &DensityMatrix| dm_analytic(r, theta, kind).negativity().map_err(|e| e.to_string());
        let (nm, na, nb) = (n(&mix)?, n(a)?, n(b)?);
        if nm > p * na + (1.0 - p) * nb + 1e-12 {
            return Err(format!("{kind:?}: N(mix)={nm} > {p}·{na} + {}·{nb}", 1.0 - p));
        }
    }
    Ok(())
}

const DISPLACED_DIM: usize = 64;
const DISPLACED_BLOCK: usize = 32;

pub fn displacement_check(rho: &DensityMatrix, alpha: C64, theta: f64) -> Result<(), String> {
    let big = rho.resized(DISPLACED_DIM).map_err(|e| e.to_string())?;
    let shifted = displacement_operator(alpha, DISPLACED_DIM)
        .conjugate(&big)
        .map_err(|e| e.to_string())?;
    for kind in KINDS {
        let n0 = dm_analytic(rho, theta, kind).negativity().map_err(|e| e.to_string())?;
        let n1 = dm_block(&shifted, theta, kind, DISPLACED_BLOCK)
            .negativity()
            .map_err(|e| e.to_string())?;
        if (n0 - n1).abs() > 1e-9 {
            return Err(format!("{kind:?}: N={n0} but N(displaced by {alpha})={n1}"));
        }
    }
    Ok(())
}

pub fn phase_covariance_check(rho: &DensityMatrix, phi: f64, theta: f64) -> Result<(), String> {
    let rotated = phase_rotate(rho, phi);
    for kind in KINDS {
        let a = dm_analytic(&rotated, theta, kind).negativity().map_err(|e| e.to_string())?;
        let b = dm_analytic(rho, theta + phi, kind).negativity().map_err(|e| e.to_string())?;
        if (a - b).abs() > 1e-10 {
            return Err(format!("{kind:?}: N^θ[R(φ)ρ]={a} vs N^(θ+φ)[ρ]={b}"));
        }
    }
    Ok(())
}

/// Hankel matrices of deconvolved moments and 3×3-lattice KLM matrices of
/// both fictitious states are positive for a classical state.
pub fn hamburger_klm_check(rho: &DensityMatrix, theta: f64, d: f64) -> Result<(), String> {
    let m = marginal_analytic(rho, theta);
    let rep = tilde_moments(MomentInput::Marginal { marginal: &m, shots: 0 }, 8).map_err(|e| e.to_string())?;
    let scale = rep.tilde_moments.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    for &(n, l) in &rep.matrices {
        if l < -1e-9 * scale {
            return Err(format!("Hankel {n}×{n} λ_min = {l:e} at θ={theta}"));
        }
    }
    for kind in KINDS {
        let src = CharSource::Fictitious { rho, theta, kind };
        let l = klm_matrix(&src, 3, d).map_err(|e| e.to_string())?.lambda_min;
        if l < -1e-9 {
            return Err(format!("{kind:?} KLM λ_min = {l:e} at θ={theta}, d={d}"));
        }
    }
    Ok(())
}
