//! Two-mode states, the 50:50 beam splitter, partial transpose and the
//! entanglement potential.
//!
//! The beam splitter maps `|β1, β2⟩` to `|(β1+β2)/√2, (β1-β2)/√2⟩`, so the
//! Wigner function transforms with `(q1, q2) → ((q1+q2)/√2, (q1-q2)/√2)` and
//! likewise for `p`. It conserves the total photon number `T`, and on the
//! block of fixed `T`
//! `⟨p, T-p| U |n, T-n⟩ = (-1)^{T-n} U^{(T)}_{p n}`
//! with the orthogonal Krawtchouk matrix of [`crate::special::krawtchouk`].
//! Blocks with `T < dim` are complete in a per-mode cutoff `dim`, so the
//! transformation is exact there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::CriterionReport;
use crate::demarg_maps::{max_negativity, MapKind};
use crate::error::{DemargError, Result};
use crate::fock_core::{displacement_matrix, fock_state, hermitian_defect, hermitian_eigenvalues, phase_rotate, DensityMatrix, Operator};
use crate::special::krawtchouk;
use crate::{CMatrix, C64};

/// Hermitian operator on two modes, indexed by `n1 * dim + n2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    dim: usize,
    elements: CMatrix,
}

/// Ordering of the product basis.
#[inline]
pub fn two_mode_index(n1: usize, n2: usize, dim: usize) -> usize {
    n1 * dim + n2
}

impl TwoModeState {
    pub fn from_matrix(dim: usize, elements: CMatrix) -> Result<Self> {
        if elements.nrows() != dim * dim || elements.ncols() != dim * dim {
            return Err(DemargError::Validation(format!(
                "two-mode matrix must be {0}x{0}, got {1}x{2}",
                dim * dim,
                elements.nrows(),
                elements.ncols()
            )));
        }
        let scale = elements.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if hermitian_defect(&elements) > 1e-10 * scale {
            return Err(DemargError::Validation("two-mode matrix is not Hermitian".into()));
        }
        Ok(TwoModeState { dim, elements })
    }

    /// `ρ1 ⊗ ρ2`, both padded to `dim`.
    pub fn product(a: &DensityMatrix, b: &DensityMatrix, dim: usize) -> Result<Self> {
        let a = a.resized(dim)?;
        let b = b.resized(dim)?;
        Ok(TwoModeState {
            dim,
            elements: a.elements().kronecker(b.elements()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn get(&self, n1: usize, n2: usize, m1: usize, m2: usize) -> C64 {
        let d = self.dim;
        self.elements[(two_mode_index(n1, n2, d), two_mode_index(m1, m2, d))]
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.elements)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `(‖h‖₁ - tr h)/2`, the weight of negative eigenvalues.
    pub fn negativity(&self) -> f64 {
        self.eigenvalues().iter().filter(|l| **l < 0.0).map(|l| -l).sum()
    }

    /// Reduced operator of mode 1.
    pub fn trace_mode2(&self) -> DensityMatrix {
        let d = self.dim;
        let m = CMatrix::from_fn(d, d, |i, j| (0..d).map(|k| self.get(i, k, j, k)).sum());
        DensityMatrix::hermitized(m, false)
    }

    /// Reduced operator of mode 2.
    pub fn trace_mode1(&self) -> DensityMatrix {
        let d = self.dim;
        let m = CMatrix::from_fn(d, d, |i, j| (0..d).map(|k| self.get(k, i, k, j)).sum());
        DensityMatrix::hermitized(m, false)
    }

    /// `tr[(N̂1 + N̂2) ρ]`.
    pub fn total_photon_number(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for n1 in 0..d {
            for n2 in 0..d {
                acc += (n1 + n2) as f64 * self.get(n1, n2, n1, n2).re;
            }
        }
        acc
    }

    /// `W(q1, p1, q2, p2)`, the product-kernel extension of
    /// [`crate::phasespace::wigner`].
    pub fn wigner(&self, q1: f64, p1: f64, q2: f64, p2: f64) -> f64 {
        let d = self.dim;
        let d1 = displacement_matrix(C64::new(2.0 * q1, 2.0 * p1), d);
        let d2 = displacement_matrix(C64::new(2.0 * q2, 2.0 * p2), d);
        let mut acc = C64::new(0.0, 0.0);
        for j1 in 0..d {
            for j2 in 0..d {
                let sign = if (j1 + j2) % 2 == 0 { 1.0 } else { -1.0 };
                let col = two_mode_index(j1, j2, d);
                for k1 in 0..d {
                    for k2 in 0..d {
                        let r = self.elements[(col, two_mode_index(k1, k2, d))];
                        acc += r * d1[(k1, j1)] * d2[(k2, j2)] * sign;
                    }
                }
            }
        }
        acc.re * 4.0 / (std::f64::consts::PI * std::f64::consts::PI)
    }

    /// Largest element touching a block of total photon number `≥ dim`.
    fn weight_beyond_complete_blocks(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d * d {
            let (n1, n2) = (a / d, a % d);
            if n1 + n2 < d {
                continue;
            }
            for b in 0..d * d {
                worst = worst.max(self.elements[(a, b)].norm());
            }
        }
        worst
    }
}

/// Beam-splitter block `⟨p, T-p|U|n, T-n⟩` for `p, n = 0..=T`.
fn bs_block(t: usize) -> Vec<f64> {
    let k = krawtchouk(t);
    let mut out = vec![0.0; (t + 1) * (t + 1)];
    for p in 0..=t {
        for n in 0..=t {
            let sign = if (t - n) % 2 == 0 { 1.0 } else { -1.0 };
            out[p * (t + 1) + n] = sign * k.get(p, n);
        }
    }
    out
}

/// Dense 50:50 beam splitter on the `dim²` product space. Columns with
/// `n1 + n2 < dim` are exact and orthonormal; higher columns are the
/// truncation of the infinite matrix.
pub fn beam_splitter_5050(dim: usize) -> Operator {
    let mut u = CMatrix::zeros(dim * dim, dim * dim);
    for t in 0..=2 * (dim.max(1) - 1) {
        let b = bs_block(t);
        for n in t.saturating_sub(dim - 1)..=t.min(dim - 1) {
            for p in t.saturating_sub(dim - 1)..=t.min(dim - 1) {
                u[(two_mode_index(p, t - p, dim), two_mode_index(n, t - n, dim))] = C64::new(b[p * (t + 1) + n], 0.0);
            }
        }
    }
    Operator {
        elements: u,
        label: "beam_splitter_5050".into(),
    }
}

/// `U ρ U†` evaluated block by block in total photon number. Fails when the
/// state has weight in blocks the cutoff cannot hold completely.
pub fn apply_beam_splitter(s: &TwoModeState) -> Result<TwoModeState> {
    let d = s.dim;
    let scale = s.elements.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let stray = s.weight_beyond_complete_blocks();
    if stray > 1e-12 * scale {
        return Err(DemargError::Cutoff(format!(
            "beam splitter needs total photon number < {d}; state has elements up to {stray:.3e} beyond"
        )));
    }
    let blocks: Vec<Vec<f64>> = (0..d).map(bs_block).collect();
    let mut out = CMatrix::zeros(d * d, d * d);
    // (U R U†)_{pq} over blocks T (rows) and T' (columns).
    let rows: Vec<(usize, Vec<(usize, C64)>)> = (0..d)
        .into_par_iter()
        .flat_map_iter(|t| {
            let ut = &blocks[t];
            let blocks = &blocks;
            (0..d).flat_map(move |t2| {
                let u2 = &blocks[t2];
                let mut r = vec![C64::new(0.0, 0.0); (t + 1) * (t2 + 1)];
                for n in 0..=t {
                    for m in 0..=t2 {
                        r[n * (t2 + 1) + m] = s.elements[(two_mode_index(n, t - n, d), two_mode_index(m, t2 - m, d))];
                    }
                }
                // tmp = U_T R
                let mut tmp = vec![C64::new(0.0, 0.0); (t + 1) * (t2 + 1)];
                for p in 0..=t {
                    for n in 0..=t {
                        let c = ut[p * (t + 1) + n];
                        if c == 0.0 {
                            continue;
                        }
                        for m in 0..=t2 {
                            tmp[p * (t2 + 1) + m] += r[n * (t2 + 1) + m] * c;
                        }
                    }
                }
                let mut cells = Vec::with_capacity((t + 1) * (t2 + 1));
                for p in 0..=t {
                    for q in 0..=t2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for m in 0..=t2 {
                            acc += tmp[p * (t2 + 1) + m] * u2[q * (t2 + 1) + m];
                        }
                        cells.push((
                            two_mode_index(p, t - p, d) * d * d + two_mode_index(q, t2 - q, d),
                            acc,
                        ));
                    }
                }
                std::iter::once((t * d + t2, cells))
            })
        })
        .collect();
    for (_, cells) in rows {
        for (flat, v) in cells {
            out[(flat / (d * d), flat % (d * d))] = v;
        }
    }
    Ok(TwoModeState { dim: d, elements: out })
}

/// Transpose on mode 2: `(n1 n2; m1 m2) → (n1 m2; m1 n2)`.
pub fn partial_transpose(s: &TwoModeState) -> TwoModeState {
    let d = s.dim;
    let m = CMatrix::from_fn(d * d, d * d, |a, b| {
        let (n1, m2) = (a / d, a % d);
        let (m1, n2) = (b / d, b % d);
        s.get(n1, n2, m1, m2)
    });
    TwoModeState { dim: d, elements: m }
}

fn support_dim(rho: &DensityMatrix) -> usize {
    rho.support_cutoff(1e-30 * rho.trace().abs().max(1.0)) + 1
}

/// State produced by mixing `ρ` with vacuum on the beam splitter. The
/// per-mode cutoff defaults to the support of `ρ`, which is exact; a smaller
/// `dim` crops the input (the dropped weight must stay below the tail
/// tolerance) and renormalizes it.
pub fn beam_splitter_output(rho: &DensityMatrix, dim: Option<usize>) -> Result<TwoModeState> {
    let need = support_dim(rho);
    let d = dim.unwrap_or(need);
    if d == 0 {
        return Err(DemargError::Validation("per-mode dim must be positive".into()));
    }
    let input = rho.resized(need.min(d))?;
    let input = if need > d { input.normalized()? } else { input };
    let vac = fock_state(0, 1)?;
    let input = TwoModeState::product(&input, &vac, d)?;
    apply_beam_splitter(&input)
}

/// `P_ent = (‖[U(ρ⊗|0⟩⟨0|)U†]^PT‖₁ - 1)/2`.
pub fn entanglement_potential(rho: &DensityMatrix, dim: Option<usize>) -> Result<f64> {
    if rho.is_fictitious() {
        return Err(DemargError::Validation("entanglement potential needs a physical state".into()));
    }
    let rho = rho.normalized()?;
    let out = beam_splitter_output(&rho, dim)?;
    Ok(partial_transpose(&out).negativity())
}

/// Settings for [`verify_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub theta_points: usize,
    /// DM2 block size for states of unbounded support; `None` uses the
    /// natural size.
    pub dm_out_dim: Option<usize>,
    /// Per-mode cutoff for `P_ent`; `None` uses the support of `ρ`.
    pub ent_dim: Option<usize>,
    /// Also require `|P_ent - N_DM2| ≤ 1e-4`, which holds for Gaussian states.
    pub gaussian: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            theta_points: 24,
            dm_out_dim: None,
            ent_dim: None,
            gaussian: false,
        }
    }
}

pub const BOUND_SLACK: f64 = 1e-6;
pub const GAUSSIAN_EQUALITY_TOL: f64 = 1e-4;

/// Both sides of `N_DM2 ≤ P_ent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub n_dm2: f64,
    pub argmax_theta: f64,
    pub p_ent: f64,
}

/// Evaluates `max_θ N_DM2[ρ]` and `P_ent[ρ]`.
pub fn bound_values(rho: &DensityMatrix, cfg: &BoundConfig) -> Result<BoundCheck> {
    let (n_dm2, argmax_theta) = max_negativity(
        rho,
        MapKind::Dm2,
        cfg.dm_out_dim,
        cfg.theta_points,
        std::f64::consts::PI,
    )?;
    let p_ent = entanglement_potential(rho, cfg.ent_dim)?;
    Ok(BoundCheck {
        n_dm2,
        argmax_theta,
        p_ent,
    })
}

impl BoundCheck {
    /// `N_DM2 ≤ P_ent + 1e-6`, plus `|P_ent - N_DM2| ≤ 1e-4` when
    /// `gaussian`. The verdict is `true` when the check passes.
    pub fn report(&self, gaussian: bool) -> CriterionReport {
        let mut verdict = self.n_dm2 <= self.p_ent + BOUND_SLACK;
        if gaussian {
            verdict &= (self.p_ent - self.n_dm2).abs() <= GAUSSIAN_EQUALITY_TOL;
        }
        CriterionReport {
            criterion: if gaussian { "n_dm2==p_ent" } else { "n_dm2<=p_ent" }.into(),
            verdict,
            witness: self.n_dm2,
            sigma: 0.0,
            threshold: self.p_ent,
            margin: self.p_ent - self.n_dm2,
        }
    }
}

/// Runs [`bound_values`] and [`BoundCheck::report`].
pub fn verify_bound(rho: &DensityMatrix, cfg: &BoundConfig) -> Result<CriterionReport> {
    Ok(bound_values(rho, cfg)?.report(cfg.gaussian))
}

/// BS, PT on mode 2, BS again on `ρ ⊗ ρ̃`, then trace over mode 2. With
/// `ρ̃ = e^{iπn̂/2} ρ e^{-iπn̂/2}` the result is the DM1 operator of `ρ` at
/// `θ = 0`; with `ρ̃ = |0⟩⟨0|` it is the DM2 operator.
pub fn bs_pt_bs_chain(rho: &DensityMatrix, ancilla: &DensityMatrix) -> Result<DensityMatrix> {
    let n = support_dim(rho) - 1;
    let na = support_dim(ancilla) - 1;
    // After PT the row totals reach n1 + m2 ≤ 2(n + na).
    let d = 2 * (n + na) + 1;
    let s = TwoModeState::product(&rho.resized(n + 1)?, &ancilla.resized(na + 1)?, d)?;
    let s = apply_beam_splitter(&s)?;
    let s = partial_transpose(&s);
    let s = apply_beam_splitter(&s)?;
    let m = s.trace_mode2();
    Ok(DensityMatrix::hermitized(m.into_elements(), true))
}

/// DM1 through the two-mode chain.
pub fn dm1_chain(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let bar = phase_rotate(rho, -std::f64::consts::FRAC_PI_2);
    bs_pt_bs_chain(rho, &bar)
}

/// DM2 through the two-mode chain.
pub fn dm2_chain(rho: &DensityMatrix) -> Result<DensityMatrix> {
    bs_pt_bs_chain(rho, &fock_state(0, 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demarg_maps::{dm1_analytic, dm2_analytic};
    use crate::fock_core::{coherent_state, squeezed_thermal_state, GaussianParams};
    use crate::phasespace::wigner;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_photon_splits() {
        let one = fock_state(1, 2).unwrap();
        let out = beam_splitter_output(&one, None).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // (|1,0⟩ + |0,1⟩)/√2
        assert!((out.get(1, 0, 1, 0).re - 0.5).abs() < 1e-15);
        assert!((out.get(0, 1, 0, 1).re - 0.5).abs() < 1e-15);
        assert!((out.get(1, 0, 0, 1).re - h * h).abs() < 1e-15);
        assert!((out.trace_mode1().get(1, 1).re - 0.5).abs() < 1e-15);
        let pt = partial_transpose(&out);
        assert!((pt.min_eigenvalue() + 0.5).abs() < 1e-14);
        assert_eq!(partial_transpose(&pt), out);
        assert!((entanglement_potential(&one, None).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_is_unitary_on_complete_blocks() {
        let d = 7;
        let u = beam_splitter_5050(d).elements;
        let p = u.adjoint() * &u;
        for a in 0..d * d {
            for b in 0..d * d {
                let (ta, tb) = (a / d + a % d, b / d + b % d);
                if ta < d && tb < d {
                    let e = if a == b { 1.0 } else { 0.0 };
                    assert!((p[(a, b)] - c(e, 0.0)).norm() < 1e-13);
                }
            }
        }
        // Block application agrees with the dense operator.
        let rho = DensityMatrix::pure(&[c(0.5, 0.0), c(0.5, 0.5), c(0.0, -0.5)]).unwrap();
        let s = TwoModeState::product(&rho, &fock_state(0, 1).unwrap(), d).unwrap();
        let s = TwoModeState {
            dim: d,
            elements: {
                let mut m = s.elements.clone();
                for a in 0..d * d {
                    for b in 0..d * d {
                        if a / d + a % d >= d || b / d + b % d >= d {
                            m[(a, b)] = c(0.0, 0.0);
                        }
                    }
                }
                m
            },
        };
        let dense = &u * s.elements() * u.adjoint();
        let block = apply_beam_splitter(&s).unwrap();
        assert!((dense - block.elements()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14);
    }

    #[test]
    fn coherent_input_stays_separable() {
        let rho = coherent_state(c(0.5, -0.2), 24).unwrap();
        let p = entanglement_potential(&rho, None).unwrap();
        assert!(p.abs() < 1e-9, "{p}");
    }

    #[test]
    fn chains_reproduce_maps() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, s)]).unwrap();
        let a = dm1_chain(&psi).unwrap();
        let b = dm1_analytic(&psi, 0.0).rho_dm;
        assert_eq!(a.dim(), b.dim());
        assert!((a.elements() - b.elements()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        let a = dm2_chain(&psi).unwrap();
        let b = dm2_analytic(&psi, 0.0).rho_dm;
        let a = a.resized(b.dim()).unwrap();
        assert!((a.elements() - b.elements()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn wigner_follows_argument_mixing() {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let a = DensityMatrix::pure(&[c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0)]).unwrap();
        let b = fock_state(1, 2).unwrap();
        let d = 5;
        let out = apply_beam_splitter(&TwoModeState::product(&a, &b, d).unwrap()).unwrap();
        for &(q1, p1, q2, p2) in &[(0.1, -0.3, 0.4, 0.2), (-0.5, 0.25, 0.0, -0.6), (0.7, 0.1, -0.2, 0.35)] {
            let lhs = out.wigner(q1, p1, q2, p2);
            let rhs = wigner(&a, (q1 + q2) * s2, (p1 + p2) * s2) * wigner(&b, (q1 - q2) * s2, (p1 - p2) * s2);
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
        }
        assert!((out.total_photon_number() - (a.mean_photon() + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn squeezed_vacuum_saturates_bound() {
        let g = GaussianParams::new(0.3, 0.0, 0.0, c(0.0, 0.0)).unwrap();
        let rho = squeezed_thermal_state(&g, 40).unwrap();
        let cfg = BoundConfig {
            theta_points: 12,
            dm_out_dim: Some(40),
            ent_dim: Some(24),
            gaussian: true,
        };
        let r = verify_bound(&rho, &cfg).unwrap();
        assert!(r.verdict, "{r:?}");
        // Pure squeezed vacuum: N_DM2 = e^r/2 - 1/2.
        assert!((r.witness - (0.3f64.exp() - 1.0) / 2.0).abs() < 1e-6);
    }
}
