//! Density matrices and elementary operators in a truncated Fock basis.
//!
//! Every constructor takes an explicit dimension. The weight that falls
//! outside the cutoff is computed from the untruncated amplitudes; more than
//! `TAIL_TOLERANCE` of it is an error. For states of unbounded support the
//! top `ceil(dim/5)` levels form a guard band, and weight there above the
//! same tolerance is logged as a warning because operations that mix levels
//! (displacement, beam splitters) will feel the truncation first.

use serde::{Deserialize, Serialize};

use crate::error::{DemargError, Result};
use crate::special::{laguerre, ln_factorial};
use crate::{CMatrix, C64};

/// Largest weight allowed beyond the cutoff and in the guard band.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Tolerance on the Hermiticity check of stored matrices.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Quadrature scaling tag. Only one convention exists; the tag travels with
/// every matrix and file so that mixing conventions is detectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Convention {
    /// `x̂ = (â + â†)/2`, vacuum variance 1/4.
    #[default]
    #[serde(rename = "x=(a+a^dag)/2")]
    HalfQuadrature,
}

/// Number of guard-band levels for a given dimension.
pub fn guard_band(dim: usize) -> usize {
    dim.div_ceil(5)
}

/// Hermitian matrix in a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: CMatrix,
    fictitious: bool,
    convention: Convention,
}

impl DensityMatrix {
    /// Wraps a matrix after checking that it is square and Hermitian.
    pub fn from_matrix(elements: CMatrix, fictitious: bool) -> Result<Self> {
        if elements.nrows() != elements.ncols() || elements.nrows() == 0 {
            return Err(DemargError::Validation(format!(
                "density matrix must be square and non-empty, got {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        let asym = hermitian_defect(&elements);
        let scale = elements.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if asym > HERMITIAN_TOLERANCE * scale {
            return Err(DemargError::Validation(format!(
                "matrix is not Hermitian (max |h - h†| = {asym:.3e})"
            )));
        }
        Ok(DensityMatrix {
            elements,
            fictitious,
            convention: Convention::HalfQuadrature,
        })
    }

    /// Symmetrizes `(h + h†)/2` and wraps the result.
    pub fn hermitized(elements: CMatrix, fictitious: bool) -> Self {
        let h = (&elements + elements.adjoint()) * C64::new(0.5, 0.0);
        DensityMatrix {
            elements: h,
            fictitious,
            convention: Convention::HalfQuadrature,
        }
    }

    /// Normalized projector onto a state vector (amplitudes need not be normalized).
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(DemargError::Validation("zero state vector".into()));
        }
        let d = amplitudes.len();
        let m = CMatrix::from_fn(d, d, |i, j| amplitudes[i] * amplitudes[j].conj() / norm2);
        Ok(Self::hermitized(m, false))
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn is_fictitious(&self) -> bool {
        self.fictitious
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.elements[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.elements)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    /// `⟨n̂⟩`.
    pub fn mean_photon(&self) -> f64 {
        self.elements
            .diagonal()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum()
    }

    /// `tr[ρ A]`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        (&self.elements * a).trace()
    }

    /// Returns a copy scaled to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t.abs() < 1e-300 {
            return Err(DemargError::Validation("cannot normalize a traceless matrix".into()));
        }
        Ok(DensityMatrix {
            elements: &self.elements / C64::new(t, 0.0),
            fictitious: self.fictitious,
            convention: self.convention,
        })
    }

    /// Pads with zeros or crops to `dim`. Cropping fails if the dropped
    /// diagonal weight exceeds [`TAIL_TOLERANCE`].
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let d = self.dim();
        if dim < d {
            let dropped: f64 = (dim..d).map(|n| self.elements[(n, n)].re.abs()).sum();
            if dropped > TAIL_TOLERANCE {
                return Err(DemargError::Cutoff(format!(
                    "cropping to dim {dim} drops weight {dropped:.3e}"
                )));
            }
        }
        let m = CMatrix::from_fn(dim, dim, |i, j| {
            if i < d && j < d {
                self.elements[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(DensityMatrix {
            elements: m,
            fictitious: self.fictitious,
            convention: self.convention,
        })
    }

    /// `p·self + (1-p)·other`; dimensions are padded to the larger one.
    pub fn mix(&self, other: &DensityMatrix, p: f64) -> Result<Self> {
        let d = self.dim().max(other.dim());
        let a = self.resized(d)?;
        let b = other.resized(d)?;
        Ok(DensityMatrix {
            elements: a.elements * C64::new(p, 0.0) + b.elements * C64::new(1.0 - p, 0.0),
            fictitious: self.fictitious || other.fictitious,
            convention: self.convention,
        })
    }

    /// Diagonal weight in the guard band.
    pub fn guard_band_weight(&self) -> f64 {
        let d = self.dim();
        let g = guard_band(d);
        ((d - g)..d).map(|n| self.elements[(n, n)].re.abs()).sum()
    }

    /// Highest Fock level with diagonal weight above `tol`.
    pub fn support_cutoff(&self, tol: f64) -> usize {
        (0..self.dim())
            .rev()
            .find(|&n| self.elements[(n, n)].re.abs() > tol)
            .unwrap_or(0)
    }

    pub(crate) fn from_parts(elements: CMatrix, fictitious: bool) -> Self {
        DensityMatrix {
            elements,
            fictitious,
            convention: Convention::HalfQuadrature,
        }
    }
}

/// Largest entry of `|h - h†|`.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Parameters of a displaced squeezed thermal state
/// `D(α) S(r, φ) σ_th(n̄) S†(r, φ) D†(α)`; `φ` is the squeezed quadrature angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub r: f64,
    pub phi: f64,
    pub nbar: f64,
    pub alpha: C64,
}

impl GaussianParams {
    pub fn new(r: f64, phi: f64, nbar: f64, alpha: C64) -> Result<Self> {
        if !(r >= 0.0) || !(nbar >= 0.0) || !r.is_finite() || !nbar.is_finite() {
            return Err(DemargError::Validation(format!(
                "need r ≥ 0 and nbar ≥ 0, got r={r}, nbar={nbar}"
            )));
        }
        Ok(GaussianParams { r, phi, nbar, alpha })
    }

    /// Squeezed vacuum along `phi`.
    pub fn squeezed_vacuum(r: f64, phi: f64) -> Result<Self> {
        Self::new(r, phi, 0.0, C64::new(0.0, 0.0))
    }

    /// Purity `μ = 1/(1 + 2n̄)`.
    pub fn mu(&self) -> f64 {
        1.0 / (1.0 + 2.0 * self.nbar)
    }

    /// Quadrature variance at angle `theta`.
    pub fn variance(&self, theta: f64) -> f64 {
        let r2 = 2.0 * self.r;
        (r2.cosh() - (2.0 * (theta - self.phi)).cos() * r2.sinh()) / (4.0 * self.mu())
    }
}

/// Matrix operator with a descriptive label.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub elements: CMatrix,
    pub label: String,
}

impl Operator {
    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    /// `max |U†U - I|` restricted to the leading `inner` block.
    pub fn unitarity_defect(&self, inner: usize) -> f64 {
        let p = self.elements.adjoint() * &self.elements;
        let mut worst = 0.0f64;
        for i in 0..inner {
            for j in 0..inner {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - C64::new(e, 0.0)).norm());
            }
        }
        worst
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(DemargError::Validation(format!(
                "operator dim {} does not match state dim {}",
                self.dim(),
                rho.dim()
            )));
        }
        let m = &self.elements * rho.elements() * self.elements.adjoint();
        Ok(DensityMatrix::hermitized(m, rho.is_fictitious()))
    }
}

/// Annihilation operator `â`.
pub fn annihilation(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Rotated quadrature `x̂_θ = (â e^{-iθ} + â† e^{iθ})/2`.
pub fn quadrature_operator(theta: f64, dim: usize) -> CMatrix {
    let a = annihilation(dim);
    let e = C64::from_polar(1.0, -theta);
    (&a * e + a.adjoint() * e.conj()) * C64::new(0.5, 0.0)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(DemargError::Validation("dimension must be positive".into()));
    }
    Ok(())
}

fn check_tail(what: &str, tail: f64, dim: usize) -> Result<()> {
    if tail > TAIL_TOLERANCE {
        return Err(DemargError::Cutoff(format!(
            "{what}: weight {tail:.3e} lies beyond dim {dim}"
        )));
    }
    Ok(())
}

fn warn_guard(what: &str, rho: &DensityMatrix) {
    let w = rho.guard_band_weight();
    if w > TAIL_TOLERANCE {
        log::warn!(
            "{what}: guard band (top {} of {} levels) holds weight {w:.3e}",
            guard_band(rho.dim()),
            rho.dim()
        );
    }
}

/// `|n⟩⟨n|`.
pub fn fock_state(n: usize, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if n >= dim {
        return Err(DemargError::Cutoff(format!("Fock level {n} needs dim > {n}, got {dim}")));
    }
    let mut m = CMatrix::zeros(dim, dim);
    m[(n, n)] = C64::new(1.0, 0.0);
    Ok(DensityMatrix::from_parts(m, false))
}

/// Coherent-state amplitudes `e^{-|α|²/2} αⁿ/√n!`, untruncated values.
pub fn coherent_amplitudes(alpha: C64, dim: usize) -> Vec<C64> {
    let mut amp = Vec::with_capacity(dim);
    let mut cur = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            cur = cur * alpha / (n as f64).sqrt();
        }
        amp.push(cur);
    }
    amp
}

fn pure_with_tail(what: &str, amp: Vec<C64>, total_norm2: f64, dim: usize) -> Result<DensityMatrix> {
    let kept: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
    check_tail(what, (1.0 - kept / total_norm2).max(0.0), dim)?;
    let rho = DensityMatrix::pure(&amp)?;
    warn_guard(what, &rho);
    Ok(rho)
}

/// `|α⟩⟨α|`, renormalized over the cutoff.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    pure_with_tail("coherent_state", coherent_amplitudes(alpha, dim), 1.0, dim)
}

/// Thermal state with mean photon number `nbar`.
pub fn thermal_state(nbar: f64, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if !(nbar >= 0.0) {
        return Err(DemargError::Validation(format!("nbar must be ≥ 0, got {nbar}")));
    }
    let q = nbar / (nbar + 1.0);
    check_tail("thermal_state", q.powi(dim as i32), dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    let mut p = 1.0 / (nbar + 1.0);
    for n in 0..dim {
        m[(n, n)] = C64::new(p, 0.0);
        p *= q;
    }
    let rho = DensityMatrix::from_parts(m, false).normalized()?;
    warn_guard("thermal_state", &rho);
    Ok(rho)
}

/// `â†|γ⟩`, normalized. The unnormalized squared norm is `1 + |γ|²`.
pub fn photon_added_coherent(gamma: C64, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if dim < 2 {
        return Err(DemargError::Cutoff("photon-added state needs dim ≥ 2".into()));
    }
    let base = coherent_amplitudes(gamma, dim - 1);
    let mut amp = vec![C64::new(0.0, 0.0); dim];
    for (n, c) in base.iter().enumerate() {
        amp[n + 1] = c * ((n + 1) as f64).sqrt();
    }
    pure_with_tail("photon_added_coherent", amp, 1.0 + gamma.norm_sqr(), dim)
}

/// `â† σ_th(n̄) â`, normalized; weights `n p_th(n-1)/(n̄+1)`.
pub fn photon_added_thermal(nbar: f64, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if !(nbar >= 0.0) {
        return Err(DemargError::Validation(format!("nbar must be ≥ 0, got {nbar}")));
    }
    if dim < 2 {
        return Err(DemargError::Cutoff("photon-added state needs dim ≥ 2".into()));
    }
    let q = nbar / (nbar + 1.0);
    let mut m = CMatrix::zeros(dim, dim);
    let mut p = 1.0 / (nbar + 1.0);
    let mut kept = 0.0;
    for n in 1..dim {
        let w = n as f64 * p / (nbar + 1.0);
        m[(n, n)] = C64::new(w, 0.0);
        kept += w;
        p *= q;
    }
    check_tail("photon_added_thermal", (1.0 - kept).max(0.0), dim)?;
    let rho = DensityMatrix::from_parts(m, false).normalized()?;
    warn_guard("photon_added_thermal", &rho);
    Ok(rho)
}

/// Dephased odd cat `[|γ⟩⟨γ| + |-γ⟩⟨-γ| - f(|γ⟩⟨-γ| + |-γ⟩⟨γ|)] / (2(1 - f e^{-2γ²}))`.
pub fn dephased_odd_cat(gamma: f64, f: f64, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if !(gamma > 0.0) || !(0.0..=1.0).contains(&f) {
        return Err(DemargError::Validation(format!(
            "need gamma > 0 and f in [0,1], got gamma={gamma}, f={f}"
        )));
    }
    let plus = coherent_amplitudes(C64::new(gamma, 0.0), dim);
    let minus = coherent_amplitudes(C64::new(-gamma, 0.0), dim);
    let norm = 2.0 * (1.0 - f * (-2.0 * gamma * gamma).exp());
    let m = CMatrix::from_fn(dim, dim, |i, j| {
        (plus[i] * plus[j].conj() + minus[i] * minus[j].conj()
            - (plus[i] * minus[j].conj() + minus[i] * plus[j].conj()) * f)
            / norm
    });
    let rho = DensityMatrix::hermitized(m, false);
    check_tail("dephased_odd_cat", (1.0 - rho.trace()).max(0.0), dim)?;
    let rho = rho.normalized()?;
    warn_guard("dephased_odd_cat", &rho);
    Ok(rho)
}

/// Displaced squeezed thermal state. The state is assembled in a larger
/// working space and cropped, so the returned low levels are exact up to the
/// reported tail.
pub fn squeezed_thermal_state(p: &GaussianParams, dim: usize) -> Result<DensityMatrix> {
    check_dim(dim)?;
    if p.nbar == 0.0 && p.alpha.norm() == 0.0 {
        return pure_with_tail("squeezed_thermal_state", squeezed_vacuum_amplitudes(p.r, p.phi, dim), 1.0, dim);
    }
    let work = 2 * dim + 40;
    let q = p.nbar / (p.nbar + 1.0);
    let mut sigma = CMatrix::zeros(work, work);
    let mut w = 1.0 / (p.nbar + 1.0);
    for n in 0..work {
        sigma[(n, n)] = C64::new(w, 0.0);
        w *= q;
    }
    let a = annihilation(work);
    let ad = a.adjoint();
    // S = exp((ξ* â² - ξ â†²)/2), ξ = r e^{2iφ} squeezes x̂_φ.
    let xi = C64::from_polar(p.r, 2.0 * p.phi);
    let gen = (&a * &a * xi.conj() - &ad * &ad * xi) * C64::new(0.5, 0.0);
    let s = gen.exp();
    let mut m = &s * sigma * s.adjoint();
    if p.alpha.norm() > 0.0 {
        let d = displacement_matrix(p.alpha, work);
        m = &d * m * d.adjoint();
    }
    let kept: f64 = (0..dim).map(|n| m[(n, n)].re).sum();
    check_tail("squeezed_thermal_state", (1.0 - kept).max(0.0), dim)?;
    let block = m.view((0, 0), (dim, dim)).into_owned();
    let rho = DensityMatrix::hermitized(block, false).normalized()?;
    warn_guard("squeezed_thermal_state", &rho);
    Ok(rho)
}

/// `S(r, φ)|0⟩` on `|0⟩..|dim-1⟩`:
/// `ψ_{2m} = (-e^{2iφ} tanh r)^m sqrt((2m)!)/(2^m m!) / sqrt(cosh r)`.
pub fn squeezed_vacuum_amplitudes(r: f64, phi: f64, dim: usize) -> Vec<C64> {
    let mut amp = vec![C64::new(0.0, 0.0); dim];
    let t = r.tanh();
    let base = -0.5 * r.cosh().ln();
    let unit = -C64::from_polar(1.0, 2.0 * phi);
    let mut m = 0;
    while 2 * m < dim {
        let ln_mag = base + 0.5 * ln_factorial(2 * m) - ln_factorial(m) - m as f64 * std::f64::consts::LN_2;
        let mag = if t == 0.0 {
            if m == 0 { ln_mag.exp() } else { 0.0 }
        } else {
            (ln_mag + m as f64 * t.ln()).exp()
        };
        amp[2 * m] = unit.powu(m as u32) * mag;
        m += 1;
    }
    amp
}

/// `⟨m|D(β)|n⟩` for all `m, n < dim`.
///
/// Column `n+1` follows from `D|n+1⟩ = (â† - β*) D|n⟩ / √(n+1)`, which only
/// ever reads rows at or below the one being written. The truncated matrix is
/// therefore exact elementwise.
pub fn displacement_matrix(beta: C64, dim: usize) -> CMatrix {
    let mut d = CMatrix::zeros(dim, dim);
    if dim == 0 {
        return d;
    }
    let first = coherent_amplitudes(beta, dim);
    for (m, v) in first.into_iter().enumerate() {
        d[(m, 0)] = v;
    }
    let bc = beta.conj();
    for n in 0..dim - 1 {
        let s = 1.0 / ((n + 1) as f64).sqrt();
        for m in 0..dim {
            let up = if m > 0 { d[(m - 1, n)] * (m as f64).sqrt() } else { C64::new(0.0, 0.0) };
            d[(m, n + 1)] = (up - bc * d[(m, n)]) * s;
        }
    }
    d
}

/// `D(α) = exp(α â† - α* â)` on a truncated space.
pub fn displacement_operator(alpha: C64, dim: usize) -> Operator {
    Operator {
        elements: displacement_matrix(alpha, dim),
        label: "displacement".into(),
    }
}

/// Single element `⟨m|D(β)|n⟩` from the generalized Laguerre closed form.
pub fn displacement_element(m: usize, n: usize, beta: C64) -> C64 {
    let x = beta.norm_sqr();
    let (lo, hi) = (m.min(n), m.max(n));
    let mag = (0.5 * (ln_factorial(lo) - ln_factorial(hi)) - 0.5 * x).exp();
    let lag = laguerre(lo, (hi - lo) as f64, x);
    let pw = if m >= n { beta.powu((m - n) as u32) } else { (-beta.conj()).powu((n - m) as u32) };
    pw * mag * lag
}

/// `e^{-iθn̂} ρ e^{iθn̂}`: element `(m, n)` picks up `e^{-iθ(m-n)}`.
pub fn phase_rotate(rho: &DensityMatrix, theta: f64) -> DensityMatrix {
    let d = rho.dim();
    let m = CMatrix::from_fn(d, d, |i, j| {
        rho.get(i, j) * C64::from_polar(1.0, -theta * (i as f64 - j as f64))
    });
    DensityMatrix::from_parts(m, rho.is_fictitious())
}

/// Trace norm `Σ|λ_i|`.
pub fn trace_norm(h: &DensityMatrix) -> f64 {
    h.eigenvalues().iter().map(|l| l.abs()).sum()
}

/// Trace-norm negativity `(‖h‖₁ - tr h)/2`, the total weight of negative
/// eigenvalues. Equals `(‖h‖₁ - 1)/2` for unit trace.
pub fn trace_norm_negativity(h: &DensityMatrix) -> Result<f64> {
    let asym = hermitian_defect(h.elements());
    let scale = h.elements().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if asym > 1e-9 * scale {
        return Err(DemargError::Validation(format!(
            "trace-norm negativity needs a Hermitian operator (defect {asym:.3e})"
        )));
    }
    Ok(h.eigenvalues().iter().filter(|l| **l < 0.0).map(|l| -l).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fock_cutoff_error() {
        assert!(matches!(fock_state(3, 3), Err(DemargError::Cutoff(_))));
        let r = fock_state(2, 3).unwrap();
        assert_eq!(r.get(2, 2), c(1.0, 0.0));
    }

    #[test]
    fn coherent_mean_and_purity() {
        let r = coherent_state(c(1.0, 0.0), 30).unwrap();
        assert!((r.mean_photon() - 1.0).abs() < 1e-8);
        let r = coherent_state(c(0.0, 0.5), 20).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-10);
        assert!(matches!(coherent_state(c(3.0, 0.0), 10), Err(DemargError::Cutoff(_))));
    }

    #[test]
    fn thermal_weights() {
        let r = thermal_state(1.0, 60).unwrap();
        assert!((r.get(0, 0).re - 0.5).abs() < 1e-14);
        assert!((r.get(1, 1).re - 0.25).abs() < 1e-14);
        let r = thermal_state(0.5, 40).unwrap();
        assert!((r.mean_photon() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn photon_added_states() {
        let r = photon_added_coherent(c(0.0, 0.0), 5).unwrap();
        assert!((r.get(1, 1).re - 1.0).abs() < 1e-15);
        let r = photon_added_thermal(0.0, 5).unwrap();
        assert!((r.get(1, 1).re - 1.0).abs() < 1e-15);
        let r = photon_added_thermal(1.0, 80).unwrap();
        assert_eq!(r.get(0, 0).re, 0.0);
        // p(n) ∝ n (1/2)^n
        let ratio = r.get(1, 1).re / r.get(2, 2).re;
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn photon_added_coherent_is_displaced_two_level_state() {
        let g = c(0.6, -0.3);
        let dim = 40;
        let direct = photon_added_coherent(g, dim).unwrap();
        let work = 80;
        let mut v = vec![c(0.0, 0.0); work];
        let n = (1.0 + g.norm_sqr()).sqrt();
        v[0] = g.conj() / n;
        v[1] = c(1.0 / n, 0.0);
        let d = displacement_matrix(g, work);
        let w: Vec<C64> = (0..dim).map(|m| (0..work).map(|k| d[(m, k)] * v[k]).sum()).collect();
        let other = DensityMatrix::pure(&w).unwrap();
        let diff = (direct.elements() - other.elements()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn odd_cat_small_amplitude_is_single_photon() {
        let r = dephased_odd_cat(0.1, 1.0, 20).unwrap();
        assert!(r.get(1, 1).re > 0.99);
        let r = dephased_odd_cat(1.0, 0.0, 30).unwrap();
        assert!(r.min_eigenvalue() > -1e-10);
        // ⟨n̂⟩ of the pure odd cat is γ² coth γ²
        let r = dephased_odd_cat(1.0, 1.0, 40).unwrap();
        assert!((r.mean_photon() - 1.0 / 1f64.tanh()).abs() < 1e-9);
    }

    #[test]
    fn squeezed_variance() {
        let p = GaussianParams::squeezed_vacuum(0.5, 0.0).unwrap();
        let r = squeezed_thermal_state(&p, 40).unwrap();
        let x = quadrature_operator(0.0, 41);
        let rr = r.resized(41).unwrap();
        let v = rr.expectation(&(&x * &x)).re - rr.expectation(&x).re.powi(2);
        assert!((v - (-1.0f64).exp() / 4.0).abs() < 1e-6);
        let p = GaussianParams::new(0.3, 0.4, 0.2, c(0.0, 0.0)).unwrap();
        let r = squeezed_thermal_state(&p, 40).unwrap();
        assert!((r.trace() - 1.0).abs() < 1e-10);
        assert!(r.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn squeezed_vacuum_closed_form_matches_exponential() {
        let (r, phi, work) = (0.6, 0.35, 120);
        let a = annihilation(work);
        let ad = a.adjoint();
        let xi = C64::from_polar(r, 2.0 * phi);
        let s = ((&a * &a * xi.conj() - &ad * &ad * xi) * c(0.5, 0.0)).exp();
        let amp = squeezed_vacuum_amplitudes(r, phi, 40);
        for n in 0..40 {
            assert!((s[(n, 0)] - amp[n]).norm() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn displacement_closed_form_and_group_law() {
        let b = c(0.7, -0.4);
        let d = displacement_matrix(b, 30);
        for m in 0..20 {
            for n in 0..20 {
                assert!((d[(m, n)] - displacement_element(m, n, b)).norm() < 1e-12);
            }
        }
        let a = annihilation(60);
        let gen = &a.adjoint() * b - &a * b.conj();
        let e = gen.exp();
        for m in 0..20 {
            for n in 0..20 {
                assert!((e[(m, n)] - d[(m, n)]).norm() < 1e-10);
            }
        }
        assert!((d[(0, 0)].re - (-0.5 * b.norm_sqr()).exp()).abs() < 1e-15);
    }

    #[test]
    fn negativity_of_diagonal() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.5, 0.0), c(-0.5, 0.0)]));
        let h = DensityMatrix::from_matrix(m, true).unwrap();
        assert!((trace_norm_negativity(&h).unwrap() - 0.5).abs() < 1e-15);
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(DensityMatrix::from_matrix(bad, true).is_err());
    }
}
