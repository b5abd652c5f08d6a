//! Wigner functions, characteristic functions and quadrature marginals.
//!
//! The Wigner function of `|j⟩⟨k|` expands as
//! `W(q,p) = (2/π) e^{-2q²-2p²} Σ_n A_{jk}(n) H_n(2q) H_{j+k-n}(2p)`.
//! With `s = j+k`, the rescaled coefficients
//! `Ã_{jk}(n) = 2^{s/2} sqrt(n!(s-n)!) A_{jk}(n)` are bounded and equal
//! `(-i)^{s-n} U^{(s)}_{kn}`, where `U^{(s)}` is the orthogonal Krawtchouk
//! matrix of [`crate::special::krawtchouk`]. Everything downstream works with
//! these bounded forms so that cutoffs near one hundred stay accurate.
//!
//! Marginals are stored through scaled Hermite coefficients `c̃_n`:
//! `M(x) = sqrt(2/π) π^{1/4} Σ_n c̃_n ψ_n(2x)`, where `ψ_n` are the normalized
//! Hermite functions. In terms of the raw expansion
//! `M(x) = sqrt(2/π) e^{-2x²} Σ_n c_n H_n(2x)` one has `c̃_n = c_n sqrt(2ⁿ n!)`.

use serde::{Deserialize, Serialize};

use crate::error::{DemargError, Result};
use crate::fock_core::{displacement_matrix, phase_rotate, quadrature_operator, DensityMatrix};
use crate::quadrature::{trapezoid_grid, trapezoid_vec};
use crate::special::{
    alternating_sum_exact, big_to_f64, binomial_big, hermite_functions_into, krawtchouk,
    ln_binomial, ln_factorial,
};
use crate::C64;

const FRAC_2_PI_SQRT: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)

/// Hermite expansion coefficients `A_{|j⟩⟨k|}(n)`, `n = 0..=j+k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    pub j: usize,
    pub k: usize,
    pub coeffs: Vec<C64>,
}

/// `A_{|j⟩⟨k|}(n)` for every `n`, from the single-sum closed form with exact
/// integer arithmetic for the alternating sum. `(k, j)` is the conjugate of
/// `(j, k)`.
pub fn a_coefficients(j: usize, k: usize) -> HermiteExpansion {
    if j < k {
        let mut e = a_coefficients(k, j);
        for c in e.coeffs.iter_mut() {
            *c = c.conj();
        }
        e.j = j;
        e.k = k;
        return e;
    }
    let s = j + k;
    let mut coeffs = vec![C64::new(0.0, 0.0); s + 1];
    if j == k {
        for (n, c) in coeffs.iter_mut().enumerate() {
            if n % 2 == 0 {
                let h = n / 2;
                let ln = -(j as f64) * 4f64.ln() - ln_factorial(h) - ln_factorial(j - h);
                *c = C64::new(ln.exp(), 0.0);
            }
        }
        return HermiteExpansion { j, k, coeffs };
    }
    let dk = j - k;
    let ln_pref = 0.5 * (ln_factorial(k) - ln_factorial(j)) - (j as f64) * 4f64.ln()
        + ln_factorial(dk)
        - ln_factorial(j);
    for (n, c) in coeffs.iter_mut().enumerate() {
        let lo = n.div_ceil(2);
        let hi = (dk + n) / 2;
        let mut sum = num_bigint::BigInt::from(0);
        for l in lo..=hi.min(j) {
            let top = dk + n - 2 * l;
            let term = binomial_big(j, l) * binomial_big(2 * l, 2 * l - n) * binomial_big(2 * (j - l), top);
            if l % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        let mag = big_to_f64(&sum) * ln_pref.exp();
        // divide by i^{j-k+n}
        *c = C64::new(mag, 0.0) * C64::new(0.0, -1.0).powu((dk + n) as u32);
    }
    HermiteExpansion { j, k, coeffs }
}

/// Alternative closed form, valid for even `j+k-n`:
/// `A(n) = (-1)^{(s-n)/2} sqrt(j!k!) / (2^s n! (s-n)!) · [x^k](1+x)^n(1-x)^{s-n}`.
/// Returns `None` for odd `s-n`.
pub fn a_coefficient_alternative(j: usize, k: usize, n: usize) -> Option<C64> {
    let s = j + k;
    if n > s || (s - n) % 2 == 1 {
        return None;
    }
    let sum = big_to_f64(&alternating_sum_exact(s, n, k));
    let ln = 0.5 * (ln_factorial(j) + ln_factorial(k))
        - (s as f64) * std::f64::consts::LN_2
        - ln_factorial(n)
        - ln_factorial(s - n);
    let sign = if ((s - n) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Some(C64::new(sign * sum * ln.exp(), 0.0))
}

/// Bounded form `Ã_{jk}(n) = 2^{s/2} sqrt(n!(s-n)!) A_{jk}(n) = (-i)^{s-n} U^{(s)}_{kn}`.
pub fn a_scaled(j: usize, k: usize, n: usize) -> C64 {
    let s = j + k;
    let u = krawtchouk(s).get(k, n);
    C64::new(u, 0.0) * C64::new(0.0, -1.0).powu((s - n) as u32)
}

/// Wigner function `W(q, p) = (2/π) Σ ρ_jk (-1)^j ⟨k|D(2α)|j⟩`, `α = q + ip`.
pub fn wigner(rho: &DensityMatrix, q: f64, p: f64) -> f64 {
    let d = rho.dim();
    let dm = displacement_matrix(C64::new(2.0 * q, 2.0 * p), d);
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..d {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        for k in 0..d {
            acc += rho.get(j, k) * dm[(k, j)] * sign;
        }
    }
    acc.re * 2.0 / std::f64::consts::PI
}

/// Representation of a marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalData {
    /// Scaled Hermite coefficients `c̃_n` (see module docs).
    Analytic { ctilde: Vec<f64> },
    /// Density values on a strictly increasing grid.
    Sampled { x: Vec<f64>, w: Vec<f64> },
}

/// One-dimensional quadrature distribution `M(x_θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDistribution {
    pub theta: f64,
    pub data: MarginalData,
}

impl MarginalDistribution {
    /// Analytic marginal from scaled coefficients.
    pub fn analytic(theta: f64, ctilde: Vec<f64>) -> Self {
        MarginalDistribution {
            theta,
            data: MarginalData::Analytic { ctilde },
        }
    }

    /// Sampled marginal; the grid must be strictly increasing and the
    /// density must integrate to `1 ± 1e-3`.
    pub fn sampled(theta: f64, x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if x.len() != w.len() || x.len() < 3 {
            return Err(DemargError::Validation(
                "sampled marginal needs matching grid and values, at least 3 points".into(),
            ));
        }
        if x.windows(2).any(|p| p[1] <= p[0]) {
            return Err(DemargError::Validation("marginal grid must be strictly increasing".into()));
        }
        let norm = trapezoid_grid(&x, &w);
        if (norm - 1.0).abs() > 1e-3 {
            return Err(DemargError::Validation(format!(
                "sampled marginal integrates to {norm:.6}, expected 1 ± 1e-3"
            )));
        }
        Ok(MarginalDistribution {
            theta,
            data: MarginalData::Sampled { x, w },
        })
    }

    /// Samples this marginal on a uniform grid.
    pub fn resample(&self, x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        let h = (x_max - x_min) / (points - 1) as f64;
        let x: Vec<f64> = (0..points).map(|i| x_min + i as f64 * h).collect();
        let w = x.iter().map(|&v| self.density(v)).collect();
        Self::sampled(self.theta, x, w)
    }

    /// Raw coefficient `c_n` of `sqrt(2/π) e^{-2x²} Σ c_n H_n(2x)`; analytic only.
    pub fn coefficient(&self, n: usize) -> Option<f64> {
        match &self.data {
            MarginalData::Analytic { ctilde } => {
                let ct = ctilde.get(n).copied().unwrap_or(0.0);
                let ln = 0.5 * (n as f64 * std::f64::consts::LN_2 + ln_factorial(n));
                Some(ct * (-ln).exp())
            }
            MarginalData::Sampled { .. } => None,
        }
    }

    /// Density at `x`. Sampled data are interpolated linearly, zero outside.
    pub fn density(&self, x: f64) -> f64 {
        match &self.data {
            MarginalData::Analytic { ctilde } => {
                let mut psi = vec![0.0; ctilde.len()];
                hermite_functions_into(2.0 * x, &mut psi);
                let s: f64 = ctilde.iter().zip(&psi).map(|(c, p)| c * p).sum();
                FRAC_2_PI_SQRT * std::f64::consts::PI.powf(0.25) * s
            }
            MarginalData::Sampled { x: xs, w } => interpolate(xs, w, x).unwrap_or(0.0),
        }
    }

    /// Half-width outside which an analytic marginal is negligible.
    fn analytic_extent(len: usize) -> f64 {
        0.5 * (2.0 * len as f64 + 1.0).sqrt() + 6.0
    }

    /// `∫ f(x) M(x) dx` for a vector of test functions.
    fn integrate_against<F>(&self, len: usize, f: F) -> Vec<f64>
    where
        F: Fn(f64, &mut [f64]),
    {
        match &self.data {
            MarginalData::Analytic { ctilde } => {
                let l = Self::analytic_extent(ctilde.len());
                let mut psi = vec![0.0; ctilde.len()];
                let pref = FRAC_2_PI_SQRT * std::f64::consts::PI.powf(0.25);
                let cell = std::cell::RefCell::new(psi.as_mut_slice());
                trapezoid_vec(
                    |x, out| {
                        let mut p = cell.borrow_mut();
                        hermite_functions_into(2.0 * x, &mut p);
                        let m: f64 = pref * ctilde.iter().zip(p.iter()).map(|(c, v)| c * v).sum::<f64>();
                        f(x, out);
                        for o in out.iter_mut() {
                            *o *= m;
                        }
                    },
                    len,
                    -l,
                    l,
                    257,
                    1e-13,
                )
            }
            MarginalData::Sampled { x, w } => {
                let mut buf = vec![0.0; len];
                let mut cols = vec![vec![0.0; x.len()]; len];
                for (i, (&xi, &wi)) in x.iter().zip(w).enumerate() {
                    f(xi, &mut buf);
                    for (c, b) in cols.iter_mut().zip(&buf) {
                        c[i] = b * wi;
                    }
                }
                cols.iter().map(|c| trapezoid_grid(x, c)).collect()
            }
        }
    }

    /// `∫ M(x) dx`.
    pub fn normalization(&self) -> f64 {
        self.integrate_against(1, |_, o| o[0] = 1.0)[0]
    }

    /// Raw moments `∫ x^p M(x) dx` for `p = 0..=pmax`.
    pub fn moments(&self, pmax: usize) -> Vec<f64> {
        self.integrate_against(pmax + 1, |x, o| {
            let mut v = 1.0;
            for item in o.iter_mut() {
                *item = v;
                v *= x;
            }
        })
    }

    pub fn mean(&self) -> f64 {
        let m = self.moments(1);
        m[1] / m[0]
    }

    /// Second central moment.
    pub fn variance(&self) -> f64 {
        let m = self.moments(2);
        m[2] / m[0] - (m[1] / m[0]).powi(2)
    }

    /// Expectations `∫ f_m(x) M(x) dx` of arbitrary test functions.
    pub fn expectations<F: Fn(f64, &mut [f64])>(&self, len: usize, f: F) -> Vec<f64> {
        self.integrate_against(len, f)
    }

    /// Scaled coefficients `c̃_n` for `n = 0..=nmax`. Sampled marginals are
    /// projected with `c̃_n = sqrt(2) π^{1/4} ∫ M(x) ψ_n(2x) dx`.
    pub fn scaled_coefficients(&self, nmax: usize) -> Vec<f64> {
        match &self.data {
            MarginalData::Analytic { ctilde } => {
                let mut out = vec![0.0; nmax + 1];
                for (o, c) in out.iter_mut().zip(ctilde) {
                    *o = *c;
                }
                out
            }
            MarginalData::Sampled { .. } => {
                let pref = std::f64::consts::SQRT_2 * std::f64::consts::PI.powf(0.25);
                let mut v = self.integrate_against(nmax + 1, |x, o| hermite_functions_into(2.0 * x, o));
                for c in v.iter_mut() {
                    *c *= pref;
                }
                v
            }
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => return Some(ys[i]),
        Err(i) => i,
    };
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    Some(ys[i - 1] * (1.0 - t) + ys[i] * t)
}

/// Scaled marginal coefficient of `|j⟩⟨k|` at `θ = 0`:
/// `c̃_n = (-1)^{m/2} sqrt(C(m, m/2) 2^{-m}) U^{(s)}_{kn}` for even `m = s - n`.
pub fn marginal_coefficient_jk(j: usize, k: usize, n: usize) -> f64 {
    let s = j + k;
    if n > s || (s - n) % 2 == 1 {
        return 0.0;
    }
    let m = s - n;
    let g = (0.5 * (ln_binomial(m, m / 2) - m as f64 * std::f64::consts::LN_2)).exp();
    let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * g * krawtchouk(s).get(k, n)
}

/// Analytic marginal of `ρ` along `x̂_θ`.
pub fn marginal_analytic(rho: &DensityMatrix, theta: f64) -> MarginalDistribution {
    let r = phase_rotate(rho, theta);
    let d = r.dim();
    let smax = 2 * (d - 1);
    let mut ct = vec![0.0; smax + 1];
    for s in 0..=smax {
        let table = krawtchouk(s);
        let jlo = s.saturating_sub(d - 1);
        let jhi = s.min(d - 1);
        for j in jlo..=jhi {
            let k = s - j;
            let rjk = r.get(j, k).re;
            if rjk == 0.0 {
                continue;
            }
            let mut n = s % 2;
            while n <= s {
                let m = s - n;
                let g = (0.5 * (ln_binomial(m, m / 2) - m as f64 * std::f64::consts::LN_2)).exp();
                let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
                ct[n] += rjk * sign * g * table.get(k, n);
                n += 2;
            }
        }
    }
    MarginalDistribution::analytic(theta, ct)
}

/// Marginal density from wavefunction products, `Σ ρ_jk ⟨x|j⟩⟨k|x⟩` with
/// `⟨x|j⟩ = 2^{1/4} ψ_j(√2 x)`. Used as an independent check.
pub fn marginal_density_direct(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    let r = phase_rotate(rho, theta);
    let d = r.dim();
    let mut psi = vec![0.0; d];
    hermite_functions_into(std::f64::consts::SQRT_2 * x, &mut psi);
    let mut acc = 0.0;
    for j in 0..d {
        for k in 0..d {
            acc += r.get(j, k).re * psi[j] * psi[k];
        }
    }
    std::f64::consts::SQRT_2 * acc
}

/// `C(k_θ) = ⟨e^{-2ik x̂_θ}⟩ = tr[ρ D(ξ)]` with `ξ = -ik e^{iθ}`.
pub fn characteristic(rho: &DensityMatrix, theta: f64, k: f64) -> C64 {
    let xi = C64::new(0.0, -k) * C64::from_polar(1.0, theta);
    characteristic_xi(rho, xi)
}

/// `tr[ρ D(ξ)]`.
pub fn characteristic_xi(rho: &DensityMatrix, xi: C64) -> C64 {
    let d = displacement_matrix(xi, rho.dim());
    rho.expectation(&d)
}

/// Variance of `x̂_θ`, computed exactly from operator moments.
pub fn marginal_variance(rho: &DensityMatrix, theta: f64) -> f64 {
    let d = rho.dim() + 1;
    let r = rho.resized(d).expect("padding never drops weight");
    let x = quadrature_operator(theta, d);
    let m1 = r.expectation(&x).re / r.trace();
    let m2 = r.expectation(&(&x * &x)).re / r.trace();
    m2 - m1 * m1
}

/// One point of a characteristic-function cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSample {
    pub k: f64,
    pub value: C64,
    pub sigma_re: f64,
    pub sigma_im: f64,
    pub shots: u64,
}

/// Sampled `C(k_θ)` along one axis, at `k ≥ 0`. Negative `k` follow from
/// `C(-k) = C(k)*`, and `C(0) = 1` holds by definition, so both are implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicCurve {
    pub theta: f64,
    pub samples: Vec<CharacteristicSample>,
}

impl CharacteristicCurve {
    /// Validates ordering and sign of `k`.
    pub fn new(theta: f64, samples: Vec<CharacteristicSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(DemargError::Validation("characteristic curve has no samples".into()));
        }
        if samples.iter().any(|s| s.k < 0.0 || !s.k.is_finite()) {
            return Err(DemargError::Validation("characteristic samples need k ≥ 0".into()));
        }
        if samples.windows(2).any(|w| w[1].k <= w[0].k) {
            return Err(DemargError::Validation("k values must be strictly increasing".into()));
        }
        Ok(CharacteristicCurve { theta, samples })
    }

    /// Noise-free curve of `ρ` on the given non-negative grid.
    pub fn ideal(rho: &DensityMatrix, theta: f64, k_grid: &[f64]) -> Result<Self> {
        let samples = k_grid
            .iter()
            .map(|&k| CharacteristicSample {
                k,
                value: characteristic(rho, theta, k),
                sigma_re: 0.0,
                sigma_im: 0.0,
                shots: 0,
            })
            .collect();
        Self::new(theta, samples)
    }

    pub fn k_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].k
    }

    /// Knots `(k, C)` on `[0, k_max]`, with `C(0) = 1` inserted when absent.
    pub fn knots(&self) -> (Vec<f64>, Vec<C64>) {
        let mut ks = Vec::with_capacity(self.samples.len() + 1);
        let mut vs = Vec::with_capacity(self.samples.len() + 1);
        if self.samples[0].k > 0.0 {
            ks.push(0.0);
            vs.push(C64::new(1.0, 0.0));
        }
        for s in &self.samples {
            ks.push(s.k);
            vs.push(s.value);
        }
        (ks, vs)
    }

    /// Piecewise-linear `C(k)` for `|k| ≤ k_max`; never extrapolates.
    pub fn value_at(&self, k: f64) -> Result<C64> {
        let kmax = self.k_max();
        if k.abs() > kmax * (1.0 + 1e-12) {
            return Err(DemargError::Coverage(format!(
                "C(k) requested at |k| = {:.4} beyond measured k_max = {kmax:.4}",
                k.abs()
            )));
        }
        let (ks, vs) = self.knots();
        let a = k.abs().min(kmax);
        let re: Vec<f64> = vs.iter().map(|v| v.re).collect();
        let im: Vec<f64> = vs.iter().map(|v| v.im).collect();
        let v = C64::new(
            interpolate(&ks, &re, a).unwrap_or(0.0),
            interpolate(&ks, &im, a).unwrap_or(0.0),
        );
        Ok(if k < 0.0 { v.conj() } else { v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_core::{fock_state, squeezed_thermal_state, GaussianParams};

    #[test]
    fn tabulated_a_values() {
        // A_{|N⟩⟨N|}(2N) = 1/(4^N N!)
        assert!((a_coefficients(1, 1).coeffs[2].re - 0.25).abs() < 1e-15);
        // A_{|2N⟩⟨0|}(2N) = 1/(4^N sqrt((2N)!))
        assert!((a_coefficients(2, 0).coeffs[2].re - 1.0 / (4.0 * 2f64.sqrt())).abs() < 1e-15);
        // A_{|4N⟩⟨0|}(2N) = sqrt((4N)!)/((-16)^N ((2N)!)²)
        let v = a_coefficients(4, 0).coeffs[2];
        assert!((v.re - (-24f64.sqrt() / 64.0)).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn single_photon_off_diagonal_by_hand() {
        let a = a_coefficients(1, 0);
        assert!((a.coeffs[0] - C64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((a.coeffs[1] - C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn three_forms_agree() {
        for j in 0..9 {
            for k in 0..9 {
                let a = a_coefficients(j, k);
                let b = a_coefficients(k, j);
                let s = j + k;
                for n in 0..=s {
                    assert!((a.coeffs[n] - b.coeffs[n].conj()).norm() < 1e-14);
                    if let Some(alt) = a_coefficient_alternative(j, k, n) {
                        assert!((alt - a.coeffs[n]).norm() < 1e-12 * (1.0 + alt.norm()));
                    }
                    let scale = (0.5 * (s as f64 * std::f64::consts::LN_2 + ln_factorial(n) + ln_factorial(s - n))).exp();
                    assert!((a_scaled(j, k, n) - a.coeffs[n] * scale).norm() < 1e-12, "{j} {k} {n}");
                }
                if j == k {
                    for n in (1..=s).step_by(2) {
                        assert_eq!(a.coeffs[n].norm(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn wigner_values() {
        let v = fock_state(0, 5).unwrap();
        assert!((wigner(&v, 0.0, 0.0) - 2.0 / std::f64::consts::PI).abs() < 1e-14);
        let f = fock_state(1, 5).unwrap();
        assert!((wigner(&f, 0.0, 0.0) + 2.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn marginal_matches_wavefunction_route() {
        let p = GaussianParams::new(0.4, 0.3, 0.1, C64::new(0.2, -0.1)).unwrap();
        let rho = squeezed_thermal_state(&p, 30).unwrap();
        for theta in [0.0, 0.7, 2.0] {
            let m = marginal_analytic(&rho, theta);
            for i in 0..40 {
                let x = -2.0 + 0.1 * i as f64;
                let a = m.density(x);
                let b = marginal_density_direct(&rho, theta, x);
                assert!((a - b).abs() < 1e-10, "{theta} {x}: {a} {b}");
            }
            assert!((m.normalization() - 1.0).abs() < 1e-10);
            assert!((m.variance() - p.variance(theta)).abs() < 1e-8);
            assert!((marginal_variance(&rho, theta) - p.variance(theta)).abs() < 1e-8);
        }
    }

    #[test]
    fn characteristic_single_photon() {
        let f = fock_state(1, 6).unwrap();
        for k in [0.0, 0.3, 1.1, 2.5] {
            let c = characteristic(&f, 0.4, k);
            let e = (1.0 - k * k) * (-k * k / 2.0).exp();
            assert!((c.re - e).abs() < 1e-13 && c.im.abs() < 1e-13);
        }
    }

    #[test]
    fn curve_interpolation_never_extrapolates() {
        let v = fock_state(0, 3).unwrap();
        let grid: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let c = CharacteristicCurve::ideal(&v, 0.0, &grid).unwrap();
        assert!((c.value_at(0.0).unwrap().re - 1.0).abs() < 1e-15);
        assert!(c.value_at(-1.0).is_ok());
        assert!(matches!(c.value_at(3.5), Err(DemargError::Coverage(_))));
    }
}
