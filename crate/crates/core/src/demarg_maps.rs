//! Demarginalization maps and the trace-norm negativity built on them.
//!
//! DM1 promotes a marginal `M(x)` to `W(x,y) = M(x)M(y)`, DM2 to
//! `W(x,y) = M(x)M_vac(y)`. Projecting the factorized Wigner function on
//! `W_{|n2⟩⟨n1|}` reduces to one-dimensional Hermite projections of `M`:
//!
//! * DM2: `ρ''_{n1 n2} = 2^{-s/2} sqrt(C(s, n1)) c̃_s`,
//! * DM1: `ρ'_{n1 n2} = Σ_n (-i)^{s-n} U^{(s)}_{n1 n} c̃_n c̃_{s-n}`,
//!
//! with `s = n1 + n2` and `c̃_n` the scaled marginal coefficients of
//! [`crate::phasespace`]. A state supported on `|0⟩..|N⟩` therefore gives
//! `ρ'' = 0` beyond `s = 2N` and `ρ' = 0` beyond `s = 4N`.
//!
//! For characteristic-function data the same projections are taken in the
//! Fourier domain, `∫ M(x) ψ_n(2x) dx ∝ i^n ∫ C(k) ψ_n(k) dk`, which is the
//! factorized form of `ρ = (1/π) ∫ d²k C(k_x, k_y) D†`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DemargError, Result};
use crate::fock_core::{trace_norm_negativity, DensityMatrix};
use crate::phasespace::{marginal_analytic, CharacteristicCurve, MarginalData, MarginalDistribution};
use crate::quadrature::trapezoid_grid;
use crate::special::{hermite_functions_into, krawtchouk, ln_binomial};
use crate::{CMatrix, C64};

/// Which demarginalization map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Dm1,
    Dm2,
}

impl MapKind {
    /// Output levels needed for a state supported on `|0⟩..|N⟩`.
    pub fn required_dim(self, n: usize) -> usize {
        match self {
            MapKind::Dm1 => 4 * n + 1,
            MapKind::Dm2 => 2 * n + 1,
        }
    }
}

impl std::str::FromStr for MapKind {
    type Err = DemargError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dm1" => Ok(MapKind::Dm1),
            "dm2" => Ok(MapKind::Dm2),
            other => Err(DemargError::Validation(format!("unknown map '{other}' (dm1|dm2)"))),
        }
    }
}

/// Origin of a fictitious state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Measured,
}

/// Operator reconstructed from a factorized fictitious Wigner function.
#[derive(Debug, Clone)]
pub struct FictitiousState {
    pub rho_dm: DensityMatrix,
    pub theta: f64,
    pub map_kind: MapKind,
    pub source: Source,
    /// Trace before any renormalization.
    pub raw_trace: f64,
    /// Named 2x2 determinants, e.g. `det{0,2}`.
    pub witness_cache: Option<Vec<(String, f64)>>,
}

impl FictitiousState {
    /// Determinant of the `{|a⟩, |b⟩}` principal submatrix.
    pub fn block_det(&self, a: usize, b: usize) -> f64 {
        let m = self.rho_dm.elements();
        (m[(a, a)] * m[(b, b)] - m[(a, b)] * m[(b, a)]).re
    }

    /// Trace-norm negativity. Measured states are renormalized to unit trace
    /// first; analytic ones are used as they are.
    pub fn negativity(&self) -> Result<f64> {
        match self.source {
            Source::Analytic => trace_norm_negativity(&self.rho_dm),
            Source::Measured => trace_norm_negativity(&self.rho_dm.normalized()?),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho_dm.min_eigenvalue()
    }
}

/// Fictitious matrix of dimension `out_dim` from scaled marginal coefficients.
/// Coefficients beyond the slice are taken as zero.
pub fn dm_from_coefficients(ct: &[f64], kind: MapKind, out_dim: usize) -> CMatrix {
    let c = |n: usize| ct.get(n).copied().unwrap_or(0.0);
    let mut m = CMatrix::zeros(out_dim, out_dim);
    match kind {
        MapKind::Dm2 => {
            for n1 in 0..out_dim {
                for n2 in 0..out_dim {
                    let s = n1 + n2;
                    let cs = c(s);
                    if cs == 0.0 {
                        continue;
                    }
                    let f = (0.5 * ln_binomial(s, n1) - 0.5 * s as f64 * std::f64::consts::LN_2).exp();
                    m[(n1, n2)] = C64::new(f * cs, 0.0);
                }
            }
        }
        MapKind::Dm1 => {
            let smax = (2 * (out_dim - 1)).min(2 * ct.len().saturating_sub(1));
            for s in 0..=smax {
                let table = krawtchouk(s);
                let lo = s.saturating_sub(out_dim - 1);
                let hi = s.min(out_dim - 1);
                for n1 in lo..=hi {
                    let n2 = s - n1;
                    if n2 < n1 {
                        continue;
                    }
                    let mut acc = C64::new(0.0, 0.0);
                    for n in 0..=s {
                        let prod = c(n) * c(s - n);
                        if prod == 0.0 {
                            continue;
                        }
                        let u = table.get(n1, n) * prod;
                        // (-i)^{s-n}
                        acc += match (s - n) % 4 {
                            0 => C64::new(u, 0.0),
                            1 => C64::new(0.0, -u),
                            2 => C64::new(-u, 0.0),
                            _ => C64::new(0.0, u),
                        };
                    }
                    m[(n1, n2)] = acc;
                    m[(n2, n1)] = acc.conj();
                }
            }
        }
    }
    m
}

fn witnesses(m: &CMatrix, kind: MapKind, n_support: usize) -> Vec<(String, f64)> {
    let top = match kind {
        MapKind::Dm1 => 4 * n_support,
        MapKind::Dm2 => 2 * n_support,
    };
    if top == 0 || top >= m.nrows() {
        return Vec::new();
    }
    let det = (m[(0, 0)] * m[(top, top)] - m[(0, top)] * m[(top, 0)]).re;
    vec![(format!("det{{0,{top}}}"), det)]
}

fn support_of(rho: &DensityMatrix) -> usize {
    rho.support_cutoff(1e-15 * rho.trace().abs().max(1.0))
}

/// Fictitious state of `ρ` under `kind` at axis `θ`, from the closed forms.
/// The output dimension is the natural one, `4N+1` (DM1) or `2N+1` (DM2).
pub fn dm_analytic(rho: &DensityMatrix, theta: f64, kind: MapKind) -> FictitiousState {
    let n = support_of(rho);
    dm_analytic_dim(rho, theta, kind, kind.required_dim(n)).expect("natural dimension suffices")
}

/// As [`dm_analytic`] with an explicit output dimension, which must cover the
/// full support of the fictitious operator.
pub fn dm_analytic_dim(rho: &DensityMatrix, theta: f64, kind: MapKind, out_dim: usize) -> Result<FictitiousState> {
    let n = support_of(rho);
    let need = kind.required_dim(n);
    if out_dim < need {
        return Err(DemargError::Cutoff(format!(
            "{kind:?} of a state supported up to |{n}⟩ needs output dim ≥ {need}, got {out_dim}"
        )));
    }
    let trimmed = rho.resized(n + 1)?;
    let marg = marginal_analytic(&trimmed, theta);
    let ct = match &marg.data {
        MarginalData::Analytic { ctilde } => ctilde.clone(),
        MarginalData::Sampled { .. } => unreachable!(),
    };
    let m = dm_from_coefficients(&ct, kind, out_dim);
    let w = witnesses(&m, kind, n);
    let rho_dm = DensityMatrix::hermitized(m, true);
    Ok(FictitiousState {
        raw_trace: rho_dm.trace(),
        rho_dm,
        theta,
        map_kind: kind,
        source: Source::Analytic,
        witness_cache: Some(w),
    })
}

/// DM1 closed form at its natural dimension.
pub fn dm1_analytic(rho: &DensityMatrix, theta: f64) -> FictitiousState {
    dm_analytic(rho, theta, MapKind::Dm1)
}

/// DM2 closed form at its natural dimension.
pub fn dm2_analytic(rho: &DensityMatrix, theta: f64) -> FictitiousState {
    dm_analytic(rho, theta, MapKind::Dm2)
}

/// Leading `out_dim × out_dim` block of the fictitious operator, with no
/// support check. Intended for states of unbounded support, where the
/// block is a truncation of an infinite matrix.
pub fn dm_block(rho: &DensityMatrix, theta: f64, kind: MapKind, out_dim: usize) -> FictitiousState {
    let marg = marginal_analytic(rho, theta);
    let ct = marg.scaled_coefficients(2 * (rho.dim() - 1));
    let m = dm_from_coefficients(&ct, kind, out_dim);
    let rho_dm = DensityMatrix::hermitized(m, true);
    FictitiousState {
        raw_trace: rho_dm.trace(),
        rho_dm,
        theta,
        map_kind: kind,
        source: Source::Analytic,
        witness_cache: None,
    }
}

/// Fictitious state from a marginal distribution (analytic or sampled).
pub fn dm_from_marginal(m: &MarginalDistribution, kind: MapKind, dim: usize) -> Result<FictitiousState> {
    if dim == 0 {
        return Err(DemargError::Validation("output dimension must be positive".into()));
    }
    let norm = m.normalization();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(DemargError::Validation(format!("marginal integrates to {norm:.6}, expected 1")));
    }
    let source = match &m.data {
        MarginalData::Analytic { .. } => Source::Analytic,
        MarginalData::Sampled { x, w } => {
            let spread = (m.variance().max(0.0)).sqrt().max(0.5);
            // Gaussian-tail estimate of the mass beyond each end of the grid.
            let tail = (w[0] + w[w.len() - 1]) * spread;
            if tail > 1e-4 {
                return Err(DemargError::Coverage(format!(
                    "marginal grid [{:.3}, {:.3}] does not cover the support (edge density {:.2e}, {:.2e})",
                    x[0],
                    x[x.len() - 1],
                    w[0],
                    w[w.len() - 1]
                )));
            }
            Source::Measured
        }
    };
    let ct = m.scaled_coefficients(2 * (dim - 1));
    let mat = dm_from_coefficients(&ct, kind, dim);
    let rho_dm = DensityMatrix::hermitized(mat, true);
    Ok(FictitiousState {
        raw_trace: rho_dm.trace(),
        rho_dm,
        theta: m.theta,
        map_kind: kind,
        source,
        witness_cache: None,
    })
}

/// Scaled marginal coefficients `c̃_n`, `n = 0..=nmax`, from a characteristic
/// cut on `[0, k_max]`:
/// `c̃_n = sqrt(2) π^{1/4} (2π)^{-1/2} · 2 ∫_0^{k_max} f_n(k) ψ_n(k) dk`, where
/// `f_n = (-1)^{n/2} Re C` for even `n` and `(-1)^{(n+1)/2} Im C` for odd `n`.
/// `C` is the piecewise-linear interpolant of the samples.
pub fn coefficients_from_characteristic(curve: &CharacteristicCurve, k_max: f64, nmax: usize) -> Result<Vec<f64>> {
    let (ks, vs) = curve.knots();
    let upto = ks.iter().position(|&k| k > k_max * (1.0 + 1e-12)).unwrap_or(ks.len());
    let (ks, vs) = (&ks[..upto], &vs[..upto]);
    const SUB: usize = 16;
    let mut grid = Vec::with_capacity(ks.len() * SUB);
    let mut re = Vec::with_capacity(ks.len() * SUB);
    let mut im = Vec::with_capacity(ks.len() * SUB);
    for i in 0..ks.len() - 1 {
        for s in 0..SUB {
            let t = s as f64 / SUB as f64;
            grid.push(ks[i] + t * (ks[i + 1] - ks[i]));
            let v = vs[i] * (1.0 - t) + vs[i + 1] * t;
            re.push(v.re);
            im.push(v.im);
        }
    }
    grid.push(ks[ks.len() - 1]);
    re.push(vs[vs.len() - 1].re);
    im.push(vs[vs.len() - 1].im);

    let mut psi = vec![vec![0.0; grid.len()]; nmax + 1];
    let mut buf = vec![0.0; nmax + 1];
    for (i, &k) in grid.iter().enumerate() {
        hermite_functions_into(k, &mut buf);
        for (n, b) in buf.iter().enumerate() {
            psi[n][i] = *b;
        }
    }
    let pref = std::f64::consts::SQRT_2 * std::f64::consts::PI.powf(0.25) / (2.0 * std::f64::consts::PI).sqrt() * 2.0;
    let mut out = Vec::with_capacity(nmax + 1);
    let mut integrand = vec![0.0; grid.len()];
    for (n, p) in psi.iter().enumerate() {
        let (f, sign) = if n % 2 == 0 {
            (&re, if (n / 2) % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (&im, if ((n + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 })
        };
        for ((o, a), b) in integrand.iter_mut().zip(f.iter()).zip(p) {
            *o = a * b;
        }
        out.push(pref * sign * trapezoid_grid(&grid, &integrand));
    }
    Ok(out)
}

/// Fictitious state directly from a characteristic-function cut.
pub fn dm_from_characteristic(curve: &CharacteristicCurve, kind: MapKind, dim: usize, k_max: f64) -> Result<FictitiousState> {
    if dim == 0 {
        return Err(DemargError::Validation("output dimension must be positive".into()));
    }
    if !(k_max > 0.0) {
        return Err(DemargError::Validation(format!("k_max must be positive, got {k_max}")));
    }
    if curve.k_max() < k_max * (1.0 - 1e-9) {
        return Err(DemargError::Coverage(format!(
            "requested k_max {k_max:.3} exceeds measured range {:.3}",
            curve.k_max()
        )));
    }
    let (ks, _) = curve.knots();
    for w in ks.windows(2) {
        if w[0] < k_max && w[1] - w[0] > 0.25 + 1e-12 {
            return Err(DemargError::Validation(format!(
                "k grid too sparse: gap {:.3} between {:.3} and {:.3} exceeds 0.25",
                w[1] - w[0],
                w[0],
                w[1]
            )));
        }
    }
    if let Some(s) = curve.samples.iter().find(|s| s.k == 0.0) {
        let tol = 0.05_f64.max(3.0 * s.sigma_re);
        if (s.value.re - 1.0).abs() > tol || s.value.im.abs() > tol.max(3.0 * s.sigma_im) {
            return Err(DemargError::Validation(format!("C(0) = {} is not 1", s.value)));
        }
    }
    let at_edge = curve.value_at(k_max)?.norm();
    if at_edge > 1e-3 {
        log::debug!("|C(k_max)| = {at_edge:.3e} > 1e-3 at k_max = {k_max}; the cut is truncated");
    }
    let ct = coefficients_from_characteristic(curve, k_max, 2 * (dim - 1))?;
    let mat = dm_from_coefficients(&ct, kind, dim);
    let rho_dm = DensityMatrix::hermitized(mat, true);
    Ok(FictitiousState {
        raw_trace: rho_dm.trace(),
        rho_dm,
        theta: curve.theta,
        map_kind: kind,
        source: Source::Measured,
        witness_cache: None,
    })
}

/// Negativity across measurement axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub theta_grid: Vec<f64>,
    pub negativity: Vec<f64>,
    pub sigma: Vec<f64>,
    pub max_value: f64,
    pub argmax_theta: f64,
}

impl NegativityReport {
    pub fn from_values(theta_grid: Vec<f64>, negativity: Vec<f64>, sigma: Vec<f64>) -> Self {
        let (mut best, mut arg) = (f64::NEG_INFINITY, f64::NAN);
        for (t, v) in theta_grid.iter().zip(&negativity) {
            if *v > best {
                best = *v;
                arg = *t;
            }
        }
        NegativityReport {
            theta_grid,
            negativity,
            sigma,
            max_value: best,
            argmax_theta: arg,
        }
    }
}

/// `n` uniformly spaced axes `iπ/n`, `i = 0..n`; `θ = 0` and `θ = π` are the
/// same axis, so this samples the whole half circle.
pub fn default_theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * std::f64::consts::PI / n as f64).collect()
}

/// Default number of axes in a scan.
pub const DEFAULT_THETA_POINTS: usize = 60;

/// What a scan runs on.
#[derive(Debug, Clone, Copy)]
pub enum ScanInput<'a> {
    /// A state, mapped analytically. `out_dim = None` uses the natural
    /// dimension; `Some(d)` takes the leading `d`-block.
    State { rho: &'a DensityMatrix, out_dim: Option<usize> },
    /// Measured characteristic cuts, one per axis; the theta grid is ignored.
    Curves { curves: &'a [CharacteristicCurve], dim: usize, k_max: f64 },
}

fn negativity_at(rho: &DensityMatrix, theta: f64, kind: MapKind, out_dim: Option<usize>) -> Result<f64> {
    let f = match out_dim {
        None => dm_analytic(rho, theta, kind),
        Some(d) => dm_block(rho, theta, kind, d),
    };
    f.negativity()
}

/// Trace-norm negativity on each axis of the grid, with the maximum.
pub fn negativity_scan(input: ScanInput<'_>, kind: MapKind, theta_grid: &[f64]) -> Result<NegativityReport> {
    match input {
        ScanInput::State { rho, out_dim } => {
            let vals: Result<Vec<f64>> = theta_grid
                .par_iter()
                .map(|&t| negativity_at(rho, t, kind, out_dim))
                .collect();
            let vals = vals?;
            let n = vals.len();
            Ok(NegativityReport::from_values(theta_grid.to_vec(), vals, vec![0.0; n]))
        }
        ScanInput::Curves { curves, dim, k_max } => {
            let vals: Result<Vec<f64>> = curves
                .par_iter()
                .map(|c| dm_from_characteristic(c, kind, dim, k_max)?.negativity())
                .collect();
            let vals = vals?;
            let n = vals.len();
            Ok(NegativityReport::from_values(
                curves.iter().map(|c| c.theta).collect(),
                vals,
                vec![0.0; n],
            ))
        }
    }
}

/// `max_θ` negativity: grid scan over `[0, period)` followed by golden-section
/// refinement around the best grid point.
pub fn max_negativity(
    rho: &DensityMatrix,
    kind: MapKind,
    out_dim: Option<usize>,
    grid_points: usize,
    period: f64,
) -> Result<(f64, f64)> {
    let n = grid_points.max(3);
    let h = period / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let vals: Result<Vec<f64>> = grid.par_iter().map(|&t| negativity_at(rho, t, kind, out_dim)).collect();
    let vals = vals?;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, v) in vals.iter().enumerate() {
        if *v > best {
            best = *v;
            best_i = i;
        }
    }
    if best <= 0.0 {
        return Ok((0.0, grid[best_i]));
    }
    let f = |t: f64| negativity_at(rho, t, kind, out_dim).unwrap_or(f64::NEG_INFINITY);
    let (t, v) = golden_max(f, grid[best_i] - h, grid[best_i] + h, 1e-7);
    Ok(if v > best { (v, t.rem_euclid(period)) } else { (best, grid[best_i]) })
}

/// Golden-section search for a maximum on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}
