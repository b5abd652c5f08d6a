//! Special functions and exact combinatorics.
//!
//! Factorials are handled in log space. The alternating binomial sums that
//! appear in the Wigner expansion of `|j⟩⟨k|` suffer catastrophic
//! cancellation in floating point, so they are evaluated with exact integer
//! arithmetic and converted once at the end.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for n in 1..LN_FACT_TABLE {
            acc += (n as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_TABLE {
        return ln_fact_table()[n];
    }
    // Stirling series, far beyond any cutoff used in practice.
    let x = n as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Exact binomial coefficient.
pub fn binomial_big(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Converts a big integer to `f64`, saturating to infinity on overflow.
pub fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Physicists' Hermite polynomials `H_0(x) .. H_nmax(x)`.
pub fn hermite_polys(nmax: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(nmax + 1);
    h.push(1.0);
    if nmax == 0 {
        return h;
    }
    h.push(2.0 * x);
    for n in 1..nmax {
        let next = 2.0 * x * h[n] - 2.0 * n as f64 * h[n - 1];
        h.push(next);
    }
    h
}

/// Normalized Hermite functions `ψ_n(u) = H_n(u) e^{-u²/2} / sqrt(2^n n! sqrt(π))`
/// for `n = 0..=nmax`, by the stable three-term recurrence.
pub fn hermite_functions(nmax: usize, u: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    hermite_functions_into(u, &mut out);
    out
}

/// In-place variant of [`hermite_functions`]; fills the whole slice.
pub fn hermite_functions_into(u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    if out.len() == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * u * out[0];
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * u * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)`.
pub fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut l0 = 1.0;
    let mut l1 = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + a - x) * l1 - (kf + a) * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Carlson's symmetric elliptic integral `R_F(x, y, z)` by duplication.
pub fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    const TOL: f64 = 1e-4; // error scales as TOL^6
    loop {
        let a = (x + y + z) / 3.0;
        let dx = 1.0 - x / a;
        let dy = 1.0 - y / a;
        let dz = 1.0 - z / a;
        if dx.abs().max(dy.abs()).max(dz.abs()) < TOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / a.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
    }
}

/// Incomplete elliptic integral of the first kind
/// `F(φ, m) = ∫_0^φ (1 - m sin²t)^{-1/2} dt`, valid for any `m ≤ 1/sin²φ`,
/// in particular for negative parameter.
pub fn elliptic_f(phi: f64, m: f64) -> f64 {
    let s = phi.sin();
    let c = phi.cos();
    s * carlson_rf(c * c, 1.0 - m * s * s, 1.0)
}

/// Orthogonal Krawtchouk table for total degree `s`.
///
/// Entry `(k, n)` is `2^{-s/2} sqrt(C(s,n)/C(s,k)) [x^k] (1+x)^n (1-x)^{s-n}`.
/// The matrix is real orthogonal. It is cached per `s`.
pub fn krawtchouk(s: usize) -> Arc<KrawtchoukTable> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<KrawtchoukTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("krawtchouk cache poisoned").get(&s) {
        return Arc::clone(t);
    }
    let table = Arc::new(KrawtchoukTable::build(s));
    cache
        .lock()
        .expect("krawtchouk cache poisoned")
        .entry(s)
        .or_insert(table)
        .clone()
}

/// See [`krawtchouk`].
#[derive(Debug, Clone)]
pub struct KrawtchoukTable {
    s: usize,
    data: Vec<f64>,
}

impl KrawtchoukTable {
    fn build(s: usize) -> Self {
        let w = s + 1;
        let columns: Vec<Vec<f64>> = (0..=s)
            .into_par_iter()
            .map(|n| {
                let raw = poly_coefficients(s, n);
                let base = -0.5 * s as f64 * std::f64::consts::LN_2 + 0.5 * ln_binomial(s, n);
                raw.iter()
                    .enumerate()
                    .map(|(k, &p)| p * (base - 0.5 * ln_binomial(s, k)).exp())
                    .collect()
            })
            .collect();
        let mut data = vec![0.0; w * w];
        for (n, col) in columns.iter().enumerate() {
            for (k, v) in col.iter().enumerate() {
                data[k * w + n] = *v;
            }
        }
        KrawtchoukTable { s, data }
    }

    pub fn degree(&self) -> usize {
        self.s
    }

    /// Entry `(k, n)`.
    #[inline]
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.data[k * (self.s + 1) + n]
    }
}

/// Coefficients `p_k` of `(1+x)^n (1-x)^{s-n}`, exact, returned as `f64`.
///
/// Uses `(k+1) p_{k+1} = (n - m) p_k - (s - k + 1) p_{k-1}` with `m = s - n`,
/// which follows from `(1 - x²) P' = ((n - m) - s x) P`. Every division is exact.
fn poly_coefficients(s: usize, n: usize) -> Vec<f64> {
    let m = s - n;
    let diff = n as i64 - m as i64;
    if s <= 96 {
        let mut p: Vec<i128> = Vec::with_capacity(s + 1);
        p.push(1);
        for k in 0..s {
            let prev = if k == 0 { 0 } else { p[k - 1] };
            let num = diff as i128 * p[k] - (s - k + 1) as i128 * prev;
            p.push(num / (k as i128 + 1));
        }
        p.into_iter().map(|v| v as f64).collect()
    } else {
        let mut p: Vec<BigInt> = Vec::with_capacity(s + 1);
        p.push(BigInt::from(1));
        for k in 0..s {
            let term = if k == 0 {
                BigInt::from(diff) * &p[k]
            } else {
                BigInt::from(diff) * &p[k] - BigInt::from(s - k + 1) * &p[k - 1]
            };
            p.push(term / (k + 1));
        }
        p.iter().map(big_to_f64).collect()
    }
}

/// Exact coefficient of `x^k` in `(1+x)^n (1-x)^{s-n}`.
pub fn alternating_sum_exact(s: usize, n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::zero();
    for r in 0..=k.min(n) {
        if k - r > s - n {
            continue;
        }
        let term = binomial_big(n, r) * binomial_big(s - n, k - r);
        if (k - r) % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}
