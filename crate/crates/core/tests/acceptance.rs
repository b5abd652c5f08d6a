//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output in
//! order. The process fails if any asserted criterion fails. A criterion
//! marked as not asserted is computed and reported but cannot fail the run.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::time::Instant;

use demarg_core::criteria::{default_d_range, klm_test, CharSource};
use demarg_core::data_pipeline::{bootstrap, default_axes, default_k_grid, simulate_record, MeasurementAxis};
use demarg_core::demarg_maps::{dm1_analytic, dm2_analytic, dm_block, dm_from_characteristic, dm_from_marginal, MapKind};
use demarg_core::entanglement::{bound_values, dm1_chain, entanglement_potential, BoundConfig};
use demarg_core::fock_core::{
    dephased_odd_cat, fock_state, phase_rotate, photon_added_thermal, squeezed_thermal_state, DensityMatrix,
    GaussianParams,
};
use demarg_core::gaussian_bounds::{
    gaussian_bound_direct, gaussian_bound_finite, gaussian_bound_full, gaussian_bound_maximum, squeeze_for_energy,
    FiniteBoundConfig, Rotations,
};
use demarg_core::phasespace::{wigner, MarginalDistribution};
use demarg_core::special::ln_factorial;
use demarg_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Check = Result<(bool, String), String>;

struct Criterion {
    id: &'static str,
    title: &'static str,
    asserted: bool,
    run: fn() -> Check,
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn psi() -> DensityMatrix {
    DensityMatrix::pure(&[C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)])
        .expect("normalized")
}

fn fock_determinants() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let thetas: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        let rho = fock_state(n, n + 1).map_err(err)?;
        let nf = n as f64;
        let want1 = -(ln_factorial(4 * n) - 256f64.ln() * nf - 4.0 * ln_factorial(n)).exp();
        let want2 = -(ln_factorial(2 * n) - 16f64.ln() * nf - 2.0 * ln_factorial(n)).exp();
        for &t in &thetas {
            worst = worst.max((dm1_analytic(&rho, t).block_det(0, 4 * n) - want1).abs());
            worst = worst.max((dm2_analytic(&rho, t).block_det(0, 2 * n) - want2).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-10 && secs < 5.0, format!("max |Δdet| = {worst:.1e}, {secs:.3} s")))
}

fn gaussian_negativity_law() -> Check {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for v in [1.0 / 16.0, 1.0 / 8.0, 0.25, 0.5] {
        let x: Vec<f64> = (0..4001).map(|i| -8.0 + i as f64 * 0.004).collect();
        let w: Vec<f64> = x
            .iter()
            .map(|x| (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
            .collect();
        let m = MarginalDistribution::sampled(0.0, x, w).map_err(err)?;
        let n = dm_from_marginal(&m, MapKind::Dm2, 40).map_err(err)?.negativity().map_err(err)?;
        let want = (0.25 / v.sqrt() - 0.5).max(0.0);
        worst = worst.max((n - want).abs());
        parts.push(format!("V={v}: {n:.6}"));
    }
    Ok((worst <= 1e-3, format!("{}; max error {worst:.1e}", parts.join(", "))))
}

fn gaussian_bound_value() -> Check {
    let (r, b) = gaussian_bound_maximum();
    let direct = gaussian_bound_direct(r);
    let ok = (b - 0.0887).abs() <= 5e-4 && (b - direct).abs() < 1e-8;
    Ok((ok, format!("B_G = {b:.6} at r = {r:.4} (quadrature {direct:.6})")))
}

fn finite_bounds_dominate() -> Check {
    let energies: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    let r_grid: Vec<f64> = energies.iter().map(|&n| squeeze_for_energy(n)).collect();
    let cfg = FiniteBoundConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for n_rot in [6usize, 12] {
        let curve = gaussian_bound_finite(Rotations::Finite(n_rot), &r_grid, &cfg).map_err(err)?;
        let (mut deficit, mut at) = (0.0f64, 0.0);
        for ((&n, &r), &b) in energies.iter().zip(&r_grid).zip(&curve.bound) {
            let d = gaussian_bound_full(r) - b;
            if d > deficit {
                deficit = d;
                at = n;
            }
        }
        ok &= deficit <= 1e-9;
        parts.push(format!("N={n_rot}: largest shortfall below N=∞ {deficit:.4} at n={at:.1}"));
    }
    Ok((ok, parts.join("; ")))
}

fn entanglement_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    let mut worst_fds = f64::NEG_INFINITY;
    let cfg = BoundConfig::default();
    for _ in 0..50 {
        let rho = random_fds(&mut rng, 3);
        let b = bound_values(&rho, &cfg).map_err(err)?;
        worst_fds = worst_fds.max(b.n_dm2 - b.p_ent);
    }
    ok &= worst_fds <= 1e-6;

    let gcfg = BoundConfig {
        theta_points: 24,
        dm_out_dim: Some(40),
        ent_dim: Some(24),
        gaussian: true,
    };
    let (mut worst_gap, mut worst_excess) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..10 {
        let r = rng.random_range(0.05..0.35);
        let phi = rng.random_range(0.0..PI);
        let nbar = rng.random_range(0.0..0.15);
        let p = GaussianParams::new(r, phi, nbar, C64::new(0.0, 0.0)).map_err(err)?;
        let rho = squeezed_thermal_state(&p, 60).map_err(err)?;
        let b = bound_values(&rho, &gcfg).map_err(err)?;
        worst_gap = worst_gap.max((b.p_ent - b.n_dm2).abs());
        worst_excess = worst_excess.max(b.n_dm2 - b.p_ent);
    }
    ok &= worst_excess <= 1e-6 && worst_gap <= 1e-4;

    let p1 = entanglement_potential(&fock_state(1, 2).map_err(err)?, None).map_err(err)?;
    ok &= (p1 - 0.5).abs() <= 1e-8;
    Ok((
        ok,
        format!(
            "FDS max(N_DM2 - P_ent) = {worst_fds:.1e}; Gaussian max |P_ent - N_DM2| = {worst_gap:.1e}; P_ent(|1⟩) = {p1:.10}"
        ),
    ))
}

fn dm1_chain_matches() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let rho = random_fds(&mut rng, 2);
        let theta = rng.random_range(0.0..PI);
        let want = dm1_analytic(&rho, theta).rho_dm;
        let got = dm1_chain(&phase_rotate(&rho, theta)).map_err(err)?.resized(want.dim()).map_err(err)?;
        let d = (got.elements() - want.elements()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok((worst <= 1e-6, format!("max elementwise deviation {worst:.1e}")))
}

fn klm_reproduction() -> Check {
    let ds = default_d_range(3, None);
    let lam = |rho: &DensityMatrix, theta: f64| -> Result<Vec<f64>, String> {
        let src = CharSource::Fictitious { rho, theta, kind: MapKind::Dm2 };
        Ok(klm_test(&src, 3, &ds, 0, 0).map_err(err)?.iter().map(|p| p.lambda_min).collect())
    };
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);

    let vac = lam(&fock_state(0, 1).map_err(err)?, 0.0)?;
    let psi = psi();
    let lp = lam(&psi, FRAC_PI_2)?;
    let mix = fock_state(0, 3).map_err(err)?.mix(&psi, 0.66).map_err(err)?;
    let mut w_min = f64::INFINITY;
    for i in 0..100 {
        for j in 0..100 {
            let q = -2.5 + 5.0 * i as f64 / 99.0;
            let p = -2.5 + 5.0 * j as f64 / 99.0;
            w_min = w_min.min(wigner(&mix, q, p));
        }
    }
    let lm = lam(&mix, FRAC_PI_2)?;
    let ok = vac.len() == 20 && min(&vac) >= -1e-9 && min(&lp) < 0.0 && w_min >= -1e-12 && min(&lm) < 0.0;
    Ok((
        ok,
        format!(
            "vacuum min λ = {:.1e} over {} d; Ψ min λ = {:.4}; mixture min W = {w_min:.1e}, min λ = {:.4}",
            min(&vac),
            vac.len(),
            min(&lp),
            min(&lm)
        ),
    ))
}

fn axis_negativity(axis: &MeasurementAxis) -> demarg_core::Result<f64> {
    dm_from_characteristic(&axis.to_curve()?, MapKind::Dm2, 6, 3.0)?.negativity()
}

fn noise_benchmark() -> Check {
    let axes = default_axes();
    let k = default_k_grid();
    let band = 0.06;
    let run = |rho: &DensityMatrix, label: &str, seed: u64| -> Result<Vec<(f64, f64)>, String> {
        let rec = simulate_record(rho, label, &axes, &k, 1000, seed).map_err(err)?;
        rec.axes
            .iter()
            .enumerate()
            .map(|(i, ax)| {
                let b = bootstrap(ax, 200, seed * 100 + i as u64, axis_negativity).map_err(err)?;
                Ok((b.estimate, b.sigma))
            })
            .collect()
    };
    let vac = run(&fock_state(0, 1).map_err(err)?, "vacuum", 7)?;
    let one = run(&fock_state(1, 2).map_err(err)?, "fock1", 8)?;
    let two = run(&fock_state(2, 3).map_err(err)?, "fock2", 9)?;
    let vac_ok = vac.iter().all(|&(n, s)| n.abs() <= band && (0.005..=0.05).contains(&s));
    let excess = |v: &[(f64, f64)]| v.iter().map(|&(n, s)| n - 3.0 * s - band).fold(f64::INFINITY, f64::min);
    let (e1, e2) = (excess(&one), excess(&two));
    let vmax = vac.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let (smin, smax) = vac
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    Ok((
        vac_ok && e1 > 0.0 && e2 > 0.0,
        format!(
            "vacuum max |N| = {vmax:.4}, σ ∈ [{smin:.4}, {smax:.4}]; min (N - 3σ - {band}) |1⟩ {e1:.4}, |2⟩ {e2:.4}"
        ),
    ))
}

fn flip_point(kind: MapKind, b: usize, lo: f64, hi: f64) -> Result<f64, String> {
    let det = |nbar: f64| -> Result<f64, String> {
        let rho = photon_added_thermal(nbar, 80).map_err(err)?;
        Ok(dm_block(&rho, 0.3, kind, b + 2).block_det(0, b))
    };
    let (mut lo, mut hi) = (lo, hi);
    let (dlo, dhi) = (det(lo)?, det(hi)?);
    if dlo.signum() == dhi.signum() {
        return Err(format!("no sign change of the {kind:?} determinant on [{lo}, {hi}]"));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if det(mid)?.signum() == dlo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn photon_added_thresholds() -> Check {
    let t1 = flip_point(MapKind::Dm1, 4, 0.3, 0.5)?;
    let t2 = flip_point(MapKind::Dm2, 2, 0.35, 0.55)?;
    Ok((
        (t1 - 0.40).abs() <= 0.02 && (t2 - 0.45).abs() <= 0.02,
        format!("DM1 {{0,4}} flips at n̄ = {t1:.4}; DM2 {{0,2}} flips at n̄ = {t2:.4}"),
    ))
}

fn odd_cat_formula(g: f64, f: f64, theta: f64) -> f64 {
    let g2 = g * g;
    -f * (g2 * (1.0 + 2.0 * theta.sin().powi(2))).exp() * g2 * g2 / (2.0 * ((2.0 * g2).exp() - f).powi(2))
}

fn odd_cats() -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    for g in [0.5, 1.0, 1.5] {
        for f in [0.2, 0.6, 1.0] {
            let rho = dephased_odd_cat(g, f, 60).map_err(err)?;
            for theta in [0.0, 0.7, FRAC_PI_2, 2.5] {
                let det = dm_block(&rho, theta, MapKind::Dm2, 3).block_det(0, 2);
                worst = worst.max((det - odd_cat_formula(g, f, theta)).abs());
                count += 1;
            }
        }
    }
    let example = dm_block(&dephased_odd_cat(1.0, 1.0, 60).map_err(err)?, 0.0, MapKind::Dm2, 3).block_det(0, 2);
    Ok((
        worst <= 1e-8 && (example - -0.03330).abs() < 5e-6,
        format!("{count} grid points, max error {worst:.1e}; γ=1, f=1, θ=0 gives {example:.5}"),
    ))
}

fn property_suites() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cases = 100;
    let mut failures = Vec::new();
    let mut note = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    for _ in 0..cases {
        let classical = random_coherent_mixture(&mut rng, CLASSICAL_DIM);
        let theta = rng.random_range(0.0..PI);
        note("classicality", classicality_check(&classical, theta));

        let d = rng.random_range(0.1..2.0);
        note("hamburger/klm", hamburger_klm_check(&classical, theta, d));

        let a = random_fds(&mut rng, 3);
        let b = random_fds(&mut rng, 3);
        let dim = a.dim().max(b.dim());
        let (a, b) = (a.resized(dim).map_err(err)?, b.resized(dim).map_err(err)?);
        let p = rng.random_range(0.0..1.0);
        note("convexity", convexity_check(&a, &b, p, theta));

        let alpha = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        note("displacement", displacement_check(&a, alpha, theta));

        let phi = rng.random_range(-PI..PI);
        note("phase covariance", phase_covariance_check(&b, phi, theta));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = match failures.first() {
        None => format!("5 properties × {cases} instances, {secs:.1} s"),
        Some(f) => {
            let mut kinds: Vec<&str> = failures.iter().filter_map(|f| f.split(':').next()).collect();
            kinds.sort_unstable();
            kinds.dedup();
            format!("{} failures in {}, first: {f}", failures.len(), kinds.join("/"))
        }
    };
    Ok((failures.is_empty() && secs < 600.0, detail))
}

fn main() {
    let criteria = [
        Criterion { id: "1", title: "closed-form DM determinants of Fock states", asserted: true, run: fock_determinants },
        Criterion { id: "2", title: "Gaussian DM2 negativity law from sampled marginals", asserted: true, run: gaussian_negativity_law },
        Criterion { id: "3a", title: "Gaussian bound maximum B_G", asserted: true, run: gaussian_bound_value },
        Criterion { id: "3b", title: "finite-N bounds dominate the N=∞ curve on n ∈ [0, 2]", asserted: false, run: finite_bounds_dominate },
        Criterion { id: "4", title: "DM2 negativity bounded by entanglement potential", asserted: true, run: entanglement_bound },
        Criterion { id: "5", title: "DM1 equals the BS/PT/BS chain", asserted: true, run: dm1_chain_matches },
        Criterion { id: "6", title: "KLM reproduction", asserted: true, run: klm_reproduction },
        Criterion { id: "7", title: "synthetic noise benchmark", asserted: true, run: noise_benchmark },
        Criterion { id: "8", title: "photon-added thermal thresholds", asserted: true, run: photon_added_thresholds },
        Criterion { id: "9", title: "dephased odd cat determinants", asserted: true, run: odd_cats },
        Criterion { id: "10", title: "property suites", asserted: true, run: property_suites },
    ];
    let mut asserted_failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let (pass, detail) = match (c.run)() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = match (pass, c.asserted) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (not asserted)",
        };
        println!(
            "[{tag}] criterion {}: {} ({detail}) [{:.2} s]",
            c.id,
            c.title,
            start.elapsed().as_secs_f64()
        );
        if !pass && c.asserted {
            asserted_failures += 1;
        }
    }
    if asserted_failures > 0 {
        eprintln!("{asserted_failures} asserted criteria failed");
        std::process::exit(1);
    }
}
