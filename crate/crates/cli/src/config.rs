//! Command-line arguments, built-in states and the resolved run
//! configuration that is echoed into every report.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use demarg_core::demarg_maps::MapKind;
use demarg_core::fock_core::{
    coherent_state, dephased_odd_cat, fock_state, photon_added_thermal, squeezed_thermal_state, thermal_state,
    DensityMatrix, GaussianParams,
};
use demarg_core::gaussian_bounds::Rotations;
use demarg_core::{DemargError, Result, C64};
use serde::Serialize;

/// Fock dimension used for built-in states of unbounded support.
pub const STATE_DIM: usize = 60;
/// Fictitious-operator block for states of unbounded support.
pub const UNBOUNDED_OUT_DIM: usize = 40;
/// Output dimension for measured records.
pub const MEASURED_OUT_DIM: usize = 6;
/// Per-mode cutoff of the entanglement potential for unbounded states.
pub const UNBOUNDED_ENT_DIM: usize = 24;

#[derive(Parser, Debug)]
#[command(name = "demarg", version, about = "Nonclassicality tests from a single quadrature marginal")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// DM negativity against the measurement axis.
    Negativity(NegativityArgs),
    /// KLM positivity test of the fictitious characteristic function.
    Klm(KlmArgs),
    /// Hankel test on deconvolved quadrature moments.
    Moments(MomentsArgs),
    /// Entanglement potential and the bound N_DM2 <= P_ent.
    Entanglement(EntanglementArgs),
    /// Gaussian bounds under phase randomization.
    GaussianBound(GaussianBoundArgs),
    /// Synthetic characteristic-function record.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapArg {
    Dm1,
    Dm2,
}

impl From<MapArg> for MapKind {
    fn from(m: MapArg) -> Self {
        match m {
            MapArg::Dm1 => MapKind::Dm1,
            MapArg::Dm2 => MapKind::Dm2,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Measurement record (CSV with JSON sidecar); for `moments`, a CSV of
    /// quadrature outcomes with an `x` column.
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    pub input: Option<PathBuf>,
    /// Built-in state: vacuum, fockN, coherent:RE,IM, thermal:NBAR,
    /// squeezed:R[,PHI], squeezed-thermal:R,NBAR, psi, psi-mix:F,
    /// fock2-mix:F, photon-added-thermal:NBAR, odd-cat:GAMMA,F.
    #[arg(long, value_name = "SPEC")]
    pub builtin: Option<String>,
    /// Output dimension of the fictitious operator [default: natural size
    /// for finite states, 40 for unbounded states, 6 for measured records].
    #[arg(long, value_name = "N")]
    pub dim: Option<usize>,
    /// Largest |k| of the characteristic cut that is used.
    #[arg(long, value_name = "X", default_value_t = 3.0)]
    pub kmax: f64,
    /// Bootstrap resamples for error bars (fewer than 2 disables them).
    #[arg(long, value_name = "N", default_value_t = 200)]
    pub bootstrap: usize,
    /// Random seed.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub seed: u64,
    /// Output file [default: standard output].
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct NegativityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MapArg::Dm2)]
    pub map: MapArg,
    /// Number of axes θ = iπ/N for built-in states.
    #[arg(long, value_name = "N", default_value_t = 12)]
    pub theta_grid: usize,
}

#[derive(Args, Debug)]
pub struct KlmArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MapArg::Dm2)]
    pub map: MapArg,
    /// Number of axes θ = iπ/N for built-in states.
    #[arg(long, value_name = "N", default_value_t = 4)]
    pub theta_grid: usize,
    /// Single axis to test (nearest measured axis for records).
    #[arg(long, value_name = "RAD")]
    pub theta: Option<f64>,
    /// Lattice side n; the matrix is n² × n².
    #[arg(long, value_name = "N", default_value_t = 3)]
    pub lattice: usize,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Highest moment order.
    #[arg(long, value_name = "M", default_value_t = 8)]
    pub order: usize,
    /// Quadrature axis of a built-in state.
    #[arg(long, value_name = "RAD", default_value_t = 0.0)]
    pub theta: f64,
    /// Nominal number of outcomes for a built-in state.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    pub shots: usize,
}

#[derive(Args, Debug)]
pub struct EntanglementArgs {
    #[command(flatten)]
    pub common: Common,
    /// Axes per half circle for the DM2 maximization.
    #[arg(long, value_name = "N", default_value_t = 24)]
    pub theta_grid: usize,
    /// Per-mode cutoff of the two-mode state [default: support of a finite
    /// state, 24 for unbounded states].
    #[arg(long, value_name = "N")]
    pub ent_dim: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GaussianBoundArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of phase rotations, or `inf`; a record fixes it to its axis count.
    #[arg(long, value_name = "N|inf", default_value = "inf")]
    pub rotations: String,
    /// Largest energy n = sinh² r of the curve.
    #[arg(long, value_name = "X", default_value_t = 2.0)]
    pub n_max: f64,
    /// Points of the energy grid.
    #[arg(long, value_name = "N", default_value_t = 21)]
    pub points: usize,
    /// Axes per rotation period when maximizing a test state's negativity.
    #[arg(long, value_name = "N", default_value_t = 12)]
    pub theta_grid: usize,
    /// Mean photon number of a measured state (required with --input).
    #[arg(long, value_name = "X")]
    pub energy: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of axes θ = iπ/N.
    #[arg(long, value_name = "N", default_value_t = 6)]
    pub theta_grid: usize,
    /// Number of k points on (0, kmax].
    #[arg(long, value_name = "N", default_value_t = 30)]
    pub k_points: usize,
    /// Shots per k point and quadrature (Re and Im).
    #[arg(long, value_name = "N", default_value_t = 1000)]
    pub shots: u64,
}

/// Resolved settings, echoed verbatim into reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<String>,
    pub builtin: Option<String>,
    pub map: Option<MapArg>,
    pub theta_grid: Option<usize>,
    pub theta: Option<f64>,
    pub dim: Option<usize>,
    pub kmax: f64,
    pub bootstrap: usize,
    pub seed: u64,
    pub format: Format,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunConfig {
    pub fn new(command: &str, c: &Common) -> Result<Self> {
        if c.input.is_none() && c.builtin.is_none() && command != "gaussian-bound" {
            return Err(DemargError::Validation("one of --input or --builtin is required".into()));
        }
        if !(c.kmax > 0.0) || !c.kmax.is_finite() {
            return Err(DemargError::Validation(format!("--kmax must be positive, got {}", c.kmax)));
        }
        if c.dim == Some(0) {
            return Err(DemargError::Validation("--dim must be positive".into()));
        }
        Ok(RunConfig {
            command: command.into(),
            input: c.input.as_ref().map(|p| p.display().to_string()),
            builtin: c.builtin.clone(),
            map: None,
            theta_grid: None,
            theta: None,
            dim: c.dim,
            kmax: c.kmax,
            bootstrap: c.bootstrap,
            seed: c.seed,
            format: c.format,
            extra: serde_json::Map::new(),
        })
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra
            .insert(key.into(), serde_json::to_value(value).expect("plain values serialize"));
        self
    }
}

pub fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(DemargError::Validation(format!("--{name} must be positive")));
    }
    Ok(v)
}

pub fn parse_rotations(s: &str) -> Result<Rotations> {
    s.parse()
}

/// A state selectable with `--builtin`.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Vacuum,
    Fock(usize),
    Coherent(C64),
    Thermal(f64),
    Squeezed { r: f64, phi: f64 },
    SqueezedThermal { r: f64, nbar: f64 },
    /// `(|0⟩ + |2⟩)/√2`.
    Psi,
    /// `f|0⟩⟨0| + (1-f)|Ψ⟩⟨Ψ|`.
    PsiMix(f64),
    /// `f|0⟩⟨0| + (1-f)|2⟩⟨2|`.
    Fock2Mix(f64),
    PhotonAddedThermal(f64),
    OddCat { gamma: f64, f: f64 },
}

fn numbers(spec: &str, args: &str, want: std::ops::RangeInclusive<usize>) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = args.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if want.contains(&v.len()) && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(DemargError::Validation(format!(
            "builtin '{spec}': expected {}..={} numeric parameters",
            want.start(),
            want.end()
        ))),
    }
}

fn fraction(spec: &str, f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(DemargError::Validation(format!("builtin '{spec}': weight must lie in [0, 1]")));
    }
    Ok(f)
}

impl std::str::FromStr for Builtin {
    type Err = DemargError;

    fn from_str(spec: &str) -> Result<Self> {
        let s = spec.trim().to_ascii_lowercase();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let need = |range| match args {
            Some(a) => numbers(spec, a, range),
            None => Err(DemargError::Validation(format!("builtin '{spec}' needs parameters after ':'"))),
        };
        let b = match name {
            "vacuum" => Builtin::Vacuum,
            "psi" => Builtin::Psi,
            "fock" => {
                let v = need(1..=1)?;
                fock_number(spec, v[0])?
            }
            n if n.starts_with("fock") && n[4..].chars().all(|c| c.is_ascii_digit()) && n.len() > 4 => {
                let k: usize = n[4..]
                    .parse()
                    .map_err(|_| DemargError::Validation(format!("builtin '{spec}': bad Fock number")))?;
                if k == 0 {
                    Builtin::Vacuum
                } else {
                    Builtin::Fock(k)
                }
            }
            "coherent" => {
                let v = need(1..=2)?;
                Builtin::Coherent(C64::new(v[0], v.get(1).copied().unwrap_or(0.0)))
            }
            "thermal" => Builtin::Thermal(need(1..=1)?[0]),
            "squeezed" => {
                let v = need(1..=2)?;
                Builtin::Squeezed {
                    r: v[0],
                    phi: v.get(1).copied().unwrap_or(0.0),
                }
            }
            "squeezed-thermal" => {
                let v = need(2..=2)?;
                Builtin::SqueezedThermal { r: v[0], nbar: v[1] }
            }
            "psi-mix" => Builtin::PsiMix(fraction(spec, need(1..=1)?[0])?),
            "fock2-mix" => Builtin::Fock2Mix(fraction(spec, need(1..=1)?[0])?),
            "photon-added-thermal" => Builtin::PhotonAddedThermal(need(1..=1)?[0]),
            "odd-cat" => {
                let v = need(2..=2)?;
                Builtin::OddCat {
                    gamma: v[0],
                    f: fraction(spec, v[1])?,
                }
            }
            _ => return Err(DemargError::Validation(format!("unknown builtin state '{spec}'"))),
        };
        Ok(b)
    }
}

fn fock_number(spec: &str, v: f64) -> Result<Builtin> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(DemargError::Validation(format!("builtin '{spec}': bad Fock number")));
    }
    Ok(match v as usize {
        0 => Builtin::Vacuum,
        n => Builtin::Fock(n),
    })
}

impl Builtin {
    /// Whether the state lives in a finite number of Fock levels.
    pub fn finite_support(&self) -> bool {
        matches!(
            self,
            Builtin::Vacuum | Builtin::Fock(_) | Builtin::Psi | Builtin::PsiMix(_) | Builtin::Fock2Mix(_)
        )
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(
            self,
            Builtin::Vacuum
                | Builtin::Coherent(_)
                | Builtin::Thermal(_)
                | Builtin::Squeezed { .. }
                | Builtin::SqueezedThermal { .. }
        )
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = || DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)]);
        match *self {
            Builtin::Vacuum => fock_state(0, 1),
            Builtin::Fock(n) => fock_state(n, n + 1),
            Builtin::Coherent(a) => coherent_state(a, STATE_DIM),
            Builtin::Thermal(nbar) => thermal_state(nbar, STATE_DIM),
            Builtin::Squeezed { r, phi } => squeezed_thermal_state(&GaussianParams::squeezed_vacuum(r, phi)?, STATE_DIM),
            Builtin::SqueezedThermal { r, nbar } => {
                squeezed_thermal_state(&GaussianParams::new(r, 0.0, nbar, C64::new(0.0, 0.0))?, STATE_DIM)
            }
            Builtin::Psi => psi(),
            Builtin::PsiMix(f) => fock_state(0, 3)?.mix(&psi()?, f),
            Builtin::Fock2Mix(f) => fock_state(0, 3)?.mix(&fock_state(2, 3)?, f),
            Builtin::PhotonAddedThermal(nbar) => photon_added_thermal(nbar, STATE_DIM),
            Builtin::OddCat { gamma, f } => dephased_odd_cat(gamma, f, STATE_DIM),
        }
    }

    /// Block size for the fictitious operator.
    pub fn out_dim(&self, requested: Option<usize>) -> Option<usize> {
        match requested {
            Some(d) => Some(d),
            None if self.finite_support() => None,
            None => Some(UNBOUNDED_OUT_DIM),
        }
    }
}
