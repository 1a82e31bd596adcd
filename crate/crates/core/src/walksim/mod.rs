//! Continuous-time classical and quantum walks on graphs.
//!
//! The classical walker follows `dp/dt = (T - I) p` with an absorbing target.
//! The quantum walker evolves under `H = A` and leaks from the target into an
//! edge-free sink node through the jump operator `|sink><1|` at rate `gamma`.
//! Both report the probability of having arrived (target or sink population)
//! on a uniform time grid, from which the threshold hitting time is read off.

mod classical;
mod linalg;
mod quantum;
mod symmetry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;

pub use classical::{build_classical_operator, evolve_classical, ClassicalMethod, ClassicalOperator};
pub use linalg::expm;
pub use quantum::{
    detection_probability, evolve_quantum, InitialState, QuantumEngine, QuantumSetup,
};
pub use symmetry::{detection_bound, initial_orbit};

/// Default time step, matching the histogram resolution of the step counts.
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 1000.0;
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Which walker is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkerKind {
    /// Classical continuous-time random walk from node 0.
    Classical,
    /// Quantum walk starting in `|0>`.
    Quantum,
    /// Quantum walk starting in the T state on node 0 and an extra start node.
    QuantumT,
}

impl WalkerKind {
    pub fn is_quantum(self) -> bool {
        !matches!(self, WalkerKind::Classical)
    }
}

impl fmt::Display for WalkerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WalkerKind::Classical => "classical",
            WalkerKind::Quantum => "quantum",
            WalkerKind::QuantumT => "quantum_t",
        })
    }
}

impl FromStr for WalkerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" | "ctrw" => Ok(WalkerKind::Classical),
            "quantum" | "ctqw" => Ok(WalkerKind::Quantum),
            "quantum_t" | "quantumT" | "ctqw_t" => Ok(WalkerKind::QuantumT),
            other => Err(Error::Parse(format!("unknown walker `{other}`"))),
        }
    }
}

/// Hitting time in grid steps. `Infinite` orders after every finite count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HitSteps {
    Finite(u64),
    Infinite,
}

impl HitSteps {
    pub fn is_finite(self) -> bool {
        matches!(self, HitSteps::Finite(_))
    }

    pub fn steps(self) -> Option<u64> {
        match self {
            HitSteps::Finite(k) => Some(k),
            HitSteps::Infinite => None,
        }
    }

    /// Hitting time in time units.
    pub fn time(self, dt: f64) -> f64 {
        match self {
            HitSteps::Finite(k) => k as f64 * dt,
            HitSteps::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for HitSteps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HitSteps::Finite(k) => write!(f, "{k}"),
            HitSteps::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for HitSteps {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HitSteps::Finite(k) => s.serialize_u64(*k),
            HitSteps::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for HitSteps {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => Ok(HitSteps::Finite(k)),
            Raw::Str(s) if s == "inf" => Ok(HitSteps::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected integer or \"inf\", got `{s}`"
            ))),
        }
    }
}

/// Numerical settings shared by both walkers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub gamma: f64,
    pub engine: QuantumEngine,
    pub classical_method: ClassicalMethod,
    /// Stop integrating once the threshold is crossed, and skip quantum runs
    /// whose asymptotic detection probability is below the threshold.
    pub stop_on_hit: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: DEFAULT_DT,
            t_max: DEFAULT_T_MAX,
            gamma: DEFAULT_GAMMA,
            engine: QuantumEngine::Effective,
            classical_method: ClassicalMethod::Propagator,
            stop_on_hit: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt) {
            return Err(Error::InvalidArgument(format!(
                "t_max ({}) must be at least dt ({})",
                self.t_max, self.dt
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Number of grid steps covering `[0, t_max]`.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// Trajectory of the arrival probability on the grid `t_k = k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkResult {
    pub kind: WalkerKind,
    pub dt: f64,
    /// Target (classical) or sink (quantum) population at each grid point.
    pub target_prob: Vec<f64>,
    pub p_th: f64,
    pub hitting: HitSteps,
    /// Arrival probability at the last simulated grid point.
    pub p_det_estimate: f64,
    /// Exact asymptotic detection probability when it was computed.
    pub p_det_asymptotic: Option<f64>,
    pub gamma: Option<f64>,
}

impl WalkResult {
    pub(crate) fn from_trajectory(
        kind: WalkerKind,
        dt: f64,
        target_prob: Vec<f64>,
        p_th: f64,
        gamma: Option<f64>,
    ) -> Self {
        let hitting = first_crossing(&target_prob, p_th);
        let p_det_estimate = target_prob.last().copied().unwrap_or(0.0);
        WalkResult {
            kind,
            dt,
            target_prob,
            p_th,
            hitting,
            p_det_estimate,
            p_det_asymptotic: None,
            gamma,
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.target_prob.len()).map(|k| k as f64 * self.dt)
    }

    pub fn hitting_time(&self) -> f64 {
        self.hitting.time(self.dt)
    }

    /// Two-column CSV: `t,p_target` for the classical walker, `t,p_sink`
    /// for quantum walkers.
    pub fn to_csv(&self) -> String {
        let col = if self.kind.is_quantum() { "p_sink" } else { "p_target" };
        let mut out = format!("t,{col}\n");
        for (t, p) in self.times().zip(&self.target_prob) {
            out.push_str(&format!("{t},{p}\n"));
        }
        out
    }

    pub fn summary(&self) -> WalkSummary {
        WalkSummary {
            walker: self.kind,
            tau: self.hitting.steps().map(|k| k as f64 * self.dt),
            steps: self.hitting,
            p_det_estimate: self.p_det_estimate,
            p_det_asymptotic: self.p_det_asymptotic,
            gamma: self.gamma,
            dt: self.dt,
            p_th: self.p_th,
        }
    }
}

/// JSON sidecar written next to a trajectory CSV. `tau` is `null` when the
/// threshold was never reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub walker: WalkerKind,
    pub tau: Option<f64>,
    pub steps: HitSteps,
    pub p_det_estimate: f64,
    pub p_det_asymptotic: Option<f64>,
    pub gamma: Option<f64>,
    pub dt: f64,
    pub p_th: f64,
}

fn first_crossing(prob: &[f64], p_th: f64) -> HitSteps {
    prob.iter()
        .position(|&p| p >= p_th)
        .map_or(HitSteps::Infinite, |k| HitSteps::Finite(k as u64))
}

/// Smallest grid step at which the arrival probability reaches `p_th`.
pub fn hitting_time(result: &WalkResult, p_th: f64) -> Result<(f64, HitSteps)> {
    if !(p_th > 0.0 && p_th < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {p_th}"
        )));
    }
    let steps = first_crossing(&result.target_prob, p_th);
    Ok((steps.time(result.dt), steps))
}

/// Hitting threshold `1 / ln n` for a graph of `n` original nodes.
pub fn threshold_for(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidSize {
            what: "threshold node count",
            got: n,
            min: 3,
        });
    }
    Ok(1.0 / (n as f64).ln())
}

/// Runs one walker on `g` with the given threshold.
pub fn simulate(g: &Graph, walker: WalkerKind, cfg: &SimConfig, p_th: f64) -> Result<WalkResult> {
    match walker {
        WalkerKind::Classical => {
            let op = build_classical_operator(g)?;
            evolve_classical(&op, cfg, p_th)
        }
        WalkerKind::Quantum => {
            let setup = QuantumSetup::new(g, cfg.gamma, false)?;
            evolve_quantum(&setup, InitialState::NodeZero, cfg, p_th)
        }
        WalkerKind::QuantumT => {
            let setup = QuantumSetup::new(g, cfg.gamma, true)?;
            evolve_quantum(&setup, InitialState::TState, cfg, p_th)
        }
    }
}
