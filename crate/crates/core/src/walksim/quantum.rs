use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SimConfig, WalkResult, WalkerKind};
use crate::error::{Error, Result};
use crate::graphs::{Graph, INITIAL, TARGET};

/// Largest tolerated deviation of the density-matrix trace from one.
pub const TRACE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumEngine {
    /// Pure-state evolution under `H - i gamma/2 |1><1|`; the sink population
    /// is the lost norm. Exact because the sink has no Hamiltonian couplings.
    Effective,
    /// Full Lindblad master equation on the density matrix.
    Lindblad,
}

impl std::str::FromStr for QuantumEngine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "effective" => Ok(QuantumEngine::Effective),
            "lindblad" => Ok(QuantumEngine::Lindblad),
            _ => Err(Error::Parse(format!("unknown quantum engine `{s}`"))),
        }
    }
}

/// Hamiltonian and sink wiring for a quantum walk on a base graph.
///
/// Indices `0..n` are graph nodes, `n` is the sink and, when present, `n + 1`
/// is the extra start node coupled only to node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSetup {
    pub n: usize,
    pub a_q: DMatrix<f64>,
    /// `H = A^q` with `hbar = 1` and unit hopping.
    pub hamiltonian: DMatrix<f64>,
    pub gamma: f64,
    pub jump_target: usize,
    pub sink: usize,
    pub extra_start: Option<usize>,
}

impl QuantumSetup {
    pub fn new(g: &Graph, gamma: f64, with_extra_start: bool) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let n = g.n();
        let dim = if with_extra_start { n + 2 } else { n + 1 };
        let mut a_q = DMatrix::<f64>::zeros(dim, dim);
        for (a, b) in g.edges() {
            a_q[(a, b)] = 1.0;
            a_q[(b, a)] = 1.0;
        }
        let extra_start = with_extra_start.then_some(n + 1);
        if let Some(x) = extra_start {
            a_q[(INITIAL, x)] = 1.0;
            a_q[(x, INITIAL)] = 1.0;
        }
        Ok(QuantumSetup {
            n,
            hamiltonian: a_q.clone(),
            a_q,
            gamma,
            jump_target: TARGET,
            sink: n,
            extra_start,
        })
    }

    pub fn dim(&self) -> usize {
        self.a_q.nrows()
    }

    fn complex_hamiltonian(&self) -> DMatrix<Complex64> {
        self.hamiltonian.map(|v| Complex64::new(v, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    NodeZero,
    /// `cos b |0> + e^{i pi/4} sin b |n+1>` with `cos 2b = 1/sqrt 3`.
    TState,
}

impl InitialState {
    pub fn beta() -> f64 {
        (1.0 / 3f64.sqrt()).acos() / 2.0
    }

    pub fn vector(self, setup: &QuantumSetup) -> Result<DVector<Complex64>> {
        let mut psi = DVector::<Complex64>::zeros(setup.dim());
        match self {
            InitialState::NodeZero => psi[INITIAL] = Complex64::new(1.0, 0.0),
            InitialState::TState => {
                let extra = setup.extra_start.ok_or_else(|| {
                    Error::InvalidArgument("T state needs a setup with an extra start node".into())
                })?;
                let beta = Self::beta();
                psi[INITIAL] = Complex64::new(beta.cos(), 0.0);
                psi[extra] = Complex64::from_polar(beta.sin(), std::f64::consts::FRAC_PI_4);
            }
        }
        Ok(psi)
    }
}

/// Exact asymptotic sink population for `init`.
///
/// The part of the initial state lying in the dark subspace (the largest
/// Hamiltonian-invariant subspace orthogonal to the target) never decays;
/// everything else ends up in the sink. Within each eigenspace of `H` the
/// bright direction is the projection of the target basis vector.
pub fn detection_probability(setup: &QuantumSetup, init: InitialState) -> Result<f64> {
    let psi = init.vector(setup)?;
    // Drop the sink, which is decoupled from everything.
    let nodes: Vec<usize> = (0..setup.dim()).filter(|&i| i != setup.sink).collect();
    let m = nodes.len();
    let h = DMatrix::from_fn(m, m, |i, j| setup.hamiltonian[(nodes[i], nodes[j])]);
    let target = nodes.iter().position(|&v| v == setup.jump_target).unwrap();
    let psi = DVector::from_fn(m, |i, _| psi[nodes[i]]);

    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = eig.eigenvalues.amax().max(1.0);

    let mut dark = 0.0;
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < 1e-9 * scale
        {
            end += 1;
        }
        let mut weight = 0.0;
        let mut overlap = Complex64::new(0.0, 0.0);
        let mut bright_norm2 = 0.0;
        for &k in &order[start..end] {
            let v = eig.eigenvectors.column(k);
            let amp: Complex64 = v.iter().zip(psi.iter()).map(|(a, p)| p * a).sum();
            weight += amp.norm_sqr();
            // The bright vector is sum_k v_k[target] v_k, unnormalised.
            overlap += amp * v[target];
            bright_norm2 += v[target] * v[target];
        }
        let bright = if bright_norm2 > 1e-24 {
            overlap.norm_sqr() / bright_norm2
        } else {
            0.0
        };
        dark += (weight - bright).max(0.0);
        start = end;
    }
    Ok((1.0 - dark).clamp(0.0, 1.0))
}

/// Integrates the sink dynamics from `|init><init|` and records the sink
/// population on the grid.
pub fn evolve_quantum(
    setup: &QuantumSetup,
    init: InitialState,
    cfg: &SimConfig,
    p_th: f64,
) -> Result<WalkResult> {
    cfg.validate()?;
    let kind = match init {
        InitialState::NodeZero => WalkerKind::Quantum,
        InitialState::TState => WalkerKind::QuantumT,
    };
    let psi0 = init.vector(setup)?;

    let mut asymptotic = None;
    if cfg.stop_on_hit {
        let p_det = detection_probability(setup, init)?;
        asymptotic = Some(p_det);
        if p_det < p_th - 1e-9 {
            // The sink population is bounded by p_det at all times.
            let mut r = WalkResult::from_trajectory(kind, cfg.dt, vec![0.0], p_th, Some(setup.gamma));
            r.p_det_asymptotic = asymptotic;
            return Ok(r);
        }
    }

    let traj = match cfg.engine {
        QuantumEngine::Effective => evolve_effective(setup, psi0, cfg, p_th)?,
        QuantumEngine::Lindblad => evolve_lindblad(setup, psi0, cfg, p_th)?,
    };
    let mut r = WalkResult::from_trajectory(kind, cfg.dt, traj, p_th, Some(setup.gamma));
    r.p_det_asymptotic = asymptotic;
    Ok(r)
}

/// One RK4 step for a linear ODE `x' = M x` is multiplication by the
/// fourth-order Taylor polynomial of `exp(M dt)`.
fn rk4_step_matrix(m: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    let n = m.nrows();
    let x = m * Complex64::new(dt, 0.0);
    let mut out = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=4 {
        term = &term * &x / Complex64::new(k as f64, 0.0);
        out += &term;
    }
    out
}

fn evolve_effective(
    setup: &QuantumSetup,
    mut psi: DVector<Complex64>,
    cfg: &SimConfig,
    p_th: f64,
) -> Result<Vec<f64>> {
    let steps = cfg.steps();
    let i = Complex64::new(0.0, 1.0);
    let mut h_eff = setup.complex_hamiltonian();
    let t = setup.jump_target;
    h_eff[(t, t)] -= i * (setup.gamma / 2.0);
    let step = rk4_step_matrix(&(h_eff * -i), cfg.dt);

    let mut traj = Vec::with_capacity(if cfg.stop_on_hit { 1024 } else { steps + 1 });
    let mut norm2 = psi.norm_squared();
    traj.push(1.0 - norm2);
    let mut next = DVector::<Complex64>::zeros(psi.len());
    for k in 1..=steps {
        if cfg.stop_on_hit && *traj.last().unwrap() >= p_th {
            break;
        }
        next.gemv(Complex64::new(1.0, 0.0), &step, &psi, Complex64::new(0.0, 0.0));
        std::mem::swap(&mut psi, &mut next);
        let new_norm2 = psi.norm_squared();
        if new_norm2 > norm2 + TRACE_TOLERANCE || !new_norm2.is_finite() {
            return Err(Error::IntegrationAccuracy {
                t: k as f64 * cfg.dt,
                deviation: new_norm2 - norm2,
            });
        }
        norm2 = new_norm2;
        traj.push(1.0 - norm2);
    }
    Ok(traj)
}

struct Lindbladian {
    h: DMatrix<Complex64>,
    gamma: f64,
    jump_target: usize,
    sink: usize,
}

impl Lindbladian {
    /// `-i [H, rho] + gamma (L rho L^+ - {L^+ L, rho} / 2)` with
    /// `L = |sink><target|`.
    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let minus_i = Complex64::new(0.0, -1.0);
        let mut out = (&self.h * rho - rho * &self.h) * minus_i;
        let t = self.jump_target;
        let half = self.gamma / 2.0;
        out[(self.sink, self.sink)] += rho[(t, t)] * self.gamma;
        for j in 0..rho.ncols() {
            out[(t, j)] -= rho[(t, j)] * half;
        }
        for r in 0..rho.nrows() {
            out[(r, t)] -= rho[(r, t)] * half;
        }
        out
    }
}

fn evolve_lindblad(
    setup: &QuantumSetup,
    psi0: DVector<Complex64>,
    cfg: &SimConfig,
    p_th: f64,
) -> Result<Vec<f64>> {
    let steps = cfg.steps();
    let lind = Lindbladian {
        h: setup.complex_hamiltonian(),
        gamma: setup.gamma,
        jump_target: setup.jump_target,
        sink: setup.sink,
    };
    let mut rho = &psi0 * psi0.adjoint();
    let dt = Complex64::new(cfg.dt, 0.0);
    let half = dt / 2.0;
    let sixth = dt / 6.0;
    let s = setup.sink;

    let mut traj = Vec::with_capacity(if cfg.stop_on_hit { 1024 } else { steps + 1 });
    traj.push(rho[(s, s)].re);
    for k in 1..=steps {
        if cfg.stop_on_hit && *traj.last().unwrap() >= p_th {
            break;
        }
        let k1 = lind.apply(&rho);
        let k2 = lind.apply(&(&rho + &k1 * half));
        let k3 = lind.apply(&(&rho + &k2 * half));
        let k4 = lind.apply(&(&rho + &k3 * dt));
        rho += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * sixth;
        let deviation = (rho.trace().re - 1.0).abs();
        if deviation > TRACE_TOLERANCE || !deviation.is_finite() {
            return Err(Error::IntegrationAccuracy {
                t: k as f64 * cfg.dt,
                deviation,
            });
        }
        traj.push(rho[(s, s)].re);
    }
    Ok(traj)
}
