use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::expm;
use super::{SimConfig, WalkResult, WalkerKind};
use crate::error::{Error, Result};
use crate::graphs::{Graph, INITIAL, TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalMethod {
    /// Repeated application of the exact one-step propagator `exp((T - I) dt)`.
    Propagator,
    /// Classical fourth-order Runge–Kutta with step `dt`.
    Rk4,
}

/// Transition matrix of the target-absorbing classical walk.
///
/// `t_matrix[(i, j)]` is the rate of hopping to `i` from `j`. Every column
/// sums to one and the target column is the unit vector on the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalOperator {
    pub n: usize,
    pub t_matrix: DMatrix<f64>,
}

impl ClassicalOperator {
    /// `T - I`.
    pub fn generator(&self) -> DMatrix<f64> {
        &self.t_matrix - DMatrix::identity(self.n, self.n)
    }
}

/// Builds `T_ij = A^c_ij / degree(j)` where `A^c` keeps every edge except
/// those leaving the target, plus a self-loop on the target.
pub fn build_classical_operator(g: &Graph) -> Result<ClassicalOperator> {
    let n = g.n();
    let mut ac = DMatrix::<f64>::zeros(n, n);
    for (a, b) in g.edges() {
        // Column index is the source node.
        if b != TARGET {
            ac[(a, b)] = 1.0;
        }
        if a != TARGET {
            ac[(b, a)] = 1.0;
        }
    }
    ac[(TARGET, TARGET)] = 1.0;
    for j in 0..n {
        let degree: f64 = ac.column(j).sum();
        if degree == 0.0 {
            return Err(Error::Construction(format!("node {j} has zero degree")));
        }
        ac.column_mut(j).scale_mut(1.0 / degree);
    }
    Ok(ClassicalOperator { n, t_matrix: ac })
}

/// Integrates `dp/dt = (T - I) p` from `p(0) = e_0` and records `p_1` on the
/// grid.
pub fn evolve_classical(op: &ClassicalOperator, cfg: &SimConfig, p_th: f64) -> Result<WalkResult> {
    cfg.validate()?;
    let steps = cfg.steps();
    let gen = op.generator();
    let mut p = DVector::<f64>::zeros(op.n);
    p[INITIAL] = 1.0;
    let mut traj = Vec::with_capacity(if cfg.stop_on_hit { 1024 } else { steps + 1 });
    traj.push(p[TARGET]);

    let propagator = match cfg.classical_method {
        ClassicalMethod::Propagator => Some(expm(&(&gen * cfg.dt))),
        ClassicalMethod::Rk4 => None,
    };
    let mut next = DVector::<f64>::zeros(op.n);
    for _ in 0..steps {
        if cfg.stop_on_hit && *traj.last().unwrap() >= p_th {
            break;
        }
        match &propagator {
            Some(prop) => {
                next.gemv(1.0, prop, &p, 0.0);
                std::mem::swap(&mut p, &mut next);
            }
            None => rk4_step(&gen, &mut p, cfg.dt),
        }
        traj.push(p[TARGET]);
    }
    Ok(WalkResult::from_trajectory(
        WalkerKind::Classical,
        cfg.dt,
        traj,
        p_th,
        None,
    ))
}

fn rk4_step(gen: &DMatrix<f64>, p: &mut DVector<f64>, dt: f64) {
    let k1 = gen * &*p;
    let k2 = gen * (&*p + &k1 * (dt / 2.0));
    let k3 = gen * (&*p + &k2 * (dt / 2.0));
    let k4 = gen * (&*p + &k3 * dt);
    *p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Family;
    use crate::walksim::HitSteps;

    fn single_edge() -> Graph {
        Graph::new(2, [(0, 1)], Family::Line).unwrap()
    }

    #[test]
    fn two_node_operator() {
        let op = build_classical_operator(&single_edge()).unwrap();
        assert_eq!(op.t_matrix, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]));
    }

    #[test]
    fn fig1_line_operator() {
        // Path 0 - 2 - 1 - 3 with the target absorbing.
        let g = Graph::new(4, [(0, 2), (2, 1), (1, 3)], Family::Line).unwrap();
        let op = build_classical_operator(&g).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.5, 0.0,
            0.0, 1.0, 0.5, 1.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        assert_eq!(op.t_matrix, expected);
    }

    #[test]
    fn columns_are_stochastic() {
        for g in crate::graphs::enumerate_cycle_graphs(7).unwrap() {
            let op = build_classical_operator(&g).unwrap();
            for c in op.t_matrix.column_iter() {
                assert!((c.sum() - 1.0).abs() < 1e-15);
                assert!(c.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn two_node_analytic_solution() {
        let op = build_classical_operator(&single_edge()).unwrap();
        let cfg = SimConfig {
            t_max: 2.0,
            ..SimConfig::default()
        };
        for method in [ClassicalMethod::Propagator, ClassicalMethod::Rk4] {
            let cfg = SimConfig {
                classical_method: method,
                ..cfg
            };
            let r = evolve_classical(&op, &cfg, 0.5).unwrap();
            for (t, p) in r.times().zip(&r.target_prob) {
                assert!((p - (1.0 - (-t).exp())).abs() < 1e-9, "t={t}");
            }
            // First grid point at or after ln 2 = 0.6931.
            assert_eq!(r.hitting, HitSteps::Finite(70));
            assert!((r.hitting_time() - 0.70).abs() < 1e-12);
        }
    }

    #[test]
    fn half_life_value() {
        let op = build_classical_operator(&single_edge()).unwrap();
        let cfg = SimConfig {
            dt: 0.693147,
            t_max: 0.693147,
            ..SimConfig::default()
        };
        let r = evolve_classical(&op, &cfg, 0.5).unwrap();
        assert!((r.target_prob[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn stop_on_hit_truncates() {
        let op = build_classical_operator(&single_edge()).unwrap();
        let cfg = SimConfig {
            t_max: 10.0,
            stop_on_hit: true,
            ..SimConfig::default()
        };
        let r = evolve_classical(&op, &cfg, 0.5).unwrap();
        assert_eq!(r.target_prob.len(), 71);
        assert_eq!(r.hitting, HitSteps::Finite(70));
    }
}
