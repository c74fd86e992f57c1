//! Planning oscillators coupled by target relative phases.
//!
//! Each gesture gets one oscillator. An edge `(i, j, φ, a)` asks for
//! `ψⱼ − ψᵢ = φ` with strength `a`. Positive relative phase means a later
//! onset. Phases are solved either directly, as a weighted least-squares
//! problem on the graph Laplacian, or by running the coupled-oscillator
//! gradient flow to its stable fixed point.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEdge {
    pub i: String,
    pub j: String,
    pub phi_rad: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGraph {
    pub omega0_rad_s: f64,
    pub reference: String,
    pub nodes: Vec<String>,
    pub edges: Vec<CouplingEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    #[serde(rename = "LS")]
    LeastSquares,
    #[serde(rename = "OSC")]
    Oscillator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSolution {
    pub phases: BTreeMap<String, f64>,
    pub method: SolveMethod,
    pub converged: bool,
    /// Largest wrapped edge error `|wrap(ψⱼ − ψᵢ − φ)|`, radians.
    pub residual: f64,
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Default natural frequency: one planning cycle every 400 ms.
pub const DEFAULT_OMEGA0: f64 = 2.0 * PI / 0.4;

impl CouplingGraph {
    pub fn new(reference: &str, omega0_rad_s: f64) -> Self {
        Self {
            omega0_rad_s,
            reference: reference.to_string(),
            nodes: vec![reference.to_string()],
            edges: Vec::new(),
        }
    }

    pub fn with_node(mut self, id: &str) -> Self {
        if !self.nodes.iter().any(|n| n == id) {
            self.nodes.push(id.to_string());
        }
        self
    }

    pub fn with_edge(mut self, i: &str, j: &str, phi_rad: f64, weight: f64) -> Self {
        self = self.with_node(i).with_node(j);
        self.edges.push(CouplingEdge {
            i: i.to_string(),
            j: j.to_string(),
            phi_rad,
            weight,
        });
        self
    }

    /// Cycle period T₀ = 2π/ω₀ in ms.
    pub fn period_ms(&self) -> f64 {
        1000.0 * 2.0 * PI / self.omega0_rad_s
    }

    fn index(&self, id: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| Error::InvalidArgument(format!("edge references unknown node `{id}`")))
    }

    fn edge_indices(&self) -> Result<Vec<(usize, usize, f64, f64)>> {
        self.edges
            .iter()
            .map(|e| Ok((self.index(&e.i)?, self.index(&e.j)?, e.phi_rad, e.weight)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0_rad_s > 0.0 && self.omega0_rad_s.is_finite()) {
            return Err(Error::InvalidArgument("omega0 must be positive".into()));
        }
        let r = self.index(&self.reference)?;
        for e in &self.edges {
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "edge {}->{} weight {} must be > 0",
                    e.i, e.j, e.weight
                )));
            }
            if !(e.phi_rad > -PI && e.phi_rad <= PI) {
                return Err(Error::InvalidArgument(format!(
                    "edge {}->{} phase {} outside (-pi, pi]",
                    e.i, e.j, e.phi_rad
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidArgument(format!("self-loop on `{}`", e.i)));
            }
        }

        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for (i, j, _, _) in self.edge_indices()? {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([r]);
        seen[r] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        let unreachable: Vec<String> = self
            .nodes
            .iter()
            .zip(&seen)
            .filter(|(_, s)| !**s)
            .map(|(n, _)| n.clone())
            .collect();
        if !unreachable.is_empty() {
            return Err(Error::Disconnected(unreachable));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn residual(&self, phases: &[f64]) -> Result<f64> {
        Ok(self
            .edge_indices()?
            .into_iter()
            .map(|(i, j, phi, _)| wrap_phase(phases[j] - phases[i] - phi).abs())
            .fold(0.0, f64::max))
    }

    fn solution(&self, phases: &[f64], method: SolveMethod, converged: bool) -> Result<PhaseSolution> {
        Ok(PhaseSolution {
            phases: self.nodes.iter().cloned().zip(phases.iter().copied()).collect(),
            method,
            converged,
            residual: self.residual(phases)?,
        })
    }
}

/// Minimizes `Σ a·(ψⱼ − ψᵢ − φ)²` with the reference pinned at zero by
/// solving the reduced weighted-Laplacian normal equations.
pub fn solve_phases_ls(graph: &CouplingGraph) -> Result<PhaseSolution> {
    graph.validate()?;
    let n = graph.nodes.len();
    let r = graph.index(&graph.reference)?;
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, j, phi, a) in graph.edge_indices()? {
        lap[(i, i)] += a;
        lap[(j, j)] += a;
        lap[(i, j)] -= a;
        lap[(j, i)] -= a;
        rhs[j] += a * phi;
        rhs[i] -= a * phi;
    }

    let free: Vec<usize> = (0..n).filter(|&k| k != r).collect();
    let mut phases = vec![0.0; n];
    if !free.is_empty() {
        let m = free.len();
        let reduced = DMatrix::from_fn(m, m, |a, b| lap[(free[a], free[b])]);
        let b = DVector::from_fn(m, |a, _| rhs[free[a]]);
        let chol = reduced
            .cholesky()
            .ok_or_else(|| Error::Degenerate("reduced Laplacian is not positive definite".into()))?;
        let x = chol.solve(&b);
        for (a, &k) in free.iter().enumerate() {
            phases[k] = x[a];
        }
    }
    graph.solution(&phases, SolveMethod::LeastSquares, true)
}

/// Stopping rule for [`simulate_phases`]: every relative phase must move
/// slower than this rate for [`CONVERGENCE_STEPS`] consecutive steps.
pub const CONVERGENCE_RATE_RAD_S: f64 = 1e-6;
pub const CONVERGENCE_STEPS: usize = 100;
pub const DEFAULT_DT_S: f64 = 1e-4;

/// Integrates `θ̇ᵢ = ω₀ − ∂V/∂θᵢ` with `V = Σ −a·cos(θⱼ − θᵢ − φ)` by explicit
/// Euler and returns relative phases wrapped to `(−π, π]`.
///
/// Nodes missing from `init` start at phase zero. Running out of time is
/// reported through `converged = false`, not as an error.
pub fn simulate_phases(
    graph: &CouplingGraph,
    init: &BTreeMap<String, f64>,
    dt_s: f64,
    t_max_s: f64,
) -> Result<PhaseSolution> {
    graph.validate()?;
    if !(dt_s > 0.0 && dt_s <= 1e-3) {
        return Err(Error::InvalidArgument(format!("dt {dt_s} s must lie in (0, 1e-3]")));
    }
    if !(t_max_s > 0.0 && t_max_s.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_max {t_max_s} s must be positive")));
    }
    let n = graph.nodes.len();
    let r = graph.index(&graph.reference)?;
    let edges = graph.edge_indices()?;
    let mut theta: Vec<f64> = graph
        .nodes
        .iter()
        .map(|id| init.get(id).copied().unwrap_or(0.0))
        .collect();
    let step_tol = CONVERGENCE_RATE_RAD_S * dt_s;
    let max_steps = (t_max_s / dt_s).ceil() as usize;

    let relative = |theta: &[f64]| -> Vec<f64> { theta.iter().map(|t| t - theta[r]).collect() };

    let mut prev = relative(&theta);
    let mut quiet = 0usize;
    let mut converged = false;
    let mut force = vec![0.0; n];
    for _ in 0..max_steps {
        force.iter_mut().for_each(|f| *f = 0.0);
        for &(i, j, phi, a) in &edges {
            let s = a * (theta[j] - theta[i] - phi).sin();
            // −∂V/∂θⱼ = −a·sin(·), −∂V/∂θᵢ = +a·sin(·)
            force[j] -= s;
            force[i] += s;
        }
        for (t, f) in theta.iter_mut().zip(&force) {
            *t += dt_s * (graph.omega0_rad_s + f);
        }
        let rel = relative(&theta);
        let mut still = true;
        'pairs: for a in 0..n {
            for b in (a + 1)..n {
                let d_now = rel[b] - rel[a];
                let d_prev = prev[b] - prev[a];
                if (d_now - d_prev).abs() >= step_tol {
                    still = false;
                    break 'pairs;
                }
            }
        }
        prev = rel;
        quiet = if still { quiet + 1 } else { 0 };
        if quiet >= CONVERGENCE_STEPS {
            converged = true;
            break;
        }
    }

    let phases: Vec<f64> = prev.iter().map(|&p| wrap_phase(p)).collect();
    graph.solution(&phases, SolveMethod::Oscillator, converged)
}

/// Converts relative phases to onset times: `t_ref + ψ/(2π)·T₀`.
pub fn phases_to_onsets(solution: &PhaseSolution, omega0_rad_s: f64, t_ref_ms: f64) -> Result<BTreeMap<String, f64>> {
    if !solution.converged {
        return Err(Error::NotConverged);
    }
    if !(omega0_rad_s > 0.0) {
        return Err(Error::InvalidArgument("omega0 must be positive".into()));
    }
    let period_ms = 1000.0 * 2.0 * PI / omega0_rad_s;
    Ok(solution
        .phases
        .iter()
        .map(|(id, psi)| (id.clone(), t_ref_ms + psi / (2.0 * PI) * period_ms))
        .collect())
}

/// The competitive onset-cluster graph: two consonants each in phase with
/// the vowel reference (weight `a`) and anti-phase with each other (weight `b`).
pub fn c_center_graph(in_phase_weight: f64, anti_phase_weight: f64) -> CouplingGraph {
    CouplingGraph::new("V", DEFAULT_OMEGA0)
        .with_edge("C1", "V", 0.0, in_phase_weight)
        .with_edge("C2", "V", 0.0, in_phase_weight)
        .with_edge("C1", "C2", PI, anti_phase_weight)
}
