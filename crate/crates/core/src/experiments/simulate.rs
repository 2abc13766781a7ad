use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{opt, Context, Scenario, SolverConfig};
use crate::continuum::{delta_u_prediction, linear_stable_profile, solve_c_linear};
use crate::dynamics::{
    integrate, lock_detect, random_initial_phases, KmSystem, LockStatus, PhaseState, Record, Trajectory,
};
use crate::error::{Error, Result};
use crate::frequencies::{equally_placed, sample_iid, FrequencyDistribution};
use crate::graphs::{GraphCase, GraphRecipe, Orientation};
use crate::metrics::{align_theta, apply_permutation, delta_u_observable, embed, order_parameter, wrap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqMode {
    /// `a (2i − n − 1)/(2n)`.
    #[default]
    EquallyPlaced,
    /// I.i.d. uniform on `[−a/2, a/2]`.
    IidUniform,
}

/// A Kuramoto network on the uniform graphon `W = p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub case: GraphCase,
    pub n: usize,
    pub k: f64,
    pub a: f64,
    pub p: f64,
    /// Sparsity exponent, read for `random_sparse` only.
    pub gamma: f64,
    pub freq_mode: FreqMode,
    pub orientation: Orientation,
    /// Seeds the graph, the frequencies and the initial phases, each on its
    /// own stream.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            case: GraphCase::Complete,
            n: 1000,
            k: 1.0,
            a: 1.0,
            p: 1.0,
            gamma: 0.3,
            freq_mode: FreqMode::EquallyPlaced,
            orientation: Orientation::Undirected,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("a must be positive, got {}", self.a)));
        }
        if !self.k.is_finite() {
            return Err(Error::Config("K must be finite".into()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if self.case == GraphCase::RandomSparse && !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::Config(format!("gamma must lie in (0, 1/2), got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn recipe(&self) -> GraphRecipe {
        GraphRecipe {
            case: self.case,
            n: self.n,
            p: self.p,
            gamma: self.gamma,
            seed: self.seed,
            orientation: self.orientation,
        }
    }

    /// Frequencies and their ascending-sort permutation.
    pub fn frequencies(&self) -> Result<(Vec<f64>, Vec<usize>)> {
        match self.freq_mode {
            FreqMode::EquallyPlaced => Ok((equally_placed(self.a, self.n), (0..self.n).collect())),
            FreqMode::IidUniform => {
                let s = sample_iid(&FrequencyDistribution::uniform(self.a)?, self.n, self.seed)?;
                Ok((s.omegas, s.xi))
            }
        }
    }

    pub fn system(&self) -> Result<(KmSystem, Vec<usize>)> {
        let (omegas, xi) = self.frequencies()?;
        let weights = self.recipe().build()?;
        Ok((KmSystem::new(weights, omegas, self.k)?, xi))
    }
}

/// Observables of the final state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    /// Arithmetic mean of the wrapped final phases.
    pub theta_arithmetic: f64,
    /// Circular mean of the final phases.
    pub theta_circular: f64,
    pub r: f64,
    /// `C` of the stable continuum profile, when it exists.
    pub c_predicted: Option<f64>,
    /// Aligned distance of the permuted final state to the stable profile.
    pub distance: Option<f64>,
    pub theta_star: Option<f64>,
    pub locked: bool,
    /// `Δu` when locked.
    pub delta_u: Option<f64>,
    pub delta_u_predicted: Option<f64>,
    pub lock_frequency: Option<f64>,
    pub frequency_spread: Option<f64>,
}

pub struct Simulation {
    pub system: KmSystem,
    pub xi: Vec<usize>,
    pub trajectory: Trajectory,
    pub lock: LockStatus,
    pub observables: Observables,
}

/// Builds the network, integrates from i.i.d. uniform phases on `[−π, π]`
/// and evaluates the observables at `t_end`.
pub fn simulate(
    model: &ModelConfig,
    t_end: f64,
    solver: &SolverConfig,
    lock_window: f64,
    lock_tol: f64,
) -> Result<Simulation> {
    model.validate()?;
    let (system, xi) = model.system()?;
    let u0 = PhaseState::new(0.0, random_initial_phases(model.n, model.seed))?;
    let trajectory = integrate(&system, &u0, t_end, &solver.integrator(Record::All))?;
    let lock = lock_detect(&trajectory, lock_window.min(t_end), lock_tol)?;
    let u = &trajectory.final_state.u;
    let wrapped = trajectory.final_state.wrapped();
    let (r, psi) = order_parameter(u);
    let permuted = apply_permutation(&xi, u)?;
    let profile = linear_stable_profile(model.a, model.p, model.k, 0.0)?;
    let aligned = profile
        .as_ref()
        .map(|prof| align_theta(&embed(&permuted).expect("n > 0"), prof));
    let observables = Observables {
        theta_arithmetic: wrapped.iter().sum::<f64>() / model.n as f64,
        theta_circular: psi,
        r,
        c_predicted: solve_c_linear(model.p * model.k / model.a),
        distance: aligned.map(|a| a.distance),
        theta_star: aligned.map(|a| a.theta_star),
        locked: lock.is_locked(),
        delta_u: if lock.is_locked() {
            Some(delta_u_observable(u, system.omegas())?)
        } else {
            None
        },
        delta_u_predicted: delta_u_prediction(model.k, model.a, model.p),
        lock_frequency: match lock {
            LockStatus::Locked { frequency, .. } => Some(frequency),
            _ => None,
        },
        frequency_spread: match lock {
            LockStatus::Drifting { frequency_spread } => Some(frequency_spread),
            _ => None,
        },
    };
    Ok(Simulation {
        system,
        xi,
        trajectory,
        lock,
        observables,
    })
}

/// Every `stride`-th node starting from node `stride/2` (one-based), or all
/// nodes for small networks.
fn plotted_nodes(n: usize, stride: usize) -> Vec<usize> {
    if stride <= 1 || n < stride {
        return (0..n).collect();
    }
    (stride / 2 - 1..n).step_by(stride).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateExpect {
    /// Upper bound on the aligned distance to the stable profile.
    pub max_distance: Option<f64>,
    /// Bound on `|r − C|`.
    pub r_tolerance: Option<f64>,
    pub locked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    pub t_end: f64,
    pub solver: SolverConfig,
    /// Trajectory CSV keeps every `node_stride`-th node.
    pub node_stride: usize,
    pub lock_window: f64,
    pub lock_tol: f64,
    pub expect: SimulateExpect,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            model: ModelConfig::default(),
            t_end: 100.0,
            solver: SolverConfig::default(),
            node_stride: 100,
            lock_window: 10.0,
            lock_tol: 1e-3,
            expect: SimulateExpect::default(),
        }
    }
}

fn check_horizon(t_end: f64, lock_window: f64, lock_tol: f64) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }
    if !(lock_window > 0.0 && lock_tol > 0.0) {
        return Err(Error::Config("lock_window and lock_tol must be positive".into()));
    }
    Ok(())
}

impl Scenario for SimulateConfig {
    const NAME: &'static str = "simulate";

    fn set_seed(&mut self, seed: u64) {
        self.model.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        check_horizon(self.t_end, self.lock_window, self.lock_tol)?;
        self.solver.integrator(Record::All).validate()
    }

    fn execute(&self, ctx: &mut Context) -> Result<Value> {
        let sim = ctx.stage("simulate", || {
            simulate(&self.model, self.t_end, &self.solver, self.lock_window, self.lock_tol)
        })?;
        let obs = &sim.observables;

        let nodes = plotted_nodes(self.model.n, self.node_stride);
        let mut w = ctx.csv("simulate_trajectory.csv")?;
        w.write_record(std::iter::once("t".to_string()).chain(nodes.iter().map(|i| format!("u{}", i + 1))))?;
        for s in &sim.trajectory.samples {
            w.write_record(std::iter::once(s.t.to_string()).chain(nodes.iter().map(|&i| wrap(s.u[i]).to_string())))?;
        }
        w.flush()?;

        let ranks = crate::metrics::invert_permutation(&sim.xi);
        let mut w = ctx.csv("simulate_final.csv")?;
        w.write_record(["node", "omega", "rank", "u"])?;
        for (i, u) in sim.trajectory.final_state.wrapped().iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                sim.system.omegas()[i].to_string(),
                (ranks[i] + 1).to_string(),
                u.to_string(),
            ])?;
        }
        w.flush()?;

        if let Some(bound) = self.expect.max_distance {
            let ok = obs.distance.is_some_and(|d| d < bound);
            ctx.check(
                "distance",
                ok,
                format!("aligned distance {} < {bound}", opt(obs.distance)),
            );
        }
        if let Some(tol) = self.expect.r_tolerance {
            let ok = obs.c_predicted.is_some_and(|c| (obs.r - c).abs() <= tol);
            ctx.check(
                "order_parameter",
                ok,
                format!("|r - C| = |{} - {}| <= {tol}", obs.r, opt(obs.c_predicted)),
            );
        }
        if let Some(locked) = self.expect.locked {
            ctx.check(
                "lock",
                obs.locked == locked,
                format!("locked = {}, expected {locked}", obs.locked),
            );
        }
        let mut v = serde_json::to_value(obs)?;
        v["graph"] = serde_json::to_value(sim.system.weights().density_summary())?;
        v["steps"] = json!({
            "accepted": sim.trajectory.stats.accepted,
            "rejected": sim.trajectory.stats.rejected,
            "rhs_evals": sim.trajectory.stats.rhs_evals,
        });
        Ok(v)
    }
}

/// Sweep of the coupling strength: simulated against predicted `Δu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifurcateConfig {
    pub model: ModelConfig,
    /// Sorted values of `K`; `model.k` is ignored.
    pub k_grid: Vec<f64>,
    pub t_end: f64,
    pub solver: SolverConfig,
    pub lock_window: f64,
    pub lock_tol: f64,
    /// Bound on `|Δu_sim − Δu_pred|` at locked points.
    pub tolerance: f64,
    /// Coupling values that must not lock.
    pub expect_drifting: Vec<f64>,
}

impl Default for BifurcateConfig {
    fn default() -> Self {
        let mut k_grid = vec![0.64];
        k_grid.extend((7..=20).map(|i| i as f64 / 10.0));
        BifurcateConfig {
            model: ModelConfig::default(),
            k_grid,
            t_end: 100.0,
            solver: SolverConfig::default(),
            lock_window: 10.0,
            lock_tol: 1e-3,
            tolerance: 0.05,
            expect_drifting: vec![0.64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationRow {
    pub k: f64,
    pub delta_u_sim: Option<f64>,
    pub delta_u_pred: Option<f64>,
    pub locked: bool,
}

impl BifurcateConfig {
    pub fn rows(&self) -> Result<Vec<BifurcationRow>> {
        self.k_grid
            .par_iter()
            .map(|&k| {
                let model = ModelConfig {
                    k,
                    ..self.model.clone()
                };
                let sim = simulate(&model, self.t_end, &self.solver, self.lock_window, self.lock_tol)?;
                Ok(BifurcationRow {
                    k,
                    delta_u_sim: sim.observables.delta_u,
                    delta_u_pred: sim.observables.delta_u_predicted,
                    locked: sim.observables.locked,
                })
            })
            .collect()
    }
}

impl Scenario for BifurcateConfig {
    const NAME: &'static str = "bifurcate";

    fn set_seed(&mut self, seed: u64) {
        self.model.seed = seed;
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        check_horizon(self.t_end, self.lock_window, self.lock_tol)?;
        if self.k_grid.is_empty() || !self.k_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("k_grid must be non-empty and strictly increasing".into()));
        }
        self.solver.integrator(Record::All).validate()
    }

    fn execute(&self, ctx: &mut Context) -> Result<Value> {
        let rows = ctx.stage("sweep", || self.rows())?;
        let mut w = ctx.csv("bifurcate.csv")?;
        w.write_record(["K", "delta_u_sim", "delta_u_pred", "locked"])?;
        for r in &rows {
            w.write_record([
                r.k.to_string(),
                opt(r.delta_u_sim),
                opt(r.delta_u_pred),
                r.locked.to_string(),
            ])?;
        }
        w.flush()?;

        let mut worst = 0.0f64;
        let mut agree = true;
        for r in rows.iter().filter(|r| r.locked) {
            if let (Some(s), Some(p)) = (r.delta_u_sim, r.delta_u_pred) {
                worst = worst.max((s - p).abs());
                agree &= (s - p).abs() < self.tolerance;
            }
        }
        ctx.check(
            "delta_u_agreement",
            agree,
            format!("max |sim - pred| = {worst} < {}", self.tolerance),
        );
        for &k in &self.expect_drifting {
            let row = rows.iter().find(|r| r.k == k);
            let ok = row.is_some_and(|r| !r.locked && r.delta_u_sim.is_none());
            ctx.check(format!("drifting_at_{k}"), ok, format!("K = {k} must not lock"));
        }
        Ok(json!({ "rows": rows, "max_deviation": worst }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plotted_nodes_match_every_hundredth() {
        let nodes = plotted_nodes(1000, 100);
        assert_eq!(nodes.first(), Some(&49));
        assert_eq!(nodes.last(), Some(&949));
        assert_eq!(nodes.len(), 10);
        assert_eq!(plotted_nodes(20, 100).len(), 20);
    }

    #[test]
    fn small_complete_network_locks_onto_the_profile() {
        let model = ModelConfig {
            n: 200,
            k: 1.5,
            ..Default::default()
        };
        let sim = simulate(&model, 60.0, &SolverConfig::default(), 10.0, 1e-3).unwrap();
        let obs = &sim.observables;
        assert!(obs.locked);
        assert!(obs.distance.unwrap() < 0.05, "{obs:?}");
        assert!((obs.delta_u.unwrap() - obs.delta_u_predicted.unwrap()).abs() < 0.05);
    }
}
