use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::FreqMode;
use super::{quantile, strictly_decreasing, Context, ModelConfig, Scenario, SolverConfig};
use crate::continuum::{cl_reference_trajectory, matched_initial};
use crate::dynamics::{integrate, PhaseState, Record, Trajectory};
use crate::error::{Error, Result};
use crate::frequencies::FrequencyFunction;
use crate::graphs::GraphCase;
use crate::metrics::{apply_permutation, circle_l2, embed};

/// Initial phase field shared by the network and the reference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · sin(2π modes x)`.
    Sine {
        amplitude: f64,
        modes: f64,
    },
}

impl InitialData {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialData::Zero => 0.0,
            InitialData::Constant { value } => value,
            InitialData::Sine { amplitude, modes } => amplitude * (TAU * modes * x).sin(),
        }
    }
}

/// Distance between networks of growing size and a fine collocation of the
/// continuum limit started from the same initial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// `model.n` is ignored.
    pub model: ModelConfig,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub t_end: f64,
    pub m_ref: usize,
    pub solver: SolverConfig,
    pub initial: InitialData,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            model: ModelConfig::default(),
            n_grid: vec![100, 400, 1600],
            seeds: vec![0],
            t_end: 10.0,
            m_ref: 8192,
            solver: SolverConfig {
                sample_stride: 0.5,
                ..Default::default()
            },
            initial: InitialData::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    /// Per-seed maxima over the sample times.
    pub distances: Vec<f64>,
}

impl ConvergenceConfig {
    fn deterministic(&self) -> bool {
        self.model.case == GraphCase::Complete && self.model.freq_mode == FreqMode::EquallyPlaced
    }

    /// The seeds actually run; deterministic setups need only one.
    pub fn effective_seeds(&self) -> Vec<u64> {
        if self.deterministic() {
            self.seeds.iter().take(1).copied().collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn reference(&self) -> Result<Trajectory> {
        let omega = FrequencyFunction::linear(self.model.a)?;
        let cfg = self.solver.integrator(Record::All);
        cl_reference_trajectory(
            &omega,
            self.model.p,
            self.model.k,
            self.m_ref,
            |x| self.initial.eval(x),
            self.t_end,
            &cfg,
        )
    }

    /// `max_t ‖T_ξ u_n(t) − u_ref(t)‖` for one network.
    pub fn distance(&self, reference: &Trajectory, n: usize, seed: u64) -> Result<f64> {
        let model = ModelConfig {
            n,
            seed,
            ..self.model.clone()
        };
        model.validate()?;
        let (sys, xi) = model.system()?;
        let cells = matched_initial(|x| self.initial.eval(x), n)?;
        let mut u0 = vec![0.0; n];
        for (k, &i) in xi.iter().enumerate() {
            u0[i] = cells[k];
        }
        let traj = integrate(
            &sys,
            &PhaseState::new(0.0, u0)?,
            self.t_end,
            &self.solver.integrator(Record::All),
        )?;
        if traj.samples.len() != reference.samples.len() {
            return Err(Error::domain("network and reference sample grids differ"));
        }
        let mut worst = 0.0f64;
        for (s, r) in traj.samples.iter().zip(&reference.samples) {
            let permuted = embed(&apply_permutation(&xi, &s.u)?)?;
            worst = worst.max(circle_l2(&permuted, &embed(&r.u)?));
        }
        Ok(worst)
    }

    pub fn rows(&self, reference: &Trajectory) -> Result<Vec<ConvergenceRow>> {
        let seeds = self.effective_seeds();
        self.n_grid
            .iter()
            .map(|&n| {
                let distances: Vec<f64> = seeds
                    .par_iter()
                    .map(|&s| self.distance(reference, n, s))
                    .collect::<Result<_>>()?;
                let mut sorted = distances.clone();
                sorted.sort_by(f64::total_cmp);
                Ok(ConvergenceRow {
                    n,
                    median: quantile(&sorted, 0.5),
                    q10: quantile(&sorted, 0.1),
                    q90: quantile(&sorted, 0.9),
                    distances,
                })
            })
            .collect()
    }
}

impl Scenario for ConvergenceConfig {
    const NAME: &'static str = "convergence";

    fn set_seed(&mut self, seed: u64) {
        self.seeds = vec![seed];
    }

    fn validate(&self) -> Result<()> {
        ModelConfig {
            n: 1,
            ..self.model.clone()
        }
        .validate()?;
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_grid must be positive and strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds is empty".into()));
        }
        if self.m_ref < *self.n_grid.last().expect("non-empty") {
            return Err(Error::Config(format!("m_ref {} is below the largest n", self.m_ref)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        self.solver.integrator(Record::All).validate()
    }

    fn execute(&self, ctx: &mut Context) -> Result<Value> {
        let reference = ctx.stage("reference", || self.reference())?;
        let rows = ctx.stage("networks", || self.rows(&reference))?;
        let seeds = self.effective_seeds();
        let mut w = ctx.csv("convergence.csv")?;
        w.write_record(["n", "seed", "max_distance"])?;
        for r in &rows {
            for (s, d) in seeds.iter().zip(&r.distances) {
                w.write_record([r.n.to_string(), s.to_string(), d.to_string()])?;
            }
        }
        w.flush()?;
        let mut w = ctx.csv("convergence_summary.csv")?;
        w.write_record(["n", "median", "q10", "q90"])?;
        for r in &rows {
            w.write_record([
                r.n.to_string(),
                r.median.to_string(),
                r.q10.to_string(),
                r.q90.to_string(),
            ])?;
        }
        w.flush()?;
        let medians: Vec<f64> = rows.iter().map(|r| r.median).collect();
        if rows.len() > 1 {
            ctx.check(
                "median_decreasing",
                strictly_decreasing(&medians),
                format!("medians {medians:?}"),
            );
        }
        Ok(json!({ "rows": rows, "seeds": seeds }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_discretisation_has_zero_distance() {
        let cfg = ConvergenceConfig {
            model: ModelConfig {
                k: 1.0,
                ..Default::default()
            },
            n_grid: vec![64],
            m_ref: 64,
            t_end: 2.0,
            initial: InitialData::Sine {
                amplitude: 0.5,
                modes: 1.0,
            },
            ..Default::default()
        };
        let reference = cfg.reference().unwrap();
        assert_eq!(cfg.distance(&reference, 64, 0).unwrap(), 0.0);
    }
}
