use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Context, Scenario, SolverConfig};
use crate::continuum::{
    cl_discretization, solve_c_general, solve_c_linear, stationary_profile, Family, FlipSet, SelfConsistencyProblem,
    StationaryProfile,
};
use crate::dynamics::{integrate, PhaseState, Record};
use crate::error::{Error, Result};
use crate::frequencies::FrequencyFunction;
use crate::metrics::{align_theta, embed};

/// The family whose neighbourhood is probed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Stable,
    #[default]
    Flipped,
    Discontinuous {
        #[serde(default)]
        minus: Vec<(f64, f64)>,
        #[serde(default)]
        plus: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstabilityVerdict {
    EscapedAndConverged,
    EscapedNotConverged,
    NoEscape,
}

/// Starts the collocated continuum limit next to a stationary family and
/// records whether it leaves the family and where it ends up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstabilityConfig {
    pub family: FamilySpec,
    /// Amplitude of the `sin(2πx)` perturbation added to the midpoint values.
    pub delta: f64,
    /// Escape radius around the family.
    pub epsilon: f64,
    pub m: usize,
    pub a: f64,
    pub p: f64,
    pub k: f64,
    pub t_max: f64,
    pub solver: SolverConfig,
    /// Terminal aligned distance to the stable family counted as converged.
    pub converge_tol: f64,
    /// Expected verdict; by default `no-escape` for the stable family and
    /// `escaped-and-converged` otherwise.
    pub expect: Option<InstabilityVerdict>,
}

impl Default for InstabilityConfig {
    fn default() -> Self {
        InstabilityConfig {
            family: FamilySpec::Flipped,
            delta: 1e-3,
            epsilon: 0.5,
            m: 2048,
            a: 1.0,
            p: 1.0,
            k: 1.0,
            t_max: 100.0,
            solver: SolverConfig::default(),
            converge_tol: 0.05,
            expect: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityOutcome {
    pub verdict: InstabilityVerdict,
    pub c_family: f64,
    pub escape_time: Option<f64>,
    pub max_family_distance: f64,
    pub terminal_family_distance: f64,
    pub terminal_stable_distance: f64,
    /// `(t, distance to the family, distance to the stable family)`.
    pub history: Vec<(f64, f64, f64)>,
}

impl InstabilityConfig {
    fn problem(&self) -> Result<SelfConsistencyProblem> {
        SelfConsistencyProblem::new(FrequencyFunction::linear(self.a)?, self.p, self.k)
    }

    /// Profile of the probed family with `θ = 0`.
    pub fn family_profile(&self) -> Result<StationaryProfile> {
        let problem = self.problem()?;
        let c_linear = solve_c_linear(self.p * self.k / self.a)
            .ok_or_else(|| Error::Config(format!("pK/a = {} is below the threshold", self.p * self.k / self.a)))?;
        match &self.family {
            FamilySpec::Stable => stationary_profile(&problem, c_linear, Family::ContinuousStable, 0.0),
            FamilySpec::Flipped => stationary_profile(&problem, c_linear, Family::ContinuousFlipped, 0.0),
            FamilySpec::Discontinuous { minus, plus } => {
                let flips = FlipSet::new(minus.clone(), plus.clone())?;
                let problem = problem.with_flips(flips.clone());
                let root = solve_c_general(&problem)?
                    .ok_or_else(|| Error::Config("the flip set admits no self-consistent C".into()))?;
                stationary_profile(&problem, root.c, Family::Discontinuous(flips), 0.0)
            }
        }
    }

    pub fn stable_profile(&self) -> Result<StationaryProfile> {
        InstabilityConfig {
            family: FamilySpec::Stable,
            ..self.clone()
        }
        .family_profile()
    }

    pub fn outcome(&self) -> Result<InstabilityOutcome> {
        let family = self.family_profile()?;
        let stable = self.stable_profile()?;
        let omega = FrequencyFunction::linear(self.a)?;
        // midpoint values: cell averages would smear the jumps of
        // discontinuous profiles into perturbations larger than delta
        let u0: Vec<f64> = (0..self.m)
            .map(|i| {
                let x = (i as f64 + 0.5) / self.m as f64;
                family.eval(x) + self.delta * (TAU * x).sin()
            })
            .collect();
        let sys = cl_discretization(&omega, self.p, self.k, self.m)?;
        let traj = integrate(
            &sys,
            &PhaseState::new(0.0, u0)?,
            self.t_max,
            &self.solver.integrator(Record::All),
        )?;
        let history: Vec<(f64, f64, f64)> = traj
            .samples
            .par_iter()
            .map(|s| {
                let field = embed(&s.u)?;
                Ok((
                    s.t,
                    align_theta(&field, &family).distance,
                    align_theta(&field, &stable).distance,
                ))
            })
            .collect::<Result<_>>()?;
        let escape_time = history.iter().find(|h| h.1 > self.epsilon).map(|h| h.0);
        let &(_, terminal_family, terminal_stable) = history.last().expect("at least the initial sample");
        let verdict = match escape_time {
            None => InstabilityVerdict::NoEscape,
            Some(_) if terminal_stable < self.converge_tol => InstabilityVerdict::EscapedAndConverged,
            Some(_) => InstabilityVerdict::EscapedNotConverged,
        };
        Ok(InstabilityOutcome {
            verdict,
            c_family: family.c,
            escape_time,
            max_family_distance: history.iter().map(|h| h.1).fold(0.0, f64::max),
            terminal_family_distance: terminal_family,
            terminal_stable_distance: terminal_stable,
            history,
        })
    }

    fn expected(&self) -> InstabilityVerdict {
        self.expect.unwrap_or(match self.family {
            FamilySpec::Stable => InstabilityVerdict::NoEscape,
            _ => InstabilityVerdict::EscapedAndConverged,
        })
    }
}

impl Scenario for InstabilityConfig {
    const NAME: &'static str = "instability";

    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("t_max", self.t_max),
            ("converge_tol", self.converge_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.a > 0.0 && self.k > 0.0 && self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config("need a > 0, K > 0 and p in (0, 1]".into()));
        }
        self.solver.integrator(Record::All).validate()?;
        self.family_profile().map(|_| ())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Value> {
        let out = ctx.stage("integrate", || self.outcome())?;
        let mut w = ctx.csv("instability.csv")?;
        w.write_record(["t", "family_distance", "stable_distance"])?;
        for &(t, f, s) in &out.history {
            w.write_record([t.to_string(), f.to_string(), s.to_string()])?;
        }
        w.flush()?;
        let expected = self.expected();
        ctx.check(
            "verdict",
            out.verdict == expected,
            format!("{:?}, expected {expected:?}", out.verdict),
        );
        if self.family == FamilySpec::Stable {
            let bound = 10.0 * self.delta;
            ctx.check(
                "stable_terminal_distance",
                out.terminal_stable_distance < bound,
                format!("terminal distance {} < {bound}", out.terminal_stable_distance),
            );
        }
        Ok(json!({
            "verdict": out.verdict,
            "c_family": out.c_family,
            "escape_time": out.escape_time,
            "max_family_distance": out.max_family_distance,
            "terminal_family_distance": out.terminal_family_distance,
            "terminal_stable_distance": out.terminal_stable_distance,
        }))
    }
}
