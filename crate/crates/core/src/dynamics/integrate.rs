use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tableau::{A, B, BHH, ER, STAGES};
use super::{KmSystem, PhaseState, VectorField};
use crate::error::{Error, Result};
use crate::metrics::wrap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dormand–Prince 8(5,3) with PI step-size control.
    #[default]
    AdaptiveRk8,
    /// Classical RK4 with step `h_init`; used as a cross-check.
    Rk4Fixed,
}

/// Which node values are stored at each sample time.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Record {
    #[default]
    All,
    Nodes(Vec<usize>),
    /// Only the final state is kept.
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub sample_stride: f64,
    pub record: Record,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::AdaptiveRk8,
            rtol: 1e-8,
            atol: 1e-8,
            h_init: 1e-2,
            h_max: 1.0,
            sample_stride: 1.0,
            record: Record::All,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive(self.rtol, "rtol")?;
        positive(self.atol, "atol")?;
        positive(self.h_init, "h_init")?;
        positive(self.h_max, "h_max")?;
        positive(self.sample_stride, "sample_stride")?;
        if self.h_init > self.h_max {
            return Err(Error::Config(format!(
                "h_init {} exceeds h_max {}",
                self.h_init, self.h_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Unwrapped phases of the recorded nodes.
    pub u: Vec<f64>,
    /// Instantaneous frequencies of the recorded nodes.
    pub du: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Recorded node indices; `None` when every node is recorded.
    pub nodes: Option<Vec<usize>>,
    pub samples: Vec<Sample>,
    pub final_state: PhaseState,
    pub stats: StepStats,
}

impl Trajectory {
    /// `t` followed by the recorded phases wrapped to `(−π, π]`. Columns are
    /// named `u<i>` with one-based node numbers.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let width = self.samples.first().map_or(0, |s| s.u.len());
        let names: Vec<String> = match &self.nodes {
            Some(nodes) => nodes.iter().map(|i| format!("u{}", i + 1)).collect(),
            None => (1..=width).map(|i| format!("u{i}")).collect(),
        };
        w.write_record(std::iter::once("t".to_string()).chain(names))?;
        for s in &self.samples {
            w.write_record(std::iter::once(s.t.to_string()).chain(s.u.iter().map(|&v| wrap(v).to_string())))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates a Kuramoto system from `u0` to `t_end`.
pub fn integrate(sys: &KmSystem, u0: &PhaseState, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate_field(sys, u0, t_end, cfg)
}

/// Integrates any autonomous vector field. Steps are shortened to land on
/// the sample grid `t0, t0 + stride, …, t_end` so samples are step endpoints.
pub fn integrate_field<F: VectorField>(
    field: &F,
    u0: &PhaseState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.u.len() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: u0.u.len(),
        });
    }
    if !(t_end > u0.t) {
        return Err(Error::domain(format!(
            "t_end {t_end} must exceed the initial time {}",
            u0.t
        )));
    }
    if let Record::Nodes(nodes) = &cfg.record {
        if let Some(&i) = nodes.iter().find(|&&i| i >= field.dim()) {
            return Err(Error::domain(format!("recorded node {i} out of range")));
        }
    }
    let mut run = Run::new(field, u0, t_end, cfg);
    match cfg.method {
        Method::AdaptiveRk8 => run.dop853()?,
        Method::Rk4Fixed => run.rk4()?,
    }
    Ok(run.finish())
}

struct Run<'a, F> {
    field: &'a F,
    cfg: &'a IntegratorConfig,
    t0: f64,
    t_end: f64,
    t: f64,
    y: Vec<f64>,
    /// `f(y)` at the current point.
    dy: Vec<f64>,
    samples: Vec<Sample>,
    next_sample: usize,
    stats: StepStats,
}

impl<'a, F: VectorField> Run<'a, F> {
    fn new(field: &'a F, u0: &PhaseState, t_end: f64, cfg: &'a IntegratorConfig) -> Self {
        let n = field.dim();
        let mut dy = vec![0.0; n];
        field.eval(&u0.u, &mut dy);
        let mut run = Run {
            field,
            cfg,
            t0: u0.t,
            t_end,
            t: u0.t,
            y: u0.u.clone(),
            dy,
            samples: Vec::new(),
            next_sample: 0,
            stats: StepStats {
                rhs_evals: 1,
                ..Default::default()
            },
        };
        run.record();
        run
    }

    /// The `k`-th sample time; the last one is exactly `t_end`.
    fn sample_time(&self, k: usize) -> f64 {
        let t = self.t0 + k as f64 * self.cfg.sample_stride;
        if t >= self.t_end - 1e-9 * self.cfg.sample_stride {
            self.t_end
        } else {
            t
        }
    }

    fn record(&mut self) {
        let keep = match &self.cfg.record {
            Record::All => Some((self.y.clone(), self.dy.clone())),
            Record::Nodes(nodes) => Some((
                nodes.iter().map(|&i| self.y[i]).collect(),
                nodes.iter().map(|&i| self.dy[i]).collect(),
            )),
            Record::FinalOnly => None,
        };
        if let Some((u, du)) = keep {
            self.samples.push(Sample { t: self.t, u, du });
        }
        self.next_sample += 1;
    }

    fn done(&self) -> bool {
        self.t >= self.t_end
    }

    /// Largest admissible step from the current time, clipped to the next
    /// sample time. The flag reports whether the step lands on it.
    fn clip(&self, h: f64) -> (f64, bool) {
        let target = self.sample_time(self.next_sample);
        let room = target - self.t;
        if h >= room * (1.0 - 1e-12) {
            (room, true)
        } else {
            (h, false)
        }
    }

    fn advance(&mut self, y_new: Vec<f64>, dy_new: Vec<f64>, h: f64, lands: bool) {
        self.y = y_new;
        self.dy = dy_new;
        if lands {
            self.t = self.sample_time(self.next_sample);
            self.record();
        } else {
            self.t += h;
        }
    }

    fn underflow(&self, h: f64) -> Result<()> {
        if h < 1e-14 * self.t.abs().max(1.0) {
            return Err(self.failure(format!("step size underflow (h = {h:e})")));
        }
        if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
            return Err(self.failure(format!("step budget of {} exhausted", self.cfg.max_steps)));
        }
        Ok(())
    }

    fn failure(&self, reason: String) -> Error {
        Error::Integration {
            t: self.t,
            reason,
            accepted: self.stats.accepted,
            rejected: self.stats.rejected,
        }
    }

    fn dop853(&mut self) -> Result<()> {
        const SAFE: f64 = 0.9;
        const BETA: f64 = 0.04;
        const FACC1: f64 = 1.0 / 0.333;
        const FACC2: f64 = 1.0 / 6.0;
        let expo1 = 1.0 / 8.0 - BETA * 0.2;

        let n = self.y.len();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; STAGES];
        let mut stage_y = vec![0.0; n];
        let mut h = self.cfg.h_init;
        let mut facold = 1e-4f64;
        let mut last_rejected = false;

        while !self.done() {
            let (h_try, lands) = self.clip(h.min(self.cfg.h_max));
            self.underflow(h_try)?;

            k[0].copy_from_slice(&self.dy);
            for s in 1..STAGES {
                let (done, rest) = k.split_at_mut(s);
                combine(&mut stage_y, &self.y, h_try, A[s], done);
                self.field.eval(&stage_y, &mut rest[0]);
            }
            self.stats.rhs_evals += STAGES - 1;

            let mut y_new = vec![0.0; n];
            combine(&mut y_new, &self.y, h_try, &B, &k);

            let (err5, err3) = (0..n)
                .into_par_iter()
                .with_min_len(1024)
                .map(|i| {
                    let sk = self.cfg.atol + self.cfg.rtol * self.y[i].abs().max(y_new[i].abs());
                    let bsum: f64 = B.iter().map(|&(j, b)| b * k[j][i]).sum();
                    let e3 = bsum - BHH.iter().map(|&(j, b)| b * k[j][i]).sum::<f64>();
                    let e5: f64 = ER.iter().map(|&(j, e)| e * k[j][i]).sum();
                    ((e5 / sk).powi(2), (e3 / sk).powi(2))
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let mut err = h_try * err5 * (1.0 / (deno * n as f64)).sqrt();
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                err = f64::INFINITY;
            }

            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let fac = FACC2.max(FACC1.min(fac11 / facold.powf(BETA) / SAFE));
                let mut h_new = h_try / fac;
                facold = err.max(1e-4);
                if last_rejected {
                    h_new = h_new.min(h_try);
                }
                last_rejected = false;
                let mut dy_new = vec![0.0; n];
                self.field.eval(&y_new, &mut dy_new);
                self.stats.rhs_evals += 1;
                self.stats.accepted += 1;
                self.advance(y_new, dy_new, h_try, lands);
                // a step shortened to hit a sample time says little about the
                // step the controller wanted
                h = if lands { h_new.max(h) } else { h_new };
            } else {
                h = h_try / FACC1.min(fac11 / SAFE);
                last_rejected = true;
                self.stats.rejected += 1;
            }
        }
        Ok(())
    }

    fn rk4(&mut self) -> Result<()> {
        let n = self.y.len();
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        while !self.done() {
            let (h, lands) = self.clip(self.cfg.h_init);
            self.underflow(h)?;
            let k1 = &self.dy;
            axpy(&mut tmp, &self.y, 0.5 * h, k1);
            self.field.eval(&tmp, &mut k2);
            axpy(&mut tmp, &self.y, 0.5 * h, &k2);
            self.field.eval(&tmp, &mut k3);
            axpy(&mut tmp, &self.y, h, &k3);
            self.field.eval(&tmp, &mut k4);
            let y_new: Vec<f64> = (0..n)
                .map(|i| self.y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            let mut dy_new = vec![0.0; n];
            self.field.eval(&y_new, &mut dy_new);
            self.stats.rhs_evals += 4;
            self.stats.accepted += 1;
            self.advance(y_new, dy_new, h, lands);
        }
        Ok(())
    }

    fn finish(self) -> Trajectory {
        let nodes = match &self.cfg.record {
            Record::Nodes(nodes) => Some(nodes.clone()),
            _ => None,
        };
        Trajectory {
            nodes,
            samples: self.samples,
            final_state: PhaseState { t: self.t, u: self.y },
            stats: self.stats,
        }
    }
}

/// `out = y + h Σ_j c_j k_j`.
fn combine(out: &mut [f64], y: &[f64], h: f64, coeffs: &[(usize, f64)], k: &[Vec<f64>]) {
    let body = |(i, o): (usize, &mut f64)| {
        let mut acc = 0.0;
        for &(j, c) in coeffs {
            acc += c * k[j][i];
        }
        *o = y[i] + h * acc;
    };
    if out.len() >= 4096 {
        out.par_iter_mut().enumerate().for_each(body);
    } else {
        out.iter_mut().enumerate().for_each(body);
    }
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, k: &[f64]) {
    for ((o, a), b) in out.iter_mut().zip(y).zip(k) {
        *o = a + h * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `y' = λ y` componentwise.
    struct Linear(Vec<f64>);

    impl VectorField for Linear {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn eval(&self, u: &[f64], out: &mut [f64]) {
            for ((o, l), x) in out.iter_mut().zip(&self.0).zip(u) {
                *o = l * x;
            }
        }
    }

    /// Harmonic oscillator `(x, v)' = (v, −x)`.
    struct Harmonic;

    impl VectorField for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, u: &[f64], out: &mut [f64]) {
            out[0] = u[1];
            out[1] = -u[0];
        }
    }

    #[test]
    fn exponential_decay_to_tolerance() {
        let cfg = IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let y0 = PhaseState::new(0.0, vec![1.0, 2.0]).unwrap();
        let traj = integrate_field(&Linear(vec![-1.0, -0.5]), &y0, 5.0, &cfg).unwrap();
        assert_eq!(traj.final_state.t, 5.0);
        assert!((traj.final_state.u[0] - (-5.0f64).exp()).abs() < 1e-9);
        assert!((traj.final_state.u[1] - 2.0 * (-2.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn samples_land_on_the_stride_grid() {
        let cfg = IntegratorConfig {
            sample_stride: 0.3,
            ..Default::default()
        };
        let y0 = PhaseState::new(0.0, vec![1.0, 0.0]).unwrap();
        let traj = integrate_field(&Harmonic, &y0, 1.0, &cfg).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 5);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*times.last().unwrap(), 1.0);
        for s in &traj.samples {
            assert!((s.u[0] - s.t.cos()).abs() < 1e-7);
            assert!((s.du[0] + s.t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn eighth_order_on_harmonic_oscillator() {
        let cfg = IntegratorConfig {
            rtol: 1e-13,
            atol: 1e-13,
            h_max: 10.0,
            ..Default::default()
        };
        let y0 = PhaseState::new(0.0, vec![1.0, 0.0]).unwrap();
        let traj = integrate_field(&Harmonic, &y0, 20.0, &cfg).unwrap();
        let t = 20.0f64;
        assert!((traj.final_state.u[0] - t.cos()).abs() < 1e-10);
        assert!((traj.final_state.u[1] + t.sin()).abs() < 1e-10);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let y0 = PhaseState::new(0.0, vec![1.0, 0.0]).unwrap();
        let err = |h: f64| {
            let cfg = IntegratorConfig {
                method: Method::Rk4Fixed,
                h_init: h,
                h_max: h,
                sample_stride: 2.0,
                ..Default::default()
            };
            let traj = integrate_field(&Harmonic, &y0, 2.0, &cfg).unwrap();
            (traj.final_state.u[0] - 2f64.cos()).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        struct Blow;
        impl VectorField for Blow {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, u: &[f64], out: &mut [f64]) {
                out[0] = u[0] * u[0];
            }
        }
        let y0 = PhaseState::new(0.0, vec![1.0]).unwrap();
        let r = integrate_field(&Blow, &y0, 2.0, &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::Integration { .. })), "{r:?}");
    }

    #[test]
    fn invalid_configurations() {
        let y0 = PhaseState::new(0.0, vec![1.0]).unwrap();
        let bad = [
            IntegratorConfig {
                rtol: 0.0,
                ..Default::default()
            },
            IntegratorConfig {
                atol: -1.0,
                ..Default::default()
            },
            IntegratorConfig {
                h_init: 2.0,
                h_max: 1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(
                integrate_field(&Linear(vec![-1.0]), &y0, 1.0, &cfg),
                Err(Error::Config(_))
            ));
        }
        assert!(integrate_field(&Linear(vec![-1.0]), &y0, 0.0, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn node_subset_and_final_only_recording() {
        let y0 = PhaseState::new(0.0, vec![1.0, 2.0, 3.0]).unwrap();
        let f = Linear(vec![-1.0; 3]);
        let cfg = IntegratorConfig {
            record: Record::Nodes(vec![2]),
            ..Default::default()
        };
        let traj = integrate_field(&f, &y0, 3.0, &cfg).unwrap();
        assert_eq!(traj.nodes, Some(vec![2]));
        assert!(traj.samples.iter().all(|s| s.u.len() == 1));
        let cfg = IntegratorConfig {
            record: Record::FinalOnly,
            ..Default::default()
        };
        let traj = integrate_field(&f, &y0, 3.0, &cfg).unwrap();
        assert!(traj.samples.is_empty());
        assert_eq!(traj.final_state.t, 3.0);
    }

    #[test]
    fn trajectory_csv_wraps_phases() {
        let cfg = IntegratorConfig {
            record: Record::Nodes(vec![1]),
            ..Default::default()
        };
        let y0 = PhaseState::new(0.0, vec![0.0, 4.0]).unwrap();
        let traj = integrate_field(&Linear(vec![0.0, 0.0]), &y0, 2.0, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u2");
        assert_eq!(lines.len(), 4);
        let v: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - (4.0 - 2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }
}
