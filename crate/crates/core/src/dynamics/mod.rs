//! The Kuramoto vector field on a weighted graph and its time integration.
//!
//! ```text
//! du_i/dt = ω_i + K / (n α_n) · Σ_j w_ij sin(u_j − u_i)
//! ```
//!
//! Phases are kept unwrapped during integration; the field is smooth on `ℝⁿ`
//! and `2π`-periodic in every component, so wrapping is only applied when a
//! state is observed.

mod integrate;
mod tableau;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs::{Storage, WeightMatrix};
use crate::metrics::{circular_mean, wrap};
use crate::rng::{self, Domain};

pub use integrate::{integrate, integrate_field, IntegratorConfig, Method, Record, Sample, StepStats, Trajectory};

/// Row count above which the vector field is evaluated in parallel.
const PARALLEL_ROWS: usize = 512;

/// A first-order autonomous system `du/dt = f(u)`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, u: &[f64], out: &mut [f64]);
}

/// Time and unwrapped phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub u: Vec<f64>,
}

impl PhaseState {
    pub fn new(t: f64, u: Vec<f64>) -> Result<Self> {
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("phase {i} is not finite")));
        }
        Ok(PhaseState { t, u })
    }

    /// Representatives in `(−π, π]`.
    pub fn wrapped(&self) -> Vec<f64> {
        self.u.iter().map(|&v| wrap(v)).collect()
    }
}

/// I.i.d. uniform phases on `[−π, π]` from the per-node stream `(seed, i)`.
pub fn random_initial_phases(n: usize, seed: u64) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..n)
        .map(|i| rng::uniform_in(seed, Domain::InitialPhase, i as u64, 0, -PI, PI))
        .collect()
}

/// A Kuramoto network: weights, natural frequencies and coupling strength.
#[derive(Debug, Clone)]
pub struct KmSystem {
    weights: WeightMatrix,
    omegas: Vec<f64>,
    coupling: f64,
}

impl KmSystem {
    pub fn new(weights: WeightMatrix, omegas: Vec<f64>, coupling: f64) -> Result<Self> {
        if omegas.len() != weights.n() {
            return Err(Error::Dimension {
                expected: weights.n(),
                got: omegas.len(),
            });
        }
        if !coupling.is_finite() {
            return Err(Error::domain("coupling constant must be finite"));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("natural frequencies must be finite"));
        }
        Ok(KmSystem {
            weights,
            omegas,
            coupling,
        })
    }

    pub fn n(&self) -> usize {
        self.omegas.len()
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Per-edge gain `K / (n α_n)`.
    pub fn gain(&self) -> f64 {
        self.coupling / (self.n() as f64 * self.weights.alpha_n())
    }

    fn check_dim(&self, u: &[f64], out: &[f64]) -> Result<()> {
        let n = self.n();
        if u.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: u.len(),
            });
        }
        if out.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: out.len(),
            });
        }
        Ok(())
    }

    /// Pairwise evaluation of the vector field, `O(nnz)` sine calls.
    pub fn rhs(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(u, out)?;
        let gain = self.gain();
        let row = |i: usize| -> f64 {
            let ui = u[i];
            match self.weights.storage() {
                Storage::Constant(c) => c * u.iter().map(|&uj| (uj - ui).sin()).sum::<f64>(),
                Storage::Dense(w) => {
                    let n = u.len();
                    w[i * n..(i + 1) * n]
                        .iter()
                        .zip(u)
                        .map(|(wij, &uj)| wij * (uj - ui).sin())
                        .sum()
                }
                Storage::Sparse(s) => s.row(i).iter().map(|&j| (u[j as usize] - ui).sin()).sum(),
            }
        };
        fill(out, |i| self.omegas[i] + gain * row(i));
        Ok(())
    }

    /// Mean-field evaluation for constant weights `w_ij ≡ c`:
    /// `Σ_j sin(u_j − u_i) = Im(e^{−i u_i} S)` with `S = Σ_j e^{i u_j}`.
    pub fn rhs_meanfield(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(u, out)?;
        let c = self
            .weights
            .constant_value()
            .ok_or_else(|| Error::domain("mean-field evaluation needs constant weights"))?;
        let (s, co) = u.iter().fold((0.0, 0.0), |(s, co), x| (s + x.sin(), co + x.cos()));
        let g = self.gain() * c;
        fill(out, |i| {
            let (si, ci) = u[i].sin_cos();
            self.omegas[i] + g * (ci * s - si * co)
        });
        Ok(())
    }

    /// The fastest exact evaluation for the storage at hand: mean-field for
    /// constant weights, otherwise `sin(u_j − u_i) = sin u_j cos u_i −
    /// cos u_j sin u_i` summed row by row, which needs only `n` sine/cosine
    /// pairs.
    pub fn rhs_fast(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if self.weights.constant_value().is_some() {
            return self.rhs_meanfield(u, out);
        }
        self.check_dim(u, out)?;
        let n = u.len();
        let trig: Vec<(f64, f64)> = if n >= PARALLEL_ROWS {
            u.par_iter().map(|x| x.sin_cos()).collect()
        } else {
            u.iter().map(|x| x.sin_cos()).collect()
        };
        let gain = self.gain();
        let sums = |i: usize| -> (f64, f64) {
            match self.weights.storage() {
                Storage::Dense(w) => w[i * n..(i + 1) * n]
                    .iter()
                    .zip(&trig)
                    .fold((0.0, 0.0), |(s, c), (wij, (sj, cj))| (s + wij * sj, c + wij * cj)),
                Storage::Sparse(sp) => sp.row(i).iter().fold((0.0, 0.0), |(s, c), &j| {
                    let (sj, cj) = trig[j as usize];
                    (s + sj, c + cj)
                }),
                Storage::Constant(_) => unreachable!("handled by the mean-field path"),
            }
        };
        fill(out, |i| {
            let (s, c) = sums(i);
            let (si, ci) = trig[i];
            self.omegas[i] + gain * (ci * s - si * c)
        });
        Ok(())
    }
}

/// Writes `f(i)` into every slot, in parallel for large outputs. Each slot
/// is computed independently so the result does not depend on scheduling.
fn fill<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
    if out.len() >= PARALLEL_ROWS {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    } else {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

impl VectorField for KmSystem {
    fn dim(&self) -> usize {
        self.n()
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        self.rhs_fast(u, out)
            .expect("state dimension checked by the integrator");
    }
}

/// Phase-locking classification of the tail of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LockStatus {
    Locked {
        /// Common rotation frequency.
        frequency: f64,
        /// Largest wrapped deviation of a final phase from the circular mean.
        phase_spread: f64,
    },
    Drifting {
        /// Largest instantaneous-frequency spread seen in the window.
        frequency_spread: f64,
    },
}

impl LockStatus {
    pub fn is_locked(&self) -> bool {
        matches!(self, LockStatus::Locked { .. })
    }
}

/// Locked iff, at every sample in the last `window` time units, every
/// recorded instantaneous frequency lies within `tol` of their mean.
pub fn lock_detect(traj: &Trajectory, window: f64, tol: f64) -> Result<LockStatus> {
    let t_end = traj.final_state.t;
    let first = traj.samples.first().map(|s| s.t).unwrap_or(t_end);
    if t_end - first < window * (1.0 - 1e-12) {
        return Err(Error::domain(format!(
            "trajectory covers {} time units, lock window needs {window}",
            t_end - first
        )));
    }
    let mut worst = 0.0f64;
    let mut frequency = 0.0;
    for s in traj.samples.iter().filter(|s| s.t >= t_end - window * (1.0 + 1e-12)) {
        if s.du.is_empty() {
            return Err(Error::domain("lock detection needs recorded frequencies"));
        }
        let mean = s.du.iter().sum::<f64>() / s.du.len() as f64;
        let spread = s.du.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
        worst = worst.max(spread);
        frequency = mean;
    }
    if worst < tol {
        let u = &traj.final_state.u;
        let centre = circular_mean(u);
        let phase_spread = u.iter().map(|&v| wrap(v - centre).abs()).fold(0.0, f64::max);
        Ok(LockStatus::Locked {
            frequency,
            phase_spread,
        })
    } else {
        Ok(LockStatus::Drifting {
            frequency_spread: worst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{sample_random_dense, Graphon, Orientation};
    use std::f64::consts::PI;

    fn brute_force(w: &WeightMatrix, omegas: &[f64], k: f64, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let dense = w.to_dense();
        (0..n)
            .map(|i| {
                let s: f64 = (0..n).map(|j| dense[i * n + j] * (u[j] - u[i]).sin()).sum();
                omegas[i] + k / (n as f64 * w.alpha_n()) * s
            })
            .collect()
    }

    #[test]
    fn two_oscillators_at_rest() {
        let sys = KmSystem::new(WeightMatrix::constant(2, 1.0).unwrap(), vec![-0.25, 0.25], 1.0).unwrap();
        let mut out = vec![0.0; 2];
        sys.rhs(&[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, vec![-0.25, 0.25]);
    }

    #[test]
    fn three_oscillator_hand_evaluation() {
        let sys = KmSystem::new(WeightMatrix::from_dense(3, vec![1.0; 9]).unwrap(), vec![0.0; 3], 3.0).unwrap();
        let mut out = vec![0.0; 3];
        sys.rhs(&[0.0, PI / 2.0, PI], &mut out).unwrap();
        for (o, e) in out.iter().zip([1.0, 0.0, -1.0]) {
            assert!((o - e).abs() < 1e-15, "{out:?}");
        }
    }

    #[test]
    fn equal_phases_give_natural_frequencies() {
        let omegas = vec![0.3, -0.1, 0.7, 0.0];
        let sys = KmSystem::new(WeightMatrix::constant(4, 0.5).unwrap(), omegas.clone(), 2.0).unwrap();
        let mut out = vec![0.0; 4];
        sys.rhs_meanfield(&[1.2; 4], &mut out).unwrap();
        assert_eq!(out, omegas);
        sys.rhs(&[1.2; 4], &mut out).unwrap();
        assert_eq!(out, omegas);
    }

    #[test]
    fn antipodal_pair_has_no_coupling() {
        let sys = KmSystem::new(WeightMatrix::constant(2, 1.0).unwrap(), vec![0.1, 0.2], 5.0).unwrap();
        let mut out = vec![0.0; 2];
        sys.rhs_meanfield(&[0.0, PI], &mut out).unwrap();
        assert!((out[0] - 0.1).abs() < 1e-15 && (out[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn meanfield_matches_brute_force() {
        let n = 100;
        let omegas: Vec<f64> = (0..n)
            .map(|i| rng::uniform_in(1, Domain::Frequency, i, 0, -0.5, 0.5))
            .collect();
        let w = WeightMatrix::constant(n as usize, 0.7).unwrap();
        let sys = KmSystem::new(w.clone(), omegas.clone(), 1.3).unwrap();
        let mut out = vec![0.0; n as usize];
        let mut worst = 0.0f64;
        for trial in 0..1000 {
            let u = random_initial_phases(n as usize, trial);
            sys.rhs_meanfield(&u, &mut out).unwrap();
            let oracle = brute_force(&w, &omegas, 1.3, &u);
            worst = out
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(worst, f64::max);
        }
        assert!(worst <= 1e-12, "max diff {worst}");
    }

    #[test]
    fn meanfield_rejects_non_constant_weights() {
        let w = WeightMatrix::from_dense(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let sys = KmSystem::new(w, vec![0.0, 0.0], 1.0).unwrap();
        let mut out = vec![0.0; 2];
        assert!(matches!(
            sys.rhs_meanfield(&[0.0, 1.0], &mut out),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn factored_path_matches_pairwise_on_random_graphs() {
        let n = 300;
        let w = sample_random_dense(&Graphon::uniform(0.5).unwrap(), n, 4, Orientation::Undirected).unwrap();
        let omegas: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64) - 0.5).collect();
        let sys = KmSystem::new(w, omegas, 2.0).unwrap();
        let u = random_initial_phases(n, 8);
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        sys.rhs(&u, &mut a).unwrap();
        sys.rhs_fast(&u, &mut b).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = KmSystem::new(WeightMatrix::constant(3, 1.0).unwrap(), vec![0.0; 3], 1.0).unwrap();
        let mut out = vec![0.0; 3];
        assert!(matches!(
            sys.rhs(&[0.0; 2], &mut out),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
        assert!(KmSystem::new(WeightMatrix::constant(3, 1.0).unwrap(), vec![0.0; 4], 1.0).is_err());
    }

    #[test]
    fn initial_phases_are_in_range_and_seeded() {
        let u = random_initial_phases(1000, 3);
        assert!(u.iter().all(|v| (-PI..PI).contains(v)));
        assert_eq!(u, random_initial_phases(1000, 3));
        assert_ne!(u, random_initial_phases(1000, 4));
    }

    fn two_oscillators(k: f64) -> KmSystem {
        KmSystem::new(WeightMatrix::constant(2, 1.0).unwrap(), vec![-0.25, 0.25], k).unwrap()
    }

    #[test]
    fn two_oscillators_lock_at_closed_form_angle() {
        // φ = u₂ − u₁ obeys φ' = 1/2 − K sin φ
        let cfg = IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-10,
            ..Default::default()
        };
        let u0 = PhaseState::new(0.0, vec![0.3, -2.0]).unwrap();
        let traj = integrate(&two_oscillators(1.0), &u0, 100.0, &cfg).unwrap();
        let phi = wrap(traj.final_state.u[1] - traj.final_state.u[0]);
        assert!((phi - (0.5f64).asin()).abs() < 1e-6, "{phi}");
        assert!(lock_detect(&traj, 10.0, 1e-6).unwrap().is_locked());
    }

    #[test]
    fn uncoupled_oscillators_drift() {
        let u0 = PhaseState::new(0.0, vec![0.0, 0.0]).unwrap();
        let traj = integrate(&two_oscillators(0.0), &u0, 20.0, &IntegratorConfig::default()).unwrap();
        match lock_detect(&traj, 10.0, 1e-3).unwrap() {
            LockStatus::Drifting { frequency_spread } => assert!((frequency_spread - 0.25).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(lock_detect(&traj, 30.0, 1e-3).is_err());
    }

    #[test]
    fn equilibrium_is_preserved() {
        let sys = KmSystem::new(WeightMatrix::constant(5, 1.0).unwrap(), vec![0.0; 5], 2.0).unwrap();
        let u0 = PhaseState::new(0.0, vec![0.4; 5]).unwrap();
        let traj = integrate(&sys, &u0, 50.0, &IntegratorConfig::default()).unwrap();
        assert!(traj
            .samples
            .iter()
            .all(|s| s.u.iter().all(|&v| (v - 0.4).abs() <= 1e-8)));
    }

    #[test]
    fn adaptive_agrees_with_fine_rk4() {
        let sys = two_oscillators(1.0);
        let u0 = PhaseState::new(0.0, vec![1.0, -1.5]).unwrap();
        let fine = IntegratorConfig {
            method: Method::Rk4Fixed,
            h_init: 1e-4,
            ..Default::default()
        };
        let tight = IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-10,
            ..Default::default()
        };
        let a = integrate(&sys, &u0, 10.0, &fine).unwrap();
        let b = integrate(&sys, &u0, 10.0, &tight).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.t, y.t);
            for (p, q) in x.u.iter().zip(&y.u) {
                assert!((p - q).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rk4_richardson_ratio_on_two_oscillators() {
        let sys = two_oscillators(1.0);
        let u0 = PhaseState::new(0.0, vec![1.0, -1.5]).unwrap();
        let reference = IntegratorConfig {
            rtol: 1e-13,
            atol: 1e-13,
            ..Default::default()
        };
        let exact = integrate(&sys, &u0, 5.0, &reference).unwrap().final_state.u;
        let err = |h: f64| {
            let cfg = IntegratorConfig {
                method: Method::Rk4Fixed,
                h_init: h,
                sample_stride: 5.0,
                ..Default::default()
            };
            let u = integrate(&sys, &u0, 5.0, &cfg).unwrap().final_state.u;
            (u[0] - exact[0]).abs().max((u[1] - exact[1]).abs())
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn periodic_lift_gives_the_same_trajectory_mod_two_pi() {
        let n = 20;
        let w = sample_random_dense(&Graphon::uniform(0.6).unwrap(), n, 2, Orientation::Undirected).unwrap();
        let omegas: Vec<f64> = (0..n).map(|i| 0.05 * i as f64 - 0.5).collect();
        let sys = KmSystem::new(w, omegas, 1.7).unwrap();
        let u = random_initial_phases(n, 5);
        let lifted: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, v)| v + 2.0 * PI * (i as f64 - 7.0))
            .collect();
        let cfg = IntegratorConfig {
            rtol: 1e-12,
            atol: 1e-12,
            ..Default::default()
        };
        let a = integrate(&sys, &PhaseState::new(0.0, u).unwrap(), 10.0, &cfg).unwrap();
        let b = integrate(&sys, &PhaseState::new(0.0, lifted).unwrap(), 10.0, &cfg).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            for (p, q) in x.u.iter().zip(&y.u) {
                assert!(wrap(p - q).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn translation_invariance_and_mean_drift() {
        let n = 150;
        let w = sample_random_dense(&Graphon::uniform(0.3).unwrap(), n, 11, Orientation::Undirected).unwrap();
        let omegas: Vec<f64> = (0..n)
            .map(|i| rng::uniform_in(3, Domain::Frequency, i as u64, 0, -0.5, 0.5))
            .collect();
        let sys = KmSystem::new(w, omegas.clone(), 2.5).unwrap();
        let mean_omega = omegas.iter().sum::<f64>() / n as f64;
        for trial in 0..20 {
            let u = random_initial_phases(n, 100 + trial);
            let c = 0.37 * trial as f64 - 3.0;
            let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            sys.rhs(&u, &mut a).unwrap();
            sys.rhs(&shifted, &mut b).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12));
            let drift = a.iter().sum::<f64>() / n as f64;
            assert!((drift - mean_omega).abs() <= 1e-12);
        }
    }

    #[test]
    fn integration_is_independent_of_thread_count() {
        let n = 800;
        let w = sample_random_dense(&Graphon::uniform(0.5).unwrap(), n, 1, Orientation::Undirected).unwrap();
        let sys = KmSystem::new(w, crate::frequencies::equally_placed(1.0, n), 2.0).unwrap();
        let u0 = PhaseState::new(0.0, random_initial_phases(n, 2)).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| integrate(&sys, &u0, 2.0, &IntegratorConfig::default()).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
