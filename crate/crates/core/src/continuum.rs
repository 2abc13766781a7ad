//! Stationary solutions of the continuum limit
//!
//! ```text
//! ∂u/∂t = ω(x) + p K ∫_0^1 sin(u(y) − u(x)) dy
//! ```
//!
//! In the rotating frame these are `U(x) + θ` with `U = arcsin((ω − Ω)/(pKC))`
//! and `C` the positive root of
//!
//! ```text
//! C = ∫ √(1 − ((ω − Ω)/(pKC))²) dx,        Ω = ∫ ω.
//! ```
//!
//! Flip sets change the sign of the integrand on the flipped intervals.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, IntegratorConfig, KmSystem, PhaseState, Trajectory};
use crate::error::{Error, Result};
use crate::frequencies::{FrequencyFunction, FrequencyKind, PANELS_PER_CELL};
use crate::graphs::{build_deterministic_dense, Graphon};
use crate::metrics::PhaseField;
use crate::quadrature::{cell_averages, simpson, tanh_sinh};

/// Panels for Simpson integrals of callables.
const SIMPSON_PANELS: usize = 4096;
/// Mesh used for sup-norm checks of callables.
const SUP_MESH: usize = 4096;
/// Points of the sign scan that detects several roots.
const SCAN_POINTS: usize = 1024;
const QUAD_TOL: f64 = 1e-14;
/// `g(C_min)` values down to this are treated as a root at `C_min`.
const BOUNDARY_TOL: f64 = 1e-12;

/// `Ω = ∫ ω`: exact for linear and constant kinds, Simpson otherwise.
pub fn mean_frequency(omega: &FrequencyFunction) -> f64 {
    match omega.kind() {
        FrequencyKind::Linear { .. } => 0.0,
        FrequencyKind::Constant { c } => *c,
        FrequencyKind::Callable(f) => simpson(|x| f(x), 0.0, 1.0, SIMPSON_PANELS),
    }
}

/// Closed intervals on which a discontinuous family takes a flipped branch:
/// `−U − π + θ` on `minus ⊂ [0, 1/2]`, `π − U + θ` on `plus ⊂ [1/2, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipSet {
    #[serde(default)]
    pub minus: Vec<(f64, f64)>,
    #[serde(default)]
    pub plus: Vec<(f64, f64)>,
}

impl FlipSet {
    pub fn new(mut minus: Vec<(f64, f64)>, mut plus: Vec<(f64, f64)>) -> Result<Self> {
        check_intervals(&mut minus, 0.0, 0.5, "minus")?;
        check_intervals(&mut plus, 0.5, 1.0, "plus")?;
        Ok(FlipSet { minus, plus })
    }

    pub fn is_empty(&self) -> bool {
        self.measure() == 0.0
    }

    /// Lebesgue measure of the union.
    pub fn measure(&self) -> f64 {
        self.minus.iter().chain(&self.plus).map(|(a, b)| b - a).sum()
    }

    /// `Some(−1)` on a minus interval, `Some(+1)` on a plus interval.
    fn branch(&self, x: f64) -> Option<f64> {
        let inside = |set: &[(f64, f64)]| set.iter().any(|&(a, b)| a < b && a <= x && x <= b);
        if inside(&self.minus) {
            Some(-1.0)
        } else if inside(&self.plus) {
            Some(1.0)
        } else {
            None
        }
    }

    /// Integration breakpoints including 0 and 1.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, 1.0];
        for &(a, b) in self.minus.iter().chain(&self.plus) {
            pts.extend([a, b]);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

fn check_intervals(set: &mut [(f64, f64)], lo: f64, hi: f64, name: &str) -> Result<()> {
    for &(a, b) in set.iter() {
        if !(a.is_finite() && b.is_finite() && lo <= a && a <= b && b <= hi) {
            return Err(Error::domain(format!(
                "{name} flip interval [{a}, {b}] must lie in [{lo}, {hi}]"
            )));
        }
    }
    set.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in set.windows(2) {
        if w[1].0 < w[0].1 && w[1].0 < w[1].1 && w[0].0 < w[0].1 {
            return Err(Error::domain(format!(
                "{name} flip intervals {:?} and {:?} overlap",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ContinuousStable,
    ContinuousFlipped,
    Discontinuous(FlipSet),
}

impl Family {
    fn flips(&self) -> Option<&FlipSet> {
        match self {
            Family::Discontinuous(f) => Some(f),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::ContinuousStable => "continuous_stable",
            Family::ContinuousFlipped => "continuous_flipped",
            Family::Discontinuous(_) => "discontinuous",
        }
    }
}

/// The data of a self-consistency equation.
#[derive(Debug, Clone)]
pub struct SelfConsistencyProblem {
    pub omega: FrequencyFunction,
    pub p: f64,
    pub k: f64,
    /// `Ω = ∫ ω`.
    pub omega_mean: f64,
    pub flip_set: Option<FlipSet>,
}

impl SelfConsistencyProblem {
    pub fn new(omega: FrequencyFunction, p: f64, k: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("K must be positive, got {k}")));
        }
        let omega_mean = mean_frequency(&omega);
        if !omega_mean.is_finite() {
            return Err(Error::Evaluation {
                what: "frequency function",
                at: "mean".into(),
            });
        }
        Ok(SelfConsistencyProblem {
            omega,
            p,
            k,
            omega_mean,
            flip_set: None,
        })
    }

    pub fn with_flips(mut self, flips: FlipSet) -> Self {
        self.flip_set = Some(flips);
        self
    }

    fn pk(&self) -> f64 {
        self.p * self.k
    }

    /// `sup |ω − Ω|`: exact for closed-form kinds, mesh maximum otherwise.
    pub fn sup_deviation(&self) -> Result<f64> {
        match self.omega.kind() {
            FrequencyKind::Linear { a } => Ok(0.5 * a),
            FrequencyKind::Constant { .. } => Ok(0.0),
            FrequencyKind::Callable(f) => {
                let mut sup = 0.0f64;
                for i in 0..=SUP_MESH {
                    let x = i as f64 / SUP_MESH as f64;
                    let v = f(x);
                    if !v.is_finite() {
                        return Err(Error::Evaluation {
                            what: "frequency function",
                            at: format!("x = {x}"),
                        });
                    }
                    sup = sup.max((v - self.omega_mean).abs());
                }
                Ok(sup)
            }
        }
    }

    /// Smallest `C` for which the integrand is real.
    pub fn c_min(&self) -> Result<f64> {
        Ok(self.sup_deviation()? / self.pk())
    }

    /// `∫ ±√(1 − ((ω − Ω)/(pKC))²) dx`, negative on `flips`.
    fn integral(&self, c: f64, flips: Option<&FlipSet>) -> f64 {
        let pkc = self.pk() * c;
        let om = self.omega_mean;
        let root = |x: f64| {
            let s = (self.omega.eval(x) - om) / pkc;
            (1.0 - s * s).max(0.0).sqrt()
        };
        match flips {
            None => tanh_sinh(root, 0.0, 1.0, QUAD_TOL),
            Some(flips) => {
                let pts = flips.breakpoints();
                pts.windows(2)
                    .map(|w| {
                        let sign = if flips.branch(0.5 * (w[0] + w[1])).is_some() {
                            -1.0
                        } else {
                            1.0
                        };
                        sign * tanh_sinh(root, w[0], w[1], QUAD_TOL)
                    })
                    .sum()
            }
        }
    }

    /// `g(C) = ∫ ±√(…) − C`.
    pub fn g(&self, c: f64) -> f64 {
        self.integral(c, self.flip_set.as_ref()) - c
    }
}

/// A located root with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootReport {
    pub c: f64,
    /// `|g(C)|` at the returned root.
    pub residual: f64,
    /// Sign changes of `g` on the scan grid over `[C_min, 1]`.
    pub sign_changes: usize,
    /// Limit of the fixed-point iteration `C ← ∫ ±√(…)` from `C = 1`, if it
    /// converged.
    pub fixed_point: Option<f64>,
    /// Set when the scan or the fixed-point iteration points to another root.
    pub multiple_roots: bool,
    /// Set for discontinuous families with `p ≠ 1`.
    pub extrapolated: bool,
}

fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid.abs() <= tol * 1e-4 {
            return mid;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn fixed_point<F: Fn(f64) -> f64>(map: F, c_min: f64) -> Option<f64> {
    let mut c = 1.0;
    for _ in 0..20_000 {
        let next = map(c);
        if !next.is_finite() || next < c_min {
            return None;
        }
        if (next - c).abs() <= 1e-13 {
            return Some(next);
        }
        c = next;
    }
    None
}

/// Normalised integral `I(C)/C` for the linear frequency function, with
/// `k = pK/a` and `z = 1/(2kC) ≤ 1`.
fn linear_ratio(k: f64, c: f64) -> f64 {
    let z = (1.0 / (2.0 * k * c)).min(1.0);
    k * (z.asin() + z * (1.0 - z * z).sqrt())
}

/// Root of `C = (pK/a) C (arcsin z + z √(1 − z²))`, `z = a/(2pKC)`, for the
/// linear frequency function. `None` iff `pK/a < 2/π`.
pub fn solve_c_linear(pk_over_a: f64) -> Option<f64> {
    linear_root_report(pk_over_a).map(|r| r.c)
}

pub fn linear_root_report(k: f64) -> Option<RootReport> {
    // g(C_min) = π/4 − 1/(2k) changes sign exactly at k = 2/π
    if !(k.is_finite() && k >= FRAC_2_PI) {
        return None;
    }
    let c_min = 1.0 / (2.0 * k);
    let phi = |c: f64| linear_ratio(k, c) - 1.0;
    let c = if k == FRAC_2_PI || phi(c_min) <= 0.0 {
        c_min
    } else {
        bisect(phi, c_min, 1.0, 1e-15)
    };
    let residual = (c * phi(c)).abs();
    let g = |c: f64| c * phi(c);
    let sign_changes = scan(g, c_min, 1.0);
    let fixed_point = fixed_point(|c| c * linear_ratio(k, c), c_min);
    let multiple_roots = sign_changes > 1 || fixed_point.is_some_and(|f| (f - c).abs() > 1e-8);
    Some(RootReport {
        c,
        residual,
        sign_changes,
        fixed_point,
        multiple_roots,
        extrapolated: false,
    })
}

/// Sign changes of `g` on an even grid over `[lo, hi]`, ignoring values
/// within rounding of zero.
fn scan<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> usize {
    scan_points(&g, lo, hi).1
}

fn scan_points<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64) -> (Vec<(f64, f64)>, usize) {
    let pts: Vec<(f64, f64)> = (0..=SCAN_POINTS)
        .map(|i| {
            let c = lo + (hi - lo) * i as f64 / SCAN_POINTS as f64;
            (c, g(c))
        })
        .collect();
    let signs: Vec<bool> = pts
        .iter()
        .filter(|(_, v)| v.abs() > 1e-13)
        .map(|(_, v)| *v > 0.0)
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    (pts, changes)
}

/// Root of `g(C) = ∫ ±√(1 − ((ω − Ω)/(pKC))²) − C` on `[C_min, 1]`.
///
/// Without flips the bracket is `[C_min, 1]` (`g(1) ≤ 0` always) and the
/// result is `None` when `g(C_min) < 0`. With flips the bracket closes at the
/// first sign change found by the scan.
pub fn solve_c_general(problem: &SelfConsistencyProblem) -> Result<Option<RootReport>> {
    let c_min = problem.c_min()?;
    if c_min > 1.0 {
        return Ok(None);
    }
    if c_min == 0.0 {
        // ω ≡ Ω: the integrand is ±1 and g is affine
        let c = 1.0 - 2.0 * problem.flip_set.as_ref().map_or(0.0, FlipSet::measure);
        return Ok((c > 0.0).then_some(RootReport {
            c,
            residual: 0.0,
            sign_changes: 1,
            fixed_point: Some(c),
            multiple_roots: false,
            extrapolated: false,
        }));
    }
    let g = |c: f64| problem.g(c);
    let g_min = g(c_min);
    if !g_min.is_finite() {
        return Err(Error::Evaluation {
            what: "self-consistency integral",
            at: format!("C = {c_min}"),
        });
    }
    let flipped = problem.flip_set.as_ref().is_some_and(|f| !f.is_empty());
    let (pts, sign_changes) = scan_points(&g, c_min, 1.0);
    let c = if !flipped {
        if g_min < -BOUNDARY_TOL {
            return Ok(None);
        }
        if g_min <= BOUNDARY_TOL {
            c_min
        } else {
            bisect(g, c_min, 1.0, 1e-15)
        }
    } else {
        let start = if g_min.abs() <= BOUNDARY_TOL {
            Some((c_min, c_min))
        } else {
            None
        };
        let bracket = start.or_else(|| {
            pts.windows(2)
                .find(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0))
                .map(|w| (w[0].0, w[1].0))
        });
        match bracket {
            None => return Ok(None),
            Some((lo, hi)) if lo == hi => lo,
            Some((lo, hi)) => bisect(g, lo, hi, 1e-15),
        }
    };
    let residual = g(c).abs();
    let flips = problem.flip_set.as_ref();
    let fixed_point = fixed_point(|c| problem.integral(c, flips), c_min);
    let multiple_roots = sign_changes > 1 || fixed_point.is_some_and(|f| (f - c).abs() > 1e-8);
    Ok(Some(RootReport {
        c,
        residual,
        sign_changes,
        fixed_point,
        multiple_roots,
        extrapolated: flipped && problem.p != 1.0,
    }))
}

/// A stationary solution in the rotating frame, evaluated pointwise.
#[derive(Debug, Clone)]
pub struct StationaryProfile {
    pub c: f64,
    pub omega_mean: f64,
    pub theta: f64,
    pub family: Family,
    omega: FrequencyFunction,
    pk: f64,
}

/// Builds the profile of `family` with constant `c`.
///
/// `c` must solve the self-consistency equation of the family (signed for
/// discontinuous families, unsigned for the continuous ones) and `|ω − Ω|`
/// must not exceed `pKC`; otherwise a consistency error is returned.
pub fn stationary_profile(
    problem: &SelfConsistencyProblem,
    c: f64,
    family: Family,
    theta: f64,
) -> Result<StationaryProfile> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Consistency(format!("C must be positive, got {c}")));
    }
    let pkc = problem.pk() * c;
    let sup = problem.sup_deviation()?;
    if sup > pkc * (1.0 + 1e-12) {
        return Err(Error::Consistency(format!("sup |ω − Ω| = {sup} exceeds pKC = {pkc}")));
    }
    let g = problem.integral(c, family.flips()) - c;
    if g.abs() > 1e-9 {
        return Err(Error::Consistency(format!(
            "C = {c} leaves self-consistency residual {g:e} for the {} family",
            family.name()
        )));
    }
    Ok(StationaryProfile {
        c,
        omega_mean: problem.omega_mean,
        theta,
        family,
        omega: problem.omega.clone(),
        pk: problem.pk(),
    })
}

impl StationaryProfile {
    /// `U(x) = arcsin((ω(x) − Ω)/(pKC))`, without the offset or branch.
    pub fn base(&self, x: f64) -> f64 {
        ((self.omega.eval(x) - self.omega_mean) / (self.pk * self.c))
            .clamp(-1.0, 1.0)
            .asin()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = self.base(x);
        let branch = match &self.family {
            Family::ContinuousStable => u,
            Family::ContinuousFlipped => PI - u,
            Family::Discontinuous(flips) => match flips.branch(x) {
                None => u,
                Some(s) if s > 0.0 => PI - u,
                Some(_) => -u - PI,
            },
        };
        branch + self.theta
    }

    pub fn with_theta(&self, theta: f64) -> StationaryProfile {
        StationaryProfile { theta, ..self.clone() }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.family.flips().map_or_else(|| vec![0.0, 1.0], FlipSet::breakpoints)
    }

    /// `(∫ sin u, ∫ cos u)`.
    pub fn phasor_integrals(&self) -> (f64, f64) {
        let pts = self.breakpoints();
        pts.windows(2).fold((0.0, 0.0), |(s, c), w| {
            (
                s + tanh_sinh(|x| self.eval(x).sin(), w[0], w[1], QUAD_TOL),
                c + tanh_sinh(|x| self.eval(x).cos(), w[0], w[1], QUAD_TOL),
            )
        })
    }

    /// `max_x |ω(x) + pK ∫ sin(u(y) − u(x)) dy − Ω|` over `mesh + 1` equally
    /// spaced points, skipping points that sit on a flip boundary.
    pub fn stationarity_residual(&self, mesh: usize) -> f64 {
        let (s, c) = self.phasor_integrals();
        let jumps = self.breakpoints();
        let mesh = mesh.max(1);
        (0..=mesh)
            .map(|i| i as f64 / mesh as f64)
            .filter(|x| x == &0.0 || x == &1.0 || !jumps.contains(x))
            .map(|x| {
                let (su, cu) = self.eval(x).sin_cos();
                (self.omega.eval(x) + self.pk * (s * cu - c * su) - self.omega_mean).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Consistency error unless the stationarity residual is at most `tol`.
    pub fn verify(&self, mesh: usize, tol: f64) -> Result<f64> {
        let r = self.stationarity_residual(mesh);
        if r <= tol {
            Ok(r)
        } else {
            Err(Error::Consistency(format!(
                "{} profile has stationarity residual {r:e} > {tol:e}",
                self.family.name()
            )))
        }
    }

    /// `x, U(x)` on `mesh + 1` equally spaced points.
    pub fn write_csv<W: Write>(&self, mesh: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "U"])?;
        let mesh = mesh.max(1);
        for i in 0..=mesh {
            let x = i as f64 / mesh as f64;
            w.write_record([x.to_string(), self.eval(x).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl PhaseField for StationaryProfile {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

/// Stable profile of the linear frequency function, if it exists.
pub fn linear_stable_profile(a: f64, p: f64, k: f64, theta: f64) -> Result<Option<StationaryProfile>> {
    let problem = SelfConsistencyProblem::new(FrequencyFunction::linear(a)?, p, k)?;
    match solve_c_linear(p * k / a) {
        None => Ok(None),
        Some(c) => stationary_profile(&problem, c, Family::ContinuousStable, theta).map(Some),
    }
}

/// `Δu = 2 arcsin(a/(2pKC))` for the linear frequency function; `None` below
/// the threshold.
pub fn delta_u_prediction(k: f64, a: f64, p: f64) -> Option<f64> {
    let c = solve_c_linear(p * k / a)?;
    Some(2.0 * (a / (2.0 * p * k * c)).min(1.0).asin())
}

/// `(pK/a, C)` rows with `NONE` below the threshold.
pub fn write_c_curve<W: Write>(grid: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pK_over_a", "C"])?;
    for &k in grid {
        let c = solve_c_linear(k).map_or_else(|| "NONE".to_string(), |c| c.to_string());
        w.write_record([k.to_string(), c])?;
    }
    w.flush()?;
    Ok(())
}

/// The `m`-point collocation of the continuum limit: uniform weights `p`,
/// frequencies `m ∫_{I_i} ω`, `α_n = 1`.
pub fn cl_discretization(omega: &FrequencyFunction, p: f64, k: f64, m: usize) -> Result<KmSystem> {
    if m < 2 {
        return Err(Error::domain(format!("collocation needs m >= 2, got {m}")));
    }
    let weights = build_deterministic_dense(&Graphon::uniform(p)?, m)?;
    KmSystem::new(weights, omega.discretize(m)?, k)
}

/// Cell averages of an initial function, by the operator used for the
/// frequencies.
pub fn matched_initial<F: Fn(f64) -> f64>(u0: F, m: usize) -> Result<Vec<f64>> {
    let v = cell_averages(u0, m, PANELS_PER_CELL);
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Evaluation {
            what: "initial function",
            at: format!("cell {}", i + 1),
        }),
        None => Ok(v),
    }
}

/// Reference trajectory of the continuum limit on `m` collocation cells.
pub fn cl_reference_trajectory<F: Fn(f64) -> f64>(
    omega: &FrequencyFunction,
    p: f64,
    k: f64,
    m: usize,
    u0: F,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let sys = cl_discretization(omega, p, k, m)?;
    let state = PhaseState::new(0.0, matched_initial(u0, m)?)?;
    integrate(&sys, &state, t_end, cfg)
}

/// `∫ cos(U − θ)` and `∫ sin(U − θ)` should equal `C` and `0`.
pub fn order_parameter_identity(profile: &StationaryProfile) -> (f64, f64) {
    let shifted = profile.with_theta(0.0);
    let (s, c) = shifted.phasor_integrals();
    (c, s)
}

/// Threshold of the linear frequency function, `pK/a = 2/π`.
pub const LINEAR_THRESHOLD: f64 = FRAC_2_PI;

/// `C` at the threshold.
pub const THRESHOLD_C: f64 = FRAC_PI_2 / 2.0;
