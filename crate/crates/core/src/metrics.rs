//! Distances between phase configurations on the circle.
//!
//! Finite states are embedded as step functions on `[0, 1]` (value `u_i` on
//! cell `I_i`). Distances use the geodesic difference on the circle, wrapped
//! to `(−π, π]`, inside an `L²(0, 1)` norm. This is the natural metric for
//! circle-valued fields: it ignores `2π` jumps in unwrapped data and is
//! invariant under a common phase shift.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Wraps an angle to `(−π, π]`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - TAU * ((x + PI) / TAU).floor();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Anything that can be evaluated as a phase field on `[0, 1]`.
pub trait PhaseField: Sync {
    fn value(&self, x: f64) -> f64;

    /// Cell values when the field is piecewise constant on equal cells.
    fn cells(&self) -> Option<&[f64]> {
        None
    }
}

impl<F: Fn(f64) -> f64 + Sync> PhaseField for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Piecewise-constant embedding of a phase vector: value `values[i]` on
/// `[i/n, (i+1)/n)`, the last cell closed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("cannot embed an empty phase vector"));
        }
        Ok(StepFunction { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the cell containing `x`.
    pub fn cell(&self, x: f64) -> usize {
        let n = self.values.len();
        ((x * n as f64).floor().max(0.0) as usize).min(n - 1)
    }
}

impl PhaseField for StepFunction {
    fn value(&self, x: f64) -> f64 {
        self.values[self.cell(x)]
    }

    fn cells(&self) -> Option<&[f64]> {
        Some(&self.values)
    }
}

/// Embeds `u` as a step function.
pub fn embed(u: &[f64]) -> Result<StepFunction> {
    StepFunction::new(u.to_vec())
}

/// Sub-points per cell for Simpson quadrature when a field is not piecewise
/// constant.
const SIMPSON_POINTS: usize = 8;
/// Cells used when neither field is piecewise constant.
const CONTINUOUS_CELLS: usize = 1024;

/// Pointwise differences `f − g` at quadrature nodes, with weights summing
/// to one. Both the distance and the alignment objective are weighted means
/// over these samples.
struct DiffSamples {
    diffs: Vec<f64>,
    weights: Vec<f64>,
}

impl DiffSamples {
    fn new(f: &dyn PhaseField, g: &dyn PhaseField) -> Self {
        match (f.cells(), g.cells()) {
            (Some(a), Some(b)) if a.len() == b.len() => {
                let w = 1.0 / a.len() as f64;
                DiffSamples {
                    diffs: a.iter().zip(b).map(|(x, y)| x - y).collect(),
                    weights: vec![w; a.len()],
                }
            }
            (Some(a), Some(b)) => Self::common_refinement(a, b),
            (Some(a), None) => Self::simpson_cells(a.len(), f, g),
            (None, Some(b)) => Self::simpson_cells(b.len(), f, g),
            (None, None) => Self::simpson_cells(CONTINUOUS_CELLS, f, g),
        }
    }

    /// Exact integration of two step functions with different cell counts by
    /// merging their breakpoints.
    fn common_refinement(a: &[f64], b: &[f64]) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut diffs = Vec::with_capacity(n + m);
        let mut weights = Vec::with_capacity(n + m);
        let (mut i, mut j) = (0usize, 0usize);
        let mut left = 0.0;
        // breakpoints i/n and j/m are compared as i·m vs j·n to stay exact
        while i < n && j < m {
            let (ri, rj) = ((i + 1) * m, (j + 1) * n);
            let right = if ri <= rj {
                (i + 1) as f64 / n as f64
            } else {
                (j + 1) as f64 / m as f64
            };
            diffs.push(a[i] - b[j]);
            weights.push(right - left);
            left = right;
            if ri <= rj {
                i += 1;
            }
            if rj <= ri {
                j += 1;
            }
        }
        DiffSamples { diffs, weights }
    }

    fn simpson_cells(n: usize, f: &dyn PhaseField, g: &dyn PhaseField) -> Self {
        let panels = SIMPSON_POINTS;
        let h = 1.0 / (n * panels) as f64;
        let mut diffs = Vec::with_capacity(n * (panels + 1));
        let mut weights = Vec::with_capacity(n * (panels + 1));
        for i in 0..n {
            let a = i as f64 / n as f64;
            for k in 0..=panels {
                // evaluate just inside the cell so step fields use this cell's value
                let x = if k == panels {
                    (a + k as f64 * h).min(1.0) - 1e-12 * h
                } else if k == 0 {
                    a + 1e-12 * h
                } else {
                    a + k as f64 * h
                };
                let c = if k == 0 || k == panels {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                diffs.push(f.value(x) - g.value(x));
                weights.push(c * h / 3.0);
            }
        }
        DiffSamples { diffs, weights }
    }

    /// Distance between `f` and `g + θ`.
    fn distance(&self, theta: f64) -> f64 {
        self.diffs
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * wrap(d - theta).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn circular_mean(&self) -> f64 {
        let (s, c) = self
            .diffs
            .iter()
            .zip(&self.weights)
            .fold((0.0, 0.0), |(s, c), (d, w)| (s + w * d.sin(), c + w * d.cos()));
        s.atan2(c)
    }
}

/// `sqrt(∫ wrap(f − g)²)`.
pub fn circle_l2(f: &dyn PhaseField, g: &dyn PhaseField) -> f64 {
    DiffSamples::new(f, g).distance(0.0)
}

/// Best global phase shift of `g` onto `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    /// In `(−π, π]`.
    pub theta_star: f64,
    pub distance: f64,
}

const ALIGN_GRID: usize = 256;
const GOLDEN_TOL: f64 = 1e-10;

/// Minimises `circle_l2(f, g + θ)` over `θ`: a 256-point grid, golden-section
/// refinement around the best grid point, and a second refinement seeded by
/// the circular mean of the pointwise differences.
pub fn align_theta(f: &dyn PhaseField, g: &dyn PhaseField) -> AlignmentResult {
    let samples = DiffSamples::new(f, g);
    let step = TAU / ALIGN_GRID as f64;
    let mut best = (0.0, samples.distance(0.0));
    for k in 0..ALIGN_GRID {
        let theta = -PI + (k + 1) as f64 * step;
        let d = samples.distance(theta);
        if d < best.1 {
            best = (theta, d);
        }
    }
    let seed = samples.circular_mean();
    for centre in [best.0, seed] {
        let (theta, d) = golden_section(|t| samples.distance(t), centre - step, centre + step);
        if d < best.1 {
            best = (theta, d);
        }
    }
    AlignmentResult {
        theta_star: wrap(best.0),
        distance: best.1,
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// A field shifted by a constant phase.
pub struct Shifted<'a> {
    pub field: &'a dyn PhaseField,
    pub theta: f64,
}

impl PhaseField for Shifted<'_> {
    fn value(&self, x: f64) -> f64 {
        self.field.value(x) + self.theta
    }
}

/// `out[k] = u[xi[k]]`.
pub fn apply_permutation(xi: &[usize], u: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != u.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            got: xi.len(),
        });
    }
    let mut seen = vec![false; xi.len()];
    for &i in xi {
        if i >= xi.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Permutation(format!(
                "index {i} repeated or out of range for length {}",
                xi.len()
            )));
        }
    }
    Ok(xi.iter().map(|&i| u[i]).collect())
}

/// The permutation `inv` with `inv[xi[k]] = k`.
pub fn invert_permutation(xi: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; xi.len()];
    for (k, &i) in xi.iter().enumerate() {
        inv[i] = k;
    }
    inv
}

/// `r e^{iψ} = (1/n) Σ e^{i u_j}`.
pub fn order_parameter(u: &[f64]) -> (f64, f64) {
    let n = u.len() as f64;
    let (s, c) = u.iter().fold((0.0, 0.0), |(s, c), x| (s + x.sin(), c + x.cos()));
    let (s, c) = (s / n, c / n);
    ((s * s + c * c).sqrt().min(1.0), s.atan2(c))
}

/// Circular mean of phases.
pub fn circular_mean(u: &[f64]) -> f64 {
    order_parameter(u).1
}

/// `u[argmax ω] − u[argmin ω]`, wrapped; ties go to the lowest index.
pub fn delta_u_observable(u: &[f64], omegas: &[f64]) -> Result<f64> {
    if u.len() != omegas.len() {
        return Err(Error::Dimension {
            expected: omegas.len(),
            got: u.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::domain("delta_u of an empty state"));
    }
    let mut imax = 0;
    let mut imin = 0;
    for (i, w) in omegas.iter().enumerate() {
        if *w > omegas[imax] {
            imax = i;
        }
        if *w < omegas[imin] {
            imin = i;
        }
    }
    Ok(wrap(u[imax] - u[imin]))
}
