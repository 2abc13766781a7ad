//! Graphons and the weight matrices built from them.
//!
//! Three constructions are supported, all on `n` nodes with cells
//! `I_i = [i/n, (i+1)/n)` (the last cell closed):
//!
//! * deterministic dense: `w_ij = n² ∫_{I_i × I_j} W`;
//! * random dense: `w_ij ∈ {0, 1}` with `P(w_ij = 1) = n² ∫_{I_i × I_j} W`;
//! * random sparse: `P(w_ij = 1) = α_n · n² ∫_{I_i × I_j} min(1/α_n, W)` with
//!   `α_n = n^{-γ}`, `0 < γ < 1/2`.
//!
//! Loops are allowed: diagonal entries are averaged or sampled like any other
//! pair. They never contribute to the dynamics since `sin 0 = 0`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::simpson;
use crate::rng::{self, Domain};

/// Default number of midpoint subcells per axis used to average a
/// non-uniform graphon over one cell.
pub const DEFAULT_SUBCELLS: usize = 4;

/// Mesh resolution used when a graphon's integrability bounds are estimated
/// at construction time.
const BOUND_RESOLUTION: usize = 129;

pub type Kernel = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum GraphonKind {
    /// `W(x, y) = p`.
    Uniform(f64),
    /// Piecewise constant on an `size × size` mesh, row-major in `x`.
    Grid {
        size: usize,
        values: Vec<f64>,
    },
    Callable(Kernel),
}

impl fmt::Debug for GraphonKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphonKind::Uniform(p) => write!(f, "Uniform({p})"),
            GraphonKind::Grid { size, .. } => write!(f, "Grid({size}x{size})"),
            GraphonKind::Callable(_) => f.write_str("Callable"),
        }
    }
}

/// A bounded nonnegative function on the unit square.
#[derive(Debug, Clone)]
pub struct Graphon {
    kind: GraphonKind,
    bound_c1: f64,
    bound_c2: f64,
}

impl Graphon {
    pub fn uniform(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("uniform graphon needs p in (0, 1], got {p}")));
        }
        Ok(Graphon {
            kind: GraphonKind::Uniform(p),
            bound_c1: p,
            bound_c2: p,
        })
    }

    pub fn grid(size: usize, values: Vec<f64>) -> Result<Self> {
        if size == 0 || values.len() != size * size {
            return Err(Error::Dimension {
                expected: size * size,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::domain(format!(
                "grid graphon value {v} is not a finite nonnegative number"
            )));
        }
        Self::with_bounds(GraphonKind::Grid { size, values })
    }

    pub fn from_fn<F>(f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_bounds(GraphonKind::Callable(Arc::new(f)))
    }

    fn with_bounds(kind: GraphonKind) -> Result<Self> {
        let mut w = Graphon {
            kind,
            bound_c1: 0.0,
            bound_c2: 0.0,
        };
        let (c1, c2) = estimate_integrability_bounds(&w, BOUND_RESOLUTION)?;
        w.bound_c1 = c1;
        w.bound_c2 = c2;
        Ok(w)
    }

    pub fn kind(&self) -> &GraphonKind {
        &self.kind
    }

    /// Bound on `sup_y ∫ |W(x, y)| dx`.
    pub fn bound_c1(&self) -> f64 {
        self.bound_c1
    }

    /// Bound on `sup_x ∫ |W(x, y)| dy`.
    pub fn bound_c2(&self) -> f64 {
        self.bound_c2
    }

    pub fn uniform_value(&self) -> Option<f64> {
        match self.kind {
            GraphonKind::Uniform(p) => Some(p),
            _ => None,
        }
    }

    /// Raw evaluation, without finiteness checks.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            GraphonKind::Uniform(p) => *p,
            GraphonKind::Grid { size, values } => {
                let cell = |t: f64| ((t * *size as f64) as usize).min(size - 1);
                values[cell(x) * size + cell(y)]
            }
            GraphonKind::Callable(f) => f(x, y),
        }
    }

    /// Checked evaluation: finite and nonnegative.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.value(x, y);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                what: "graphon",
                at: format!("({x}, {y})"),
            });
        }
        if v < 0.0 {
            return Err(Error::domain(format!("graphon is negative ({v}) at ({x}, {y})")));
        }
        Ok(v)
    }

    /// Whether `W(x, y) = W(y, x)`, exactly for uniform and grid kinds and on
    /// a 64-point probe mesh for callables.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            GraphonKind::Uniform(_) => true,
            GraphonKind::Grid { size, values } => {
                (0..*size).all(|i| (0..i).all(|j| values[i * size + j] == values[j * size + i]))
            }
            GraphonKind::Callable(f) => {
                let m = 64;
                (0..m).all(|i| {
                    let x = (i as f64 + 0.5) / m as f64;
                    (0..i).all(|j| {
                        let y = (j as f64 + 0.5) / m as f64;
                        f(x, y) == f(y, x)
                    })
                })
            }
        }
    }

    /// `n² ∫_{I_i × I_j} W` with zero-based `i`, `j`.
    pub fn cell_average(&self, n: usize, i: usize, j: usize) -> Result<f64> {
        self.cell_average_with(n, i, j, DEFAULT_SUBCELLS)
    }

    /// Cell average by the composite midpoint rule with `subcells × subcells`
    /// points per cell. Exact for uniform graphons and for graphons affine in
    /// each variable.
    pub fn cell_average_with(&self, n: usize, i: usize, j: usize, subcells: usize) -> Result<f64> {
        self.transformed_average(n, i, j, subcells, Ok)
    }

    fn transformed_average<T>(&self, n: usize, i: usize, j: usize, subcells: usize, t: T) -> Result<f64>
    where
        T: Fn(f64) -> Result<f64>,
    {
        if i >= n || j >= n {
            return Err(Error::domain(format!("cell ({i}, {j}) out of range for n = {n}")));
        }
        if let GraphonKind::Uniform(p) = self.kind {
            return t(p);
        }
        let s = subcells.max(1);
        let h = 1.0 / (n * s) as f64;
        let mut acc = 0.0;
        for a in 0..s {
            let x = (i * s + a) as f64 * h + 0.5 * h;
            for b in 0..s {
                let y = (j * s + b) as f64 * h + 0.5 * h;
                acc += t(self.eval(x, y)?)?;
            }
        }
        Ok(acc / (s * s) as f64)
    }
}

/// `n² ∫_{I_i × I_j} W` (zero-based cell indices).
pub fn graphon_average(w: &Graphon, n: usize, i: usize, j: usize) -> Result<f64> {
    w.cell_average(n, i, j)
}

/// Quadrature estimates of `(sup_y ∫|W| dx, sup_x ∫|W| dy)` on a mesh of
/// `resolution` points per axis (endpoints included).
pub fn estimate_integrability_bounds(w: &Graphon, resolution: usize) -> Result<(f64, f64)> {
    if let GraphonKind::Uniform(p) = w.kind {
        return Ok((p, p));
    }
    let res = resolution.max(3);
    let panels = (res - 1).next_multiple_of(2);
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for k in 0..res {
        let s = k as f64 / (res - 1) as f64;
        // finiteness is checked once per mesh line rather than per point
        let col = simpson(|x| w.value(x, s).abs(), 0.0, 1.0, panels);
        let row = simpson(|y| w.value(s, y).abs(), 0.0, 1.0, panels);
        if !col.is_finite() || !row.is_finite() {
            return Err(Error::Evaluation {
                what: "graphon",
                at: format!("mesh line {s}"),
            });
        }
        c1 = c1.max(col);
        c2 = c2.max(row);
    }
    Ok((c1, c2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    DeterministicDense,
    RandomDense,
    RandomSparse,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::DeterministicDense => "deterministic_dense",
            GraphKind::RandomDense => "random_dense",
            GraphKind::RandomSparse => "random_sparse",
        })
    }
}

/// Undirected sampling draws each unordered pair once and mirrors it;
/// directed sampling draws every ordered pair independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Undirected,
    Directed,
}

/// Compressed sparse rows with unit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

impl SparseRows {
    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    /// Every entry equals the same value; expanded lazily.
    Constant(f64),
    /// Row-major `n × n`.
    Dense(Vec<f64>),
    Sparse(SparseRows),
}

/// An `n × n` nonnegative weight matrix together with its scaling factor.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    storage: Storage,
    alpha_n: f64,
    kind: GraphKind,
    symmetric: bool,
    seed: u64,
    gamma: Option<f64>,
}

impl WeightMatrix {
    /// Constant matrix `w_ij = c` (deterministic, `α_n = 1`).
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("weight matrix needs at least one node"));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::domain(format!(
                "constant weight {c} must be finite and nonnegative"
            )));
        }
        Ok(WeightMatrix {
            n,
            storage: Storage::Constant(c),
            alpha_n: 1.0,
            kind: GraphKind::DeterministicDense,
            symmetric: true,
            seed: 0,
            gamma: None,
        })
    }

    /// Deterministic dense matrix from explicit row-major weights.
    pub fn from_dense(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("weight {v} must be finite and nonnegative")));
        }
        let symmetric = (0..n).all(|i| (0..i).all(|j| values[i * n + j] == values[j * n + i]));
        Ok(WeightMatrix {
            n,
            storage: Storage::Dense(values),
            alpha_n: 1.0,
            kind: GraphKind::DeterministicDense,
            symmetric,
            seed: 0,
            gamma: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sparsity exponent, recorded for random sparse matrices only.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.storage {
            Storage::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of range");
        match &self.storage {
            Storage::Constant(c) => *c,
            Storage::Dense(v) => v[i * self.n + j],
            Storage::Sparse(s) => {
                if s.row(i).binary_search(&(j as u32)).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Number of nonzero entries, i.e. ordered pairs `(i, j)` in the edge set.
    pub fn edge_count(&self) -> usize {
        match &self.storage {
            Storage::Constant(c) => {
                if *c == 0.0 {
                    0
                } else {
                    self.n * self.n
                }
            }
            Storage::Dense(v) => v.iter().filter(|w| **w != 0.0).count(),
            Storage::Sparse(s) => s.nnz(),
        }
    }

    /// Expanded row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        match &self.storage {
            Storage::Constant(c) => vec![*c; n * n],
            Storage::Dense(v) => v.clone(),
            Storage::Sparse(s) => {
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for &j in s.row(i) {
                        out[i * n + j as usize] = 1.0;
                    }
                }
                out
            }
        }
    }

    /// Writes one `i j w` line per nonzero entry, one-based, sorted by `(i, j)`.
    pub fn write_coordinate_list<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            match &self.storage {
                Storage::Sparse(s) => {
                    for &j in s.row(i) {
                        writeln!(out, "{} {} 1", i + 1, j + 1)?;
                    }
                }
                _ => {
                    for j in 0..n {
                        let w = self.get(i, j);
                        if w != 0.0 {
                            writeln!(out, "{} {} {}", i + 1, j + 1, w)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn density_summary(&self) -> DensitySummary {
        DensitySummary {
            n: self.n,
            kind: self.kind,
            alpha_n: self.alpha_n,
            edge_count: self.edge_count(),
            seed: self.seed,
        }
    }
}

/// The JSON record written next to an exported matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySummary {
    pub n: usize,
    pub kind: GraphKind,
    pub alpha_n: f64,
    pub edge_count: usize,
    pub seed: u64,
}

fn check_nodes(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(format!("graphs need n >= 2, got {n}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::domain("node count exceeds u32 indexing"));
    }
    Ok(())
}

/// `w_ij = n² ∫_{I_i × I_j} W`, `α_n = 1`. Uniform graphons are stored as a
/// constant token.
pub fn build_deterministic_dense(w: &Graphon, n: usize) -> Result<WeightMatrix> {
    check_nodes(n)?;
    if let Some(p) = w.uniform_value() {
        return WeightMatrix::constant(n, p);
    }
    let symmetric = w.is_symmetric();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if symmetric { i } else { 0 };
            (start..n).map(|j| w.cell_average(n, i, j)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        let start = if symmetric { i } else { 0 };
        for (k, v) in row.into_iter().enumerate() {
            let j = start + k;
            values[i * n + j] = v;
            if symmetric {
                values[j * n + i] = v;
            }
        }
    }
    Ok(WeightMatrix {
        n,
        storage: Storage::Dense(values),
        alpha_n: 1.0,
        kind: GraphKind::DeterministicDense,
        symmetric,
        seed: 0,
        gamma: None,
    })
}

/// Edge indicator for the pair `(i, j)`; each pair has its own stream.
#[inline]
fn draw(seed: u64, i: usize, j: usize, prob: f64) -> bool {
    rng::uniform(seed, Domain::Edge, i as u64, j as u64) < prob
}

/// Per-row neighbour lists of a Bernoulli graph whose pair probabilities are
/// given by `prob(i, j)`. Undirected graphs key each draw on `(min, max)` so
/// rows can be built independently and still mirror each other.
fn sample_rows<P>(n: usize, seed: u64, orientation: Orientation, prob: P) -> Result<Vec<Vec<u32>>>
where
    P: Fn(usize, usize) -> Result<f64> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in 0..n {
                let (a, b) = match orientation {
                    Orientation::Undirected => (i.min(j), i.max(j)),
                    Orientation::Directed => (i, j),
                };
                if draw(seed, a, b, prob(a, b)?) {
                    row.push(j as u32);
                }
            }
            Ok(row)
        })
        .collect()
}

/// Random dense graph: `w_ij = 1` with probability `n² ∫_{I_i × I_j} W`.
pub fn sample_random_dense(w: &Graphon, n: usize, seed: u64, orientation: Orientation) -> Result<WeightMatrix> {
    check_nodes(n)?;
    let in_unit = |v: f64| {
        if v > 1.0 {
            Err(Error::domain(format!("random dense sampling needs W <= 1, found {v}")))
        } else {
            Ok(v)
        }
    };
    let rows = match w.uniform_value() {
        Some(p) => {
            in_unit(p)?;
            sample_rows(n, seed, orientation, |_, _| Ok(p))?
        }
        None => sample_rows(n, seed, orientation, |i, j| {
            w.transformed_average(n, i, j, DEFAULT_SUBCELLS, in_unit)
        })?,
    };
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for &j in row {
            values[i * n + j as usize] = 1.0;
        }
    }
    Ok(WeightMatrix {
        n,
        storage: Storage::Dense(values),
        alpha_n: 1.0,
        kind: GraphKind::RandomDense,
        symmetric: orientation == Orientation::Undirected,
        seed,
        gamma: None,
    })
}

/// Random sparse graph with `α_n = n^{-γ}` and truncated graphon
/// `min(1/α_n, W)`: `P(w_ij = 1) = α_n · n² ∫_{I_i × I_j} min(1/α_n, W)`.
pub fn sample_random_sparse(
    w: &Graphon,
    n: usize,
    gamma: f64,
    seed: u64,
    orientation: Orientation,
) -> Result<WeightMatrix> {
    check_nodes(n)?;
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::domain(format!(
            "sparsity exponent gamma must lie in (0, 1/2), got {gamma}"
        )));
    }
    let alpha = (n as f64).powf(-gamma);
    let cap = 1.0 / alpha;
    let rows = match w.uniform_value() {
        Some(p) => {
            let prob = alpha * p.min(cap);
            sample_rows(n, seed, orientation, |_, _| Ok(prob))?
        }
        None => sample_rows(n, seed, orientation, move |i, j| {
            Ok(alpha * w.transformed_average(n, i, j, DEFAULT_SUBCELLS, |v| Ok(v.min(cap)))?)
        })?,
    };
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for row in rows {
        cols.extend_from_slice(&row);
        row_ptr.push(cols.len());
    }
    Ok(WeightMatrix {
        n,
        storage: Storage::Sparse(SparseRows { row_ptr, cols }),
        alpha_n: alpha,
        kind: GraphKind::RandomSparse,
        symmetric: orientation == Orientation::Undirected,
        seed,
        gamma: Some(gamma),
    })
}

/// The three graph families of the numerical experiments, all on the uniform
/// graphon `W = p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphCase {
    /// Deterministic dense; with `p = 1` the complete graph with loops.
    Complete,
    RandomDense,
    RandomSparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphRecipe {
    pub case: GraphCase,
    pub n: usize,
    pub p: f64,
    /// Only read for [`GraphCase::RandomSparse`].
    pub gamma: f64,
    pub seed: u64,
    pub orientation: Orientation,
}

impl GraphRecipe {
    pub fn build(&self) -> Result<WeightMatrix> {
        let w = Graphon::uniform(self.p)?;
        match self.case {
            GraphCase::Complete => build_deterministic_dense(&w, self.n),
            GraphCase::RandomDense => sample_random_dense(&w, self.n, self.seed, self.orientation),
            GraphCase::RandomSparse => sample_random_sparse(&w, self.n, self.gamma, self.seed, self.orientation),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Graphon {
        Graphon::from_fn(|x, y| x * y).unwrap()
    }

    #[test]
    fn uniform_average_is_the_constant() {
        let w = Graphon::uniform(0.5).unwrap();
        for (n, i, j) in [(1, 0, 0), (7, 3, 6), (1000, 999, 0)] {
            assert_eq!(graphon_average(&w, n, i, j).unwrap(), 0.5);
        }
    }

    #[test]
    fn bilinear_average_matches_symbolic_integral() {
        // 4·(∫_0^{1/2} x dx)² and 4·(∫_{1/2}^1 x dx)²
        let w = xy();
        assert!((graphon_average(&w, 2, 0, 0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!((graphon_average(&w, 2, 1, 1).unwrap() - 9.0 / 16.0).abs() < 1e-15);
        assert!((graphon_average(&w, 2, 0, 1).unwrap() - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn affine_average_exact_for_any_subcell_count() {
        let w = Graphon::from_fn(|x, y| 0.2 + 0.3 * x + 0.1 * y).unwrap();
        let n = 5;
        for s in [1, 2, 4, 7] {
            for i in 0..n {
                for j in 0..n {
                    let xm = (i as f64 + 0.5) / n as f64;
                    let ym = (j as f64 + 0.5) / n as f64;
                    let exact = 0.2 + 0.3 * xm + 0.1 * ym;
                    assert!((w.cell_average_with(n, i, j, s).unwrap() - exact).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_finite_graphon_is_an_evaluation_error() {
        let w = Graphon::grid(1, vec![1.0]).unwrap();
        assert!(w.cell_average(3, 0, 0).is_ok());
        let err = Graphon::from_fn(|x, _| if x > 0.5 { f64::NAN } else { 1.0 });
        assert!(matches!(err, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn deterministic_dense_examples() {
        let ones = build_deterministic_dense(&Graphon::uniform(1.0).unwrap(), 3).unwrap();
        assert_eq!(ones.to_dense(), vec![1.0; 9]);
        assert_eq!(ones.alpha_n(), 1.0);

        let half = build_deterministic_dense(&Graphon::uniform(0.5).unwrap(), 1000).unwrap();
        assert_eq!(half.constant_value(), Some(0.5));
        assert_eq!(half.get(17, 912), 0.5);

        let m = build_deterministic_dense(&xy(), 2).unwrap();
        assert!(m.is_symmetric());
        let expected = [1.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0, 9.0 / 16.0];
        for (a, e) in m.to_dense().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_graphon_gives_asymmetric_matrix() {
        let w = Graphon::from_fn(|x, _| x).unwrap();
        let m = build_deterministic_dense(&w, 4).unwrap();
        assert!(!m.is_symmetric());
        assert!((m.get(3, 0) - 0.875).abs() < 1e-15);
        assert!((m.get(0, 3) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn random_dense_with_p_one_is_complete() {
        let m = sample_random_dense(&Graphon::uniform(1.0).unwrap(), 50, 3, Orientation::Undirected).unwrap();
        assert_eq!(m.edge_count(), 2500);
        assert_eq!(m.kind(), GraphKind::RandomDense);
    }

    #[test]
    fn random_dense_rejects_values_above_one() {
        let w = Graphon::from_fn(|x, y| 2.0 * x * y).unwrap();
        assert!(matches!(
            sample_random_dense(&w, 10, 1, Orientation::Undirected),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn random_dense_edge_count_is_binomial() {
        let n = 1000;
        let m = sample_random_dense(&Graphon::uniform(0.5).unwrap(), n, 11, Orientation::Undirected).unwrap();
        let upper: usize = (0..n).map(|i| (i..n).filter(|&j| m.get(i, j) == 1.0).count()).sum();
        let pairs = (n * (n + 1) / 2) as f64;
        let sd = (pairs * 0.25).sqrt();
        assert!((upper as f64 - 0.5 * pairs).abs() < 4.0 * sd, "upper = {upper}");
    }

    #[test]
    fn undirected_samples_are_symmetric() {
        let w = Graphon::uniform(0.3).unwrap();
        for seed in 0..3 {
            let d = sample_random_dense(&w, 200, seed, Orientation::Undirected).unwrap();
            let s = sample_random_sparse(&w, 200, 0.25, seed, Orientation::Undirected).unwrap();
            for m in [&d, &s] {
                for i in 0..200 {
                    for j in 0..200 {
                        assert_eq!(m.get(i, j), m.get(j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn directed_mode_breaks_symmetry() {
        let w = Graphon::uniform(0.5).unwrap();
        let m = sample_random_dense(&w, 100, 5, Orientation::Directed).unwrap();
        assert!(!m.is_symmetric());
        assert!((0..100).any(|i| (0..100).any(|j| m.get(i, j) != m.get(j, i))));
    }

    #[test]
    fn sampling_is_independent_of_thread_count() {
        let w = Graphon::uniform(1.0).unwrap();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| sample_random_sparse(&w, 500, 0.3, 9, Orientation::Undirected).unwrap());
        let b = wide.install(|| sample_random_sparse(&w, 500, 0.3, 9, Orientation::Undirected).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_rejects_gamma_outside_open_interval() {
        let w = Graphon::uniform(1.0).unwrap();
        for g in [0.0, 0.5, -0.1, 0.7] {
            assert!(matches!(
                sample_random_sparse(&w, 10, g, 0, Orientation::Undirected),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn sparse_records_alpha_and_gamma() {
        let m = sample_random_sparse(&Graphon::uniform(1.0).unwrap(), 1000, 0.3, 1, Orientation::Undirected).unwrap();
        assert!((m.alpha_n() - 1000f64.powf(-0.3)).abs() < 1e-15);
        assert!((m.alpha_n() - 0.125893).abs() < 1e-6);
        assert_eq!(m.gamma(), Some(0.3));
        assert!(matches!(m.storage(), Storage::Sparse(_)));
    }

    #[test]
    fn truncation_is_inactive_for_graphons_below_one() {
        // P = α·min(1/α, W) = α·W when W <= 1 < 1/α
        let w = Graphon::from_fn(|x, y| 0.5 * (x + y)).unwrap();
        let n = 40;
        let alpha = (n as f64).powf(-0.2);
        let v = w
            .transformed_average(n, 3, 17, DEFAULT_SUBCELLS, |v| Ok(v.min(1.0 / alpha)))
            .unwrap();
        assert_eq!(v, w.cell_average(n, 3, 17).unwrap());
    }

    #[test]
    fn integrability_bounds() {
        assert_eq!(
            estimate_integrability_bounds(&Graphon::uniform(0.5).unwrap(), 10).unwrap(),
            (0.5, 0.5)
        );
        let (c1, c2) = estimate_integrability_bounds(&xy(), 101).unwrap();
        assert!((c1 - 0.5).abs() < 1e-12 && (c2 - 0.5).abs() < 1e-12);
        let one = Graphon::from_fn(|_, _| 1.0).unwrap();
        let (c1, c2) = (one.bound_c1(), one.bound_c2());
        assert!((c1 - 1.0).abs() < 1e-12 && (c2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coordinate_list_is_one_based_and_sorted() {
        let m = WeightMatrix::from_dense(2, vec![0.0, 0.25, 1.0, 0.0]).unwrap();
        let mut out = Vec::new();
        m.write_coordinate_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1 2 0.25\n2 1 1\n");
        let json = serde_json::to_value(m.density_summary()).unwrap();
        assert_eq!(json["kind"], "deterministic_dense");
        assert_eq!(json["edge_count"], 2);
    }
}
