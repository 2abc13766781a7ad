//! Natural frequencies: deterministic discretisations of a frequency function
//! and i.i.d. samples from a bounded distribution.
//!
//! For a sample `ω_1, …, ω_n` the ascending-sort permutation `ξ` satisfies
//! `ω_{ξ(1)} < … < ω_{ξ(n)}`, and the quantile targets are the cell averages
//! `ν_n(i) = n ∫_{I_i} F⁻¹`. Sorted samples approach the targets uniformly as
//! `n` grows.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{cell_averages, simpson};
use crate::rng::{self, Domain};

/// Simpson panels per cell for callables without a closed form.
pub const PANELS_PER_CELL: usize = 16;

pub type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FrequencyKind {
    /// `ω(x) = a (x − 1/2)`.
    Linear {
        a: f64,
    },
    Constant {
        c: f64,
    },
    Callable(Scalar),
}

/// A square-integrable function on `[0, 1]` whose cell averages are the
/// deterministic natural frequencies.
#[derive(Clone)]
pub struct FrequencyFunction {
    kind: FrequencyKind,
    description: String,
}

impl fmt::Debug for FrequencyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrequencyFunction")
            .field("description", &self.description)
            .finish()
    }
}

impl FrequencyFunction {
    pub fn linear(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("linear frequency function needs a > 0, got {a}")));
        }
        Ok(FrequencyFunction {
            kind: FrequencyKind::Linear { a },
            description: format!("a(x - 1/2), a = {a}"),
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::domain("constant frequency must be finite"));
        }
        Ok(FrequencyFunction {
            kind: FrequencyKind::Constant { c },
            description: format!("constant {c}"),
        })
    }

    /// Wraps an arbitrary function. Rejected unless `∫ ω²` is finite on a
    /// Simpson mesh.
    pub fn from_fn<F>(description: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let l2 = simpson(|x| f(x).powi(2), 0.0, 1.0, 4096);
        if !l2.is_finite() {
            return Err(Error::Evaluation {
                what: "frequency function",
                at: "L2 check".into(),
            });
        }
        Ok(FrequencyFunction {
            kind: FrequencyKind::Callable(Arc::new(f)),
            description: description.into(),
        })
    }

    pub fn kind(&self) -> &FrequencyKind {
        &self.kind
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            FrequencyKind::Linear { a } => a * (x - 0.5),
            FrequencyKind::Constant { c } => *c,
            FrequencyKind::Callable(f) => f(x),
        }
    }

    /// `ω_i = n ∫_{I_i} ω` for `i = 1..n`.
    pub fn discretize(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("discretize needs n >= 1"));
        }
        match &self.kind {
            FrequencyKind::Linear { a } => Ok(equally_placed(*a, n)),
            FrequencyKind::Constant { c } => Ok(vec![*c; n]),
            FrequencyKind::Callable(f) => {
                let v = cell_averages(|x| f(x), n, PANELS_PER_CELL);
                match v.iter().position(|w| !w.is_finite()) {
                    Some(i) => Err(Error::Evaluation {
                        what: "frequency function",
                        at: format!("cell {}", i + 1),
                    }),
                    None => Ok(v),
                }
            }
        }
    }
}

/// `a (2i − n − 1) / (2n)` for `i = 1..n`: the cell averages of
/// `a (x − 1/2)`, equally spaced and symmetric about zero.
pub fn equally_placed(a: f64, n: usize) -> Vec<f64> {
    let n_f = n as f64;
    (1..=n)
        .map(|i| a * (2.0 * i as f64 - n_f - 1.0) / (2.0 * n_f))
        .collect()
}

/// `ω_i = n ∫_{I_i} ω`.
pub fn discretize(omega: &FrequencyFunction, n: usize) -> Result<Vec<f64>> {
    omega.discretize(n)
}

#[derive(Clone)]
enum DistributionKind {
    Uniform,
    Custom {
        density: Scalar,
        cdf: Scalar,
        quantile: Scalar,
    },
}

/// A distribution with a positive density on a bounded closed interval.
#[derive(Clone)]
pub struct FrequencyDistribution {
    lo: f64,
    hi: f64,
    kind: DistributionKind,
}

impl fmt::Debug for FrequencyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DistributionKind::Uniform => "uniform",
            DistributionKind::Custom { .. } => "custom",
        };
        write!(f, "FrequencyDistribution({kind} on [{}, {}])", self.lo, self.hi)
    }
}

impl FrequencyDistribution {
    /// Uniform on `[−a/2, a/2]`.
    pub fn uniform(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("uniform distribution needs a > 0, got {a}")));
        }
        Ok(FrequencyDistribution {
            lo: -0.5 * a,
            hi: 0.5 * a,
            kind: DistributionKind::Uniform,
        })
    }

    /// A distribution on `[lo, hi]` given by its density, CDF and quantile.
    ///
    /// The CDF must be strictly increasing with `F(lo) = 0`, `F(hi) = 1`
    /// (to 1e-10) and invert the quantile to 1e-8 on a 1025-point mesh;
    /// anything else is rejected.
    pub fn custom<D, F, Q>(lo: f64, hi: f64, density: D, cdf: F, quantile: Q) -> Result<Self>
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::domain(format!(
                "support [{lo}, {hi}] must be a bounded nonempty interval"
            )));
        }
        if (cdf(lo)).abs() > 1e-10 || (cdf(hi) - 1.0).abs() > 1e-10 {
            return Err(Error::domain(
                "CDF must be 0 at the lower and 1 at the upper support endpoint",
            ));
        }
        let mesh = 1024;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=mesh {
            let w = lo + (hi - lo) * k as f64 / mesh as f64;
            let f = cdf(w);
            if !(f > prev) {
                return Err(Error::domain(format!("CDF is not strictly increasing near {w}")));
            }
            prev = f;
            if (quantile(f) - w).abs() > 1e-8 {
                return Err(Error::domain(format!("quantile does not invert the CDF at {w}")));
            }
        }
        Ok(FrequencyDistribution {
            lo,
            hi,
            kind: DistributionKind::Custom {
                density: Arc::new(density),
                cdf: Arc::new(cdf),
                quantile: Arc::new(quantile),
            },
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, DistributionKind::Uniform)
    }

    pub fn density(&self, w: f64) -> f64 {
        match &self.kind {
            DistributionKind::Uniform => {
                if (self.lo..=self.hi).contains(&w) {
                    1.0 / (self.hi - self.lo)
                } else {
                    0.0
                }
            }
            DistributionKind::Custom { density, .. } => density(w),
        }
    }

    pub fn cdf(&self, w: f64) -> f64 {
        let w = w.clamp(self.lo, self.hi);
        match &self.kind {
            // (2ω + a) / (2a)
            DistributionKind::Uniform => (w - self.lo) / (self.hi - self.lo),
            DistributionKind::Custom { cdf, .. } => cdf(w),
        }
    }

    pub fn quantile(&self, x: f64) -> f64 {
        match &self.kind {
            // a (x − 1/2)
            DistributionKind::Uniform => (self.hi - self.lo) * (x - 0.5) + 0.5 * (self.lo + self.hi),
            DistributionKind::Custom { quantile, .. } => quantile(x),
        }
    }

    /// `∫_0^1 F⁻¹`.
    pub fn mean(&self) -> f64 {
        match self.kind {
            DistributionKind::Uniform => 0.5 * (self.lo + self.hi),
            DistributionKind::Custom { .. } => simpson(|x| self.quantile(x), 0.0, 1.0, 4096),
        }
    }
}

/// An i.i.d. sample together with its sort permutation and quantile targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySample {
    pub omegas: Vec<f64>,
    /// `xi[k]` is the index of the `k`-th smallest frequency.
    pub xi: Vec<usize>,
    pub nu: Vec<f64>,
    pub seed: u64,
    /// Raised when two frequencies compare equal; the tie is broken by index.
    pub has_ties: bool,
}

impl FrequencySample {
    /// Sorted frequencies `ω_{ξ(1)}, …, ω_{ξ(n)}`.
    pub fn sorted(&self) -> Vec<f64> {
        self.xi.iter().map(|&i| self.omegas[i]).collect()
    }

    /// `rank[i]` is the position of `ω_i` in ascending order (zero-based).
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.xi.len()];
        for (k, &i) in self.xi.iter().enumerate() {
            rank[i] = k;
        }
        rank
    }

    pub fn mean(&self) -> f64 {
        self.omegas.iter().sum::<f64>() / self.omegas.len() as f64
    }

    /// The same sample seen from a frame rotating with its mean frequency.
    pub fn recentered(&self) -> FrequencySample {
        let m = self.mean();
        FrequencySample {
            omegas: self.omegas.iter().map(|w| w - m).collect(),
            ..self.clone()
        }
    }

    /// CSV with columns `index, omega, rank, nu` (one-based index and rank;
    /// `nu` is the target of the sample's rank).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "omega", "rank", "nu"])?;
        for (i, rank) in self.ranks().into_iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                self.omegas[i].to_string(),
                (rank + 1).to_string(),
                self.nu[rank].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `ω_i = F⁻¹(U_i)` with `U_i` drawn from the per-index stream `(seed, i)`.
pub fn sample_iid(dist: &FrequencyDistribution, n: usize, seed: u64) -> Result<FrequencySample> {
    if n == 0 {
        return Err(Error::domain("sample_iid needs n >= 1"));
    }
    let omegas: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            dist.quantile(rng::uniform(seed, Domain::Frequency, i as u64, 0))
                .clamp(dist.lo, dist.hi)
        })
        .collect();
    let (xi, has_ties) = sort_permutation(&omegas);
    let nu = quantile_targets(dist, n)?;
    Ok(FrequencySample {
        omegas,
        xi,
        nu,
        seed,
        has_ties,
    })
}

/// `ν_n(i) = n ∫_{I_i} F⁻¹`, in closed form for the uniform distribution.
pub fn quantile_targets(dist: &FrequencyDistribution, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("quantile_targets needs n >= 1"));
    }
    if dist.is_uniform() {
        let shift = 0.5 * (dist.lo + dist.hi);
        return Ok(equally_placed(dist.hi - dist.lo, n)
            .into_iter()
            .map(|v| v + shift)
            .collect());
    }
    let nu = cell_averages(|x| dist.quantile(x), n, PANELS_PER_CELL);
    match nu.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Evaluation {
            what: "quantile function",
            at: format!("cell {}", i + 1),
        }),
        None => Ok(nu),
    }
}

/// Stable ascending argsort; the flag reports whether any two values tie.
pub fn sort_permutation(omegas: &[f64]) -> (Vec<usize>, bool) {
    let mut xi: Vec<usize> = (0..omegas.len()).collect();
    xi.sort_by(|&i, &j| omegas[i].total_cmp(&omegas[j]));
    let ties = xi.windows(2).any(|w| omegas[w[0]] == omegas[w[1]]);
    (xi, ties)
}

/// `max_i |ω_{ξ(i)} − ν_n(i)|`.
pub fn permutation_deviation(sample: &FrequencySample) -> f64 {
    sample
        .xi
        .iter()
        .zip(&sample.nu)
        .map(|(&i, nu)| (sample.omegas[i] - nu).abs())
        .fold(0.0, f64::max)
}

/// Left-continuous empirical CDF `F_n(ω) = #{i : ω_i < ω} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(omegas: &[f64]) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::domain("empirical CDF of an empty sample"));
        }
        let mut sorted = omegas.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn eval(&self, w: f64) -> f64 {
        self.sorted.partition_point(|&v| v < w) as f64 / self.sorted.len() as f64
    }

    /// `sup_ω |F_n(ω) − F(ω)|` for a continuous `F`, attained at a jump of
    /// `F_n` from one side or the other.
    pub fn sup_deviation<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let f = cdf(w);
                (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

pub fn empirical_cdf(omegas: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(omegas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn discretize_examples() {
        let v = FrequencyFunction::linear(1.0).unwrap().discretize(3).unwrap();
        assert!(close(&v, &[-1.0 / 3.0, 0.0, 1.0 / 3.0], 1e-15));
        let v = FrequencyFunction::constant(0.7).unwrap().discretize(5).unwrap();
        assert_eq!(v, vec![0.7; 5]);
        let v = FrequencyFunction::linear(2.0).unwrap().discretize(4).unwrap();
        assert!(close(&v, &[-0.75, -0.25, 0.25, 0.75], 1e-15));
    }

    #[test]
    fn callable_discretization_matches_closed_form() {
        let f = FrequencyFunction::from_fn("x - 1/2", |x| x - 0.5).unwrap();
        let g = FrequencyFunction::linear(1.0).unwrap();
        assert!(close(&f.discretize(37).unwrap(), &g.discretize(37).unwrap(), 1e-14));
        // ∫ x² over [0, 1/2] and [1/2, 1], times 2
        let sq = FrequencyFunction::from_fn("x^2", |x| x * x).unwrap();
        assert!(close(&sq.discretize(2).unwrap(), &[1.0 / 12.0, 7.0 / 12.0], 1e-14));
    }

    #[test]
    fn non_finite_callable_is_rejected() {
        assert!(FrequencyFunction::from_fn("1/x", |x| 1.0 / x).is_err());
    }

    #[test]
    fn uniform_distribution_closed_forms() {
        let d = FrequencyDistribution::uniform(1.0).unwrap();
        for k in 0..=100 {
            let w = -0.5 + k as f64 / 100.0;
            assert!((d.cdf(w) - (2.0 * w + 1.0) / 2.0).abs() < 1e-15);
            assert!((d.quantile(d.cdf(w)) - w).abs() < 1e-15);
        }
        assert_eq!(d.quantile(0.25), -0.25);
    }

    #[test]
    fn quantile_target_examples() {
        let d = FrequencyDistribution::uniform(1.0).unwrap();
        assert!(close(
            &quantile_targets(&d, 3).unwrap(),
            &[-1.0 / 3.0, 0.0, 1.0 / 3.0],
            1e-15
        ));
        assert!(close(&quantile_targets(&d, 2).unwrap(), &[-0.25, 0.25], 1e-15));

        // F⁻¹(x) = x² on [0, 1]
        let c = FrequencyDistribution::custom(0.0, 1.0, |w| 0.5 / w.sqrt(), |w| w.max(0.0).sqrt(), |x| x * x).unwrap();
        assert!(close(
            &quantile_targets(&c, 2).unwrap(),
            &[1.0 / 12.0, 7.0 / 12.0],
            1e-14
        ));
    }

    #[test]
    fn targets_agree_with_linear_discretization() {
        for n in [1, 2, 7, 100] {
            let d = quantile_targets(&FrequencyDistribution::uniform(1.7).unwrap(), n).unwrap();
            let f = FrequencyFunction::linear(1.7).unwrap().discretize(n).unwrap();
            assert_eq!(d, f);
            let mean = d.iter().sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-12);
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_monotone_cdf_is_rejected() {
        let bad = FrequencyDistribution::custom(0.0, 1.0, |_| 1.0, |w| (w - 0.5).abs() * 2.0, |x| x);
        assert!(matches!(bad, Err(Error::Domain(_))));
        let flat = FrequencyDistribution::custom(
            0.0,
            1.0,
            |_| 1.0,
            |w: f64| {
                if w < 0.4 {
                    w / 0.8
                } else if w < 0.6 {
                    0.5
                } else {
                    0.5 + (w - 0.6) / 0.8
                }
            },
            |x| x,
        );
        assert!(flat.is_err());
    }

    #[test]
    fn sort_permutation_examples() {
        assert_eq!(sort_permutation(&[0.3, -0.1, 0.2]), (vec![1, 2, 0], false));
        assert_eq!(sort_permutation(&[1.0, 2.0, 3.0]).0, vec![0, 1, 2]);
        assert_eq!(sort_permutation(&[4.0, 3.0, 2.0, 1.0]).0, vec![3, 2, 1, 0]);
        assert_eq!(sort_permutation(&[1.0, 0.0, 1.0]), (vec![1, 0, 2], true));
    }

    #[test]
    fn single_sample_has_identity_permutation() {
        let s = sample_iid(&FrequencyDistribution::uniform(1.0).unwrap(), 1, 3).unwrap();
        assert_eq!(s.xi, vec![0]);
        assert_eq!(s.nu, vec![0.0]);
    }

    #[test]
    fn deviation_is_zero_when_sample_equals_targets() {
        let nu = equally_placed(1.0, 5);
        let omegas = vec![nu[3], nu[0], nu[4], nu[1], nu[2]];
        let (xi, _) = sort_permutation(&omegas);
        let s = FrequencySample {
            omegas,
            xi,
            nu,
            seed: 0,
            has_ties: false,
        };
        assert_eq!(permutation_deviation(&s), 0.0);
    }

    #[test]
    fn empirical_cdf_examples() {
        let f = empirical_cdf(&[0.0]).unwrap();
        assert_eq!((f.eval(-1.0), f.eval(1.0)), (0.0, 1.0));
        // left-continuous: the jump at 0 is not yet counted
        assert_eq!(f.eval(0.0), 0.0);
        let f = empirical_cdf(&[0.3, 0.1, 0.2]).unwrap();
        assert!((f.eval(0.2 + 1e-12) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_sample_moments() {
        let n = 100_000;
        let s = sample_iid(&FrequencyDistribution::uniform(1.0).unwrap(), n, 2024).unwrap();
        let mean = s.mean();
        let var = s.omegas.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n as f64;
        let se_mean = (1.0f64 / 12.0 / n as f64).sqrt();
        // variance of the sample variance of U(−1/2, 1/2): (1/80 − 1/144) / n
        let se_var = ((1.0 / 80.0 - 1.0 / 144.0) / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 3.0 * se_var, "var {var}");
        assert!(s.omegas.iter().all(|w| (-0.5..=0.5).contains(w)));
        assert!(!s.has_ties);
    }

    #[test]
    fn recentering_removes_the_mean() {
        let s = sample_iid(&FrequencyDistribution::uniform(1.0).unwrap(), 1000, 1).unwrap();
        assert!(s.recentered().mean().abs() < 1e-15);
        assert_eq!(s.recentered().xi, s.xi);
    }

    #[test]
    fn csv_export_columns() {
        let s = sample_iid(&FrequencyDistribution::uniform(1.0).unwrap(), 3, 5).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,omega,rank,nu");
        assert_eq!(lines.len(), 4);
    }
}
