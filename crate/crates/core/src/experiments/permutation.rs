use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{quantile, strictly_decreasing, Context, Scenario};
use crate::error::{Error, Result};
use crate::frequencies::{permutation_deviation, sample_iid, FrequencyDistribution};

/// Sup-distance between sorted i.i.d. uniform samples and their quantile
/// targets, over a grid of sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationConfig {
    pub n_grid: Vec<usize>,
    pub a: f64,
    /// Number of seeds, `base_seed, base_seed + 1, …`.
    pub seeds: u64,
    pub base_seed: u64,
    /// Bound on the median at the largest `n`.
    pub max_final_median: Option<f64>,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            n_grid: vec![100, 1000, 10_000],
            a: 1.0,
            seeds: 20,
            base_seed: 0,
            max_final_median: Some(0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationRow {
    pub n: usize,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl PermutationConfig {
    pub fn rows(&self) -> Result<Vec<PermutationRow>> {
        let dist = FrequencyDistribution::uniform(self.a)?;
        self.n_grid
            .iter()
            .map(|&n| {
                let mut devs: Vec<f64> = (0..self.seeds)
                    .into_par_iter()
                    .map(|s| Ok(permutation_deviation(&sample_iid(&dist, n, self.base_seed + s)?)))
                    .collect::<Result<_>>()?;
                devs.sort_by(f64::total_cmp);
                Ok(PermutationRow {
                    n,
                    median: quantile(&devs, 0.5),
                    q10: quantile(&devs, 0.1),
                    q90: quantile(&devs, 0.9),
                })
            })
            .collect()
    }
}

impl Scenario for PermutationConfig {
    const NAME: &'static str = "permutation";

    fn set_seed(&mut self, seed: u64) {
        self.base_seed = seed;
    }

    fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_grid must be positive and strictly increasing".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be positive".into()));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("a must be positive, got {}", self.a)));
        }
        Ok(())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Value> {
        let rows = ctx.stage("sample", || self.rows())?;
        let mut w = ctx.csv("permutation.csv")?;
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
        if let Some(bound) = self.max_final_median {
            let last = *medians.last().expect("grid is non-empty");
            ctx.check(
                "final_median",
                last < bound,
                format!("median {last} < {bound} at the largest n"),
            );
        }
        Ok(json!({ "rows": rows }))
    }
}
