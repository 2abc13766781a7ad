use std::f64::consts::FRAC_2_PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{opt, Context, Scenario};
use crate::continuum::{solve_c_linear, THRESHOLD_C};
use crate::error::{Error, Result};

/// The `C(pK/a)` curve of the linear frequency function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfConsistencyConfig {
    /// Values of `pK/a` in `(0, 20]`.
    pub grid: Vec<f64>,
}

impl Default for SelfConsistencyConfig {
    fn default() -> Self {
        let mut grid: Vec<f64> = (1..=400).map(|i| 0.05 * i as f64).collect();
        grid.push(FRAC_2_PI);
        grid.sort_by(f64::total_cmp);
        SelfConsistencyConfig { grid }
    }
}

impl Scenario for SelfConsistencyConfig {
    const NAME: &'static str = "selfconsistency";

    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if let Some(k) = self.grid.iter().find(|&&k| !(k > 0.0 && k <= 20.0)) {
            return Err(Error::Config(format!("grid value {k} outside (0, 20]")));
        }
        Ok(())
    }

    fn execute(&self, ctx: &mut Context) -> Result<Value> {
        let rows: Vec<(f64, Option<f64>)> = ctx.stage("solve", || {
            Ok(self.grid.iter().map(|&k| (k, solve_c_linear(k))).collect())
        })?;
        let mut w = ctx.csv("selfconsistency.csv")?;
        w.write_record(["pK_over_a", "C"])?;
        for &(k, c) in &rows {
            w.write_record([k.to_string(), opt(c)])?;
        }
        w.flush()?;

        let existence = rows.iter().all(|&(k, c)| c.is_some() == (k >= FRAC_2_PI));
        ctx.check(
            "existence_iff_above_threshold",
            existence,
            "C exists exactly for pK/a >= 2/pi",
        );
        let mut solved: Vec<(f64, f64)> = rows.iter().filter_map(|&(k, c)| c.map(|c| (k, c))).collect();
        solved.sort_by(|a, b| a.0.total_cmp(&b.0));
        solved.dedup_by(|a, b| a.0 == b.0);
        let monotone = solved.windows(2).all(|w| w[1].1 > w[0].1);
        ctx.check("monotone", monotone, "C strictly increasing in pK/a");
        if let Some(&(_, c)) = rows.iter().find(|(k, _)| *k == FRAC_2_PI) {
            ctx.check(
                "threshold_value",
                c == Some(THRESHOLD_C),
                format!("C(2/pi) = {}", opt(c)),
            );
        }
        let in_range = solved.iter().all(|&(_, c)| (THRESHOLD_C..=1.0).contains(&c));
        ctx.check("range", in_range, "pi/4 <= C <= 1");
        Ok(json!({
            "rows": rows.len(),
            "solved": solved.len(),
            "first_existing": solved.first().map(|r| r.0),
        }))
    }
}
