//! Reproducible scenarios behind the command line tool.
//!
//! Each scenario is a serde config with defaults. Running one writes its CSV
//! outputs, a `<name>_summary.json` with the predicate verdicts and a
//! `<name>_manifest.json` holding the resolved parameters. Feeding a manifest
//! back as the config file reproduces the outputs.

mod convergence;
mod instability;
mod permutation;
mod selfconsistency;
mod simulate;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::{IntegratorConfig, Method, Record};
use crate::error::{Error, Result};

pub use convergence::{ConvergenceConfig, InitialData};
pub use instability::{FamilySpec, InstabilityConfig, InstabilityVerdict};
pub use permutation::PermutationConfig;
pub use selfconsistency::SelfConsistencyConfig;
pub use simulate::{simulate, BifurcateConfig, FreqMode, ModelConfig, Observables, SimulateConfig, Simulation};

/// Version of the CSV layouts written by the scenarios.
pub const SCHEMA_VERSION: u32 = 1;

/// Written in place of a missing value.
pub const NONE: &str = "NONE";

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NONE.to_string(), |x| x.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub tool_version: String,
    pub schema_version: u32,
    /// The resolved configuration; usable as a config file.
    pub parameters: Value,
    pub threads: usize,
    pub timings: Vec<StageTiming>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub passed: bool,
    /// Names of the failed predicates.
    pub failed: Vec<String>,
    pub predicates: Vec<Predicate>,
    pub results: Value,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub manifest: RunManifest,
    pub summary: Summary,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }
}

/// Output directory, timings and predicates of one run.
pub struct Context {
    out_dir: PathBuf,
    timings: Vec<StageTiming>,
    outputs: Vec<String>,
    predicates: Vec<Predicate>,
}

impl Context {
    fn new(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Context {
            out_dir: out_dir.to_path_buf(),
            timings: Vec::new(),
            outputs: Vec::new(),
            predicates: Vec::new(),
        })
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    fn path(&mut self, file: &str) -> PathBuf {
        self.outputs.push(file.to_string());
        self.out_dir.join(file)
    }

    pub fn csv(&mut self, file: &str) -> Result<csv::Writer<BufWriter<File>>> {
        let path = self.path(file);
        Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
    }

    pub fn file(&mut self, file: &str) -> Result<BufWriter<File>> {
        let path = self.path(file);
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.predicates.push(Predicate {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn manifest(&self, scenario: &str, parameters: Value, error: Option<String>) -> RunManifest {
        RunManifest {
            scenario: scenario.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            parameters,
            threads: rayon::current_num_threads(),
            timings: self.timings.clone(),
            outputs: self.outputs.clone(),
            error,
        }
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<()> {
        let f = BufWriter::new(File::create(self.out_dir.join(file))?);
        serde_json::to_writer_pretty(f, value)?;
        Ok(())
    }
}

/// A runnable scenario.
pub trait Scenario: Serialize + DeserializeOwned + Default {
    const NAME: &'static str;

    /// Applies a `--seed` override.
    fn set_seed(&mut self, _seed: u64) {}

    fn validate(&self) -> Result<()>;

    /// Writes outputs and registers predicates; returns the summary results.
    fn execute(&self, ctx: &mut Context) -> Result<Value>;
}

/// Validates and runs a scenario. On failure the manifest is still written,
/// with the error attached.
pub fn run<S: Scenario>(cfg: &S, out_dir: &Path) -> Result<Report> {
    cfg.validate()?;
    let mut ctx = Context::new(out_dir)?;
    let parameters = serde_json::to_value(cfg)?;
    let results = match cfg.execute(&mut ctx) {
        Ok(v) => v,
        Err(e) => {
            let manifest = ctx.manifest(S::NAME, parameters, Some(e.to_string()));
            ctx.write_json(&format!("{}_manifest.json", S::NAME), &manifest)?;
            return Err(e);
        }
    };
    let failed: Vec<String> = ctx
        .predicates
        .iter()
        .filter(|p| !p.passed)
        .map(|p| p.name.clone())
        .collect();
    let summary = Summary {
        scenario: S::NAME.to_string(),
        passed: failed.is_empty(),
        failed,
        predicates: ctx.predicates.clone(),
        results,
    };
    ctx.outputs.push(format!("{}_summary.json", S::NAME));
    ctx.write_json(&format!("{}_summary.json", S::NAME), &summary)?;
    let manifest = ctx.manifest(S::NAME, parameters, None);
    ctx.write_json(&format!("{}_manifest.json", S::NAME), &manifest)?;
    Ok(Report { manifest, summary })
}

/// Resolves a config: the file (or a manifest's `parameters`), then dotted
/// `key=value` overrides, then the seed. Unknown keys are rejected.
pub fn resolve_config<S: Scenario>(file: Option<Value>, overrides: &[String], seed: Option<u64>) -> Result<S> {
    let mut value = match file {
        None => Value::Object(Map::new()),
        Some(Value::Object(mut m)) if m.contains_key("parameters") && m.contains_key("scenario") => {
            match m.remove("scenario") {
                Some(Value::String(s)) if s == S::NAME => {}
                other => {
                    return Err(Error::Config(format!(
                        "manifest is for scenario {other:?}, not {}",
                        S::NAME
                    )));
                }
            }
            m.remove("parameters").unwrap_or(Value::Null)
        }
        Some(v) => v,
    };
    if !value.is_object() {
        return Err(Error::Config("config must be a JSON object".into()));
    }
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {item:?} is not of the form key=value")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key, parsed)?;
    }
    let mut cfg: S = serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", S::NAME)))?;
    if let Some(seed) = seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("empty component in key {key:?}")));
        }
        let map = match node {
            Value::Object(m) => m,
            _ => return Err(Error::Config(format!("{key:?} descends into a non-object"))),
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), v);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Integrator settings as they appear in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub sample_stride: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        SolverConfig {
            method: d.method,
            rtol: d.rtol,
            atol: d.atol,
            h_init: d.h_init,
            h_max: d.h_max,
            sample_stride: d.sample_stride,
        }
    }
}

impl SolverConfig {
    pub fn integrator(&self, record: Record) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method,
            rtol: self.rtol,
            atol: self.atol,
            h_init: self.h_init,
            h_max: self.h_max,
            sample_stride: self.sample_stride,
            record,
            ..Default::default()
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg: SimulateConfig = resolve_config(
            Some(json!({"t_end": 5.0})),
            &["model.k=0.7".into(), "model.case=random_dense".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(cfg.t_end, 5.0);
        assert_eq!(cfg.model.k, 0.7);
        assert_eq!(cfg.model.seed, 9);
        assert_eq!(cfg.model.case, crate::graphs::GraphCase::RandomDense);
        let bad = resolve_config::<SimulateConfig>(Some(json!({"t_ed": 5.0})), &[], None);
        assert!(matches!(bad, Err(Error::Config(_))));
        let bad = resolve_config::<SimulateConfig>(None, &["model.kk=1".into()], None);
        assert!(bad.is_err());
        assert!(resolve_config::<SimulateConfig>(None, &["novalue".into()], None).is_err());
    }

    #[test]
    fn manifests_are_accepted_as_configs() {
        let manifest = json!({"scenario": "permutation", "parameters": {"n_grid": [10, 20], "seeds": 3}});
        let cfg: PermutationConfig = resolve_config(Some(manifest.clone()), &[], None).unwrap();
        assert_eq!(cfg.n_grid, vec![10, 20]);
        assert!(resolve_config::<SelfConsistencyConfig>(Some(manifest), &[], None).is_err());
    }
}
