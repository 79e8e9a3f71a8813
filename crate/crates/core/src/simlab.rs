//! Seeded Monte Carlo scenarios.
//!
//! Each replication draws a mean vector `theta` and one observation vector
//! `X = theta + N(0, I)`; every estimator of the scenario is run on that same
//! `X`. Every draw of a scenario with base seed `s` comes from the ChaCha8
//! generator keyed by `s`: replication `r` reads stream `2r` for `theta` and
//! stream `2r + 1` for the noise. Streams never overlap, so nearby base seeds
//! and replications give independent draws, and any replication can be
//! regenerated on its own.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::diagnostics::total_sq_error;
use crate::estimators::{estimate_with, EstimatorSpec};
use crate::io::format_sig;
use crate::par::{self, Execution};
use crate::{Error, Result};

pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_HALF_WIDTH: f64 = 0.2;

const TRUTH_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_half_width() -> f64 {
    DEFAULT_HALF_WIDTH
}

/// How the true means are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    /// `k` means equal to `mu`, the rest zero.
    Binary { k: usize, mu: f64 },
    /// The binary pattern plus i.i.d. `uniform(-half_width, half_width)` on every coordinate.
    BinaryPerturbed {
        k: usize,
        mu: f64,
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
    /// i.i.d. `N(mu, sigma2)`.
    Gaussian { mu: f64, sigma2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub n: usize,
    pub signal: Signal,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl ScenarioConfig {
    /// Explicit id, or one derived from the design.
    pub fn id(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        let n = self.n;
        match self.signal {
            Signal::Binary { k, mu } => format!("n{n}_k{k}_mu{mu}"),
            Signal::BinaryPerturbed { k, mu, .. } => format!("n{n}_k{k}_mu{mu}_perturbed"),
            Signal::Gaussian { mu, sigma2 } => format!("n{n}_normal_mu{mu}_var{sigma2}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Schema {
            path: path.into(),
            message,
        };
        if self.n == 0 {
            return Err(bad("n", "must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(bad("replications", "must be at least 1".into()));
        }
        match self.signal {
            Signal::Binary { k, mu } | Signal::BinaryPerturbed { k, mu, .. } => {
                if k > self.n {
                    return Err(bad("signal.k", format!("{k} exceeds n = {}", self.n)));
                }
                if !mu.is_finite() {
                    return Err(bad("signal.mu", "must be finite".into()));
                }
            }
            Signal::Gaussian { mu, sigma2 } => {
                if !mu.is_finite() {
                    return Err(bad("signal.mu", "must be finite".into()));
                }
                if !(sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(bad("signal.sigma2", format!("{sigma2} must be > 0")));
                }
            }
        }
        if let Signal::BinaryPerturbed { half_width, .. } = self.signal {
            if !(half_width >= 0.0 && half_width.is_finite()) {
                return Err(bad(
                    "signal.half_width",
                    format!("{half_width} must be >= 0"),
                ));
            }
        }
        for (i, e) in self.estimators.iter().enumerate() {
            e.validate()
                .map_err(|err| bad(&format!("estimators[{i}]"), err.to_string()))?;
        }
        Ok(())
    }
}

/// A list of scenarios as stored in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSet {
    pub scenarios: Vec<ScenarioConfig>,
}

/// Parses a scenario file: either a single scenario object or
/// `{"scenarios": [...]}`. Errors carry the JSON path of the offending field.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioConfig>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let set = if value.get("scenarios").is_some() {
        let de = value;
        serde_path_to_error::deserialize::<_, ScenarioSet>(de)
            .map_err(schema_error)?
            .scenarios
    } else {
        vec![serde_path_to_error::deserialize::<_, ScenarioConfig>(value).map_err(schema_error)?]
    };
    for (i, s) in set.iter().enumerate() {
        s.validate().map_err(|e| match e {
            Error::Schema { path, message } => Error::Schema {
                path: format!("scenarios[{i}].{path}"),
                message,
            },
            other => other,
        })?;
    }
    Ok(set)
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    }
}

/// ChaCha8 stream of replication `rep` for the given purpose.
pub fn replication_stream(rep: usize, purpose: u64) -> u64 {
    2 * rep as u64 + purpose
}

fn rng(base_seed: u64, rep: usize, purpose: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base_seed);
    r.set_stream(replication_stream(rep, purpose));
    r
}

/// True means of replication `rep`.
pub fn generate_truth(scenario: &ScenarioConfig, rep: usize) -> Vec<f64> {
    let n = scenario.n;
    let mut rng = rng(scenario.base_seed, rep, TRUTH_STREAM);
    let binary = |k: usize, mu: f64| (0..n).map(move |i| if i < k { mu } else { 0.0 });
    match scenario.signal {
        Signal::Binary { k, mu } => binary(k, mu).collect(),
        Signal::BinaryPerturbed { k, mu, half_width } => {
            if half_width == 0.0 {
                return binary(k, mu).collect();
            }
            let u = Uniform::new(-half_width, half_width).expect("positive width");
            binary(k, mu).map(|m| m + rng.sample(u)).collect()
        }
        Signal::Gaussian { mu, sigma2 } => {
            let sd = sigma2.sqrt();
            (0..n)
                .map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    }
}

/// `theta + N(0, I)` for replication `rep`.
pub fn generate_observations(scenario: &ScenarioConfig, rep: usize, theta: &[f64]) -> Vec<f64> {
    let mut rng = rng(scenario.base_seed, rep, NOISE_STREAM);
    theta
        .iter()
        .map(|t| t + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Outcome of one estimator on one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub scenario: String,
    pub estimator: String,
    pub rep: usize,
    /// `None` when the estimator's preconditions failed (a skipped row).
    pub total_sq_error: Option<f64>,
    pub wall_time_ms: f64,
    /// Base seed of the scenario; with `rep` it identifies the random streams.
    pub seed: u64,
    #[serde(skip)]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub exec: Execution,
    /// Record wall-clock times. Off by default so output is reproducible.
    pub timing: bool,
}

pub fn run_scenario(scenario: &ScenarioConfig) -> Result<Vec<SimulationRecord>> {
    run_scenario_with(scenario, RunOptions::default())
}

/// Runs every replication of `scenario`. Records are ordered by replication,
/// then by the scenario's estimator order.
pub fn run_scenario_with(
    scenario: &ScenarioConfig,
    opts: RunOptions,
) -> Result<Vec<SimulationRecord>> {
    scenario.validate()?;
    let id = scenario.id();
    let labels: Vec<String> = scenario.estimators.iter().map(|e| e.label()).collect();
    let per_rep = par::map_range(opts.exec, scenario.replications, |rep| {
        let theta = generate_truth(scenario, rep);
        let x = generate_observations(scenario, rep, &theta);
        let seed = scenario.base_seed;
        scenario
            .estimators
            .iter()
            .zip(&labels)
            .map(|(spec, label)| {
                let start = Instant::now();
                let outcome = estimate_with(spec, &x, Some(&theta), Execution::Sequential);
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                let (total_sq_error, skipped) = match outcome {
                    Ok(r) => (Some(total_sq_error(&r.estimates, &theta)), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SimulationRecord {
                    scenario: id.clone(),
                    estimator: label.clone(),
                    rep,
                    total_sq_error,
                    wall_time_ms: if opts.timing { elapsed } else { 0.0 },
                    seed,
                    skipped,
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(per_rep.into_iter().flatten().collect())
}

/// Mean and Monte Carlo standard error of one (scenario, estimator) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scenario: String,
    pub estimator: String,
    #[serde(rename = "mean_total_sq_error")]
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub reps: usize,
}

/// Groups by (scenario, estimator) and folds each group in replication order.
/// Skipped records are left out of the mean; a group with none left has no
/// mean.
pub fn aggregate(records: &[SimulationRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<(usize, f64)>> = BTreeMap::new();
    for r in records {
        let g = groups
            .entry((r.scenario.as_str(), r.estimator.as_str()))
            .or_default();
        if let Some(v) = r.total_sq_error {
            g.push((r.rep, v));
        }
    }
    groups
        .into_iter()
        .map(|((scenario, estimator), mut vals)| {
            vals.sort_by_key(|(rep, _)| *rep);
            let (mean, se) = mean_se(vals.iter().map(|(_, v)| *v));
            AggregateRow {
                scenario: scenario.to_string(),
                estimator: estimator.to_string(),
                mean,
                se,
                reps: vals.len(),
            }
        })
        .collect()
}

/// Sample mean and `sd / sqrt(n)`; a single value has standard error 0.
pub fn mean_se(values: impl Iterator<Item = f64>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

pub fn write_records_csv<W: Write>(records: &[SimulationRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Markdown table with one row per estimator and one column per scenario,
/// entries being mean total squared errors to 6 significant digits.
pub fn markdown_table(scenarios: &[ScenarioConfig], rows: &[AggregateRow]) -> String {
    let mut estimators: Vec<(String, String)> = Vec::new();
    for s in scenarios {
        for e in &s.estimators {
            let label = e.label();
            if !estimators.iter().any(|(l, _)| *l == label) {
                estimators.push((label, e.to_string()));
            }
        }
    }
    let cell = |scenario: &str, estimator: &str| {
        rows.iter()
            .find(|r| r.scenario == scenario && r.estimator == estimator)
            .and_then(|r| r.mean)
            .map(|m| format_sig(m, 6))
            .unwrap_or_else(|| "—".into())
    };
    let ids: Vec<String> = scenarios.iter().map(|s| s.id()).collect();
    let mut out = String::new();
    out.push_str("| Estimator |");
    for id in &ids {
        out.push_str(&format!(" {id} |"));
    }
    out.push('\n');
    out.push_str("|---|");
    out.push_str(&"---:|".repeat(ids.len()));
    out.push('\n');
    for (label, name) in &estimators {
        out.push_str(&format!("| {name} |"));
        for id in &ids {
            out.push_str(&format!(" {} |", cell(id, label)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ShrinkageTarget;

    fn scenario(signal: Signal) -> ScenarioConfig {
        ScenarioConfig {
            id: None,
            n: 50,
            signal,
            estimators: vec![EstimatorSpec::Identity, EstimatorSpec::Oracle],
            replications: 3,
            base_seed: 7,
        }
    }

    #[test]
    fn binary_truths() {
        let s = scenario(Signal::Binary { k: 0, mu: 5.0 });
        assert!(generate_truth(&s, 0).iter().all(|v| *v == 0.0));
        let s = scenario(Signal::Binary { k: 50, mu: 3.0 });
        assert!(generate_truth(&s, 1).iter().all(|v| *v == 3.0));
        let s = scenario(Signal::Binary { k: 5, mu: 3.0 });
        assert_eq!(
            generate_truth(&s, 0).iter().filter(|v| **v == 3.0).count(),
            5
        );
    }

    #[test]
    fn perturbed_truth_moves_every_coordinate() {
        let s = scenario(Signal::BinaryPerturbed {
            k: 10,
            mu: 5.0,
            half_width: 0.2,
        });
        let t = generate_truth(&s, 0);
        assert!(t[..10].iter().all(|v| (v - 5.0).abs() <= 0.2 && *v != 5.0));
        assert!(t[10..].iter().all(|v| v.abs() <= 0.2 && *v != 0.0));
    }

    #[test]
    fn truth_is_reproducible_and_rep_dependent() {
        let s = scenario(Signal::Gaussian {
            mu: 3.0,
            sigma2: 0.1,
        });
        assert_eq!(generate_truth(&s, 2), generate_truth(&s, 2));
        assert_ne!(generate_truth(&s, 2), generate_truth(&s, 3));
        let t = generate_truth(&s, 0);
        let x = generate_observations(&s, 0, &t);
        assert_ne!(t, x);
    }

    #[test]
    fn oracle_on_null_scenario_is_exact() {
        let s = scenario(Signal::Binary { k: 0, mu: 1.0 });
        let recs = run_scenario(&s).unwrap();
        assert_eq!(recs.len(), 6);
        for r in recs.iter().filter(|r| r.estimator == "oracle") {
            assert_eq!(r.total_sq_error, Some(0.0));
        }
    }

    #[test]
    fn precondition_failures_become_skipped_rows() {
        let mut s = scenario(Signal::Binary { k: 1, mu: 1.0 });
        s.n = 3;
        s.estimators = vec![
            EstimatorSpec::JamesStein {
                target: ShrinkageTarget::GrandMean,
            },
            EstimatorSpec::Identity,
        ];
        let recs = run_scenario(&s).unwrap();
        let js: Vec<_> = recs
            .iter()
            .filter(|r| r.estimator == "james_stein")
            .collect();
        assert!(js
            .iter()
            .all(|r| r.total_sq_error.is_none() && r.skipped.is_some()));
        let agg = aggregate(&recs);
        let row = agg.iter().find(|r| r.estimator == "james_stein").unwrap();
        assert_eq!((row.mean, row.reps), (None, 0));
    }

    #[test]
    fn aggregate_conventions() {
        let rec = |rep, v| SimulationRecord {
            scenario: "s".into(),
            estimator: "e".into(),
            rep,
            total_sq_error: Some(v),
            wall_time_ms: 0.0,
            seed: 0,
            skipped: None,
        };
        let one = aggregate(&[rec(0, 4.0)]);
        assert_eq!((one[0].mean, one[0].se), (Some(4.0), Some(0.0)));
        let same = aggregate(&[rec(0, 2.0), rec(1, 2.0), rec(2, 2.0)]);
        assert_eq!(same[0].se, Some(0.0));
        let two = aggregate(&[rec(1, 3.0), rec(0, 1.0)]);
        assert_eq!(two[0].mean, Some(2.0));
        assert!((two[0].se.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scenario_parsing_reports_paths() {
        let ok = r#"{"n": 10, "signal": {"kind": "binary", "k": 2, "mu": 3}, "estimators": [{"kind": "identity"}]}"#;
        let s = parse_scenarios(ok).unwrap();
        assert_eq!(s[0].replications, 100);
        assert_eq!(s[0].id(), "n10_k2_mu3");

        let bad = r#"{"scenarios": [{"n": 10, "signal": {"kind": "binary", "k": "x", "mu": 3}, "estimators": []}]}"#;
        match parse_scenarios(bad) {
            Err(Error::Schema { path, .. }) => assert!(path.starts_with("scenarios[0].signal")),
            other => panic!("{other:?}"),
        }
        let too_many =
            r#"{"n": 10, "signal": {"kind": "binary", "k": 11, "mu": 3}, "estimators": []}"#;
        match parse_scenarios(too_many) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "scenarios[0].signal.k"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_headers() {
        let s = scenario(Signal::Binary { k: 2, mu: 1.0 });
        let recs = run_scenario(&s).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,estimator,rep,total_sq_error,wall_time_ms,seed\n"));
        let mut buf = Vec::new();
        write_aggregate_csv(&aggregate(&recs), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,estimator,mean_total_sq_error,se,reps\n"));
        let md = markdown_table(std::slice::from_ref(&s), &aggregate(&recs));
        assert!(md.contains("| Identity |"));
        assert!(md.contains("n50_k2_mu1"));
    }
}
