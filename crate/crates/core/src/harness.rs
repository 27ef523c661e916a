//! Prequential (test-then-train) experiment driver.
//!
//! For every trial the stream is generated once and shared by all
//! algorithms; each time step every algorithm first predicts the batch (the
//! recorded misclassification) and only then trains on it.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    Aue, Aware, DriftSurf, DriftSurfConfig, Learner, MddmLearner, Oblivious, OnePassSgd, StreamRng, TrainingConfig,
    Transition,
};
use crate::data::{validate_stream, Stream};
use crate::error::{Error, Result};
use crate::linear::LossConfig;
use crate::mddm::{MddmConfig, WeightScheme};
use crate::optim::{BudgetPolicy, DivisionMode, ModelInit, UpdateKind};
use crate::streams::{append_intercept, generate, inject_label_swap, inject_rotation, load_csv, CsvOptions, GeneratorSpec};

pub const THREADS_ENV: &str = "DRIFTSURF_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum AlgorithmSpec {
    DriftSurf { greedy: bool },
    Aware,
    Mddm { scheme: WeightScheme },
    Aue { k: usize },
    Oblivious,
    OnePassSgd,
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::DriftSurf { greedy: true } => "driftsurf".into(),
            AlgorithmSpec::DriftSurf { greedy: false } => "driftsurf-nogreedy".into(),
            AlgorithmSpec::Aware => "aware".into(),
            AlgorithmSpec::Mddm { scheme } => match scheme {
                WeightScheme::Arithmetic { .. } => "mddm-a".into(),
                WeightScheme::Geometric { .. } => "mddm-g".into(),
                WeightScheme::Euler { .. } => "mddm-e".into(),
            },
            AlgorithmSpec::Aue { k: 10 } => "aue".into(),
            AlgorithmSpec::Aue { k } => format!("aue-k{k}"),
            AlgorithmSpec::Oblivious => "obl".into(),
            AlgorithmSpec::OnePassSgd => "1pass-sgd".into(),
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.trim().to_ascii_lowercase().as_str() {
            "driftsurf" => AlgorithmSpec::DriftSurf { greedy: true },
            "driftsurf-nogreedy" | "driftsurf-no-greedy" => AlgorithmSpec::DriftSurf { greedy: false },
            "aware" => AlgorithmSpec::Aware,
            "mddm" | "mddm-g" => AlgorithmSpec::Mddm { scheme: WeightScheme::GEOMETRIC },
            "mddm-a" => AlgorithmSpec::Mddm { scheme: WeightScheme::ARITHMETIC },
            "mddm-e" => AlgorithmSpec::Mddm { scheme: WeightScheme::EULER },
            "aue" => AlgorithmSpec::Aue { k: 10 },
            "obl" | "oblivious" => AlgorithmSpec::Oblivious,
            "1pass-sgd" | "onepass-sgd" => AlgorithmSpec::OnePassSgd,
            other => match other.strip_prefix("aue-k").map(str::parse::<usize>) {
                Some(Ok(k)) if k > 0 => AlgorithmSpec::Aue { k },
                _ => return Err(Error::config("algos", format!("unknown algorithm `{other}`"))),
            },
        };
        Ok(spec)
    }
}

pub fn parse_algorithms(list: &str) -> Result<Vec<AlgorithmSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injector {
    LabelSwap { at: Vec<usize> },
    Rotation { at: Vec<usize>, axes: (usize, usize), angle_deg: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Regenerated per trial with seed `seed + trial`.
    Generator(GeneratorSpec),
    /// Loaded once and replayed identically in every trial.
    Csv { path: PathBuf, options: CsvOptions },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub name: String,
    pub source: Source,
    pub injectors: Vec<Injector>,
    pub mu: f64,
    pub eta: f64,
    /// Known drift onsets, used only by the Aware oracle.
    pub drift_times: Vec<usize>,
    /// Append a constant feature after generation and injection.
    pub intercept: bool,
}

impl DatasetConfig {
    /// Built-in synthetic datasets with their default regularization, step
    /// size, batch size and drift times.
    pub fn preset(name: &str) -> Result<Self> {
        let b = 100;
        let (source, injectors, mu, eta, drift_times) = match name {
            "sea0" | "sea10" | "sea20" | "sea30" => {
                let noise: f64 = name[3..].parse::<f64>().expect("numeric suffix") / 100.0;
                (GeneratorSpec::sea(noise, b, 1000, 0), vec![], 1e-2, 1e-3, vec![25, 50, 75])
            }
            "sea0-stationary" => {
                let mut spec = GeneratorSpec::sea(0.0, b, 1000, 0);
                spec.family = crate::streams::Family::Sea { thresholds: vec![7.0] };
                spec.schedule = crate::streams::DriftSchedule::none();
                (spec, vec![], 1e-2, 1e-3, vec![])
            }
            "sea-gradual" => (GeneratorSpec::sea_gradual(b, 1000, 0), vec![], 1e-2, 1e-3, vec![40]),
            "hyper-slow" => (GeneratorSpec::hyperplane(0.001, HYPERPLANE_NOISE, b, 1000, 0), vec![], 1e-3, 1e-1, vec![]),
            "hyper-fast" => (GeneratorSpec::hyperplane(0.1, HYPERPLANE_NOISE, b, 1000, 0), vec![], 1e-3, 1e-2, vec![]),
            "sine1" => (GeneratorSpec::sine1(b, 100, 0), vec![], 1e-3, 2e-1, vec![20, 40, 60, 80]),
            "sine1-swap" => {
                let mut spec = GeneratorSpec::sine1(b, 100, 0);
                spec.schedule = crate::streams::DriftSchedule::none();
                (spec, vec![Injector::LabelSwap { at: vec![30, 60] }], 1e-3, 2e-1, vec![30, 60])
            }
            "mixed" => (GeneratorSpec::mixed(b, 1000, 0), vec![], 1e-3, 1e-1, vec![20, 40, 60, 80]),
            "circles" => (GeneratorSpec::circles(b, 100, 0), vec![], 1e-3, 1e-1, vec![25, 50, 75]),
            other => return Err(Error::config("dataset", format!("unknown dataset `{other}`"))),
        };
        Ok(Self {
            name: name.to_string(),
            source: Source::Generator(source),
            injectors,
            mu,
            eta,
            drift_times,
            intercept: true,
        })
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "sea0", "sea10", "sea20", "sea30", "sea-gradual", "sea0-stationary", "hyper-slow", "hyper-fast", "sine1",
            "sine1-swap", "mixed", "circles",
        ]
    }

    pub fn batch_size(&self) -> usize {
        match &self.source {
            Source::Generator(spec) => spec.batch_size,
            Source::Csv { options, .. } => options.batch_size,
        }
    }

    /// Materializes the stream for one trial.
    pub fn stream(&self, trial_seed: u64) -> Result<Stream> {
        let mut stream = match &self.source {
            Source::Generator(spec) => generate(&GeneratorSpec { seed: trial_seed, ..spec.clone() })?,
            Source::Csv { path, options } => load_csv(path, options)?,
        };
        for inj in &self.injectors {
            stream = match inj {
                Injector::LabelSwap { at } => inject_label_swap(&stream, at),
                Injector::Rotation { at, axes, angle_deg } => inject_rotation(&stream, at, *axes, *angle_deg)?,
            };
        }
        if self.intercept {
            stream = append_intercept(&stream);
        }
        validate_stream(&stream)?;
        Ok(stream)
    }
}

/// Label noise of the hyperplane presets.
pub const HYPERPLANE_NOISE: f64 = 0.05;

/// Budget expressed as a multiple of the batch size, e.g. `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSpec {
    pub per_point: usize,
    pub mode: DivisionMode,
}

impl RhoSpec {
    pub fn policy(&self, m: usize) -> BudgetPolicy {
        BudgetPolicy { rho: self.per_point * m, mode: self.mode }
    }
}

impl FromStr for RhoSpec {
    type Err = Error;

    /// Accepts `2m` (per model) or `4m/alg` (per algorithm).
    fn from_str(s: &str) -> Result<Self> {
        let (count, mode) = match s.split_once('/') {
            Some((c, m)) => (c, parse_mode(m)?),
            None => (s, DivisionMode::PerModel),
        };
        let n = count
            .trim()
            .strip_suffix('m')
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::config("rho", format!("expected e.g. `2m`, got `{s}`")))?;
        Ok(RhoSpec { per_point: n, mode })
    }
}

pub fn parse_mode(s: &str) -> Result<DivisionMode> {
    match s.trim() {
        "per-model" | "model" => Ok(DivisionMode::PerModel),
        "per-alg" | "per-algorithm" | "alg" => Ok(DivisionMode::PerAlgorithm),
        other => Err(Error::config("rho_mode", format!("expected per-model or per-alg, got `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    pub rho: RhoSpec,
    pub trials: usize,
    pub seed: u64,
    pub update: UpdateKind,
    pub init: ModelInit,
    pub driftsurf: DriftSurfConfig,
    pub mddm: MddmConfig,
}

impl ExperimentConfig {
    /// Two gradient computations per point per model, five trials.
    pub fn new(dataset: DatasetConfig, algorithms: Vec<AlgorithmSpec>) -> Self {
        Self {
            dataset,
            algorithms,
            rho: RhoSpec { per_point: 2, mode: DivisionMode::PerModel },
            trials: 5,
            seed: 0,
            update: UpdateKind::Strsaga,
            init: ModelInit::Zero,
            driftsurf: DriftSurfConfig::default(),
            mddm: MddmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "at least one algorithm required"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be positive"));
        }
        if self.dataset.batch_size() == 0 {
            return Err(Error::config("dataset.batch_size", "must be positive"));
        }
        if !(self.dataset.eta > 0.0) {
            return Err(Error::config("dataset.eta", "must be positive"));
        }
        LossConfig::new(self.dataset.mu).map_err(|_| Error::config("dataset.mu", "must be positive"))?;
        if self.driftsurf.reactive_len == 0 {
            return Err(Error::config("driftsurf.reactive_len", "must be positive"));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &self.algorithms {
            if !seen.insert(a.label()) {
                return Err(Error::config("algorithms", format!("`{a}` listed twice")));
            }
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    pub fn build_learner(&self, algo: AlgorithmSpec, dim: usize, rng: &mut StreamRng) -> Box<dyn Learner> {
        let training = TrainingConfig {
            dim,
            update: self.update,
            eta: self.dataset.eta,
            loss: LossConfig { mu: self.dataset.mu },
            init: self.init,
        };
        let budget = self.rho.policy(self.dataset.batch_size());
        let name = algo.label();
        match algo {
            AlgorithmSpec::DriftSurf { greedy } => {
                let cfg = DriftSurfConfig { greedy, ..self.driftsurf };
                Box::new(DriftSurf::new(name, cfg, training, budget, rng))
            }
            AlgorithmSpec::Aware => {
                Box::new(Aware::new(name, self.dataset.drift_times.iter().copied(), training, budget, rng))
            }
            AlgorithmSpec::Mddm { scheme } => {
                Box::new(MddmLearner::new(name, MddmConfig { scheme, ..self.mddm }, training, budget, rng))
            }
            AlgorithmSpec::Aue { k } => Box::new(Aue::new(name, k, training, budget)),
            AlgorithmSpec::Oblivious => Box::new(Oblivious::new(name, training, budget, rng)),
            AlgorithmSpec::OnePassSgd => Box::new(OnePassSgd::new(name, training, rng)),
        }
    }
}

/// Seed for one algorithm's private RNG in one trial.
pub fn learner_seed(trial_seed: u64, algo_index: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = trial_seed ^ (algo_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One algorithm's result on one time step of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub trial: usize,
    pub time_step: usize,
    pub algorithm: String,
    pub misclassification: f64,
    pub state: String,
    pub model_id: u64,
    pub segment_start: usize,
    pub gradients: usize,
    pub budgeted: usize,
    pub models_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub trial: usize,
    pub algorithm: String,
    #[serde(flatten)]
    pub transition: Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub algorithm: String,
    pub mean_misclass_median: f64,
    pub trial_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<StepRecord>,
    pub transitions: Vec<TransitionRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn median_of(&self, algorithm: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.algorithm == algorithm).map(|r| r.mean_misclass_median)
    }

    pub fn records_for<'a>(&'a self, algorithm: &'a str, trial: usize) -> impl Iterator<Item = &'a StepRecord> + 'a {
        self.records.iter().filter(move |r| r.algorithm == algorithm && r.trial == trial)
    }

    pub fn transitions_for<'a>(&'a self, algorithm: &'a str, trial: usize) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions
            .iter()
            .filter(move |r| r.algorithm == algorithm && r.trial == trial)
            .map(|r| &r.transition)
    }
}

type TrialOutput = (Vec<StepRecord>, Vec<TransitionRecord>);

/// Runs one trial; every learner sees the identical stream.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize, stream: &Stream) -> Result<TrialOutput> {
    let dim = stream.first().and_then(|b| b.points.first()).map(|p| p.dim()).unwrap_or(0);
    let trial_seed = cfg.trial_seed(trial);
    let mut learners: Vec<(Box<dyn Learner>, StreamRng)> = cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(i, &algo)| {
            let mut rng = StreamRng::seed_from_u64(learner_seed(trial_seed, i));
            let learner = cfg.build_learner(algo, dim, &mut rng);
            (learner, rng)
        })
        .collect();

    let mut records = Vec::with_capacity(stream.len() * learners.len());
    let mut transitions = Vec::new();
    for batch in stream {
        for (learner, rng) in &mut learners {
            let outcome = learner.step(batch, rng)?;
            let wrong = outcome.predictions.iter().zip(batch.labels()).filter(|(p, y)| **p != *y).count();
            records.push(StepRecord {
                trial,
                time_step: batch.time_step,
                algorithm: learner.name().to_string(),
                misclassification: wrong as f64 / batch.len().max(1) as f64,
                state: outcome.phase.map_or_else(|| "-".to_string(), |p| p.to_string()),
                model_id: outcome.serving_model,
                segment_start: outcome.serving_segment_start,
                gradients: outcome.gradients,
                budgeted: outcome.budgeted,
                models_trained: outcome.models_trained,
            });
            transitions.extend(learner.drain_transitions().into_iter().map(|transition| TransitionRecord {
                trial,
                algorithm: learner.name().to_string(),
                transition,
            }));
        }
    }
    Ok((records, transitions))
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::config(THREADS_ENV, format!("expected a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::config(THREADS_ENV, e.to_string()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let shared = match &cfg.dataset.source {
        Source::Csv { .. } => Some(cfg.dataset.stream(cfg.seed)?),
        Source::Generator(_) => None,
    };
    let pool = thread_pool()?;
    let outputs: Vec<TrialOutput> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let owned;
                let stream = match &shared {
                    Some(s) => s,
                    None => {
                        owned = cfg.dataset.stream(cfg.trial_seed(trial))?;
                        &owned
                    }
                };
                run_trial(cfg, trial, stream)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    let mut transitions = Vec::new();
    for (r, t) in outputs {
        records.extend(r);
        transitions.extend(t);
    }
    let summary = summarize(&cfg.dataset.name, &records);
    Ok(ExperimentResult { records, transitions, summary })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per algorithm: mean misclassification over time within each trial, then
/// the median over trials. Algorithms keep their first-seen order.
pub fn summarize(dataset: &str, records: &[StepRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    order
        .into_iter()
        .map(|algo| {
            let mut trials: Vec<usize> = records.iter().filter(|r| r.algorithm == algo).map(|r| r.trial).collect();
            trials.sort_unstable();
            trials.dedup();
            let trial_means: Vec<f64> = trials
                .iter()
                .map(|&t| {
                    let risks: Vec<f64> = records
                        .iter()
                        .filter(|r| r.algorithm == algo && r.trial == t)
                        .map(|r| r.misclassification)
                        .collect();
                    risks.iter().sum::<f64>() / risks.len() as f64
                })
                .collect();
            SummaryRow {
                dataset: dataset.to_string(),
                algorithm: algo.to_string(),
                mean_misclass_median: median(&trial_means),
                trial_means,
            }
        })
        .collect()
}

/// Median across trials of each step's misclassification, for time-series plots.
pub fn step_medians(records: &[StepRecord]) -> Vec<(String, usize, f64)> {
    let mut groups: Vec<((String, usize), Vec<f64>)> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for r in records {
        let key = (r.algorithm.clone(), r.time_step);
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(r.misclassification);
    }
    groups.into_iter().map(|((algo, t), vals)| (algo, t, median(&vals))).collect()
}

fn csv_error(path: &Path, e: impl fmt::Display) -> Error {
    Error::Csv { path: path.display().to_string(), reason: e.to_string() }
}

pub fn write_records_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["dataset", "algorithm", "mean_misclass_median"]).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([r.dataset.as_str(), r.algorithm.as_str(), &format!("{:.6}", r.mean_misclass_median)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_step_medians_csv(path: &Path, rows: &[(String, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["algorithm", "time_step", "median_misclassification"]).map_err(|e| csv_error(path, e))?;
    for (algo, t, m) in rows {
        w.write_record([algo.as_str(), &t.to_string(), &format!("{m:.6}")]).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per line.
pub fn write_transitions_log(path: &Path, transitions: &[TransitionRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in transitions {
        serde_json::to_writer(&mut w, t).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records.csv`, `summary.csv`, `step_medians.csv` and
/// `transitions.log` into `dir`.
pub fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_records_csv(&dir.join("records.csv"), &result.records)?;
    write_summary_csv(&dir.join("summary.csv"), &result.summary)?;
    write_step_medians_csv(&dir.join("step_medians.csv"), &step_medians(&result.records))?;
    write_transitions_log(&dir.join("transitions.log"), &result.transitions)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, t: usize, algo: &str, misclassification: f64) -> StepRecord {
        StepRecord {
            trial,
            time_step: t,
            algorithm: algo.into(),
            misclassification,
            state: "-".into(),
            model_id: 0,
            segment_start: 0,
            gradients: 0,
            budgeted: 0,
            models_trained: 1,
        }
    }

    #[test]
    fn algorithm_labels_round_trip() {
        for name in ["driftsurf", "driftsurf-nogreedy", "aware", "mddm-a", "mddm-g", "mddm-e", "aue", "aue-k3", "obl", "1pass-sgd"] {
            let spec: AlgorithmSpec = name.parse().unwrap();
            assert_eq!(spec.label(), name);
        }
        assert_eq!("mddm".parse::<AlgorithmSpec>().unwrap().label(), "mddm-g");
        assert!("aue-k0".parse::<AlgorithmSpec>().is_err());
        let err = parse_algorithms("driftsurf,bogus").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn rho_parsing() {
        assert_eq!("2m".parse::<RhoSpec>().unwrap(), RhoSpec { per_point: 2, mode: DivisionMode::PerModel });
        assert_eq!("4m/per-alg".parse::<RhoSpec>().unwrap(), RhoSpec { per_point: 4, mode: DivisionMode::PerAlgorithm });
        assert!("4".parse::<RhoSpec>().is_err());
        assert!("4m/sometimes".parse::<RhoSpec>().is_err());
        let policy = RhoSpec { per_point: 4, mode: DivisionMode::PerAlgorithm }.policy(1000);
        assert_eq!(policy.model_budget(10), 400);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[0.3, 0.1, 0.2]), 0.2);
        assert_eq!(median(&[0.4, 0.1, 0.2, 0.3]), 0.25);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn summary_is_median_of_time_averages() {
        let mut records = Vec::new();
        for (trial, vals) in [[0.1, 0.3], [0.5, 0.5], [0.0, 0.2]].iter().enumerate() {
            for (t, &v) in vals.iter().enumerate() {
                records.push(record(trial, t, "a", v));
                records.push(record(trial, t, "b", 1.0 - v));
            }
        }
        let rows = summarize("toy", &records);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].algorithm, "a");
        assert_eq!(rows[0].trial_means, vec![0.2, 0.5, 0.1]);
        assert!((rows[0].mean_misclass_median - 0.2).abs() < 1e-12);
        assert!((rows[1].mean_misclass_median - 0.8).abs() < 1e-12);
        let steps = step_medians(&records);
        assert_eq!(steps[0], ("a".to_string(), 0, 0.1));
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = ExperimentConfig::new(DatasetConfig::preset("sine1").unwrap(), vec![]);
        assert!(cfg.validate().unwrap_err().to_string().contains("algorithms"));
        cfg.algorithms = parse_algorithms("aue,aue").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("twice"));
        cfg.algorithms = parse_algorithms("aue").unwrap();
        cfg.trials = 0;
        assert!(cfg.validate().unwrap_err().to_string().contains("trials"));
        cfg.trials = 1;
        cfg.dataset.mu = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("mu"));
        assert!(DatasetConfig::preset("nope").is_err());
    }

    #[test]
    fn learner_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..5).flat_map(|t| (0..6).map(move |a| learner_seed(t, a))).collect();
        assert_eq!(seeds.len(), 30);
    }

    #[test]
    fn presets_materialize() {
        for name in DatasetConfig::preset_names() {
            let d = DatasetConfig::preset(name).unwrap();
            let stream = d.stream(3).unwrap();
            assert_eq!(stream.len(), 100, "{name}");
            assert!(stream.iter().all(|b| b.len() == d.batch_size()), "{name}");
            let last = *stream[0].points[0].features.last().unwrap();
            assert_eq!(last, 1.0, "{name}: intercept appended");
        }
        let swap = DatasetConfig::preset("sine1-swap").unwrap();
        let mut plain = swap.clone();
        plain.injectors.clear();
        let (a, b) = (swap.stream(0).unwrap(), plain.stream(0).unwrap());
        assert_eq!(a[29].points[0].label, b[29].points[0].label);
        assert_eq!(a[30].points[0].label, b[30].points[0].label.flipped());
        assert_eq!(a[60].points[0].label, b[60].points[0].label);
    }
}
