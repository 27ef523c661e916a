//! String-level run options shared by the `run` subcommand and sweep files.
//!
//! A sweep file holds one `key = value` pair per line (`#` starts a comment).
//! Keys are the long `run` flags with `-` or `_`; a value of several
//! whitespace-separated items makes that key a grid axis, and the sweep runs
//! the cartesian product of all axes. Every grid point writes into
//! `<out>/<dataset>_<rho>_<rho_mode>_<update>`.
//!
//! ```text
//! dataset = sea0 sea20 sine1
//! algos = driftsurf,aware,mddm-g,aue
//! rho = 2m 4m
//! rho_mode = per-model
//! trials = 5
//! out = results/sweep
//! ```

use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::harness::{parse_algorithms, parse_mode, DatasetConfig, ExperimentConfig, Injector, RhoSpec, Source};
use crate::optim::{ModelInit, UpdateKind};
use crate::streams::CsvOptions;

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RunSpec {
    /// Built-in dataset name or `csv:<path>`.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value = "driftsurf,aware,mddm-g,aue")]
    pub algos: String,
    #[arg(long, default_value = "per-model")]
    pub rho_mode: String,
    /// Gradient computations per step as a multiple of the batch size.
    #[arg(long, default_value = "2m")]
    pub rho: String,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Update process: strsaga or sgd.
    #[arg(long, default_value = "strsaga")]
    pub update: String,
    /// Model initialization: zero or gaussian.
    #[arg(long, default_value = "zero")]
    pub init: String,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated drift times for the Aware oracle.
    #[arg(long)]
    pub drift_times: Option<String>,
    /// Comma-separated steps at which to negate all labels.
    #[arg(long)]
    pub swap_at: Option<String>,
    /// Comma-separated steps at which to rotate two coordinates.
    #[arg(long)]
    pub rotate_at: Option<String>,
    #[arg(long, default_value = "0,7")]
    pub rotate_axes: String,
    #[arg(long, default_value_t = 180.0)]
    pub rotate_angle: f64,
    /// CSV label column.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// CSV label mapping such as `up:+1,down:-1`.
    #[arg(long)]
    pub label_map: Option<String>,
    /// Comma-separated CSV columns to one-hot encode.
    #[arg(long)]
    pub categorical: Option<String>,
    /// Min-max scale CSV numeric columns to [0, 1].
    #[arg(long)]
    pub scale: bool,
    /// Train homogeneous models without the appended constant feature.
    #[arg(long)]
    pub no_intercept: bool,
}

fn parse_list(field: &str, raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::config(field, format!("`{s}` is not a step"))))
        .collect()
}

fn parse_label_map(raw: &str) -> Result<HashMap<String, Label>> {
    raw.split(',')
        .map(|pair| {
            let (k, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::config("label_map", format!("expected key:+1 or key:-1, got `{pair}`")))?;
            let label = match v.trim() {
                "+1" | "1" => Label::Pos,
                "-1" | "0" => Label::Neg,
                other => return Err(Error::config("label_map", format!("`{other}` is not +1 or -1"))),
            };
            Ok((k.trim().to_string(), label))
        })
        .collect()
}

impl RunSpec {
    pub fn new(dataset: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            algos: "driftsurf,aware,mddm-g,aue".into(),
            rho_mode: "per-model".into(),
            rho: "2m".into(),
            trials: 5,
            seed: 0,
            update: "strsaga".into(),
            init: "zero".into(),
            out: PathBuf::from("results"),
            mu: None,
            eta: None,
            batch_size: None,
            drift_times: None,
            swap_at: None,
            rotate_at: None,
            rotate_axes: "0,7".into(),
            rotate_angle: 180.0,
            label_column: "label".into(),
            label_map: None,
            categorical: None,
            scale: false,
            no_intercept: false,
        }
    }

    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let mut dataset = match self.dataset.strip_prefix("csv:") {
            Some(path) => DatasetConfig {
                name: PathBuf::from(path).file_stem().map_or("csv".into(), |s| s.to_string_lossy().into_owned()),
                source: Source::Csv {
                    path: path.into(),
                    options: CsvOptions {
                        label_column: self.label_column.clone(),
                        label_map: self.label_map.as_deref().map(parse_label_map).transpose()?,
                        categorical: self
                            .categorical
                            .as_deref()
                            .map(|c| c.split(',').map(|s| s.trim().to_string()).collect())
                            .unwrap_or_default(),
                        scale_to_unit: self.scale,
                        batch_size: self
                            .batch_size
                            .ok_or_else(|| Error::config("batch_size", "required for csv datasets"))?,
                    },
                },
                injectors: Vec::new(),
                mu: self.mu.ok_or_else(|| Error::config("mu", "required for csv datasets"))?,
                eta: self.eta.ok_or_else(|| Error::config("eta", "required for csv datasets"))?,
                drift_times: Vec::new(),
                intercept: !self.no_intercept,
            },
            None => {
                let mut d = DatasetConfig::preset(&self.dataset)?;
                d.intercept = !self.no_intercept;
                if let Some(mu) = self.mu {
                    d.mu = mu;
                }
                if let Some(eta) = self.eta {
                    d.eta = eta;
                }
                if let (Some(m), Source::Generator(spec)) = (self.batch_size, &mut d.source) {
                    spec.batch_size = m;
                }
                d
            }
        };
        if let Some(times) = &self.drift_times {
            dataset.drift_times = parse_list("drift_times", times)?;
        }
        if let Some(at) = &self.swap_at {
            dataset.injectors.push(Injector::LabelSwap { at: parse_list("swap_at", at)? });
        }
        if let Some(at) = &self.rotate_at {
            let axes = parse_list("rotate_axes", &self.rotate_axes)?;
            let [i, j] = axes[..] else {
                return Err(Error::config("rotate_axes", "expected two indices, e.g. 0,7"));
            };
            dataset.injectors.push(Injector::Rotation {
                at: parse_list("rotate_at", at)?,
                axes: (i, j),
                angle_deg: self.rotate_angle,
            });
        }

        let mut rho: RhoSpec = self.rho.parse()?;
        rho.mode = parse_mode(&self.rho_mode)?;
        let mut cfg = ExperimentConfig::new(dataset, parse_algorithms(&self.algos)?);
        cfg.rho = rho;
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.update = match self.update.as_str() {
            "strsaga" => UpdateKind::Strsaga,
            "sgd" => UpdateKind::Sgd,
            other => return Err(Error::config("update", format!("expected strsaga or sgd, got `{other}`"))),
        };
        cfg.init = match self.init.as_str() {
            "zero" => ModelInit::Zero,
            "gaussian" => ModelInit::Gaussian { std: 0.01 },
            other => return Err(Error::config("init", format!("expected zero or gaussian, got `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::config(key, format!("`{v}` is not a number")));
        let int = |v: &str| v.parse::<u64>().map_err(|_| Error::config(key, format!("`{v}` is not an integer")));
        match key {
            "dataset" => self.dataset = value.into(),
            "algos" => self.algos = value.into(),
            "rho_mode" => self.rho_mode = value.into(),
            "rho" => self.rho = value.into(),
            "trials" => self.trials = int(value)? as usize,
            "seed" => self.seed = int(value)?,
            "update" => self.update = value.into(),
            "init" => self.init = value.into(),
            "out" => self.out = value.into(),
            "mu" => self.mu = Some(num(value)?),
            "eta" => self.eta = Some(num(value)?),
            "batch_size" => self.batch_size = Some(int(value)? as usize),
            "drift_times" => self.drift_times = Some(value.into()),
            "swap_at" => self.swap_at = Some(value.into()),
            "rotate_at" => self.rotate_at = Some(value.into()),
            "rotate_axes" => self.rotate_axes = value.into(),
            "rotate_angle" => self.rotate_angle = num(value)?,
            "label_column" => self.label_column = value.into(),
            "label_map" => self.label_map = Some(value.into()),
            "categorical" => self.categorical = Some(value.into()),
            "scale" => self.scale = matches!(value, "true" | "1" | "yes"),
            "no_intercept" => self.no_intercept = matches!(value, "true" | "1" | "yes"),
            _ => return Err(Error::config(key, "unknown sweep key")),
        }
        Ok(())
    }
}

/// Expands a sweep file into one run per grid point.
pub fn parse_sweep(text: &str) -> Result<Vec<RunSpec>> {
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", n + 1), "expected key = value"))?;
        let key = key.trim().replace('-', "_");
        let values: Vec<String> = value.split_whitespace().map(str::to_string).collect();
        if values.is_empty() {
            return Err(Error::config(key, "empty value"));
        }
        if axes.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(key, "given twice"));
        }
        axes.push((key, values));
    }
    if !axes.iter().any(|(k, _)| k == "dataset") {
        return Err(Error::config("dataset", "sweep needs a dataset key"));
    }

    let mut specs = vec![RunSpec::new("")];
    for (key, values) in &axes {
        let mut next = Vec::with_capacity(specs.len() * values.len());
        for spec in &specs {
            for v in values {
                let mut s = spec.clone();
                s.set(key, v)?;
                next.push(s);
            }
        }
        specs = next;
    }
    for s in &mut specs {
        let tag = format!("{}_{}_{}_{}", s.dataset.replace([':', '/'], "-"), s.rho, s.rho_mode, s.update);
        s.out = s.out.join(tag);
    }
    Ok(specs)
}
