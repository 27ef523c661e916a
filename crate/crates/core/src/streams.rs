//! Synthetic drifting streams, drift injectors for stationary data, and CSV
//! ingestion.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Batch, Label, LabeledPoint, Stream};
use crate::error::{Error, Result};

/// When the concept changes. Abrupt change points switch concept at that
/// step; gradual windows `[start, end)` mix the old and new concept with the
/// new concept's probability ramping linearly from 0 to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSchedule {
    Abrupt(Vec<usize>),
    Gradual(Vec<(usize, usize)>),
}

impl DriftSchedule {
    pub fn none() -> Self {
        DriftSchedule::Abrupt(Vec::new())
    }

    pub fn validate(&self, total_steps: usize) -> Result<()> {
        let out_of_range = |what: String| {
            Error::InvalidSpec(format!("{what} invalid for a stream of {total_steps} steps"))
        };
        match self {
            DriftSchedule::Abrupt(points) => {
                for (k, &p) in points.iter().enumerate() {
                    if p >= total_steps || (k > 0 && p <= points[k - 1]) {
                        return Err(out_of_range(format!("change point {p}")));
                    }
                }
            }
            DriftSchedule::Gradual(windows) => {
                let mut prev_end = 0;
                for &(start, end) in windows {
                    if start >= end || end > total_steps || start < prev_end {
                        return Err(out_of_range(format!("drift window [{start}, {end})")));
                    }
                    prev_end = end;
                }
            }
        }
        Ok(())
    }

    /// Steps at which a drift begins.
    pub fn onsets(&self) -> Vec<usize> {
        match self {
            DriftSchedule::Abrupt(points) => points.clone(),
            DriftSchedule::Gradual(windows) => windows.iter().map(|w| w.0).collect(),
        }
    }

    /// Concept index for one point arriving at step `t`.
    fn concept_at<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> usize {
        match self {
            DriftSchedule::Abrupt(points) => points.iter().filter(|&&p| p <= t).count(),
            DriftSchedule::Gradual(windows) => {
                let mut concept = 0;
                for &(start, end) in windows {
                    if t >= end {
                        concept += 1;
                    } else if t >= start {
                        let p_new = (t - start) as f64 / (end - start) as f64 + 0.5 / (end - start) as f64;
                        if rng.random::<f64>() < p_new {
                            concept += 1;
                        }
                        break;
                    } else {
                        break;
                    }
                }
                concept
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Three attributes in [0, 10]; positive iff `x1 + x2 <= threshold`,
    /// thresholds applied in list order as the schedule advances.
    Sea { thresholds: Vec<f64> },
    /// Rotating hyperplane over `dim` attributes in [0, 1]. Every coordinate of
    /// the normal vector moves by `magnitude` per point; each direction is
    /// reversed with probability `reversal_prob` per point.
    Hyperplane { dim: usize, magnitude: f64, reversal_prob: f64 },
    /// Two attributes in [0, 1]; positive iff `x2 <= sin(x1)`, labels
    /// reversed on every concept change.
    Sine1,
    /// `x1, x2` boolean, `x3, x4` in [0, 1]; positive iff at least two of
    /// `x1`, `x2`, `x4 < 0.5 + 0.3 sin(3 pi x3)` hold. Reversed on change.
    Mixed,
    /// Two attributes in [0, 1]; positive iff
    /// `(x1 - c1)^2 + (x2 - c2)^2 <= r` for the active `(c1, c2, r)`.
    Circles { concepts: Vec<(f64, f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub schedule: DriftSchedule,
    /// Probability of flipping each generated label.
    pub noise_rate: f64,
    pub total_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// SEA with the 7, 8, 9.5, 9 concept order over four equal segments.
    pub fn sea(noise_rate: f64, total_steps: usize, batch_size: usize, seed: u64) -> Self {
        let q = total_steps / 4;
        Self {
            family: Family::Sea { thresholds: vec![7.0, 8.0, 9.5, 9.0] },
            schedule: DriftSchedule::Abrupt(vec![q, 2 * q, 3 * q]),
            noise_rate,
            total_steps,
            batch_size,
            seed,
        }
    }

    /// SEA mixing the 9 and 8 concepts over steps [40, 60) of 100.
    pub fn sea_gradual(total_steps: usize, batch_size: usize, seed: u64) -> Self {
        let start = total_steps * 2 / 5;
        let end = total_steps * 3 / 5;
        Self {
            family: Family::Sea { thresholds: vec![9.0, 8.0] },
            schedule: DriftSchedule::Gradual(vec![(start, end)]),
            noise_rate: 0.0,
            total_steps,
            batch_size,
            seed,
        }
    }

    pub fn hyperplane(magnitude: f64, noise_rate: f64, total_steps: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            family: Family::Hyperplane { dim: 10, magnitude, reversal_prob: 0.1 },
            schedule: DriftSchedule::none(),
            noise_rate,
            total_steps,
            batch_size,
            seed,
        }
    }

    pub fn sine1(total_steps: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            family: Family::Sine1,
            schedule: DriftSchedule::Abrupt(fifths(total_steps)),
            noise_rate: 0.0,
            total_steps,
            batch_size,
            seed,
        }
    }

    pub fn mixed(total_steps: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            family: Family::Mixed,
            schedule: DriftSchedule::Abrupt(fifths(total_steps)),
            noise_rate: 0.0,
            total_steps,
            batch_size,
            seed,
        }
    }

    /// Four circles with 5-step transitions starting at 1/4, 1/2 and 3/4 of the stream.
    pub fn circles(total_steps: usize, batch_size: usize, seed: u64) -> Self {
        let q = total_steps / 4;
        let win = 5.min(q.max(1));
        Self {
            family: Family::Circles {
                concepts: vec![(0.2, 0.5, 0.15), (0.4, 0.5, 0.2), (0.6, 0.5, 0.25), (0.8, 0.5, 0.3)],
            },
            schedule: DriftSchedule::Gradual(vec![(q, q + win), (2 * q, 2 * q + win), (3 * q, 3 * q + win)]),
            noise_rate: 0.0,
            total_steps,
            batch_size,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            Family::Sea { .. } => 3,
            Family::Hyperplane { dim, .. } => *dim,
            Family::Sine1 | Family::Circles { .. } => 2,
            Family::Mixed => 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::InvalidSpec(format!("noise_rate {} not in [0, 1]", self.noise_rate)));
        }
        if self.batch_size == 0 || self.total_steps == 0 {
            return Err(Error::InvalidSpec("batch_size and total_steps must be positive".into()));
        }
        self.schedule.validate(self.total_steps)?;
        let changes = match &self.schedule {
            DriftSchedule::Abrupt(p) => p.len(),
            DriftSchedule::Gradual(w) => w.len(),
        };
        match &self.family {
            Family::Sea { thresholds } if thresholds.len() <= changes => Err(Error::InvalidSpec(format!(
                "SEA needs {} thresholds for {changes} changes",
                changes + 1
            ))),
            Family::Circles { concepts } if concepts.len() <= changes => Err(Error::InvalidSpec(format!(
                "Circles needs {} concepts for {changes} changes",
                changes + 1
            ))),
            Family::Hyperplane { dim: 0, .. } => Err(Error::InvalidSpec("hyperplane dim must be positive".into())),
            _ => Ok(()),
        }
    }
}

fn fifths(total_steps: usize) -> Vec<usize> {
    (1..5).map(|k| k * total_steps / 5).collect()
}

/// Produces exactly `total_steps` batches of `batch_size` points.
pub fn generate(spec: &GeneratorSpec) -> Result<Stream> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.batch_size;
    let mut hyper = match &spec.family {
        Family::Hyperplane { dim, .. } => Some(HyperplaneState::new(*dim, &mut rng)),
        _ => None,
    };
    let mut stream = Vec::with_capacity(spec.total_steps);
    for t in 0..spec.total_steps {
        let mut points = Vec::with_capacity(m);
        for i in 0..m {
            let concept = spec.schedule.concept_at(t, &mut rng);
            let (features, positive) = match &spec.family {
                Family::Sea { thresholds } => {
                    let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..10.0)).collect();
                    let pos = x[0] + x[1] <= thresholds[concept];
                    (x, pos)
                }
                Family::Hyperplane { magnitude, reversal_prob, .. } => {
                    let h = hyper.as_mut().expect("hyperplane state");
                    h.draw(*magnitude, *reversal_prob, &mut rng)
                }
                Family::Sine1 => {
                    let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                    let pos = sine1_positive(&x);
                    (x, pos != (concept % 2 == 1))
                }
                Family::Mixed => {
                    let x = vec![
                        if rng.random::<bool>() { 1.0 } else { 0.0 },
                        if rng.random::<bool>() { 1.0 } else { 0.0 },
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                    ];
                    let pos = mixed_positive(&x);
                    (x, pos != (concept % 2 == 1))
                }
                Family::Circles { concepts } => {
                    let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                    let (c1, c2, r) = concepts[concept];
                    let pos = (x[0] - c1).powi(2) + (x[1] - c2).powi(2) <= r;
                    (x, pos)
                }
            };
            let mut label = Label::from_bool(positive);
            if spec.noise_rate > 0.0 && rng.random::<f64>() < spec.noise_rate {
                label = label.flipped();
            }
            points.push(LabeledPoint::new((t * m + i) as u64, features, label));
        }
        stream.push(Batch::new(t, points));
    }
    Ok(stream)
}

pub fn sine1_positive(x: &[f64]) -> bool {
    x[1] <= x[0].sin()
}

pub fn mixed_positive(x: &[f64]) -> bool {
    let votes = [x[0] > 0.5, x[1] > 0.5, x[3] < 0.5 + 0.3 * (3.0 * PI * x[2]).sin()];
    votes.iter().filter(|&&v| v).count() >= 2
}

struct HyperplaneState {
    weights: Vec<f64>,
    directions: Vec<f64>,
}

impl HyperplaneState {
    fn new<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self {
            weights: (0..dim).map(|_| rng.random::<f64>()).collect(),
            directions: vec![1.0; dim],
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, magnitude: f64, reversal_prob: f64, rng: &mut R) -> (Vec<f64>, bool) {
        let x: Vec<f64> = (0..self.weights.len()).map(|_| rng.random::<f64>()).collect();
        let score: f64 = self.weights.iter().zip(&x).map(|(w, v)| w * v).sum();
        let half: f64 = 0.5 * self.weights.iter().sum::<f64>();
        let pos = score >= half;
        for (w, dir) in self.weights.iter_mut().zip(self.directions.iter_mut()) {
            *w += *dir * magnitude;
            if rng.random::<f64>() < reversal_prob {
                *dir = -*dir;
            }
        }
        (x, pos)
    }
}

/// Negates every label from each listed step onward; repeated steps toggle.
pub fn inject_label_swap(stream: &[Batch], at_steps: &[usize]) -> Stream {
    stream
        .iter()
        .map(|batch| {
            let swaps = at_steps.iter().filter(|&&s| s <= batch.time_step).count();
            if swaps % 2 == 0 {
                return batch.clone();
            }
            let points = batch
                .points
                .iter()
                .map(|p| LabeledPoint::new(p.id, p.features.clone(), p.label.flipped()))
                .collect();
            Batch::new(batch.time_step, points)
        })
        .collect()
}

/// Appends a constant `1.0` coordinate to every point so a homogeneous
/// linear model can learn an offset.
pub fn append_intercept(stream: &[Batch]) -> Stream {
    stream
        .iter()
        .map(|batch| {
            let points = batch
                .points
                .iter()
                .map(|p| {
                    let mut features = p.features.clone();
                    features.push(1.0);
                    LabeledPoint::new(p.id, features, p.label)
                })
                .collect();
            Batch::new(batch.time_step, points)
        })
        .collect()
}

/// Rotates the `(i, j)` coordinate plane by `angle_deg` from each listed
/// step onward, accumulating across steps.
pub fn inject_rotation(stream: &[Batch], at_steps: &[usize], axes: (usize, usize), angle_deg: f64) -> Result<Stream> {
    let (i, j) = axes;
    let dim = stream.first().and_then(|b| b.points.first()).map(|p| p.dim()).unwrap_or(0);
    if i == j || i >= dim || j >= dim {
        return Err(Error::InvalidSpec(format!("rotation axes ({i}, {j}) invalid for dimension {dim}")));
    }
    Ok(stream
        .iter()
        .map(|batch| {
            let turns = at_steps.iter().filter(|&&s| s <= batch.time_step).count();
            if turns == 0 {
                return batch.clone();
            }
            let theta = (angle_deg * turns as f64).to_radians();
            let (sin, cos) = exact_sin_cos(theta);
            let points = batch
                .points
                .iter()
                .map(|p| {
                    let mut x = p.features.clone();
                    let (a, b) = (x[i], x[j]);
                    x[i] = cos * a - sin * b;
                    x[j] = sin * a + cos * b;
                    LabeledPoint::new(p.id, x, p.label)
                })
                .collect();
            Batch::new(batch.time_step, points)
        })
        .collect())
}

/// `sin_cos` with exact values at multiples of a quarter turn.
fn exact_sin_cos(theta: f64) -> (f64, f64) {
    let quarter = theta / (PI / 2.0);
    if (quarter - quarter.round()).abs() < 1e-12 {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        theta.sin_cos()
    }
}

/// How to turn a CSV file into a stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvOptions {
    pub label_column: String,
    /// Explicit label mapping; numeric labels in {0, 1} or {-1, 1} need none.
    pub label_map: Option<HashMap<String, Label>>,
    /// Columns to one-hot encode (categories in sorted order).
    pub categorical: Vec<String>,
    /// Min-max scale each numeric column to [0, 1].
    pub scale_to_unit: bool,
    pub batch_size: usize,
}

/// Reads a headed, comma-separated file into batches of `batch_size` rows in
/// file order. A trailing partial batch is dropped.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Stream> {
    let path = path.as_ref();
    let csv_err = |reason: String| Error::Csv { path: path.display().to_string(), reason };
    if opts.batch_size == 0 {
        return Err(csv_err("batch_size must be positive".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| csv_err(format!("label column `{}` not found", opts.label_column)))?;
    for c in &opts.categorical {
        if !headers.contains(c) {
            return Err(csv_err(format!("categorical column `{c}` not found")));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(format!("row {}: {e}", line + 2)))?;
        rows.push(record.iter().map(|v| v.trim().to_string()).collect());
    }

    let labels: Vec<Label> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| map_label(&row[label_idx], opts.label_map.as_ref()).ok_or_else(|| {
            csv_err(format!("row {}: label `{}` cannot be mapped to +1/-1", r + 2, row[label_idx]))
        }))
        .collect::<Result<_>>()?;

    // Column encoders, in header order.
    enum Encoder {
        Numeric { min: f64, max: f64 },
        OneHot(Vec<String>),
    }
    let mut encoders: Vec<(usize, Encoder)> = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == label_idx {
            continue;
        }
        if opts.categorical.contains(name) {
            let cats: BTreeSet<String> = rows.iter().map(|r| r[c].clone()).collect();
            encoders.push((c, Encoder::OneHot(cats.into_iter().collect())));
        } else {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for (r, row) in rows.iter().enumerate() {
                let v: f64 = row[c].parse().map_err(|_| {
                    csv_err(format!("row {}: column `{name}` value `{}` is not numeric", r + 2, row[c]))
                })?;
                min = min.min(v);
                max = max.max(v);
            }
            encoders.push((c, Encoder::Numeric { min, max }));
        }
    }

    let m = opts.batch_size;
    let mut stream = Vec::with_capacity(rows.len() / m);
    for (t, chunk) in rows.chunks_exact(m).enumerate() {
        let points = chunk
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut x = Vec::new();
                for (c, enc) in &encoders {
                    match enc {
                        Encoder::Numeric { min, max } => {
                            let v: f64 = row[*c].parse().expect("validated above");
                            x.push(if opts.scale_to_unit {
                                if max > min { (v - min) / (max - min) } else { 0.0 }
                            } else {
                                v
                            });
                        }
                        Encoder::OneHot(cats) => {
                            x.extend(cats.iter().map(|k| if *k == row[*c] { 1.0 } else { 0.0 }));
                        }
                    }
                }
                let id = t * m + i;
                LabeledPoint::new(id as u64, x, labels[id])
            })
            .collect();
        stream.push(Batch::new(t, points));
    }
    Ok(stream)
}

fn map_label(raw: &str, map: Option<&HashMap<String, Label>>) -> Option<Label> {
    if let Some(map) = map {
        return map.get(raw).copied();
    }
    match raw.parse::<f64>().ok()? {
        v if v == 1.0 => Some(Label::Pos),
        v if v == 0.0 || v == -1.0 => Some(Label::Neg),
        _ => None,
    }
}
