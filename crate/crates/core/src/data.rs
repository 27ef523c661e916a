//! Stream primitives: labeled points, per-step batches and the sample sets
//! that learners resample from.
//!
//! Points are reference counted so that a sample set created for a new model
//! can point into the same storage as an older model's set.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label, encoded as -1/+1 for the logistic loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn from_bool(positive: bool) -> Label {
        if positive {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    /// Maps any nonzero sign to a label; zero is rejected.
    pub fn from_sign(value: f64) -> Option<Label> {
        if value > 0.0 {
            Some(Label::Pos)
        } else if value < 0.0 {
            Some(Label::Neg)
        } else {
            None
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Pos => f.write_str("+1"),
            Label::Neg => f.write_str("-1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    /// Global arrival index.
    pub id: u64,
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledPoint {
    pub fn new(id: u64, features: Vec<f64>, label: Label) -> Self {
        Self { id, features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

pub type PointRef = Arc<LabeledPoint>;

/// The points arriving at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub time_step: usize,
    pub points: Vec<PointRef>,
}

impl Batch {
    pub fn new(time_step: usize, points: Vec<LabeledPoint>) -> Self {
        Self {
            time_step,
            points: points.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.points.iter().map(|p| p.label)
    }
}

/// A whole stream, one batch per time step.
pub type Stream = Vec<Batch>;

/// Checks the stream-level invariants: constant batch size and dimension,
/// consecutive time steps starting at zero, strictly increasing ids.
pub fn validate_stream(stream: &[Batch]) -> Result<()> {
    let Some(first) = stream.first() else {
        return Ok(());
    };
    let m = first.len();
    let dim = first.points.first().map(|p| p.dim()).unwrap_or(0);
    let mut last_id: Option<u64> = None;
    for (t, batch) in stream.iter().enumerate() {
        if batch.time_step != t {
            return Err(Error::NonContiguousBatch {
                expected: t,
                actual: batch.time_step,
            });
        }
        if batch.len() != m {
            return Err(Error::InvalidSpec(format!(
                "batch {t} has {} points, expected {m}",
                batch.len()
            )));
        }
        for p in &batch.points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.dim(),
                });
            }
            if last_id.is_some_and(|prev| p.id <= prev) {
                return Err(Error::InvalidSpec(format!(
                    "point ids not increasing at id {}",
                    p.id
                )));
            }
            last_id = Some(p.id);
        }
    }
    Ok(())
}

/// A contiguous suffix of the stream, `[t_start, t_next)`, that a model
/// trains on.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    t_start: usize,
    t_next: usize,
    points: Vec<PointRef>,
}

impl SampleSet {
    /// An empty set whose first batch must be time step `t_start`.
    pub fn starting_at(t_start: usize) -> Self {
        Self {
            t_start,
            t_next: t_start,
            points: Vec::new(),
        }
    }

    pub fn append_batch(&mut self, batch: &Batch) -> Result<()> {
        if batch.time_step != self.t_next {
            return Err(Error::NonContiguousBatch {
                expected: self.t_next,
                actual: batch.time_step,
            });
        }
        self.points.extend(batch.points.iter().cloned());
        self.t_next += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_start(&self) -> usize {
        self.t_start
    }

    /// The next time step this set expects.
    pub fn t_next(&self) -> usize {
        self.t_next
    }

    pub fn points(&self) -> &[PointRef] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Option<&PointRef> {
        self.points.get(index)
    }

    pub fn uniform_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&PointRef> {
        uniform_pick(&self.points, rng)
    }
}

/// Draws one element of `items` with probability `1/len`.
pub fn uniform_pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> Result<&'a T> {
    if items.is_empty() {
        return Err(Error::Empty("sample"));
    }
    Ok(&items[rng.random_range(0..items.len())])
}
