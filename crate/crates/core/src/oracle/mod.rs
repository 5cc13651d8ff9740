//! Black-box access to the attacked classifier.
//!
//! Attacks never talk to a [`Classifier`] directly. They go through an
//! [`Oracle`], which validates inputs and outputs and charges every answered
//! query to a [`QueryLedger`] under the current [`Phase`].

mod remote;
mod synthetic;

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub use remote::{RemoteClassifier, RetryPolicy, ORACLE_URL_ENV};
pub use synthetic::{softmax, FnClassifier, LinearPatchClassifier, LinearPatchSpec, LookupClassifier};

const SUM_TOLERANCE: f64 = 1e-6;

/// Per-class probabilities; entries in `[0, 1]` summing to 1 within `1e-6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidProbabilities(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbabilities(format!(
                "entry {bad} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!(
                "entries sum to {sum}"
            )));
        }
        Ok(Self(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbabilityVector::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

/// What the attacker wants the classifier to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "label", rename_all = "lowercase")]
pub enum Objective {
    /// Move the prediction away from the true label.
    Untargeted(usize),
    /// Move the prediction onto the target label.
    Targeted(usize),
}

impl Objective {
    pub fn label(&self) -> usize {
        match *self {
            Objective::Untargeted(l) | Objective::Targeted(l) => l,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let label = self.label();
        if label >= num_classes {
            return Err(Error::InvalidLabel { label, num_classes });
        }
        Ok(())
    }

    /// Higher is always more adversarial.
    pub fn score(&self, probs: &ProbabilityVector) -> f64 {
        match *self {
            Objective::Untargeted(true_label) => -probs.get(true_label),
            Objective::Targeted(target) => probs.get(target),
        }
    }

    pub fn is_success(&self, probs: &ProbabilityVector) -> bool {
        match *self {
            Objective::Untargeted(true_label) => probs.argmax() != true_label,
            Objective::Targeted(target) => probs.argmax() == target,
        }
    }
}

pub fn objective_score(probs: &ProbabilityVector, obj: &Objective) -> f64 {
    obj.score(probs)
}

pub fn is_success(probs: &ProbabilityVector, obj: &Objective) -> bool {
    obj.is_success(probs)
}

/// An opaque image classifier. Implementations must be deterministic for a
/// fixed input unless they front a remote model.
pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;

    /// `(width, height)` of accepted images.
    fn input_dims(&self) -> (usize, usize);

    fn classify(&self, image: &Image) -> Result<ProbabilityVector>;

    fn classify_batch(&self, images: &[Image]) -> Result<Vec<ProbabilityVector>> {
        images.par_iter().map(|img| self.classify(img)).collect()
    }
}

/// Ledger bucket a query is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Seed,
    Search,
    Shape,
    FineTune,
    Evaluate,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Seed,
        Phase::Search,
        Phase::Shape,
        Phase::FineTune,
        Phase::Evaluate,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Thread-safe query counters, one per [`Phase`].
#[derive(Debug, Default)]
pub struct QueryLedger {
    counts: [AtomicU64; 5],
}

impl QueryLedger {
    pub fn record(&self, phase: Phase, n: u64) {
        self.counts[phase.index()].fetch_add(n, Ordering::SeqCst);
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c.load(Ordering::SeqCst)).sum()
    }

    pub fn count(&self, phase: Phase) -> u64 {
        self.counts[phase.index()].load(Ordering::SeqCst)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let [seed, search, shape, fine_tune, evaluate] = Phase::ALL.map(|p| self.count(p));
        LedgerSnapshot {
            total: seed + search + shape + fine_tune + evaluate,
            seed,
            search,
            shape,
            fine_tune,
            evaluate,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub total: u64,
    pub seed: u64,
    pub search: u64,
    pub shape: u64,
    pub fine_tune: u64,
    pub evaluate: u64,
}

impl LedgerSnapshot {
    /// Queries issued between `earlier` and `self`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            total: self.total - earlier.total,
            seed: self.seed - earlier.seed,
            search: self.search - earlier.search,
            shape: self.shape - earlier.shape,
            fine_tune: self.fine_tune - earlier.fine_tune,
            evaluate: self.evaluate - earlier.evaluate,
        }
    }
}

/// A classifier plus the ledger of every query answered through it.
pub struct Oracle {
    inner: Box<dyn Classifier>,
    ledger: QueryLedger,
}

impl Oracle {
    pub fn new(classifier: impl Classifier + 'static) -> Self {
        Self::from_boxed(Box::new(classifier))
    }

    pub fn from_boxed(inner: Box<dyn Classifier>) -> Self {
        Self {
            inner,
            ledger: QueryLedger::default(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.inner.input_dims()
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    /// A view of this oracle that charges queries to `phase`.
    pub fn phase(&self, phase: Phase) -> PhasedOracle<'_> {
        PhasedOracle {
            oracle: self,
            phase,
        }
    }

    /// Single query charged to [`Phase::Evaluate`].
    pub fn classify(&self, image: &Image) -> Result<ProbabilityVector> {
        self.phase(Phase::Evaluate).classify(image)
    }

    /// Batch query charged to [`Phase::Evaluate`].
    pub fn classify_batch(&self, images: &[Image]) -> Result<Vec<ProbabilityVector>> {
        self.phase(Phase::Evaluate).classify_batch(images)
    }

    fn check_dims(&self, image: &Image) -> Result<()> {
        let (ew, eh) = self.input_dims();
        let (aw, ah) = image.dims();
        if (ew, eh) != (aw, ah) {
            return Err(Error::DimensionMismatch {
                expected_width: ew,
                expected_height: eh,
                actual_width: aw,
                actual_height: ah,
            });
        }
        Ok(())
    }

    fn check_output(&self, probs: &ProbabilityVector) -> Result<()> {
        if probs.len() != self.num_classes() {
            return Err(Error::InvalidProbabilities(format!(
                "expected {} classes, oracle returned {}",
                self.num_classes(),
                probs.len()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("num_classes", &self.num_classes())
            .field("input_dims", &self.input_dims())
            .field("ledger", &self.ledger.snapshot())
            .finish()
    }
}

#[derive(Clone, Copy)]
pub struct PhasedOracle<'a> {
    oracle: &'a Oracle,
    phase: Phase,
}

impl PhasedOracle<'_> {
    pub fn classify(&self, image: &Image) -> Result<ProbabilityVector> {
        self.oracle.check_dims(image)?;
        let probs = self.oracle.inner.classify(image)?;
        self.oracle.check_output(&probs)?;
        self.oracle.ledger.record(self.phase, 1);
        Ok(probs)
    }

    pub fn classify_batch(&self, images: &[Image]) -> Result<Vec<ProbabilityVector>> {
        if images.is_empty() {
            return Err(Error::InvalidImage("empty batch".into()));
        }
        for img in images {
            self.oracle.check_dims(img)?;
        }
        let out = self.oracle.inner.classify_batch(images)?;
        if out.len() != images.len() {
            return Err(Error::InvalidProbabilities(format!(
                "batch of {} answered with {} vectors",
                images.len(),
                out.len()
            )));
        }
        for p in &out {
            self.oracle.check_output(p)?;
        }
        self.oracle.ledger.record(self.phase, images.len() as u64);
        Ok(out)
    }
}
