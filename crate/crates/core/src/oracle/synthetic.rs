//! Deterministic in-process classifiers used as test oracles and as the
//! built-in CLI oracle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, ProbabilityVector};
use crate::error::{Error, Result};
use crate::image::{to_u8, Image};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// On-disk description of a linear-logit oracle, shared with the reference
/// oracle service:
///
/// ```json
/// { "width": W, "height": H,
///   "weights": [[w_0 ... w_{W*H-1}], ...],   // one row-major map per class
///   "biases": [b_0, ...] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPatchSpec {
    pub width: usize,
    pub height: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearPatchSpec {
    /// All-zero weights and biases.
    pub fn zeros(width: usize, height: usize, num_classes: usize) -> Self {
        Self {
            width,
            height,
            weights: vec![vec![0.0; width * height]; num_classes],
            biases: vec![0.0; num_classes],
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn set_weight(&mut self, class: usize, x: usize, y: usize, w: f64) {
        self.weights[class][y * self.width + x] = w;
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("oracle grid must be non-empty".into()));
        }
        if self.weights.len() < 2 || self.weights.len() != self.biases.len() {
            return Err(Error::InvalidConfig(format!(
                "need >= 2 classes with one bias each, got {} weight maps and {} biases",
                self.weights.len(),
                self.biases.len()
            )));
        }
        let cells = self.width * self.height;
        if let Some(bad) = self.weights.iter().find(|m| m.len() != cells) {
            return Err(Error::InvalidConfig(format!(
                "weight map has {} entries, grid has {cells}",
                bad.len()
            )));
        }
        if self
            .weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig("non-finite weight or bias".into()));
        }
        Ok(())
    }
}

/// Softmax over per-class logits `bias_c + sum_p weight_c[p] * (r_p + g_p + b_p)`.
#[derive(Debug, Clone)]
pub struct LinearPatchClassifier {
    spec: LinearPatchSpec,
}

impl LinearPatchClassifier {
    pub fn new(spec: LinearPatchSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &LinearPatchSpec {
        &self.spec
    }

    pub fn logits(&self, image: &Image) -> Vec<f64> {
        let intensity: Vec<f64> = image
            .pixels()
            .chunks_exact(3)
            .map(|c| c[0] + c[1] + c[2])
            .collect();
        self.spec
            .weights
            .iter()
            .zip(&self.spec.biases)
            .map(|(w, b)| b + w.iter().zip(&intensity).map(|(w, i)| w * i).sum::<f64>())
            .collect()
    }
}

impl Classifier for LinearPatchClassifier {
    fn num_classes(&self) -> usize {
        self.spec.biases.len()
    }

    fn input_dims(&self) -> (usize, usize) {
        (self.spec.width, self.spec.height)
    }

    fn classify(&self, image: &Image) -> Result<ProbabilityVector> {
        ProbabilityVector::new(softmax(&self.logits(image)))
    }
}

type ScoreFn = dyn Fn(&Image) -> Vec<f64> + Send + Sync;

/// Classifier backed by an arbitrary closure returning class probabilities.
pub struct FnClassifier {
    num_classes: usize,
    dims: (usize, usize),
    f: Box<ScoreFn>,
}

impl FnClassifier {
    pub fn new(
        num_classes: usize,
        dims: (usize, usize),
        f: impl Fn(&Image) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            num_classes,
            dims,
            f: Box::new(f),
        }
    }
}

impl Classifier for FnClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_dims(&self) -> (usize, usize) {
        self.dims
    }

    fn classify(&self, image: &Image) -> Result<ProbabilityVector> {
        ProbabilityVector::new((self.f)(image))
    }
}

/// Exact-match table from images to answers, with a fallback for anything
/// not listed.
#[derive(Debug, Clone)]
pub struct LookupClassifier {
    dims: (usize, usize),
    entries: Vec<(Image, ProbabilityVector)>,
    fallback: ProbabilityVector,
    quantized: bool,
}

impl LookupClassifier {
    pub fn new(dims: (usize, usize), fallback: ProbabilityVector) -> Self {
        Self {
            dims,
            entries: Vec::new(),
            fallback,
            quantized: false,
        }
    }

    /// Matches images after rounding to 8 bits per channel, so keys loaded
    /// from PNG files still match computed queries.
    pub fn quantized(dims: (usize, usize), fallback: ProbabilityVector) -> Self {
        Self {
            quantized: true,
            ..Self::new(dims, fallback)
        }
    }

    fn matches(&self, key: &Image, query: &Image) -> bool {
        if !self.quantized {
            return key == query;
        }
        key.dims() == query.dims()
            && key
                .pixels()
                .iter()
                .zip(query.pixels())
                .all(|(&a, &b)| to_u8(a) == to_u8(b))
    }

    /// Adds (or replaces) the answer for `image`.
    pub fn insert(&mut self, image: Image, probs: ProbabilityVector) -> Result<()> {
        if probs.len() != self.fallback.len() {
            return Err(Error::InvalidProbabilities(format!(
                "expected {} classes, got {}",
                self.fallback.len(),
                probs.len()
            )));
        }
        match self.entries.iter().position(|(img, _)| self.matches(img, &image)) {
            Some(i) => self.entries[i].1 = probs,
            None => self.entries.push((image, probs)),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Classifier for LookupClassifier {
    fn num_classes(&self) -> usize {
        self.fallback.len()
    }

    fn input_dims(&self) -> (usize, usize) {
        self.dims
    }

    fn classify(&self, image: &Image) -> Result<ProbabilityVector> {
        Ok(self
            .entries
            .iter()
            .find(|(img, _)| self.matches(img, image))
            .map_or_else(|| self.fallback.clone(), |(_, p)| p.clone()))
    }
}
