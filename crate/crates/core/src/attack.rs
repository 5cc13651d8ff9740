//! Result and trace types shared by the region searches, plus the ensemble
//! evaluation they all use.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Color, Image};
use crate::oracle::{LedgerSnapshot, Objective, Oracle, PhasedOracle, ProbabilityVector};
use crate::perturbation::{apply_perturbation, PatchArea, Perturbation};
use crate::region::Region;

/// Default size budget: 1.6% of the image's pixels.
pub const DEFAULT_MAX_AREA_FRACTION: f64 = 0.016;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub success: bool,
    pub objective: Objective,
    pub perturbation: Option<Perturbation>,
    pub winning_color: Option<Color>,
    /// Queries issued by this attack alone.
    pub queries: LedgerSnapshot,
    pub max_area: usize,
    pub trace: Vec<ColorAttempt>,
}

impl AttackResult {
    pub(crate) fn new(objective: Objective, max_area: usize) -> Self {
        Self {
            success: false,
            objective,
            perturbation: None,
            winning_color: None,
            queries: LedgerSnapshot::default(),
            max_area,
            trace: Vec::new(),
        }
    }
}

/// Everything tried with one color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorAttempt {
    pub color: Color,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seeds: Option<SeedRecord>,
    pub iterations: Vec<IterationRecord>,
    pub final_region: Option<Region>,
    /// Mean objective score of `final_region` over the ensemble.
    pub final_score: Option<f64>,
    /// Ensemble members on which `final_region` meets the objective.
    pub members_fooled: usize,
    pub success: bool,
}

impl ColorAttempt {
    pub(crate) fn new(color: Color) -> Self {
        Self {
            color,
            seeds: None,
            iterations: Vec::new(),
            final_region: None,
            final_score: None,
            members_fooled: 0,
            success: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub tiles_evaluated: usize,
    pub selected: Vec<crate::region::Rect>,
    pub scores: Vec<f64>,
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub candidates: Vec<CandidateRecord>,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub region: Region,
    pub score: f64,
}

/// `floor(fraction * width * height)`.
pub fn max_area(fraction: f64, width: usize, height: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "max_area_fraction must be in (0, 1], got {fraction}"
        )));
    }
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    let area = (fraction * (width * height) as f64 + 1e-9).floor() as usize;
    if area == 0 {
        return Err(Error::InvalidConfig(format!(
            "max_area_fraction {fraction} allows no pixels on a {width}x{height} image"
        )));
    }
    Ok(area)
}

pub(crate) fn validate_threshold(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ensemble success threshold must be in (0, 1], got {tau}"
        )));
    }
    Ok(())
}

/// Checks that the ensemble is non-empty and every member matches the
/// oracle's input size.
pub(crate) fn validate_ensemble(oracle: &Oracle, ensemble: &[Image]) -> Result<(usize, usize)> {
    let Some(first) = ensemble.first() else {
        return Err(Error::InvalidConfig("ensemble must not be empty".into()));
    };
    let dims = first.dims();
    if let Some(bad) = ensemble.iter().find(|img| img.dims() != dims) {
        return Err(Error::InvalidImage(format!(
            "ensemble mixes {}x{} and {}x{} images",
            dims.0,
            dims.1,
            bad.width(),
            bad.height()
        )));
    }
    let (ew, eh) = oracle.input_dims();
    if dims != (ew, eh) {
        return Err(Error::DimensionMismatch {
            expected_width: ew,
            expected_height: eh,
            actual_width: dims.0,
            actual_height: dims.1,
        });
    }
    Ok(dims)
}

pub(crate) fn validate_colors(colors: &[Color]) -> Result<()> {
    if colors.is_empty() {
        return Err(Error::InvalidConfig("color list must not be empty".into()));
    }
    Ok(())
}

/// Classifies every candidate painted onto every ensemble member in one
/// batch. Output is indexed `[candidate][member]`.
pub(crate) fn evaluate_candidates(
    oracle: PhasedOracle<'_>,
    ensemble: &[Image],
    candidates: &[PatchArea],
    color: Color,
) -> Result<Vec<Vec<ProbabilityVector>>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut images = Vec::with_capacity(candidates.len() * ensemble.len());
    for area in candidates {
        let p = Perturbation {
            area: area.clone(),
            color,
        };
        for member in ensemble {
            images.push(apply_perturbation(member, &p)?);
        }
    }
    let probs = oracle.classify_batch(&images)?;
    Ok(probs
        .chunks(ensemble.len())
        .map(<[ProbabilityVector]>::to_vec)
        .collect())
}

pub(crate) fn mean_score(probs: &[ProbabilityVector], obj: &Objective) -> f64 {
    probs.iter().map(|p| obj.score(p)).sum::<f64>() / probs.len() as f64
}

pub(crate) fn members_fooled(probs: &[ProbabilityVector], obj: &Objective) -> usize {
    probs.iter().filter(|p| obj.is_success(p)).count()
}

/// At least `tau * members` successes.
pub(crate) fn meets_threshold(fooled: usize, members: usize, tau: f64) -> bool {
    fooled as f64 >= tau * members as f64 - 1e-9
}

/// First index holding the maximum score.
pub(crate) fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn aborted(source: Error, mut partial: AttackResult, oracle: &Oracle, start: &LedgerSnapshot) -> Error {
    partial.queries = oracle.ledger().snapshot().since(start);
    Error::Aborted {
        source: Box::new(source),
        partial: Box::new(partial),
    }
}
