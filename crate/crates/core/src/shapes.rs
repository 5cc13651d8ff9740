//! Replaces a rectangular result with a better-scoring circle, triangle or
//! octagon centered on it.

use serde::{Deserialize, Serialize};

use crate::attack::{evaluate_candidates, mean_score, members_fooled, validate_ensemble};
use crate::error::{Error, Result};
use crate::image::{Color, Image};
use crate::oracle::{Objective, Oracle, Phase};
use crate::perturbation::{PatchArea, Perturbation};
use crate::region::{Pixel, Rect};
use crate::shape::{rasterize_shape, ShapeKind, ShapeMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeSearch {
    pub kinds: Vec<ShapeKind>,
    /// Scales tried per kind, from inscribed to circumscribed inclusive.
    pub steps: usize,
}

impl Default for ShapeSearch {
    fn default() -> Self {
        Self {
            kinds: ShapeKind::ALL.to_vec(),
            steps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCandidate {
    pub kind: ShapeKind,
    pub scale: f64,
    pub area: usize,
    /// `None` when the mask was skipped: over budget, or a pixel set already
    /// scored.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRefinement {
    pub perturbation: Perturbation,
    pub score: f64,
    /// The rectangle itself scored best.
    pub kept_rect: bool,
    /// Ensemble members fooled by the returned perturbation; `None` when the
    /// rectangle was kept on a caller-supplied score.
    pub members_fooled: Option<usize>,
    pub candidates: Vec<ShapeCandidate>,
}

/// `steps` evenly spaced scales from `kind`'s inscribed to circumscribed
/// scale for `rect`.
pub fn scale_sweep(kind: ShapeKind, rect: &Rect, steps: usize) -> Vec<f64> {
    let lo = kind.inscribed_scale(rect);
    let hi = kind.circumscribed_scale(rect);
    if steps < 2 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Sweeps every kind in `search` over its scale range around `rect`'s center
/// and returns the best perturbation, falling back to the rectangle itself.
///
/// `rect_score` is the rectangle's known mean objective score; when absent
/// the rectangle is queried once per ensemble member. Masks larger than
/// `a_max` pixels are not queried.
#[allow(clippy::too_many_arguments)]
pub fn refine_shape(
    oracle: &Oracle,
    ensemble: &[Image],
    rect: Rect,
    color: Color,
    search: &ShapeSearch,
    obj: Objective,
    a_max: usize,
    rect_score: Option<f64>,
) -> Result<ShapeRefinement> {
    let (width, height) = validate_ensemble(oracle, ensemble)?;
    obj.validate(oracle.num_classes())?;
    if !rect.fits(width, height) {
        return Err(Error::OutOfBounds { width, height });
    }
    if !search.kinds.is_empty() && search.steps < 2 {
        return Err(Error::InvalidConfig(format!(
            "shape search needs at least 2 steps, got {}",
            search.steps
        )));
    }
    let phase = oracle.phase(Phase::Shape);

    let mut candidates = Vec::new();
    let mut masks: Vec<ShapeMask> = Vec::new();
    let mut seen: Vec<Vec<Pixel>> = Vec::new();
    for &kind in &search.kinds {
        for scale in scale_sweep(kind, &rect, search.steps) {
            let Ok(mask) = rasterize_shape(kind, rect.center(), scale, width, height) else {
                continue;
            };
            let fresh = mask.area() <= a_max && !seen.iter().any(|s| s == mask.pixels());
            candidates.push(ShapeCandidate {
                kind,
                scale,
                area: mask.area(),
                score: None,
            });
            if fresh {
                seen.push(mask.pixels().to_vec());
                masks.push(mask);
            }
        }
    }

    let (rect_score, rect_fooled) = match rect_score {
        Some(s) => (s, None),
        None => {
            let probs = evaluate_candidates(phase, ensemble, &[PatchArea::from(rect)], color)?;
            (mean_score(&probs[0], &obj), Some(members_fooled(&probs[0], &obj)))
        }
    };

    let areas: Vec<PatchArea> = masks.iter().cloned().map(PatchArea::from).collect();
    let probs = evaluate_candidates(phase, ensemble, &areas, color)?;
    let scores: Vec<f64> = probs.iter().map(|p| mean_score(p, &obj)).collect();

    // Attach scores to the candidate records that were actually queried.
    let mut queried = masks.iter().zip(&scores).peekable();
    for c in &mut candidates {
        if let Some((mask, &score)) = queried.peek() {
            if mask.kind == c.kind && mask.scale == c.scale {
                c.score = Some(score);
                queried.next();
            }
        }
    }

    let mut best = Perturbation::new(rect, color);
    let mut best_score = rect_score;
    let mut kept_rect = true;
    let mut fooled = rect_fooled;
    for ((mask, &score), p) in masks.into_iter().zip(&scores).zip(&probs) {
        if score > best_score {
            best_score = score;
            best = Perturbation::new(mask, color);
            kept_rect = false;
            fooled = Some(members_fooled(p, &obj));
        }
    }

    Ok(ShapeRefinement {
        perturbation: best,
        score: best_score,
        kept_rect,
        members_fooled: fooled,
        candidates,
    })
}
