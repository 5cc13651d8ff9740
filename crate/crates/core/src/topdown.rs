//! Untargeted search by iterative region shrinking.
//!
//! Each color starts from the whole image. Every iteration splits the
//! current region into halves (and, in discontinuous mode, into two diagonal
//! quadrant pairs), queries each candidate on every ensemble member, and keeps
//! the one that lowers the mean true-class probability the most. Shrinking
//! stops at the first region within the area budget; only then is success
//! checked.

use serde::{Deserialize, Serialize};

use crate::attack::{
    aborted, argmax_first, evaluate_candidates, max_area, mean_score, meets_threshold,
    members_fooled, validate_colors, validate_ensemble, validate_threshold, AttackResult,
    CandidateRecord, ColorAttempt, IterationRecord, DEFAULT_MAX_AREA_FRACTION,
};
use crate::error::{Error, Result};
use crate::image::{Color, Image};
use crate::oracle::{Objective, Oracle, Phase};
use crate::perturbation::{PatchArea, Perturbation};
use crate::region::{Rect, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkMode {
    /// Left, right, top and bottom halves.
    #[default]
    Continuous,
    /// The four halves plus the two diagonal quadrant pairs.
    Discontinuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopDownConfig {
    pub colors: Vec<Color>,
    pub max_area_fraction: f64,
    pub mode: ShrinkMode,
    pub max_primitives: usize,
    pub success_threshold: f64,
}

impl Default for TopDownConfig {
    fn default() -> Self {
        Self {
            colors: vec![Color::BLACK],
            max_area_fraction: DEFAULT_MAX_AREA_FRACTION,
            mode: ShrinkMode::Continuous,
            max_primitives: 4,
            success_threshold: 1.0,
        }
    }
}

impl TopDownConfig {
    pub fn validate(&self) -> Result<()> {
        validate_colors(&self.colors)?;
        validate_threshold(self.success_threshold)?;
        if self.max_primitives == 0 {
            return Err(Error::InvalidConfig("max_primitives must be positive".into()));
        }
        Ok(())
    }
}

fn ceil_half(v: usize) -> usize {
    v.div_ceil(2)
}

fn left(r: &Rect) -> Option<Rect> {
    (r.w >= 2).then(|| Rect { w: ceil_half(r.w), ..*r })
}

fn right(r: &Rect) -> Option<Rect> {
    (r.w >= 2).then(|| Rect {
        x: r.x + ceil_half(r.w),
        w: r.w / 2,
        ..*r
    })
}

fn top(r: &Rect) -> Option<Rect> {
    (r.h >= 2).then(|| Rect { h: ceil_half(r.h), ..*r })
}

fn bottom(r: &Rect) -> Option<Rect> {
    (r.h >= 2).then(|| Rect {
        y: r.y + ceil_half(r.h),
        h: r.h / 2,
        ..*r
    })
}

/// Top-left and bottom-right quadrants, or top-right and bottom-left.
fn diagonal(r: &Rect, main: bool) -> Option<[Rect; 2]> {
    if r.w < 2 || r.h < 2 {
        return None;
    }
    let (cw, ch) = (ceil_half(r.w), ceil_half(r.h));
    let (fw, fh) = (r.w / 2, r.h / 2);
    Some(if main {
        [
            Rect { x: r.x, y: r.y, w: cw, h: ch },
            Rect { x: r.x + cw, y: r.y + ch, w: fw, h: fh },
        ]
    } else {
        [
            Rect { x: r.x + cw, y: r.y, w: fw, h: ch },
            Rect { x: r.x, y: r.y + ch, w: cw, h: fh },
        ]
    })
}

/// Candidate sub-regions of `region`, in the order left, right, top, bottom,
/// then (discontinuous mode only) top-left+bottom-right and
/// top-right+bottom-left.
///
/// Every operator is applied to every primitive. A primitive with extent 1
/// along a split axis is dropped from that candidate, and empty candidates are
/// omitted. Diagonal candidates are skipped when they would hold more than
/// `max_primitives` rectangles.
pub fn shrink_candidates(region: &Region, mode: ShrinkMode, max_primitives: usize) -> Vec<Region> {
    let prims = region.primitives();
    let mut out = Vec::with_capacity(6);
    for op in [left, right, top, bottom] {
        let halves: Vec<Rect> = prims.iter().filter_map(op).collect();
        if let Ok(r) = Region::new(halves) {
            out.push(r);
        }
    }
    if mode == ShrinkMode::Discontinuous {
        for main in [true, false] {
            let pieces: Vec<Rect> = prims
                .iter()
                .filter_map(|r| diagonal(r, main))
                .flatten()
                .collect();
            if pieces.len() <= max_primitives {
                if let Ok(r) = Region::new(pieces) {
                    out.push(r);
                }
            }
        }
    }
    out
}

/// Runs the shrinking search for each color in order; the first color whose
/// final region fools at least `success_threshold` of the ensemble wins.
pub fn top_down_attack(
    oracle: &Oracle,
    ensemble: &[Image],
    obj: Objective,
    cfg: &TopDownConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    if !matches!(obj, Objective::Untargeted(_)) {
        return Err(Error::InvalidConfig(
            "top-down search needs an untargeted objective".into(),
        ));
    }
    obj.validate(oracle.num_classes())?;
    let (width, height) = validate_ensemble(oracle, ensemble)?;
    let a_max = max_area(cfg.max_area_fraction, width, height)?;
    let full = Region::from(Rect::new(0, 0, width, height)?);

    let start = oracle.ledger().snapshot();
    let search = oracle.phase(Phase::Search);
    let mut result = AttackResult::new(obj, a_max);

    for &color in &cfg.colors {
        let mut attempt = ColorAttempt::new(color);
        let mut region = full.clone();
        let mut region_probs = None;

        while region.area() > a_max {
            let candidates = shrink_candidates(&region, cfg.mode, cfg.max_primitives);
            if candidates.is_empty() {
                break;
            }
            let areas: Vec<PatchArea> = candidates.iter().cloned().map(PatchArea::from).collect();
            let probs = match evaluate_candidates(search, ensemble, &areas, color) {
                Ok(p) => p,
                Err(e) => {
                    result.trace.push(attempt);
                    return Err(aborted(e, result, oracle, &start));
                }
            };
            let scores: Vec<f64> = probs.iter().map(|p| mean_score(p, &obj)).collect();
            let selected = argmax_first(&scores).expect("non-empty candidate list");
            attempt.iterations.push(IterationRecord {
                candidates: candidates
                    .iter()
                    .zip(&scores)
                    .map(|(r, &score)| CandidateRecord {
                        region: r.clone(),
                        score,
                    })
                    .collect(),
                selected,
            });
            region = candidates[selected].clone();
            region_probs = probs.into_iter().nth(selected);
        }

        // Only needed when the whole image already fits the budget.
        let final_probs = match region_probs {
            Some(p) => p,
            None => {
                let area = [PatchArea::from(region.clone())];
                match evaluate_candidates(search, ensemble, &area, color) {
                    Ok(mut p) => p.remove(0),
                    Err(e) => {
                        result.trace.push(attempt);
                        return Err(aborted(e, result, oracle, &start));
                    }
                }
            }
        };

        attempt.members_fooled = members_fooled(&final_probs, &obj);
        attempt.final_score = Some(mean_score(&final_probs, &obj));
        attempt.success = region.area() <= a_max
            && meets_threshold(attempt.members_fooled, ensemble.len(), cfg.success_threshold);
        attempt.final_region = Some(region.clone());
        let won = attempt.success;
        result.trace.push(attempt);
        if won {
            result.success = true;
            result.winning_color = Some(color);
            result.perturbation = Some(Perturbation::new(region, color));
            break;
        }
    }

    result.queries = oracle.ledger().snapshot().since(&start);
    Ok(result)
}
