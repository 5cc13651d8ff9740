//! Misplacement fine-tuning: shift a perturbation within its neighborhood to
//! the position that best survives being stuck on slightly off target.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::attack::{evaluate_candidates, members_fooled, validate_ensemble};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::oracle::{Objective, Oracle, Phase};
use crate::perturbation::Perturbation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    L,
    R,
    T,
    B,
    TL,
    TR,
    BL,
    BR,
}

impl Direction {
    /// Tie-break order.
    pub const ALL: [Direction; 8] = [
        Direction::L,
        Direction::R,
        Direction::T,
        Direction::B,
        Direction::TL,
        Direction::TR,
        Direction::BL,
        Direction::BR,
    ];

    /// Unit step `(dx, dy)`; y grows downward. Diagonals move along both axes.
    pub fn unit(self) -> (i64, i64) {
        match self {
            Direction::L => (-1, 0),
            Direction::R => (1, 0),
            Direction::T => (0, -1),
            Direction::B => (0, 1),
            Direction::TL => (-1, -1),
            Direction::TR => (1, -1),
            Direction::BL => (-1, 1),
            Direction::BR => (1, 1),
        }
    }
}

/// `m` pixels toward `direction`; `direction` is `None` exactly when `m == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Displacement {
    pub m: usize,
    pub direction: Option<Direction>,
}

impl Displacement {
    pub const IDENTITY: Displacement = Displacement {
        m: 0,
        direction: None,
    };

    pub fn new(m: usize, direction: Direction) -> Self {
        if m == 0 {
            Self::IDENTITY
        } else {
            Self {
                m,
                direction: Some(direction),
            }
        }
    }

    pub fn offset(&self) -> (i64, i64) {
        match self.direction {
            None => (0, 0),
            Some(d) => {
                let (ux, uy) = d.unit();
                (ux * self.m as i64, uy * self.m as i64)
            }
        }
    }
}

/// Identity first, then every `m` in ascending order across all eight
/// directions. Duplicate and zero moves are dropped.
pub fn displacement_set(moves: &[usize]) -> Vec<Displacement> {
    let mut ms: Vec<usize> = moves.iter().copied().filter(|&m| m > 0).collect();
    ms.sort_unstable();
    ms.dedup();
    std::iter::once(Displacement::IDENTITY)
        .chain(
            ms.into_iter()
                .flat_map(|m| Direction::ALL.map(|d| Displacement::new(m, d))),
        )
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FineTuneMode {
    /// Score = fraction of ensemble members fooled by the displaced copy.
    Literal,
    /// Score = fraction of (member, jitter) pairs fooled when the displaced
    /// copy is itself misplaced by every displacement in the neighborhood.
    #[default]
    Jittered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDisplacement {
    pub displacement: Displacement,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneOutcome {
    pub displacement: Displacement,
    pub score: f64,
    pub perturbation: Perturbation,
    /// Every in-bounds candidate with its score, in tie-break order.
    pub candidates: Vec<ScoredDisplacement>,
}

impl FineTuneOutcome {
    pub fn identity_score(&self) -> f64 {
        self.candidates
            .iter()
            .find(|c| c.displacement == Displacement::IDENTITY)
            .map_or(0.0, |c| c.score)
    }
}

/// Picks the displacement of `p` with the highest robustness score.
///
/// Candidates are `{identity} ∪ moves × 8 directions`, minus those leaving
/// the image. Each distinct shifted copy is queried once per ensemble member.
/// In jittered mode a jitter that pushes the copy off the image counts as a
/// failure. Ties keep the earliest candidate (identity, then smaller `m`,
/// then `L, R, T, B, TL, TR, BL, BR`).
pub fn misplacement_finetune(
    oracle: &Oracle,
    ensemble: &[Image],
    p: &Perturbation,
    moves: &[usize],
    obj: Objective,
    mode: FineTuneMode,
) -> Result<FineTuneOutcome> {
    if moves.is_empty() {
        return Err(Error::InvalidConfig("move set must not be empty".into()));
    }
    obj.validate(oracle.num_classes())?;
    let (width, height) = validate_ensemble(oracle, ensemble)?;
    if !p.area.fits(width, height) {
        return Err(Error::Infeasible);
    }

    let neighborhood = displacement_set(moves);
    let candidates: Vec<Displacement> = neighborhood
        .iter()
        .copied()
        .filter(|d| {
            let (dx, dy) = d.offset();
            p.translate(dx, dy, width, height).is_some()
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Infeasible);
    }

    let jitters: &[Displacement] = match mode {
        FineTuneMode::Literal => &[Displacement::IDENTITY],
        FineTuneMode::Jittered => &neighborhood,
    };

    // Every distinct total offset that stays on the image, in first-seen order.
    let mut offsets: Vec<(i64, i64)> = Vec::new();
    let mut copies = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    for c in &candidates {
        for j in jitters {
            let (cx, cy) = c.offset();
            let (jx, jy) = j.offset();
            let total = (cx + jx, cy + jy);
            if index.contains_key(&total) {
                continue;
            }
            if let Some(moved) = p.translate(total.0, total.1, width, height) {
                index.insert(total, offsets.len());
                offsets.push(total);
                copies.push(moved.area);
            }
        }
    }

    let probs = evaluate_candidates(oracle.phase(Phase::FineTune), ensemble, &copies, p.color)?;
    let fooled: Vec<usize> = probs.iter().map(|pr| members_fooled(pr, &obj)).collect();

    let denom = (jitters.len() * ensemble.len()) as f64;
    let scored: Vec<ScoredDisplacement> = candidates
        .iter()
        .map(|c| {
            let (cx, cy) = c.offset();
            let hits: usize = jitters
                .iter()
                .filter_map(|j| {
                    let (jx, jy) = j.offset();
                    index.get(&(cx + jx, cy + jy)).map(|&i| fooled[i])
                })
                .sum();
            ScoredDisplacement {
                displacement: *c,
                score: hits as f64 / denom,
            }
        })
        .collect();

    let mut best = 0;
    for (i, c) in scored.iter().enumerate() {
        if c.score > scored[best].score {
            best = i;
        }
    }
    let winner = scored[best].displacement;
    let (dx, dy) = winner.offset();
    Ok(FineTuneOutcome {
        displacement: winner,
        score: scored[best].score,
        perturbation: p.translate(dx, dy, width, height).expect("candidate is in bounds"),
        candidates: scored,
    })
}
