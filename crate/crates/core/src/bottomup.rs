//! Targeted search by seeding small tiles and growing them.
//!
//! An exhaustive strided scan picks the `k` best non-overlapping `n x n`
//! tiles for the target label. The tiles then grow together as one composite
//! region: each iteration doubles every primitive toward one of four
//! directions and keeps the direction that most raises the mean target
//! probability, until the objective is met or every expansion would exceed
//! the area budget.

use serde::{Deserialize, Serialize};

use crate::attack::{
    aborted, argmax_first, evaluate_candidates, max_area, mean_score, meets_threshold,
    members_fooled, validate_colors, validate_ensemble, validate_threshold, AttackResult,
    CandidateRecord, ColorAttempt, IterationRecord, SeedRecord, DEFAULT_MAX_AREA_FRACTION,
};
use crate::error::{Error, Result};
use crate::image::{Color, Image};
use crate::oracle::{Objective, Oracle, Phase, ProbabilityVector};
use crate::perturbation::{PatchArea, Perturbation};
use crate::region::{Rect, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BottomUpConfig {
    pub colors: Vec<Color>,
    pub max_area_fraction: f64,
    /// Side length of a seed tile.
    pub seed_size: usize,
    /// Scan stride; at most `seed_size`.
    pub stride: usize,
    /// Number of seed tiles.
    pub seed_count: usize,
    pub success_threshold: f64,
}

impl Default for BottomUpConfig {
    fn default() -> Self {
        Self {
            colors: vec![Color::BLACK],
            max_area_fraction: DEFAULT_MAX_AREA_FRACTION,
            seed_size: 2,
            stride: 2,
            seed_count: 1,
            success_threshold: 1.0,
        }
    }
}

impl BottomUpConfig {
    /// Two seeds, growing into a discontinuous perturbation.
    pub fn discontinuous() -> Self {
        Self {
            seed_count: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_colors(&self.colors)?;
        validate_threshold(self.success_threshold)?;
        if self.stride == 0 || self.stride > self.seed_size {
            return Err(Error::InvalidConfig(format!(
                "stride must satisfy 1 <= stride <= seed_size, got stride {} for seed size {}",
                self.stride, self.seed_size
            )));
        }
        if self.seed_count == 0 {
            return Err(Error::InvalidConfig("seed_count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSelection {
    /// Chosen tiles, best first.
    pub tiles: Vec<Rect>,
    /// Mean targeted score of each chosen tile.
    pub scores: Vec<f64>,
    /// Number of grid tiles scanned.
    pub evaluated: usize,
    /// Fewer than `k` non-overlapping tiles were available.
    pub incomplete: bool,
    member_probs: Vec<Vec<ProbabilityVector>>,
}

/// Top-left corners of every `n x n` tile on a stride-`j` grid, row-major.
pub fn seed_grid(width: usize, height: usize, n: usize, j: usize) -> Vec<Rect> {
    if n == 0 || j == 0 || n > width || n > height {
        return Vec::new();
    }
    let xs: Vec<usize> = (0..=width - n).step_by(j).collect();
    (0..=height - n)
        .step_by(j)
        .flat_map(|y| xs.iter().map(move |&x| Rect { x, y, w: n, h: n }))
        .collect()
}

/// Scans every grid tile painted with `color` and returns the `k` best by
/// mean target probability, skipping tiles that overlap an earlier pick.
/// Ties keep scan order.
pub fn init_seed_regions(
    oracle: &Oracle,
    ensemble: &[Image],
    target_label: usize,
    color: Color,
    n: usize,
    j: usize,
    k: usize,
) -> Result<SeedSelection> {
    let obj = Objective::Targeted(target_label);
    obj.validate(oracle.num_classes())?;
    let (width, height) = validate_ensemble(oracle, ensemble)?;
    if n == 0 || n > width.min(height) {
        return Err(Error::InvalidConfig(format!(
            "seed size {n} does not fit a {width}x{height} image"
        )));
    }
    if j == 0 || j > n {
        return Err(Error::InvalidConfig(format!(
            "stride must satisfy 1 <= stride <= seed size, got {j} for {n}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("seed count must be positive".into()));
    }

    let grid = seed_grid(width, height, n, j);
    let areas: Vec<PatchArea> = grid.iter().copied().map(PatchArea::from).collect();
    let probs = evaluate_candidates(oracle.phase(Phase::Seed), ensemble, &areas, color)?;
    let scores: Vec<f64> = probs.iter().map(|p| mean_score(p, &obj)).collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    // Stable: equal scores stay in scan order.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut picked: Vec<usize> = Vec::with_capacity(k);
    for idx in order {
        if picked.len() == k {
            break;
        }
        if picked.iter().all(|&p| !grid[p].intersects(&grid[idx])) {
            picked.push(idx);
        }
    }
    let mut member_probs: Vec<Option<Vec<ProbabilityVector>>> = probs.into_iter().map(Some).collect();
    Ok(SeedSelection {
        tiles: picked.iter().map(|&i| grid[i]).collect(),
        scores: picked.iter().map(|&i| scores[i]).collect(),
        evaluated: grid.len(),
        incomplete: picked.len() < k,
        member_probs: picked
            .iter()
            .map(|&i| member_probs[i].take().expect("each tile picked once"))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expansion {
    Left,
    Right,
    Top,
    Bottom,
}

impl Expansion {
    pub const ALL: [Expansion; 4] = [
        Expansion::Left,
        Expansion::Right,
        Expansion::Top,
        Expansion::Bottom,
    ];

    /// Grows `r` by its own extent toward `self`, clipped to the grid.
    pub fn apply(self, r: &Rect, width: usize, height: usize) -> Rect {
        match self {
            Expansion::Left => {
                let x = r.x.saturating_sub(r.w);
                Rect { x, w: r.right() - x, ..*r }
            }
            Expansion::Right => Rect {
                w: (r.right() + r.w).min(width) - r.x,
                ..*r
            },
            Expansion::Top => {
                let y = r.y.saturating_sub(r.h);
                Rect { y, h: r.bottom() - y, ..*r }
            }
            Expansion::Bottom => Rect {
                h: (r.bottom() + r.h).min(height) - r.y,
                ..*r
            },
        }
    }
}

/// Expansions of `region` in direction order left, right, top, bottom. Every
/// primitive grows the same way; a direction is omitted when clipping leaves
/// all primitives unchanged.
pub fn expand_candidates(region: &Region, width: usize, height: usize) -> Vec<Region> {
    expand_labeled(region, width, height)
        .into_iter()
        .map(|(_, r)| r)
        .collect()
}

pub(crate) fn expand_labeled(region: &Region, width: usize, height: usize) -> Vec<(Expansion, Region)> {
    Expansion::ALL
        .iter()
        .filter_map(|&dir| {
            let grown: Vec<Rect> = region
                .primitives()
                .iter()
                .map(|r| dir.apply(r, width, height))
                .collect();
            let changed = grown.iter().zip(region.primitives()).any(|(a, b)| a != b);
            changed.then(|| (dir, Region::new(grown).expect("same primitive count")))
        })
        .collect()
}

pub fn bottom_up_attack(
    oracle: &Oracle,
    ensemble: &[Image],
    obj: Objective,
    cfg: &BottomUpConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let Objective::Targeted(target) = obj else {
        return Err(Error::InvalidConfig(
            "bottom-up search needs a targeted objective".into(),
        ));
    };
    obj.validate(oracle.num_classes())?;
    let (width, height) = validate_ensemble(oracle, ensemble)?;
    let a_max = max_area(cfg.max_area_fraction, width, height)?;
    let seed_area = cfg.seed_size * cfg.seed_size * cfg.seed_count;
    if seed_area > a_max {
        return Err(Error::InvalidConfig(format!(
            "{} seed(s) of {}x{} cover {seed_area} pixels, over the {a_max}-pixel budget",
            cfg.seed_count, cfg.seed_size, cfg.seed_size
        )));
    }

    let start = oracle.ledger().snapshot();
    let search = oracle.phase(Phase::Search);
    let mut result = AttackResult::new(obj, a_max);

    for &color in &cfg.colors {
        let mut attempt = ColorAttempt::new(color);
        let seeds = match init_seed_regions(
            oracle,
            ensemble,
            target,
            color,
            cfg.seed_size,
            cfg.stride,
            cfg.seed_count,
        ) {
            Ok(s) => s,
            Err(e) => {
                result.trace.push(attempt);
                return Err(aborted(e, result, oracle, &start));
            }
        };
        attempt.seeds = Some(SeedRecord {
            tiles_evaluated: seeds.evaluated,
            selected: seeds.tiles.clone(),
            scores: seeds.scores.clone(),
            incomplete: seeds.incomplete,
        });

        let mut region = Region::new(seeds.tiles.clone())?;
        let mut probs = if seeds.tiles.len() == 1 {
            seeds.member_probs.into_iter().next().expect("one seed")
        } else {
            let area = [PatchArea::from(region.clone())];
            match evaluate_candidates(search, ensemble, &area, color) {
                Ok(mut p) => p.remove(0),
                Err(e) => {
                    result.trace.push(attempt);
                    return Err(aborted(e, result, oracle, &start));
                }
            }
        };

        loop {
            attempt.members_fooled = members_fooled(&probs, &obj);
            attempt.final_score = Some(mean_score(&probs, &obj));
            if meets_threshold(attempt.members_fooled, ensemble.len(), cfg.success_threshold) {
                attempt.success = true;
                break;
            }
            let candidates: Vec<Region> = expand_candidates(&region, width, height)
                .into_iter()
                .filter(|r| r.area() <= a_max)
                .collect();
            if candidates.is_empty() {
                break;
            }
            let areas: Vec<PatchArea> = candidates.iter().cloned().map(PatchArea::from).collect();
            let cand_probs = match evaluate_candidates(search, ensemble, &areas, color) {
                Ok(p) => p,
                Err(e) => {
                    attempt.final_region = Some(region);
                    result.trace.push(attempt);
                    return Err(aborted(e, result, oracle, &start));
                }
            };
            let scores: Vec<f64> = cand_probs.iter().map(|p| mean_score(p, &obj)).collect();
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
            probs = cand_probs.into_iter().nth(selected).expect("selected in range");
        }

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
