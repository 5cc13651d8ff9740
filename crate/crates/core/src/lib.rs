//! Query-efficient black-box search for region-wise adversarial
//! perturbations.
//!
//! A perturbation is a solid-color patch (one or more rectangles, or a
//! rasterized circle, triangle or octagon) painted over an image. The engine
//! finds such patches against a classifier it can only query for probability
//! vectors:
//!
//! - [`topdown`] shrinks a patch from the full image (untargeted),
//! - [`bottomup`] grows seed tiles (targeted),
//! - [`shapes`] swaps the rectangular result for a better-scoring shape,
//! - [`finetune`] shifts it to survive misplacement, and [`transform`] builds
//!   the photographic ensembles every search can score against,
//! - [`metrics`] and [`physmap`] evaluate and place the result.

pub mod attack;
pub mod bottomup;
pub mod error;
pub mod finetune;
pub mod image;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod perturbation;
pub mod physmap;
pub mod region;
pub mod shape;
pub mod shapes;
pub mod topdown;
pub mod transform;

pub use attack::{max_area, AttackResult, ColorAttempt, IterationRecord, DEFAULT_MAX_AREA_FRACTION};
pub use bottomup::{bottom_up_attack, expand_candidates, init_seed_regions, BottomUpConfig};
pub use error::{Error, Result};
pub use finetune::{misplacement_finetune, Direction, Displacement, FineTuneMode};
pub use image::{default_colors, websafe_palette, Color, Image};
pub use metrics::{attack_success_rate, physical_robustness};
pub use oracle::{
    is_success, objective_score, Classifier, LedgerSnapshot, Objective, Oracle, Phase,
    ProbabilityVector,
};
pub use perturbation::{apply_perturbation, PatchArea, Perturbation};
pub use physmap::{map_to_physical, BoundingBox, ObjectSize, PhysicalPlacement};
pub use region::{region_area, translate_region, Rect, Region};
pub use shape::{rasterize_shape, ShapeKind, ShapeMask};
pub use shapes::{refine_shape, ShapeSearch};
pub use topdown::{shrink_candidates, top_down_attack, ShrinkMode, TopDownConfig};
pub use transform::{apply_transform, generate_ensemble, Preset, TransformSpec};
