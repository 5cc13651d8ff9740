//! Scaling a digital patch onto the physical object it will be stuck to.
//!
//! The object is bounded by an axis-aligned box in the image; placements are
//! expressed in millimetres from the object's top-left corner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturbation::Perturbation;
use crate::region::Rect;

/// Axis-aligned box around the object, in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox(pub Rect);

impl BoundingBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        Ok(Self(Rect::new(x, y, w, h)?))
    }

    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        if !self.0.fits(width, height) {
            return Err(Error::OutOfBounds { width, height });
        }
        Ok(())
    }
}

/// Physical object size in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSize {
    pub width_mm: f64,
    pub height_mm: f64,
}

impl ObjectSize {
    pub fn new(width_mm: f64, height_mm: f64) -> Result<Self> {
        if !(width_mm > 0.0 && height_mm > 0.0 && width_mm.is_finite() && height_mm.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "object size must be positive, got {width_mm}x{height_mm} mm"
            )));
        }
        Ok(Self {
            width_mm,
            height_mm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPlacement {
    pub offset_x: f64,
    pub offset_y: f64,
    pub width: f64,
    pub height: f64,
}

pub fn map_to_physical(r: &Rect, bbox: &BoundingBox, object: ObjectSize) -> Result<PhysicalPlacement> {
    let b = &bbox.0;
    if !b.contains_rect(r) {
        return Err(Error::InvalidConfig(format!(
            "patch {r:?} is not inside the object box {b:?}"
        )));
    }
    let sx = object.width_mm / b.w as f64;
    let sy = object.height_mm / b.h as f64;
    Ok(PhysicalPlacement {
        offset_x: (r.x - b.x) as f64 * sx,
        offset_y: (r.y - b.y) as f64 * sy,
        width: r.w as f64 * sx,
        height: r.h as f64 * sy,
    })
}

/// One placement per primitive (per bounding box for shaped patches).
pub fn map_perturbation(
    p: &Perturbation,
    bbox: &BoundingBox,
    object: ObjectSize,
) -> Result<Vec<PhysicalPlacement>> {
    p.area
        .placement_rects()
        .iter()
        .map(|r| map_to_physical(r, bbox, object))
        .collect()
}

/// Inverse mapping onto another image's bounding box, rounded to whole
/// pixels.
pub fn physical_to_rect(
    placement: &PhysicalPlacement,
    bbox: &BoundingBox,
    object: ObjectSize,
) -> Result<Rect> {
    let b = &bbox.0;
    let px = b.w as f64 / object.width_mm;
    let py = b.h as f64 / object.height_mm;
    let x0 = (placement.offset_x * px).round() as usize;
    let y0 = (placement.offset_y * py).round() as usize;
    let x1 = ((placement.offset_x + placement.width) * px).round() as usize;
    let y1 = ((placement.offset_y + placement.height) * py).round() as usize;
    Rect::new(
        b.x + x0,
        b.y + y0,
        x1.saturating_sub(x0).max(1),
        y1.saturating_sub(y0).max(1),
    )
}
