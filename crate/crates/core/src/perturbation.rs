//! Solid-color patches and how they are painted onto images.
//!
//! Perturbation pixels replace the underlying pixel (an opaque sticker), they
//! are not added to it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Color, Image};
use crate::region::{Pixel, Rect, Region};
use crate::shape::ShapeMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchArea {
    Rects { primitives: Region },
    Shape { mask: ShapeMask },
}

impl PatchArea {
    pub fn pixels(&self) -> Vec<Pixel> {
        match self {
            PatchArea::Rects { primitives } => primitives.pixels(),
            PatchArea::Shape { mask } => mask.pixels().to_vec(),
        }
    }

    pub fn area(&self) -> usize {
        match self {
            PatchArea::Rects { primitives } => primitives.area(),
            PatchArea::Shape { mask } => mask.area(),
        }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        match self {
            PatchArea::Rects { primitives } => primitives.fits(width, height),
            PatchArea::Shape { mask } => mask.fits(width, height),
        }
    }

    pub fn translate(&self, dx: i64, dy: i64, width: usize, height: usize) -> Option<PatchArea> {
        Some(match self {
            PatchArea::Rects { primitives } => PatchArea::Rects {
                primitives: primitives.translate(dx, dy, width, height)?,
            },
            PatchArea::Shape { mask } => PatchArea::Shape {
                mask: mask.translate(dx, dy, width, height)?,
            },
        })
    }

    /// Rectangles to cut for physical placement: the primitives of a
    /// rectangular region, or the bounding box of a shape.
    pub fn placement_rects(&self) -> Vec<Rect> {
        match self {
            PatchArea::Rects { primitives } => primitives.primitives().to_vec(),
            PatchArea::Shape { mask } => vec![mask.bounds()],
        }
    }
}

impl From<Region> for PatchArea {
    fn from(primitives: Region) -> Self {
        PatchArea::Rects { primitives }
    }
}

impl From<Rect> for PatchArea {
    fn from(r: Rect) -> Self {
        PatchArea::Rects {
            primitives: r.into(),
        }
    }
}

impl From<ShapeMask> for PatchArea {
    fn from(mask: ShapeMask) -> Self {
        PatchArea::Shape { mask }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub area: PatchArea,
    pub color: Color,
}

impl Perturbation {
    pub fn new(area: impl Into<PatchArea>, color: Color) -> Self {
        Self {
            area: area.into(),
            color,
        }
    }

    pub fn translate(&self, dx: i64, dy: i64, width: usize, height: usize) -> Option<Perturbation> {
        Some(Perturbation {
            area: self.area.translate(dx, dy, width, height)?,
            color: self.color,
        })
    }
}

/// Returns a copy of `image` with every pixel of `p`'s area set to `p.color`.
pub fn apply_perturbation(image: &Image, p: &Perturbation) -> Result<Image> {
    let (width, height) = image.dims();
    if !p.area.fits(width, height) {
        return Err(Error::OutOfBounds { width, height });
    }
    let mut out = image.clone();
    let rgb = p.color.channels();
    match &p.area {
        PatchArea::Rects { primitives } => {
            for r in primitives.primitives() {
                for (x, y) in r.pixels() {
                    out.set_pixel(x, y, rgb);
                }
            }
        }
        PatchArea::Shape { mask } => {
            for &(x, y) in mask.pixels() {
                out.set_pixel(x, y, rgb);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x: usize, y: usize, w: usize, h: usize) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    #[test]
    fn full_overwrite() {
        let img = Image::filled(2, 2, Color::BLACK).unwrap();
        let out = apply_perturbation(&img, &Perturbation::new(rect(0, 0, 2, 2), Color::WHITE))
            .unwrap();
        assert!(out.pixels().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_pixel_changes_only_that_pixel() {
        let gray = Color::new(0.2, 0.2, 0.2).unwrap();
        let img = Image::filled(4, 4, gray).unwrap();
        let p = Perturbation::new(rect(0, 0, 1, 1), Color::new(0.6, 0.0, 0.0).unwrap());
        let out = apply_perturbation(&img, &p).unwrap();
        assert_eq!(out.pixel(0, 0), [0.6, 0.0, 0.0]);
        for y in 0..4 {
            for x in 0..4 {
                if (x, y) != (0, 0) {
                    assert_eq!(out.pixel(x, y), [0.2; 3]);
                }
            }
        }
        // Input untouched.
        assert_eq!(img.pixel(0, 0), [0.2; 3]);
    }

    #[test]
    fn idempotent() {
        let img = Image::from_fn(5, 5, |x, y| [x as f64 / 5.0, y as f64 / 5.0, 0.3]).unwrap();
        let p = Perturbation::new(rect(1, 1, 3, 2), Color::new(0.1, 0.9, 0.5).unwrap());
        let once = apply_perturbation(&img, &p).unwrap();
        assert_eq!(apply_perturbation(&once, &p).unwrap(), once);
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let img = Image::filled(4, 4, Color::BLACK).unwrap();
        let p = Perturbation::new(rect(3, 3, 2, 1), Color::WHITE);
        assert!(matches!(
            apply_perturbation(&img, &p),
            Err(Error::OutOfBounds { width: 4, height: 4 })
        ));
    }

    #[test]
    fn serde_round_trip() {
        let p = Perturbation::new(
            Region::new(vec![rect(0, 0, 2, 2), rect(4, 4, 1, 3)]).unwrap(),
            Color::from_rgb8(51, 0, 204),
        );
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Perturbation>(&json).unwrap(), p);
    }

    proptest! {
        #[test]
        fn changes_exactly_area_pixels(
            rects in prop::collection::vec((0usize..6, 0usize..6, 1usize..4, 1usize..4), 1..4),
        ) {
            let region = Region::new(rects.into_iter().map(|(x, y, w, h)| rect(x, y, w, h)).collect()).unwrap();
            let img = Image::filled(10, 10, Color::new(0.5, 0.5, 0.5).unwrap()).unwrap();
            let out = apply_perturbation(&img, &Perturbation::new(region.clone(), Color::WHITE)).unwrap();
            let changed = (0..10)
                .flat_map(|y| (0..10).map(move |x| (x, y)))
                .filter(|&(x, y)| out.pixel(x, y) != img.pixel(x, y))
                .count();
            prop_assert_eq!(changed, region.area());
        }
    }
}
