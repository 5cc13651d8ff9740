//! Rectangular regions over an image grid.
//!
//! A [`Region`] is a union of axis-aligned rectangles. Primitives may overlap;
//! area and equality are defined on the pixel union, never on the primitive
//! list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel coordinate `(x, y)`.
pub type Pixel = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRect")]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Deserialize)]
struct RawRect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl TryFrom<RawRect> for Rect {
    type Error = Error;

    fn try_from(r: RawRect) -> Result<Self> {
        Rect::new(r.x, r.y, r.w, r.h)
    }
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidRect(format!(
                "extent must be positive, got {w}x{h}"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    pub fn contains_pixel(&self, (px, py): Pixel) -> bool {
        (self.x..self.right()).contains(&px) && (self.y..self.bottom()).contains(&py)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    /// Geometric center in continuous pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    /// Shifts by `(dx, dy)`; `None` if the result leaves `[0, width) x [0, height)`.
    pub fn translate(&self, dx: i64, dy: i64, width: usize, height: usize) -> Option<Rect> {
        let x = shift(self.x, dx)?;
        let y = shift(self.y, dy)?;
        let moved = Rect { x, y, ..*self };
        moved.fits(width, height).then_some(moved)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (self.y..self.bottom()).flat_map(move |y| (self.x..self.right()).map(move |x| (x, y)))
    }
}

pub(crate) fn shift(v: usize, d: i64) -> Option<usize> {
    usize::try_from(v as i64 + d).ok()
}

/// Union of one or more rectangles.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rect>", into = "Vec<Rect>")]
pub struct Region {
    primitives: Vec<Rect>,
}

impl Region {
    pub fn new(primitives: Vec<Rect>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::InvalidRect("region needs at least one primitive".into()));
        }
        Ok(Self { primitives })
    }

    pub fn primitives(&self) -> &[Rect] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.primitives.iter().all(|r| r.fits(width, height))
    }

    /// Bounding rectangle of the union.
    pub fn bounds(&self) -> Rect {
        let x0 = self.primitives.iter().map(|r| r.x).min().unwrap_or(0);
        let y0 = self.primitives.iter().map(|r| r.y).min().unwrap_or(0);
        let x1 = self.primitives.iter().map(Rect::right).max().unwrap_or(1);
        let y1 = self.primitives.iter().map(Rect::bottom).max().unwrap_or(1);
        Rect {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    /// The pixel union in row-major order, each pixel once.
    pub fn pixels(&self) -> Vec<Pixel> {
        if let [only] = self.primitives.as_slice() {
            return only.pixels().collect();
        }
        let b = self.bounds();
        let mut mask = vec![false; b.w * b.h];
        for r in &self.primitives {
            for (x, y) in r.pixels() {
                mask[(y - b.y) * b.w + (x - b.x)] = true;
            }
        }
        mask.iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| (b.x + i % b.w, b.y + i / b.w))
            .collect()
    }

    pub fn area(&self) -> usize {
        match self.primitives.as_slice() {
            [only] => only.area(),
            _ => self.pixels().len(),
        }
    }

    /// Shifts every primitive; `None` if any of them leaves the grid.
    pub fn translate(&self, dx: i64, dy: i64, width: usize, height: usize) -> Option<Region> {
        self.primitives
            .iter()
            .map(|r| r.translate(dx, dy, width, height))
            .collect::<Option<Vec<_>>>()
            .map(|primitives| Region { primitives })
    }

    pub fn intersects_rect(&self, rect: &Rect) -> bool {
        self.primitives.iter().any(|r| r.intersects(rect))
    }
}

impl From<Rect> for Region {
    fn from(r: Rect) -> Self {
        Region {
            primitives: vec![r],
        }
    }
}

impl TryFrom<Vec<Rect>> for Region {
    type Error = Error;

    fn try_from(v: Vec<Rect>) -> Result<Self> {
        Region::new(v)
    }
}

impl From<Region> for Vec<Rect> {
    fn from(r: Region) -> Self {
        r.primitives
    }
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.pixels() == other.pixels()
    }
}

impl Eq for Region {}

/// Pixel count of the union of `r`'s primitives.
pub fn region_area(r: &Region) -> usize {
    r.area()
}

/// Shifts `r` by `(dx, dy)` inside a `width x height` grid; `None` marks an
/// invalid (out-of-bounds) translation.
pub fn translate_region(
    r: &Region,
    dx: i64,
    dy: i64,
    width: usize,
    height: usize,
) -> Option<Region> {
    r.translate(dx, dy, width, height)
}
