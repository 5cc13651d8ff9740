//! Rasterized non-rectangular masks: circles, apex-up equilateral triangles
//! and regular octagons with flat top and bottom edges.
//!
//! `scale` is the circumradius in pixels; a pixel belongs to the mask when its
//! center `(x + 0.5, y + 0.5)` lies inside the analytic shape.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{shift, Pixel, Rect};

const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Triangle,
    Circle,
    Octagon,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Triangle, ShapeKind::Circle, ShapeKind::Octagon];

    /// Unit-circumradius vertices in image coordinates (y grows downward).
    fn unit_vertices(self) -> Vec<(f64, f64)> {
        let (count, start_deg) = match self {
            ShapeKind::Triangle => (3, 90.0),
            ShapeKind::Octagon => (8, 22.5),
            ShapeKind::Circle => return Vec::new(),
        };
        (0..count)
            .map(|k| {
                let theta = (start_deg + 360.0 * k as f64 / count as f64) * PI / 180.0;
                (theta.cos(), -theta.sin())
            })
            .collect()
    }

    /// Outward unit normals paired with the unit-circumradius apothem.
    fn unit_edges(self) -> Vec<((f64, f64), f64)> {
        let v = self.unit_vertices();
        (0..v.len())
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
                let apothem = mid.0.hypot(mid.1);
                ((mid.0 / apothem, mid.1 / apothem), apothem)
            })
            .collect()
    }

    /// Whether `(px, py)` lies inside the shape centered at `center` with
    /// circumradius `scale` (boundary inclusive).
    pub fn contains(self, center: (f64, f64), scale: f64, (px, py): (f64, f64)) -> bool {
        let (dx, dy) = (px - center.0, py - center.1);
        match self {
            ShapeKind::Circle => dx * dx + dy * dy <= scale * scale + EDGE_EPS,
            _ => self
                .unit_edges()
                .iter()
                .all(|&((nx, ny), a)| dx * nx + dy * ny <= a * scale + EDGE_EPS),
        }
    }

    /// Largest scale at which the shape, centered on `rect`'s center, fits
    /// inside `rect`.
    pub fn inscribed_scale(self, rect: &Rect) -> f64 {
        let (hw, hh) = (rect.w as f64 / 2.0, rect.h as f64 / 2.0);
        match self {
            ShapeKind::Circle => hw.min(hh),
            _ => self
                .unit_vertices()
                .iter()
                .flat_map(|&(vx, vy)| [(hw, vx), (hh, vy)])
                .filter(|(_, c)| c.abs() > EDGE_EPS)
                .map(|(half, c)| half / c.abs())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Smallest scale at which the shape, centered on `rect`'s center,
    /// contains all four corners of `rect`.
    pub fn circumscribed_scale(self, rect: &Rect) -> f64 {
        let (hw, hh) = (rect.w as f64 / 2.0, rect.h as f64 / 2.0);
        match self {
            ShapeKind::Circle => hw.hypot(hh),
            _ => {
                let corners = [(hw, hh), (-hw, hh), (hw, -hh), (-hw, -hh)];
                self.unit_edges()
                    .iter()
                    .flat_map(|&((nx, ny), a)| corners.map(|(cx, cy)| (cx * nx + cy * ny) / a))
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// A shape rasterized onto a bounded grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMask {
    pub kind: ShapeKind,
    pub center: (f64, f64),
    pub scale: f64,
    pixels: Vec<Pixel>,
}

impl ShapeMask {
    /// Row-major pixel set.
    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        !self.pixels.is_empty() && self.pixels.iter().all(|&(x, y)| x < width && y < height)
    }

    pub fn bounds(&self) -> Rect {
        let x0 = self.pixels.iter().map(|p| p.0).min().unwrap_or(0);
        let y0 = self.pixels.iter().map(|p| p.1).min().unwrap_or(0);
        let x1 = self.pixels.iter().map(|p| p.0 + 1).max().unwrap_or(1);
        let y1 = self.pixels.iter().map(|p| p.1 + 1).max().unwrap_or(1);
        Rect {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    /// Moves the rasterized pixel set; `None` if any pixel would leave the grid.
    pub fn translate(&self, dx: i64, dy: i64, width: usize, height: usize) -> Option<ShapeMask> {
        let pixels = self
            .pixels
            .iter()
            .map(|&(x, y)| {
                let (nx, ny) = (shift(x, dx)?, shift(y, dy)?);
                (nx < width && ny < height).then_some((nx, ny))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(ShapeMask {
            kind: self.kind,
            center: (self.center.0 + dx as f64, self.center.1 + dy as f64),
            scale: self.scale,
            pixels,
        })
    }
}

/// Rasterizes `kind` at `center`/`scale` onto a `width x height` grid,
/// clipping to the grid.
pub fn rasterize_shape(
    kind: ShapeKind,
    center: (f64, f64),
    scale: f64,
    width: usize,
    height: usize,
) -> Result<ShapeMask> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "shape scale must be positive, got {scale}"
        )));
    }
    let lo = |c: f64| ((c - scale).floor().max(0.0)) as usize;
    let hi = |c: f64, limit: usize| ((c + scale).ceil().max(0.0) as usize).min(limit);
    let mut pixels = Vec::new();
    for y in lo(center.1)..hi(center.1, height) {
        for x in lo(center.0)..hi(center.0, width) {
            if kind.contains(center, scale, (x as f64 + 0.5, y as f64 + 0.5)) {
                pixels.push((x, y));
            }
        }
    }
    if pixels.is_empty() {
        return Err(Error::DegenerateShape);
    }
    Ok(ShapeMask {
        kind,
        center,
        scale,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Ray-casting point-in-polygon, independent of the half-plane test.
    fn ray_cast(poly: &[(f64, f64)], (px, py): (f64, f64)) -> bool {
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let (xi, yi) = poly[i];
            let (xj, yj) = poly[j];
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    fn brute_force_area(poly: &[(f64, f64)], size: usize) -> usize {
        (0..size)
            .flat_map(|y| (0..size).map(move |x| (x as f64 + 0.5, y as f64 + 0.5)))
            .filter(|&p| ray_cast(poly, p))
            .count()
    }

    #[test]
    fn circle_inscribed_in_full_grid() {
        let m = rasterize_shape(ShapeKind::Circle, (4.0, 4.0), 4.0, 8, 8).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let (dx, dy) = (x as f64 + 0.5 - 4.0, y as f64 + 0.5 - 4.0);
                assert_eq!(m.pixels().contains(&(x, y)), dx * dx + dy * dy <= 16.0);
            }
        }
        // Corners fall outside the disc, the rest of the border row is in.
        assert!(!m.pixels().contains(&(0, 0)));
        assert!(m.pixels().contains(&(3, 0)));
        assert_eq!(m.area(), 52);
    }

    #[test]
    fn tiny_circle_is_one_pixel() {
        let m = rasterize_shape(ShapeKind::Circle, (2.5, 3.5), 0.4, 8, 8).unwrap();
        assert_eq!(m.pixels(), &[(2, 3)]);
    }

    #[test]
    fn degenerate_shape_is_an_error() {
        // Between pixel centers: nothing inside.
        assert!(matches!(
            rasterize_shape(ShapeKind::Circle, (2.0, 2.0), 0.3, 8, 8),
            Err(Error::DegenerateShape)
        ));
        assert!(rasterize_shape(ShapeKind::Circle, (2.0, 2.0), 0.0, 8, 8).is_err());
        // Entirely off-grid.
        assert!(rasterize_shape(ShapeKind::Octagon, (40.0, 40.0), 2.0, 8, 8).is_err());
    }

    fn octagon_vs_circle(size: usize) -> (usize, usize, usize) {
        let r = Rect::new(0, 0, size, size).unwrap();
        let scale = ShapeKind::Octagon.inscribed_scale(&r);
        let oct = rasterize_shape(ShapeKind::Octagon, r.center(), scale, size, size).unwrap();
        let circle = rasterize_shape(
            ShapeKind::Circle,
            r.center(),
            ShapeKind::Circle.inscribed_scale(&r),
            size,
            size,
        )
        .unwrap();
        let poly: Vec<_> = ShapeKind::Octagon
            .unit_vertices()
            .iter()
            .map(|&(vx, vy)| (r.center().0 + vx * scale, r.center().1 + vy * scale))
            .collect();
        (oct.area(), brute_force_area(&poly, size), circle.area())
    }

    #[test]
    fn octagon_area_between_circle_and_square() {
        // On an 8x8 grid both shapes drop exactly three pixels per corner.
        let (oct, brute, circle) = octagon_vs_circle(8);
        assert_eq!((oct, brute, circle), (52, 52, 52));
        assert!(oct < 64);

        let (oct, brute, circle) = octagon_vs_circle(16);
        assert_eq!((oct, brute, circle), (216, 216, 208));
        assert!(oct > circle && oct < 256);
    }

    #[test]
    fn triangle_matches_ray_casting() {
        let scale = 5.3;
        let center = (6.2, 7.1);
        let m = rasterize_shape(ShapeKind::Triangle, center, scale, 16, 16).unwrap();
        let poly: Vec<_> = ShapeKind::Triangle
            .unit_vertices()
            .iter()
            .map(|&(vx, vy)| (center.0 + vx * scale, center.1 + vy * scale))
            .collect();
        assert_eq!(m.area(), brute_force_area(&poly, 16));
        // Apex up: the topmost row is narrower than the bottom row.
        let top = m.pixels().iter().map(|p| p.1).min().unwrap();
        let bot = m.pixels().iter().map(|p| p.1).max().unwrap();
        let row = |y| m.pixels().iter().filter(|p| p.1 == y).count();
        assert!(row(top) < row(bot));
    }

    #[test]
    fn circle_scales_for_square() {
        let r = Rect::new(0, 0, 8, 8).unwrap();
        assert_eq!(ShapeKind::Circle.inscribed_scale(&r), 4.0);
        assert!((ShapeKind::Circle.circumscribed_scale(&r) - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn triangle_scales_closed_form() {
        let r = Rect::new(0, 0, 6, 10).unwrap();
        let (w, h) = (6.0f64, 10.0f64);
        let inscribed = ShapeKind::Triangle.inscribed_scale(&r);
        assert!((inscribed - (h / 2.0).min(w / 3f64.sqrt())).abs() < 1e-9);
        let circ = ShapeKind::Triangle.circumscribed_scale(&r);
        assert!((circ - h.max((3f64.sqrt() * w + h) / 2.0)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn inscribed_mask_within_rect(
            x in 0usize..8, y in 0usize..8, w in 1usize..9, h in 1usize..9, k in 0usize..3,
        ) {
            let kind = ShapeKind::ALL[k];
            let r = Rect::new(x, y, w, h).unwrap();
            let scale = kind.inscribed_scale(&r);
            if let Ok(m) = rasterize_shape(kind, r.center(), scale, 32, 32) {
                for &p in m.pixels() {
                    prop_assert!(r.contains_pixel(p));
                }
            }
        }

        #[test]
        fn circumscribed_shape_contains_corners(
            x in 0usize..8, y in 0usize..8, w in 1usize..9, h in 1usize..9, k in 0usize..3,
        ) {
            let kind = ShapeKind::ALL[k];
            let r = Rect::new(x, y, w, h).unwrap();
            let scale = kind.circumscribed_scale(&r);
            prop_assert!(scale >= kind.inscribed_scale(&r));
            for corner in [
                (r.x as f64, r.y as f64),
                (r.right() as f64, r.y as f64),
                (r.x as f64, r.bottom() as f64),
                (r.right() as f64, r.bottom() as f64),
            ] {
                prop_assert!(kind.contains(r.center(), scale, corner));
            }
        }
    }
}
