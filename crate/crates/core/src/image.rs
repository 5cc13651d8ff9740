//! RGB rasters with unit-scale intensities and the solid colors painted onto
//! them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// A dense RGB raster, row-major, every intensity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * CHANNELS {
            return Err(Error::InvalidImage(format!(
                "expected {} intensities for {width}x{height}, got {}",
                width * height * CHANNELS,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: Color) -> Result<Self> {
        let pixels = std::iter::repeat_n([color.r, color.g, color.b], width * height)
            .flatten()
            .collect();
        Self::new(width, height, pixels)
    }

    /// Builds an image from a per-pixel generator; values are clamped into
    /// `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                pixels.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub(crate) fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    /// Applies `f` to every intensity and clamps the result into `[0, 1]`.
    pub(crate) fn map_intensities(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) * CHANNELS
    }
}

/// A solid sRGB color with unit-scale channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Color {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Color {
    pub const BLACK: Color = Color {
        r: 0.0,
        g: 0.0,
        b: 0.0,
    };
    pub const WHITE: Color = Color {
        r: 1.0,
        g: 1.0,
        b: 1.0,
    };

    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        for v in [r, g, b] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidColor(v));
            }
        }
        Ok(Self { r, g, b })
    }

    pub fn from_rgb8(r: u8, g: u8, b: u8) -> Self {
        Self {
            r: f64::from(r) / 255.0,
            g: f64::from(g) / 255.0,
            b: f64::from(b) / 255.0,
        }
    }

    pub fn to_rgb8(self) -> [u8; 3] {
        [to_u8(self.r), to_u8(self.g), to_u8(self.b)]
    }

    pub fn channels(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

impl TryFrom<[f64; 3]> for Color {
    type Error = Error;

    fn try_from([r, g, b]: [f64; 3]) -> Result<Self> {
        Color::new(r, g, b)
    }
}

impl From<Color> for [f64; 3] {
    fn from(c: Color) -> Self {
        c.channels()
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

const WEBSAFE_LEVELS: [u8; 6] = [0, 51, 102, 153, 204, 255];

/// The 216 web-safe colors in lexicographic `(r, g, b)` order.
pub fn websafe_palette() -> Vec<Color> {
    let mut out = Vec::with_capacity(216);
    for r in WEBSAFE_LEVELS {
        for g in WEBSAFE_LEVELS {
            for b in WEBSAFE_LEVELS {
                out.push(Color::from_rgb8(r, g, b));
            }
        }
    }
    out
}

/// Default probe order: black first, then the remaining web-safe colors in
/// lexicographic order, truncated to `count` entries.
///
/// Black is `(0, 0, 0)`, the lexicographically first web-safe color, so this
/// is a prefix of [`websafe_palette`].
pub fn default_colors(count: usize) -> Result<Vec<Color>> {
    if count == 0 || count > 216 {
        return Err(Error::InvalidConfig(format!(
            "color set size must be in 1..=216, got {count}"
        )));
    }
    let mut colors = vec![Color::BLACK];
    colors.extend(
        websafe_palette()
            .into_iter()
            .filter(|c| *c != Color::BLACK)
            .take(count - 1),
    );
    Ok(colors)
}
