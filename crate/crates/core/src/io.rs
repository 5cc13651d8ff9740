//! PNG / PPM loading and saving. 8-bit samples map to unit scale via `v / 255`
//! on load and `round(v * 255)` on save.

use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage, Rgba, RgbaImage};

use crate::error::{Error, Result};
use crate::image::{to_u8, Image};
use crate::perturbation::Perturbation;

/// Loads an 8-bit PNG or binary PPM (P6); alpha is discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb
        .into_raw()
        .into_iter()
        .map(|v| f64::from(v) / 255.0)
        .collect();
    Image::new(w as usize, h as usize, pixels)
}

pub fn to_rgb8(image: &Image) -> RgbImage {
    let (w, h) = image.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let [r, g, b] = image.pixel(x as usize, y as usize);
        Rgb([to_u8(r), to_u8(g), to_u8(b)])
    })
}

pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    to_rgb8(image).save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Stencil of `p` on a `width x height` canvas: opaque `p.color` inside the
/// patch, fully transparent elsewhere.
pub fn stencil(p: &Perturbation, width: usize, height: usize) -> Result<RgbaImage> {
    if !p.area.fits(width, height) {
        return Err(Error::OutOfBounds { width, height });
    }
    let [r, g, b] = p.color.to_rgb8();
    let mut out = RgbaImage::new(width as u32, height as u32);
    for (x, y) in p.area.pixels() {
        out.put_pixel(x as u32, y as u32, Rgba([r, g, b, 255]));
    }
    Ok(out)
}

pub fn save_stencil(p: &Perturbation, width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    stencil(p, width, height)?.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}
