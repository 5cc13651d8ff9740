//! Synthetic photographic transformations and ensemble generation.
//!
//! Geometric transforms use nearest-neighbor sampling about the image center
//! and fill uncovered pixels with 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// Additive per-channel N(0, sigma) noise, clamped.
    GaussianNoise { sigma: f64, seed: u64 },
    /// `c * (v - 0.5) + 0.5`, clamped.
    Contrast { factor: f64 },
    /// `v + delta`, clamped.
    Brightness { delta: f64 },
    /// Counter-clockwise as displayed.
    Rotate { degrees: f64 },
    Translate { dx: i64, dy: i64 },
    Scale { factor: f64 },
}

impl TransformSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        match *self {
            TransformSpec::GaussianNoise { sigma, .. } if !(sigma > 0.0 && sigma <= 1.0) => {
                bad("noise sigma must be in (0, 1]")
            }
            TransformSpec::Contrast { factor } if !(factor > 0.0 && factor.is_finite()) => {
                bad("contrast factor must be positive")
            }
            TransformSpec::Scale { factor } if !(factor > 0.0 && factor.is_finite()) => {
                bad("scale factor must be positive")
            }
            TransformSpec::Brightness { delta } if !delta.is_finite() => {
                bad("brightness delta must be finite")
            }
            TransformSpec::Rotate { degrees } if !degrees.is_finite() => {
                bad("rotation angle must be finite")
            }
            _ => Ok(()),
        }
    }
}

/// Named parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Noise sigma 0.01 to 0.10 in steps of 0.01.
    #[serde(rename = "gauss-noise-paper")]
    GaussNoise,
    /// Contrast 1.1 to 2.0 in steps of 0.1.
    #[serde(rename = "contrast-paper")]
    Contrast,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::GaussNoise => "gauss-noise-paper",
            Preset::Contrast => "contrast-paper",
        }
    }

    /// The sweep's transforms. Noise transform `i` (1-based) is seeded with
    /// `seed + i`.
    pub fn transforms(self, seed: u64) -> Vec<TransformSpec> {
        (1..=10u32)
            .map(|i| match self {
                Preset::GaussNoise => TransformSpec::GaussianNoise {
                    sigma: f64::from(i) / 100.0,
                    seed: seed.wrapping_add(u64::from(i)),
                },
                Preset::Contrast => TransformSpec::Contrast {
                    factor: f64::from(10 + i) / 10.0,
                },
            })
            .collect()
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-noise-paper" => Ok(Preset::GaussNoise),
            "contrast-paper" => Ok(Preset::Contrast),
            other => Err(Error::InvalidConfig(format!("unknown preset {other:?}"))),
        }
    }
}

pub fn apply_transform(image: &Image, t: &TransformSpec) -> Result<Image> {
    t.validate()?;
    Ok(match *t {
        TransformSpec::GaussianNoise { sigma, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            image.map_intensities(|v| v + normal.sample(&mut rng))
        }
        TransformSpec::Contrast { factor } => image.map_intensities(|v| v + (factor - 1.0) * (v - 0.5)),
        TransformSpec::Brightness { delta } => image.map_intensities(|v| v + delta),
        TransformSpec::Rotate { degrees } => {
            let (sin, cos) = degrees.to_radians().sin_cos();
            resample(image, |dx, dy| (cos * dx - sin * dy, sin * dx + cos * dy))
        }
        TransformSpec::Translate { dx, dy } => {
            let (w, h) = image.dims();
            Image::from_fn(w, h, |x, y| {
                let sx = x as i64 - dx;
                let sy = y as i64 - dy;
                if (0..w as i64).contains(&sx) && (0..h as i64).contains(&sy) {
                    image.pixel(sx as usize, sy as usize)
                } else {
                    [0.0; 3]
                }
            })?
        }
        TransformSpec::Scale { factor } => resample(image, |dx, dy| (dx / factor, dy / factor)),
    })
}

/// Nearest-neighbor inverse mapping: `source_offset` maps an output pixel
/// center's offset from the image center to the source offset.
fn resample(image: &Image, source_offset: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    let (w, h) = image.dims();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    Image::from_fn(w, h, |x, y| {
        let (ox, oy) = source_offset(x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let (sx, sy) = ((cx + ox).floor(), (cy + oy).floor());
        if sx >= 0.0 && sy >= 0.0 && sx < w as f64 && sy < h as f64 {
            image.pixel(sx as usize, sy as usize)
        } else {
            [0.0; 3]
        }
    })
    .expect("dimensions come from a valid image")
}

/// `[base, t_1(base), t_2(base), ...]`.
pub fn generate_ensemble(base: &Image, specs: &[TransformSpec]) -> Result<Vec<Image>> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("ensemble needs at least one transform".into()));
    }
    let mut out = Vec::with_capacity(specs.len() + 1);
    out.push(base.clone());
    for t in specs {
        out.push(apply_transform(base, t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Color;
    use proptest::prelude::*;

    fn gradient(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            [x as f64 / w as f64, y as f64 / h as f64, ((x + y) % 3) as f64 / 2.0]
        })
        .unwrap()
    }

    #[test]
    fn identity_parameters() {
        let img = gradient(7, 5);
        assert_eq!(apply_transform(&img, &TransformSpec::Contrast { factor: 1.0 }).unwrap(), img);
        assert_eq!(apply_transform(&img, &TransformSpec::Brightness { delta: 0.0 }).unwrap(), img);
        assert_eq!(apply_transform(&img, &TransformSpec::Translate { dx: 0, dy: 0 }).unwrap(), img);
        assert_eq!(apply_transform(&img, &TransformSpec::Rotate { degrees: 0.0 }).unwrap(), img);
        assert_eq!(apply_transform(&img, &TransformSpec::Scale { factor: 1.0 }).unwrap(), img);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let img = gradient(8, 8);
        let t = TransformSpec::GaussianNoise { sigma: 0.05, seed: 7 };
        let a = apply_transform(&img, &t).unwrap();
        let b = apply_transform(&img, &t).unwrap();
        assert_eq!(a.pixels(), b.pixels());
        assert_ne!(a, img);
        let c = apply_transform(&img, &TransformSpec::GaussianNoise { sigma: 0.05, seed: 8 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn contrast_formula() {
        let img = Image::filled(1, 1, Color::new(0.6, 0.4, 0.9).unwrap()).unwrap();
        let out = apply_transform(&img, &TransformSpec::Contrast { factor: 2.0 }).unwrap();
        let [r, g, b] = out.pixel(0, 0);
        assert!((r - 0.7).abs() < 1e-12);
        assert!((g - 0.3).abs() < 1e-12);
        assert_eq!(b, 1.0);
    }

    #[test]
    fn translate_shifts_and_fills() {
        let img = gradient(4, 4);
        let out = apply_transform(&img, &TransformSpec::Translate { dx: 1, dy: 2 }).unwrap();
        assert_eq!(out.pixel(1, 2), img.pixel(0, 0));
        assert_eq!(out.pixel(3, 3), img.pixel(2, 1));
        assert_eq!(out.pixel(0, 0), [0.0; 3]);
    }

    #[test]
    fn rotate_quarter_turn() {
        // 90 degrees counter-clockwise: the top-right corner moves to top-left.
        let mut img = Image::filled(4, 4, Color::BLACK).unwrap();
        img.set_pixel(3, 0, [1.0, 0.0, 0.0]);
        let out = apply_transform(&img, &TransformSpec::Rotate { degrees: 90.0 }).unwrap();
        assert_eq!(out.pixel(0, 0), [1.0, 0.0, 0.0]);
        let full = apply_transform(&img, &TransformSpec::Rotate { degrees: 360.0 }).unwrap();
        assert_eq!(full, img);
    }

    #[test]
    fn downscale_fills_border() {
        let img = Image::filled(8, 8, Color::WHITE).unwrap();
        let out = apply_transform(&img, &TransformSpec::Scale { factor: 0.5 }).unwrap();
        assert_eq!(out.pixel(0, 0), [0.0; 3]);
        assert_eq!(out.pixel(4, 4), [1.0; 3]);
    }

    #[test]
    fn presets_match_sweeps() {
        let noise = Preset::GaussNoise.transforms(0);
        assert_eq!(noise.len(), 10);
        let sigmas: Vec<f64> = noise
            .iter()
            .map(|t| match t {
                TransformSpec::GaussianNoise { sigma, .. } => *sigma,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(sigmas[0], 0.01);
        assert_eq!(sigmas[9], 0.1);
        for w in sigmas.windows(2) {
            assert!((w[1] - w[0] - 0.01).abs() < 1e-12);
        }
        let contrast = Preset::Contrast.transforms(0);
        assert_eq!(contrast[0], TransformSpec::Contrast { factor: 1.1 });
        assert_eq!(contrast[9], TransformSpec::Contrast { factor: 2.0 });
        assert_eq!("contrast-paper".parse::<Preset>().unwrap(), Preset::Contrast);
        assert!("blur".parse::<Preset>().is_err());
    }

    #[test]
    fn ensemble_layout() {
        let base = gradient(4, 4);
        let e = generate_ensemble(&base, &Preset::GaussNoise.transforms(3)).unwrap();
        assert_eq!(e.len(), 11);
        assert_eq!(e[0], base);
        let twins = generate_ensemble(&base, &[TransformSpec::Contrast { factor: 1.0 }]).unwrap();
        assert_eq!(twins[0], twins[1]);
        assert!(generate_ensemble(&base, &[]).is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        let img = gradient(2, 2);
        for t in [
            TransformSpec::GaussianNoise { sigma: 0.0, seed: 1 },
            TransformSpec::GaussianNoise { sigma: 1.5, seed: 1 },
            TransformSpec::Contrast { factor: -1.0 },
            TransformSpec::Scale { factor: 0.0 },
        ] {
            assert!(apply_transform(&img, &t).is_err());
        }
    }

    #[test]
    fn spec_json_shape() {
        let t: TransformSpec =
            serde_json::from_str(r#"{"kind":"gaussian_noise","sigma":0.05,"seed":7}"#).unwrap();
        assert_eq!(t, TransformSpec::GaussianNoise { sigma: 0.05, seed: 7 });
    }

    proptest! {
        #[test]
        fn outputs_stay_in_unit_range(
            which in 0usize..6, p in -3.0f64..3.0, seed in any::<u64>(),
        ) {
            let t = match which {
                0 => TransformSpec::GaussianNoise { sigma: p.abs().clamp(0.01, 1.0), seed },
                1 => TransformSpec::Contrast { factor: p.abs().max(0.1) },
                2 => TransformSpec::Brightness { delta: p },
                3 => TransformSpec::Rotate { degrees: p * 60.0 },
                4 => TransformSpec::Translate { dx: p as i64, dy: -(p as i64) },
                _ => TransformSpec::Scale { factor: p.abs().max(0.1) },
            };
            let img = gradient(6, 5);
            let out = apply_transform(&img, &t).unwrap();
            prop_assert_eq!(out.dims(), img.dims());
            prop_assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
