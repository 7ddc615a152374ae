//! Synthetic random-dot stereo scenes with exact ground truth.
//!
//! The right image is a seeded random-dot texture. The left image is the right
//! image warped by the disparity field: every non-occluded left pixel copies
//! `right(round(x - D), y)`. Occluded left pixels get fresh texture. With
//! integer disparities and no noise the cost at the true disparity is exactly
//! zero wherever the matching windows avoid occlusions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{DisparityMap, GrayImage, Mask};
use crate::matcher::{correspondence, occlusion_mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DisparityModel {
    /// Fronto-parallel plane.
    Plane { disparity: f64 },
    /// `base + dx * x + dy * y`.
    Slanted { base: f64, dx: f64, dy: f64 },
    /// Background on the left of `boundary`, foreground from `boundary` on;
    /// `None` puts the boundary at mid-width.
    Step {
        background: f64,
        foreground: f64,
        boundary: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub model: DisparityModel,
    /// Width of the texture's intensity range, centred on 0.5, in `(0, 1]`.
    pub contrast: f64,
    /// Edge length of each random dot in pixels.
    pub dot_size: usize,
    /// Amplitude of independent uniform noise added to the left image.
    pub noise: f64,
    /// Keep fractional disparities instead of rounding to integers.
    pub subpixel: bool,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, model: DisparityModel) -> Self {
        SceneSpec {
            width,
            height,
            model,
            contrast: 1.0,
            dot_size: 1,
            noise: 0.0,
            subpixel: false,
        }
    }

    pub fn plane(width: usize, height: usize, disparity: f64) -> Self {
        Self::new(width, height, DisparityModel::Plane { disparity })
    }

    pub fn step(width: usize, height: usize, background: f64, foreground: f64) -> Self {
        Self::new(
            width,
            height,
            DisparityModel::Step {
                background,
                foreground,
                boundary: None,
            },
        )
    }

    pub fn with_contrast(mut self, contrast: f64) -> Self {
        self.contrast = contrast;
        self
    }

    pub fn with_dot_size(mut self, dot_size: usize) -> Self {
        self.dot_size = dot_size;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn raw_disparity(&self, x: usize, y: usize) -> f64 {
        match self.model {
            DisparityModel::Plane { disparity } => disparity,
            DisparityModel::Slanted { base, dx, dy } => base + dx * x as f64 + dy * y as f64,
            DisparityModel::Step {
                background,
                foreground,
                boundary,
            } => {
                if x >= boundary.unwrap_or(self.width / 2) {
                    foreground
                } else {
                    background
                }
            }
        }
    }

    pub fn disparity(&self, x: usize, y: usize) -> f64 {
        let d = self.raw_disparity(x, y).max(0.0);
        if self.subpixel {
            d
        } else {
            d.round()
        }
    }

    /// Largest disparity in the field.
    pub fn max_disparity(&self) -> f64 {
        let mut m = 0.0f64;
        for y in 0..self.height {
            for x in 0..self.width {
                m = m.max(self.disparity(x, y));
            }
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::arg("scene must have positive size"));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::arg(format!(
                "contrast {} outside (0, 1]",
                self.contrast
            )));
        }
        if self.dot_size == 0 {
            return Err(Error::arg("dot size must be at least 1"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::arg("noise amplitude must be non-negative"));
        }
        let m = self.max_disparity();
        if !m.is_finite() || m >= self.width as f64 {
            return Err(Error::arg(format!(
                "max disparity {m} must be below the image width {}",
                self.width
            )));
        }
        Ok(())
    }

    /// Errors unless every disparity is a candidate among `max_disp` levels.
    pub fn check_max_disp(&self, max_disp: usize) -> Result<()> {
        let m = self.max_disparity();
        if m >= max_disp as f64 {
            return Err(Error::arg(format!(
                "scene disparity {m} needs more than {max_disp} candidates"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub gt: DisparityMap,
    pub occl: Mask,
    pub spec: SceneSpec,
    pub seed: u64,
}

/// Texture levels are multiples of 1/255 so scenes survive an 8-bit PGM round trip.
fn level_range(contrast: f64) -> (u32, u32) {
    let lo = (255.0 * (0.5 - contrast / 2.0)).ceil().max(0.0) as u32;
    let hi = (255.0 * (0.5 + contrast / 2.0)).floor().min(255.0) as u32;
    (lo, hi.max(lo))
}

pub fn make_scene(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = level_range(spec.contrast);
    let level = |rng: &mut ChaCha8Rng| rng.gen_range(lo..=hi) as f64 / 255.0;

    let bw = w.div_ceil(spec.dot_size);
    let bh = h.div_ceil(spec.dot_size);
    let dots: Vec<f64> = (0..bw * bh).map(|_| level(&mut rng)).collect();
    let right: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            dots[(y / spec.dot_size) * bw + x / spec.dot_size]
        })
        .collect();

    let gt = DisparityMap::from_fn(w, h, |x, y| spec.disparity(x, y))?;
    let occl = occlusion_mask(&gt);

    let mut left = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            left[i] = match correspondence(x, gt.get(x, y), w) {
                Some(xr) if !occl.get(x, y) => right[y * w + xr],
                _ => level(&mut rng),
            };
        }
    }
    if spec.noise > 0.0 {
        for v in left.iter_mut() {
            *v = (*v + rng.gen_range(-spec.noise..=spec.noise)).clamp(0.0, 1.0);
        }
    }

    Ok(SyntheticScene {
        left: GrayImage::new(w, h, left)?,
        right: GrayImage::new(w, h, right)?,
        gt,
        occl,
        spec: *spec,
        seed,
    })
}
