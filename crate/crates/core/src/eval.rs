//! Disparity metrics, evaluation masks and training-style losses.
//!
//! Metrics read the prediction's values regardless of its own validity flags;
//! invalid predictions from [`crate::matcher::wta`] carry 0.

use serde::{Deserialize, Serialize};

use crate::census::max_extent;
use crate::error::{Error, Result};
use crate::imageio::{DisparityMap, Mask, Rect};
use crate::matcher::correspondence;

/// Default stack weights for a three-stack prediction head.
pub const STACK_WEIGHTS_3: [f64; 3] = [0.5, 0.7, 1.0];

/// Pixels (left-image coordinates) that enter metrics and losses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalMask(Mask);

impl EvalMask {
    pub fn new(mask: Mask) -> Self {
        EvalMask(mask)
    }

    pub fn mask(&self) -> &Mask {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.count()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y)
    }

    /// Fraction of the frame covered by the mask.
    pub fn fraction(&self) -> f64 {
        let (w, h) = self.dims();
        if w * h == 0 {
            0.0
        } else {
            self.count() as f64 / (w * h) as f64
        }
    }
}

/// The sub-frame where every window in `scales` fits around its anchor.
pub fn matching_frame(width: usize, height: usize, scales: &[usize]) -> Rect {
    let (lo, hi) = max_extent(scales);
    Rect::new(
        lo,
        lo,
        width.saturating_sub(lo + hi),
        height.saturating_sub(lo + hi),
    )
}

/// Intersection of: valid ground truth, not occluded, `D < max_disp`, pixel
/// inside `crop` and its correspondence `round(x - D)` inside `crop`.
pub fn build_eval_mask(
    gt: &DisparityMap,
    occl: Option<&Mask>,
    crop: Option<Rect>,
    max_disp: usize,
) -> Result<EvalMask> {
    let (w, h) = gt.dims();
    if let Some(o) = occl {
        if o.dims() != (w, h) {
            return Err(Error::dims((w, h), o.dims()));
        }
    }
    let crop = crop.unwrap_or(Rect::full(w, h));
    Ok(EvalMask(Mask::from_fn(w, h, |x, y| {
        if !gt.is_valid(x, y) || !crop.contains(x, y) {
            return false;
        }
        if occl.is_some_and(|o| o.get(x, y)) {
            return false;
        }
        let d = gt.get(x, y);
        if d >= max_disp as f64 {
            return false;
        }
        correspondence(x, d, w).is_some_and(|xr| crop.contains(xr, y))
    })))
}

fn check_shapes(pred: &DisparityMap, gt: &DisparityMap, mask: &EvalMask) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(gt.dims(), pred.dims()));
    }
    if mask.dims() != gt.dims() {
        return Err(Error::dims(gt.dims(), mask.dims()));
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

fn masked_errors<'a>(
    pred: &'a DisparityMap,
    gt: &'a DisparityMap,
    mask: &'a EvalMask,
) -> impl Iterator<Item = f64> + 'a {
    pred.data()
        .iter()
        .zip(gt.data())
        .zip(mask.mask().data())
        .filter(|(_, &m)| m)
        .map(|((p, g), _)| p - g)
}

/// Mean absolute disparity error over the mask, in pixels.
pub fn epe(pred: &DisparityMap, gt: &DisparityMap, mask: &EvalMask) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    let sum: f64 = masked_errors(pred, gt, mask).map(f64::abs).sum();
    Ok(sum / mask.count() as f64)
}

/// Percentage of masked pixels whose absolute error is strictly above `tau`.
pub fn bad(pred: &DisparityMap, gt: &DisparityMap, mask: &EvalMask, tau: f64) -> Result<f64> {
    check_shapes(pred, gt, mask)?;
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::arg(format!(
            "bad-pixel threshold must be positive, got {tau}"
        )));
    }
    let n = masked_errors(pred, gt, mask)
        .filter(|e| e.abs() > tau)
        .count();
    Ok(100.0 * n as f64 / mask.count() as f64)
}

/// Attack objective; same value as [`epe`].
pub fn mae_loss(pred: &DisparityMap, gt: &DisparityMap, mask: &EvalMask) -> Result<f64> {
    epe(pred, gt, mask)
}

/// `z^2 / 2` for `|z| < 1`, else `|z| - 0.5`.
#[inline]
pub fn smooth_l1(z: f64) -> f64 {
    if z.abs() < 1.0 {
        0.5 * z * z
    } else {
        z.abs() - 0.5
    }
}

/// Weighted sum over prediction stacks of the masked mean smooth-L1 error.
pub fn smooth_l1_loss(
    preds: &[DisparityMap],
    gt: &DisparityMap,
    mask: &EvalMask,
    stack_weights: &[f64],
) -> Result<f64> {
    if preds.len() != stack_weights.len() || preds.is_empty() {
        return Err(Error::arg(format!(
            "{} prediction stacks but {} weights",
            preds.len(),
            stack_weights.len()
        )));
    }
    let mut total = 0.0;
    for (pred, beta) in preds.iter().zip(stack_weights) {
        check_shapes(pred, gt, mask)?;
        let sum: f64 = masked_errors(pred, gt, mask).map(smooth_l1).sum();
        total += beta * sum / mask.count() as f64;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub epe: f64,
    pub bad1: f64,
    pub bad3: f64,
    pub pixels: usize,
    pub mask_fraction: f64,
}

pub fn evaluate(pred: &DisparityMap, gt: &DisparityMap, mask: &EvalMask) -> Result<Metrics> {
    Ok(Metrics {
        epe: epe(pred, gt, mask)?,
        bad1: bad(pred, gt, mask, 1.0)?,
        bad3: bad(pred, gt, mask, 3.0)?,
        pixels: mask.count(),
        mask_fraction: mask.fraction(),
    })
}
