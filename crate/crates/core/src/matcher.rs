//! Disparity estimation over a single-channel cost volume.
//!
//! Hard path: semi-global aggregation followed by winner-take-all.
//! Differentiable path: box aggregation followed by a softmax-weighted
//! expectation over candidates (soft-argmin).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costvolume::CostVolume;
use crate::error::{Error, Result};
use crate::imageio::{DisparityMap, Mask};

/// A scan direction `(dx, dy)`; the predecessor of `p` is `p - (dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub dx: isize,
    pub dy: isize,
}

impl Direction {
    pub const fn new(dx: isize, dy: isize) -> Self {
        Direction { dx, dy }
    }
}

/// Left-to-right, right-to-left, top-down, bottom-up.
pub const DIRECTIONS_4: [Direction; 4] = [
    Direction::new(1, 0),
    Direction::new(-1, 0),
    Direction::new(0, 1),
    Direction::new(0, -1),
];

pub const DIRECTIONS_8: [Direction; 8] = [
    Direction::new(1, 0),
    Direction::new(-1, 0),
    Direction::new(0, 1),
    Direction::new(0, -1),
    Direction::new(1, 1),
    Direction::new(-1, 1),
    Direction::new(1, -1),
    Direction::new(-1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgmParams {
    /// Penalty for a one-level disparity change.
    pub p1: f64,
    /// Penalty for larger disparity changes.
    pub p2: f64,
    /// 4 or 8.
    pub directions: usize,
}

impl Default for SgmParams {
    fn default() -> Self {
        SgmParams {
            p1: 0.05,
            p2: 0.5,
            directions: 8,
        }
    }
}

impl SgmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p1 > 0.0 && self.p1 <= self.p2 && self.p2.is_finite()) {
            return Err(Error::arg(format!(
                "SGM penalties must satisfy 0 < p1 <= p2, got p1={} p2={}",
                self.p1, self.p2
            )));
        }
        if self.directions != 4 && self.directions != 8 {
            return Err(Error::arg(format!(
                "SGM supports 4 or 8 directions, got {}",
                self.directions
            )));
        }
        Ok(())
    }

    pub fn direction_set(&self) -> &'static [Direction] {
        if self.directions == 4 {
            &DIRECTIONS_4
        } else {
            &DIRECTIONS_8
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMatchParams {
    /// Odd box-filter size applied to the costs before the softmax.
    pub agg_window: usize,
    /// Softmax temperature in cost units.
    pub tau: f64,
}

impl Default for SoftMatchParams {
    fn default() -> Self {
        SoftMatchParams {
            agg_window: 7,
            tau: 0.1,
        }
    }
}

impl SoftMatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.agg_window.is_multiple_of(2) {
            return Err(Error::arg(format!(
                "aggregation window must be odd, got {}",
                self.agg_window
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::arg(format!(
                "temperature must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

fn require_single_scale(vol: &CostVolume) -> Result<()> {
    if vol.scales() != 1 {
        return Err(Error::arg(format!(
            "expected a single-scale volume, got K={}; reduce scales first",
            vol.scales()
        )));
    }
    Ok(())
}

/// Runs the semi-global recurrence along one direction:
/// `L(p,d) = C(p,d) + min(L(q,d), L(q,d±1) + p1, min L(q,·) + p2) - min L(q,·)`
/// with `q = p - r`, and `L(p,·) = C(p,·)` where `q` leaves the frame.
pub fn aggregate_path(vol: &CostVolume, dir: Direction, p1: f64, p2: f64) -> Result<Vec<f64>> {
    require_single_scale(vol)?;
    let (w, h, nd) = (vol.width(), vol.height(), vol.max_disp());
    let unary = vol.costs();
    let mut out = vec![0.0; w * h * nd];
    if w == 0 || h == 0 {
        return Ok(out);
    }

    let step = |prev: &[f64], c: &[f64], dst: &mut [f64]| {
        let min_prev = prev.iter().copied().fold(f64::INFINITY, f64::min);
        for d in 0..nd {
            let mut m = prev[d];
            if d > 0 {
                m = m.min(prev[d - 1] + p1);
            }
            if d + 1 < nd {
                m = m.min(prev[d + 1] + p1);
            }
            m = m.min(min_prev + p2);
            dst[d] = c[d] + m - min_prev;
        }
    };

    if dir.dy == 0 {
        // rows are independent
        out.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
            let xs: Box<dyn Iterator<Item = usize>> = if dir.dx >= 0 {
                Box::new(0..w)
            } else {
                Box::new((0..w).rev())
            };
            let mut first = true;
            let mut prev_x = 0;
            for x in xs {
                let c = &unary[(y * w + x) * nd..][..nd];
                if first {
                    row[x * nd..(x + 1) * nd].copy_from_slice(c);
                    first = false;
                } else {
                    let (a, b) = if prev_x < x {
                        let (lo, hi) = row.split_at_mut(x * nd);
                        (&lo[prev_x * nd..(prev_x + 1) * nd], &mut hi[..nd])
                    } else {
                        let (lo, hi) = row.split_at_mut(prev_x * nd);
                        (&hi[..nd], &mut lo[x * nd..(x + 1) * nd])
                    };
                    step(a, c, b);
                }
                prev_x = x;
            }
        });
        return Ok(out);
    }

    let ys: Vec<usize> = if dir.dy > 0 {
        (0..h).collect()
    } else {
        (0..h).rev().collect()
    };
    let mut prev_row = vec![0.0; w * nd];
    for (i, &y) in ys.iter().enumerate() {
        let row = &mut out[y * w * nd..(y + 1) * w * nd];
        let unary_row = &unary[y * w * nd..(y + 1) * w * nd];
        if i == 0 {
            row.copy_from_slice(unary_row);
        } else {
            let prev_row = &prev_row;
            row.par_chunks_mut(nd).enumerate().for_each(|(x, dst)| {
                let c = &unary_row[x * nd..(x + 1) * nd];
                let px = x as isize - dir.dx;
                if px < 0 || px >= w as isize {
                    dst.copy_from_slice(c);
                } else {
                    let px = px as usize;
                    step(&prev_row[px * nd..(px + 1) * nd], c, dst);
                }
            });
        }
        prev_row.copy_from_slice(row);
    }
    Ok(out)
}

/// Sum of [`aggregate_path`] over the configured directions, in order.
pub fn sgm_aggregate(vol: &CostVolume, params: &SgmParams) -> Result<CostVolume> {
    require_single_scale(vol)?;
    params.validate()?;
    sgm_aggregate_directions(vol, params.direction_set(), params.p1, params.p2)
}

pub fn sgm_aggregate_directions(
    vol: &CostVolume,
    dirs: &[Direction],
    p1: f64,
    p2: f64,
) -> Result<CostVolume> {
    let mut total = vec![0.0; vol.costs().len()];
    for &dir in dirs {
        let path = aggregate_path(vol, dir, p1, p2)?;
        total.iter_mut().zip(&path).for_each(|(t, l)| *t += l);
    }
    CostVolume::from_parts(
        vol.height(),
        vol.width(),
        vol.max_disp(),
        1,
        total,
        vol.valid().to_vec(),
    )
}

/// Per-pixel argmin over valid candidates, ties to the smaller disparity.
/// Pixels without a valid candidate are invalid and carry 0.
pub fn wta(vol: &CostVolume) -> Result<DisparityMap> {
    require_single_scale(vol)?;
    let (w, h) = (vol.width(), vol.height());
    let mut data = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let costs = vol.pixel(x, y);
            let ok = vol.pixel_valid(x, y);
            let mut best: Option<(usize, f64)> = None;
            for d in (0..costs.len()).filter(|&d| ok[d]) {
                if best.is_none_or(|(_, c)| costs[d] < c) {
                    best = Some((d, costs[d]));
                }
            }
            if let Some((d, _)) = best {
                data[y * w + x] = d as f64;
                valid[y * w + x] = true;
            }
        }
    }
    DisparityMap::new(w, h, data, valid)
}

/// Box mean over a `window x window` neighbourhood clipped to the frame,
/// for every disparity slice of a `(y, x, d)` buffer.
pub(crate) fn box_mean_raw(cost: &[f64], w: usize, h: usize, nd: usize, window: usize) -> Vec<f64> {
    let mut out = box_sum_raw(cost, w, h, nd, window);
    for y in 0..h {
        for x in 0..w {
            let n = box_count(x, y, w, h, window);
            out[(y * w + x) * nd..][..nd]
                .iter_mut()
                .for_each(|v| *v /= n);
        }
    }
    out
}

/// Number of in-frame pixels in the box around `(x, y)`.
#[inline]
pub(crate) fn box_count(x: usize, y: usize, w: usize, h: usize, window: usize) -> f64 {
    let r = window / 2;
    let ny = (y + r).min(h - 1) - y.saturating_sub(r) + 1;
    let nx = (x + r).min(w - 1) - x.saturating_sub(r) + 1;
    (nx * ny) as f64
}

/// Unnormalized clipped box sum; self-adjoint, so it also serves the backward pass.
pub(crate) fn box_sum_raw(cost: &[f64], w: usize, h: usize, nd: usize, window: usize) -> Vec<f64> {
    if window <= 1 || w == 0 || h == 0 {
        return cost.to_vec();
    }
    let r = window / 2;
    let mut horiz = vec![0.0; cost.len()];
    horiz
        .par_chunks_mut(w * nd)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let dst = &mut row[x * nd..(x + 1) * nd];
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let src = &cost[(y * w + xx) * nd..][..nd];
                    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
                }
            }
        });
    let mut out = vec![0.0; cost.len()];
    out.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            let src = &horiz[yy * w * nd..(yy + 1) * w * nd];
            row.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    });
    out
}

/// Writes `softmax(-costs / tau)` into `probs` and returns `sum_d d * probs[d]`.
#[inline]
pub(crate) fn soft_argmin_pixel(costs: &[f64], tau: f64, probs: &mut [f64]) -> f64 {
    let zmax = costs
        .iter()
        .map(|c| -c / tau)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, c) in probs.iter_mut().zip(costs) {
        *p = (-c / tau - zmax).exp();
        total += *p;
    }
    let mut expect = 0.0;
    for (d, p) in probs.iter_mut().enumerate() {
        *p /= total;
        expect += d as f64 * *p;
    }
    expect
}

/// Box-aggregates `vol` and returns the softmax-weighted expected disparity.
/// Pixels with no valid candidate are marked invalid but still carry the
/// expectation.
pub fn soft_argmin(vol: &CostVolume, params: &SoftMatchParams) -> Result<DisparityMap> {
    require_single_scale(vol)?;
    params.validate()?;
    let (w, h, nd) = (vol.width(), vol.height(), vol.max_disp());
    let agg = box_mean_raw(vol.costs(), w, h, nd, params.agg_window);
    let mut probs = vec![0.0; nd];
    let mut data = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for i in 0..w * h {
        data.push(soft_argmin_pixel(
            &agg[i * nd..(i + 1) * nd],
            params.tau,
            &mut probs,
        ));
        valid.push(vol.valid()[i * nd..(i + 1) * nd].iter().any(|&v| v));
    }
    DisparityMap::new(w, h, data, valid)
}

/// Right-image column a left pixel with disparity `d` maps to, if inside the frame.
#[inline]
pub fn correspondence(x: usize, d: f64, width: usize) -> Option<usize> {
    let xr = (x as f64 - d).round();
    (xr >= 0.0 && xr < width as f64).then_some(xr as usize)
}

/// Left pixels whose scene point is hidden in the right view.
///
/// A valid pixel is occluded when `round(x - D)` leaves the frame, or when
/// another valid pixel of the same row with strictly larger disparity maps to
/// the same right column. Invalid ground-truth pixels are never marked.
pub fn occlusion_mask(gt: &DisparityMap) -> Mask {
    let (w, h) = gt.dims();
    let mut occ = vec![false; w * h];
    let mut zbuf = vec![f64::NEG_INFINITY; w];
    for y in 0..h {
        zbuf.fill(f64::NEG_INFINITY);
        for x in 0..w {
            if !gt.is_valid(x, y) {
                continue;
            }
            let d = gt.get(x, y);
            if let Some(xr) = correspondence(x, d, w) {
                zbuf[xr] = zbuf[xr].max(d);
            }
        }
        for x in 0..w {
            if !gt.is_valid(x, y) {
                continue;
            }
            let d = gt.get(x, y);
            occ[y * w + x] = match correspondence(x, d, w) {
                None => true,
                Some(xr) => zbuf[xr] > d,
            };
        }
    }
    Mask::new(w, h, occ).expect("mask dimensions")
}
