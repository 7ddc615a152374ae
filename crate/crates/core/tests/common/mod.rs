//! Brute-force scalar re-implementations used as oracles. Everything here is
//! written pixel by pixel from the definitions, without sharing code paths
//! with the library beyond its plain data types.

#![allow(dead_code)]

use census_stereo::{DisparityMap, GrayImage, Mask};
use rand::Rng;

pub fn random_image(w: usize, h: usize, rng: &mut impl Rng) -> GrayImage {
    let data = (0..w * h).map(|_| rng.gen::<f64>()).collect();
    GrayImage::new(w, h, data).unwrap()
}

/// Anchored window: `k / 2` pixels up/left of the centre, `(k - 1) / 2` down/right.
pub fn extent(k: usize) -> (usize, usize) {
    (k / 2, (k - 1) / 2)
}

pub fn fits(x: usize, y: usize, k: usize, w: usize, h: usize) -> bool {
    let (lo, hi) = extent(k);
    x >= lo && y >= lo && x + hi < w && y + hi < h
}

/// Neighbour coordinates of `(x, y)` in row-major order, centre skipped.
pub fn neighbours(x: usize, y: usize, k: usize) -> Vec<(usize, usize)> {
    let (lo, hi) = extent(k);
    let mut out = Vec::new();
    for yy in y - lo..=y + hi {
        for xx in x - lo..=x + hi {
            if (xx, yy) != (x, y) {
                out.push((xx, yy));
            }
        }
    }
    out
}

pub fn census_bits(
    img: &[f64],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    k: usize,
) -> Option<Vec<bool>> {
    if !fits(x, y, k, w, h) {
        return None;
    }
    let c = img[y * w + x];
    Some(
        neighbours(x, y, k)
            .into_iter()
            .map(|(xx, yy)| img[yy * w + xx] >= c)
            .collect(),
    )
}

pub fn soft_bits(
    img: &[f64],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    k: usize,
    steep: f64,
) -> Option<Vec<f64>> {
    if !fits(x, y, k, w, h) {
        return None;
    }
    let c = img[y * w + x];
    Some(
        neighbours(x, y, k)
            .into_iter()
            .map(|(xx, yy)| 1.0 / (1.0 + (-steep * (img[yy * w + xx] - c)).exp()))
            .collect(),
    )
}

pub fn candidate_ok(x: usize, y: usize, d: usize, scales: &[usize], w: usize, h: usize) -> bool {
    x >= d
        && scales
            .iter()
            .all(|&k| fits(x, y, k, w, h) && fits(x - d, y, k, w, h))
}

/// Full `(y, x, d, k)` volume and `(y, x, d)` validity from a per-scale cost.
pub fn volume(
    w: usize,
    h: usize,
    scales: &[usize],
    nd: usize,
    mut cost: impl FnMut(usize, usize, usize, usize) -> f64,
) -> (Vec<f64>, Vec<bool>) {
    let nk = scales.len();
    let mut c = vec![1.0; w * h * nd * nk];
    let mut v = vec![false; w * h * nd];
    for y in 0..h {
        for x in 0..w {
            for d in 0..nd {
                if !candidate_ok(x, y, d, scales, w, h) {
                    continue;
                }
                v[(y * w + x) * nd + d] = true;
                for (s, &k) in scales.iter().enumerate() {
                    c[((y * w + x) * nd + d) * nk + s] = cost(x, y, d, k);
                }
            }
        }
    }
    (c, v)
}

pub fn census_volume(
    l: &GrayImage,
    r: &GrayImage,
    scales: &[usize],
    nd: usize,
) -> (Vec<f64>, Vec<bool>) {
    let (w, h) = l.dims();
    volume(w, h, scales, nd, |x, y, d, k| {
        let a = census_bits(l.data(), w, h, x, y, k).unwrap();
        let b = census_bits(r.data(), w, h, x - d, y, k).unwrap();
        let diff = a.iter().zip(&b).filter(|(p, q)| p != q).count();
        diff as f64 / (k * k) as f64
    })
}

pub fn soft_volume_raw(
    l: &[f64],
    r: &[f64],
    w: usize,
    h: usize,
    scales: &[usize],
    nd: usize,
    steep: f64,
) -> (Vec<f64>, Vec<bool>) {
    volume(w, h, scales, nd, |x, y, d, k| {
        let a = soft_bits(l, w, h, x, y, k, steep).unwrap();
        let b = soft_bits(r, w, h, x - d, y, k, steep).unwrap();
        let s: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
        s / (k * k) as f64
    })
}

pub fn sad_volume_raw(
    l: &[f64],
    r: &[f64],
    w: usize,
    h: usize,
    scales: &[usize],
    nd: usize,
) -> (Vec<f64>, Vec<bool>) {
    volume(w, h, scales, nd, |x, y, d, k| {
        let (lo, hi) = extent(k);
        let mut s = 0.0;
        for yy in y - lo..=y + hi {
            for xx in x - lo..=x + hi {
                s += (l[yy * w + xx] - r[yy * w + xx - d]).abs();
            }
        }
        s / (k * k) as f64
    })
}

pub fn mean_scales(c: &[f64], nk: usize) -> Vec<f64> {
    c.chunks(nk)
        .map(|s| s.iter().sum::<f64>() / nk as f64)
        .collect()
}

/// Semi-global aggregation written as a plain dynamic programme per direction.
pub fn sgm(
    c: &[f64],
    w: usize,
    h: usize,
    nd: usize,
    dirs: &[(isize, isize)],
    p1: f64,
    p2: f64,
) -> Vec<f64> {
    let mut total = vec![0.0; c.len()];
    for &(dx, dy) in dirs {
        let mut l = vec![0.0; c.len()];
        let ys: Vec<usize> = if dy < 0 {
            (0..h).rev().collect()
        } else {
            (0..h).collect()
        };
        let xs: Vec<usize> = if dx < 0 {
            (0..w).rev().collect()
        } else {
            (0..w).collect()
        };
        for &y in &ys {
            for &x in &xs {
                let px = x as isize - dx;
                let py = y as isize - dy;
                let here = (y * w + x) * nd;
                if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                    l[here..here + nd].copy_from_slice(&c[here..here + nd]);
                    continue;
                }
                let prev = (py as usize * w + px as usize) * nd;
                let mut min_prev = f64::INFINITY;
                for d in 0..nd {
                    if l[prev + d] < min_prev {
                        min_prev = l[prev + d];
                    }
                }
                for d in 0..nd {
                    let mut best = l[prev + d];
                    if d >= 1 && l[prev + d - 1] + p1 < best {
                        best = l[prev + d - 1] + p1;
                    }
                    if d + 1 < nd && l[prev + d + 1] + p1 < best {
                        best = l[prev + d + 1] + p1;
                    }
                    if min_prev + p2 < best {
                        best = min_prev + p2;
                    }
                    l[here + d] = c[here + d] + best - min_prev;
                }
            }
        }
        for (t, v) in total.iter_mut().zip(&l) {
            *t += v;
        }
    }
    total
}

pub const DIRS_8: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

/// First minimum among valid candidates.
pub fn wta(c: &[f64], valid: &[bool], w: usize, h: usize, nd: usize) -> Vec<Option<usize>> {
    (0..w * h)
        .map(|i| {
            let mut best: Option<usize> = None;
            for d in 0..nd {
                if valid[i * nd + d] && best.is_none_or(|b| c[i * nd + d] < c[i * nd + b]) {
                    best = Some(d);
                }
            }
            best
        })
        .collect()
}

pub fn box_mean(c: &[f64], w: usize, h: usize, nd: usize, win: usize) -> Vec<f64> {
    let r = (win / 2) as isize;
    let mut out = vec![0.0; c.len()];
    for y in 0..h as isize {
        for x in 0..w as isize {
            for d in 0..nd {
                let (mut s, mut n) = (0.0, 0.0);
                for yy in y - r..=y + r {
                    for xx in x - r..=x + r {
                        if xx >= 0 && yy >= 0 && xx < w as isize && yy < h as isize {
                            s += c[(yy as usize * w + xx as usize) * nd + d];
                            n += 1.0;
                        }
                    }
                }
                out[(y as usize * w + x as usize) * nd + d] = s / n;
            }
        }
    }
    out
}

pub fn soft_argmin(c: &[f64], tau: f64) -> f64 {
    let weights: Vec<f64> = c.iter().map(|v| (-v / tau).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights
        .iter()
        .enumerate()
        .map(|(d, p)| d as f64 * p / z)
        .sum()
}

pub fn round_corr(x: usize, d: f64, w: usize) -> Option<usize> {
    let xr = (x as f64 - d).round();
    if xr >= 0.0 && xr < w as f64 {
        Some(xr as usize)
    } else {
        None
    }
}

/// Occluded iff the correspondence leaves the frame or a valid pixel of the
/// same row with strictly larger disparity lands on the same column.
pub fn occlusion(gt: &DisparityMap) -> Vec<bool> {
    let (w, h) = gt.dims();
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !gt.is_valid(x, y) {
                continue;
            }
            let d = gt.get(x, y);
            match round_corr(x, d, w) {
                None => out[y * w + x] = true,
                Some(xr) => {
                    for x2 in 0..w {
                        if gt.is_valid(x2, y)
                            && gt.get(x2, y) > d
                            && round_corr(x2, gt.get(x2, y), w) == Some(xr)
                        {
                            out[y * w + x] = true;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Scalar attack loss: Eq.-4 style application, soft census (or SAD) costs,
/// scale mean, clipped box mean, softmax expectation, masked MAE.
#[allow(clippy::too_many_arguments)]
pub fn forward_loss(
    left: &GrayImage,
    right: &GrayImage,
    gt: &DisparityMap,
    occl: &Mask,
    eval: &Mask,
    p: &[f64],
    scales: &[usize],
    nd: usize,
    steep: Option<f64>,
    win: usize,
    tau: f64,
) -> f64 {
    let (w, h) = left.dims();
    let mut l = left.data().to_vec();
    let r: Vec<f64> = right.data().iter().zip(p).map(|(a, b)| a + b).collect();
    for y in 0..h {
        for x in 0..w {
            if gt.is_valid(x, y) && !occl.get(x, y) {
                if let Some(xr) = round_corr(x, gt.get(x, y), w) {
                    l[y * w + x] += p[y * w + xr];
                }
            }
        }
    }
    let (full, _) = match steep {
        Some(c) => soft_volume_raw(&l, &r, w, h, scales, nd, c),
        None => sad_volume_raw(&l, &r, w, h, scales, nd),
    };
    let agg = box_mean(&mean_scales(&full, scales.len()), w, h, nd, win);
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if eval.get(x, y) {
                let i = y * w + x;
                sum += (soft_argmin(&agg[i * nd..(i + 1) * nd], tau) - gt.get(x, y)).abs();
                n += 1;
            }
        }
    }
    sum / n as f64
}

pub fn epe(pred: &[f64], gt: &[f64], mask: &[bool]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for i in 0..pred.len() {
        if mask[i] {
            s += (pred[i] - gt[i]).abs();
            n += 1;
        }
    }
    s / n as f64
}

pub fn bad(pred: &[f64], gt: &[f64], mask: &[bool], tau: f64) -> f64 {
    let mut hits = 0;
    let mut n = 0;
    for i in 0..pred.len() {
        if mask[i] {
            n += 1;
            if (pred[i] - gt[i]).abs() > tau {
                hits += 1;
            }
        }
    }
    100.0 * hits as f64 / n as f64
}

pub fn smooth_l1(pred: &[f64], gt: &[f64], mask: &[bool]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for i in 0..pred.len() {
        if mask[i] {
            let z = (pred[i] - gt[i]).abs();
            s += if z < 1.0 { 0.5 * z * z } else { z - 0.5 };
            n += 1;
        }
    }
    s / n as f64
}
