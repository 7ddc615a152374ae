//! Matching cost volumes indexed by left-image pixel, disparity candidate and
//! scale, stored in `(y, x, d, k)` order.
//!
//! Candidate `d` at left pixel `(x, y)` is valid when the largest window fits
//! around both `(x, y)` in the left image and `(x - d, y)` in the right image.
//! Invalid entries hold cost `1.0` at every scale.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::census::{
    self, bits_per_descriptor, hamming_words, max_extent, soft_hamming_unchecked, window_extent,
    window_inside, CensusField,
};
use crate::error::{Error, Result};
use crate::imageio::GrayImage;

/// Default number of disparity candidates.
pub const DEFAULT_MAX_DISP: usize = 192;

/// Cost written for invalid candidates.
pub const INVALID_COST: f64 = 1.0;

const RAW_MAGIC: &[u8; 8] = b"CSTVOL01";

#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    height: usize,
    width: usize,
    max_disp: usize,
    scales: usize,
    cost: Vec<f64>,
    valid: Vec<bool>,
}

impl CostVolume {
    /// Wraps raw buffers; invalid entries are reset to [`INVALID_COST`].
    pub fn from_parts(
        height: usize,
        width: usize,
        max_disp: usize,
        scales: usize,
        mut cost: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let cells = height * width * max_disp;
        if cost.len() != cells * scales || valid.len() != cells {
            return Err(Error::arg(format!(
                "volume buffers {}/{} do not match {height}x{width}x{max_disp}x{scales}",
                cost.len(),
                valid.len()
            )));
        }
        for (c, v) in cost.chunks_mut(scales.max(1)).zip(&valid) {
            if !v {
                c.fill(INVALID_COST);
            }
        }
        Ok(CostVolume {
            height,
            width,
            max_disp,
            scales,
            cost,
            valid,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn max_disp(&self) -> usize {
        self.max_disp
    }

    /// Number of scale channels `K`.
    pub fn scales(&self) -> usize {
        self.scales
    }

    #[inline]
    pub fn cost(&self, x: usize, y: usize, d: usize, k: usize) -> f64 {
        self.cost[((y * self.width + x) * self.max_disp + d) * self.scales + k]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize, d: usize) -> bool {
        self.valid[(y * self.width + x) * self.max_disp + d]
    }

    /// All `max_disp * scales` costs of one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let n = self.max_disp * self.scales;
        let i = y * self.width + x;
        &self.cost[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn pixel_valid(&self, x: usize, y: usize) -> &[bool] {
        let i = y * self.width + x;
        &self.valid[i * self.max_disp..(i + 1) * self.max_disp]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Raw dump: 32-byte header (8-byte magic, then `H, W, max_disp, K` as
    /// little-endian `u32`, then 8 zero bytes) followed by little-endian `f32`
    /// costs in `(y, x, d, k)` order.
    pub fn write_raw(&self, mut out: impl Write) -> Result<()> {
        let mut header = [0u8; 32];
        header[..8].copy_from_slice(RAW_MAGIC);
        for (i, v) in [self.height, self.width, self.max_disp, self.scales]
            .into_iter()
            .enumerate()
        {
            header[8 + 4 * i..12 + 4 * i].copy_from_slice(&(v as u32).to_le_bytes());
        }
        out.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.cost.len() * 4);
        for &c in &self.cost {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }
}

/// Header dimensions `(H, W, max_disp, K)` and costs of a raw dump.
pub fn read_raw(mut input: impl Read) -> Result<([usize; 4], Vec<f32>)> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[..8] != RAW_MAGIC {
        return Err(Error::format(0, "not a cost-volume dump"));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = u32::from_le_bytes(header[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    let n: usize = dims.iter().product();
    if body.len() != n * 4 {
        return Err(Error::format(
            32 + body.len(),
            "cost-volume payload size mismatch",
        ));
    }
    Ok((
        dims,
        body.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    ))
}

/// Bytes needed for a `H x W x max_disp x K` volume and its mask.
pub fn volume_bytes(height: usize, width: usize, max_disp: usize, scales: usize) -> usize {
    let cells = height * width * max_disp;
    cells * scales * std::mem::size_of::<f64>() + cells
}

#[inline]
pub(crate) fn candidate_valid(
    x: usize,
    y: usize,
    d: usize,
    ext: (usize, usize),
    width: usize,
    height: usize,
) -> bool {
    x >= d && window_inside(x, y, ext, width, height) && window_inside(x - d, y, ext, width, height)
}

fn check_pair(left: &GrayImage, right: &GrayImage, max_disp: usize) -> Result<()> {
    if left.dims() != right.dims() {
        return Err(Error::dims(left.dims(), right.dims()));
    }
    if max_disp == 0 {
        return Err(Error::arg("max_disp must be at least 1"));
    }
    Ok(())
}

/// Fills a volume row by row; `fill` receives `(y, row_costs, row_valid)`.
fn build_rows(
    width: usize,
    height: usize,
    max_disp: usize,
    scales: usize,
    fill: impl Fn(usize, &mut [f64], &mut [bool]) + Sync,
) -> CostVolume {
    let mut cost = vec![INVALID_COST; height * width * max_disp * scales];
    let mut valid = vec![false; height * width * max_disp];
    if width > 0 {
        cost.par_chunks_mut(width * max_disp * scales)
            .zip(valid.par_chunks_mut(width * max_disp))
            .enumerate()
            .for_each(|(y, (c, v))| fill(y, c, v));
    }
    CostVolume {
        height,
        width,
        max_disp,
        scales,
        cost,
        valid,
    }
}

pub fn build_census_volume(
    left: &GrayImage,
    right: &GrayImage,
    scales: &[usize],
    max_disp: usize,
) -> Result<CostVolume> {
    check_pair(left, right, max_disp)?;
    let lf = census::census_transform(left, scales)?;
    let rf = census::census_transform(right, scales)?;
    Ok(census_volume_from_fields(&lf, &rf, scales, max_disp))
}

pub(crate) fn census_volume_from_fields(
    lf: &CensusField,
    rf: &CensusField,
    scales: &[usize],
    max_disp: usize,
) -> CostVolume {
    let (width, height) = (lf.width(), lf.height());
    let nk = scales.len();
    let ext = max_extent(scales);
    let norms: Vec<f64> = scales.iter().map(|&k| (k * k) as f64).collect();
    build_rows(width, height, max_disp, nk, |y, row, valid| {
        for x in 0..width {
            for d in 0..max_disp {
                if !candidate_valid(x, y, d, ext, width, height) {
                    continue;
                }
                valid[x * max_disp + d] = true;
                let out = &mut row[(x * max_disp + d) * nk..][..nk];
                for (s, o) in out.iter_mut().enumerate() {
                    let a = lf.descriptor(s, x, y).unwrap();
                    let b = rf.descriptor(s, x - d, y).unwrap();
                    *o = hamming_words(a, b) as f64 / norms[s];
                }
            }
        }
    })
}

pub fn build_soft_census_volume(
    left: &GrayImage,
    right: &GrayImage,
    scales: &[usize],
    max_disp: usize,
    steepness: f64,
) -> Result<CostVolume> {
    check_pair(left, right, max_disp)?;
    census::validate_scales(scales)?;
    census::validate_steepness(steepness)?;
    let (w, h) = left.dims();
    let lf = SoftLayers::compute(left.data(), w, h, scales, steepness);
    let rf = SoftLayers::compute(right.data(), w, h, scales, steepness);
    Ok(soft_census_volume_from_layers(&lf, &rf, w, h, max_disp))
}

/// Soft bits of every scale over a raw intensity buffer, stored pixel-major:
/// each pixel owns `stride` values, scale `s` at `offsets[s]..offsets[s] + k*k - 1`.
/// Scales whose window leaves the frame hold placeholder 0.5 bits.
pub(crate) struct SoftLayers {
    pub scales: Vec<usize>,
    pub offsets: Vec<usize>,
    pub stride: usize,
    pub bits: Vec<f64>,
}

impl SoftLayers {
    pub fn compute(data: &[f64], w: usize, h: usize, scales: &[usize], steepness: f64) -> Self {
        let mut offsets = Vec::with_capacity(scales.len());
        let mut stride = 0;
        for &k in scales {
            offsets.push(stride);
            stride += bits_per_descriptor(k);
        }
        let window_offsets: Vec<Vec<(isize, isize)>> =
            scales.iter().map(|&k| census::window_offsets(k)).collect();
        let mut bits = vec![0.5; w * h * stride];
        if w > 0 {
            bits.par_chunks_mut(w * stride)
                .enumerate()
                .for_each(|(y, row)| {
                    for x in 0..w {
                        let center = data[y * w + x];
                        let px = &mut row[x * stride..(x + 1) * stride];
                        for (s, &k) in scales.iter().enumerate() {
                            if !window_inside(x, y, window_extent(k), w, h) {
                                continue;
                            }
                            let dst = &mut px[offsets[s]..offsets[s] + bits_per_descriptor(k)];
                            for (b, &(dx, dy)) in dst.iter_mut().zip(&window_offsets[s]) {
                                let v = data
                                    [(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                                *b = census::logistic(steepness * (v - center));
                            }
                        }
                    }
                });
        }
        SoftLayers {
            scales: scales.to_vec(),
            offsets,
            stride,
            bits,
        }
    }

    #[inline]
    pub fn descriptor(&self, s: usize, i: usize) -> &[f64] {
        let n = bits_per_descriptor(self.scales[s]);
        &self.bits[i * self.stride + self.offsets[s]..][..n]
    }
}

pub(crate) fn soft_census_volume_from_layers(
    lf: &SoftLayers,
    rf: &SoftLayers,
    width: usize,
    height: usize,
    max_disp: usize,
) -> CostVolume {
    let scales = &lf.scales;
    let nk = scales.len();
    let ext = max_extent(scales);
    let norms: Vec<f64> = scales.iter().map(|&k| (k * k) as f64).collect();
    build_rows(width, height, max_disp, nk, |y, row, valid| {
        for x in 0..width {
            for d in 0..max_disp {
                if !candidate_valid(x, y, d, ext, width, height) {
                    continue;
                }
                valid[x * max_disp + d] = true;
                let out = &mut row[(x * max_disp + d) * nk..][..nk];
                for (s, o) in out.iter_mut().enumerate() {
                    let a = lf.descriptor(s, y * width + x);
                    let b = rf.descriptor(s, y * width + x - d);
                    *o = soft_hamming_unchecked(a, b) / norms[s];
                }
            }
        }
    })
}

/// Multi-scale sum of absolute differences, each scale averaged over its
/// `k x k` window so costs stay in `[0, 1]`.
pub fn build_sad_volume(
    left: &GrayImage,
    right: &GrayImage,
    scales: &[usize],
    max_disp: usize,
) -> Result<CostVolume> {
    check_pair(left, right, max_disp)?;
    census::validate_scales(scales)?;
    let (w, h) = left.dims();
    Ok(sad_volume_raw(
        left.data(),
        right.data(),
        w,
        h,
        scales,
        max_disp,
    ))
}

pub(crate) fn sad_volume_raw(
    left: &[f64],
    right: &[f64],
    width: usize,
    height: usize,
    scales: &[usize],
    max_disp: usize,
) -> CostVolume {
    let nk = scales.len();
    let ext = max_extent(scales);
    let (lo_max, hi_max) = ext;
    build_rows(width, height, max_disp, nk, |y, row, valid| {
        if y < lo_max || y + hi_max >= height {
            return;
        }
        // column sums of |L - R_shifted| over each scale's vertical extent
        let mut col = vec![0.0; width];
        for d in 0..max_disp {
            for (s, &k) in scales.iter().enumerate() {
                let (lo, hi) = window_extent(k);
                for (x, c) in col.iter_mut().enumerate().skip(d) {
                    let mut acc = 0.0;
                    for yy in y - lo..=y + hi {
                        acc += (left[yy * width + x] - right[yy * width + x - d]).abs();
                    }
                    *c = acc;
                }
                let norm = (k * k) as f64;
                for x in 0..width {
                    if !candidate_valid(x, y, d, ext, width, height) {
                        continue;
                    }
                    valid[x * max_disp + d] = true;
                    let acc: f64 = col[x - lo..=x + hi].iter().sum();
                    row[(x * max_disp + d) * nk + s] = acc / norm;
                }
            }
        }
    })
}

/// Averages the scale axis; the validity mask is unchanged.
pub fn reduce_scales(vol: &CostVolume) -> CostVolume {
    let nk = vol.scales.max(1);
    let inv = vol.scales as f64;
    let cost = vol
        .cost
        .chunks(nk)
        .map(|c| c.iter().sum::<f64>() / inv)
        .collect();
    CostVolume {
        height: vol.height,
        width: vol.width,
        max_disp: vol.max_disp,
        scales: 1,
        cost,
        valid: vol.valid.clone(),
    }
}

/// Which descriptor populates a volume.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CostKind {
    CensusHard,
    CensusSoft { steepness: f64 },
    Sad,
}

/// Builds the requested volume; with `keep_scales == false` the scale axis is
/// averaged before returning.
pub fn build_volume(
    left: &GrayImage,
    right: &GrayImage,
    kind: CostKind,
    scales: &[usize],
    max_disp: usize,
    keep_scales: bool,
) -> Result<CostVolume> {
    let full = match kind {
        CostKind::CensusHard => build_census_volume(left, right, scales, max_disp)?,
        CostKind::CensusSoft { steepness } => {
            build_soft_census_volume(left, right, scales, max_disp, steepness)?
        }
        CostKind::Sad => build_sad_volume(left, right, scales, max_disp)?,
    };
    Ok(if keep_scales {
        full
    } else {
        reduce_scales(&full)
    })
}
