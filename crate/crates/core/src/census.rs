//! Multi-scale census descriptors, hard and soft.
//!
//! For a window of size `k` anchored on `u`, every neighbour `v` (row-major
//! scan, centre skipped) contributes one bit that is set iff `I(v) >= I(u)`.
//! Odd windows are centred; even windows place `u` at index `k / 2`, so they
//! reach one pixel further up and left than down and right.
//! A descriptor at scale `k` therefore has `k*k - 1` bits, packed 64 per word
//! with bit `i` at word `i / 64`, position `i % 64`.
//!
//! The soft variant replaces the comparison with `logistic(C * (I(v) - I(u)))`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imageio::GrayImage;

/// Steepness used for attack experiments.
pub const DEFAULT_STEEPNESS: f64 = 1e5;

/// Window sizes 3 through 11, nine scales.
pub fn default_scales() -> Vec<usize> {
    (3..=11).collect()
}

pub fn validate_scales(scales: &[usize]) -> Result<()> {
    if scales.is_empty() {
        return Err(Error::arg("at least one census scale is required"));
    }
    for &k in scales {
        if k < 3 {
            return Err(Error::arg(format!(
                "census window size {k} must be at least 3"
            )));
        }
    }
    Ok(())
}

/// Pixels a `k`-window reaches before and after its anchor along each axis.
#[inline]
pub fn window_extent(k: usize) -> (usize, usize) {
    (k / 2, (k - 1) / 2)
}

/// Extent of the largest window in `scales`; this window decides validity of
/// a multi-scale descriptor.
pub fn max_extent(scales: &[usize]) -> (usize, usize) {
    window_extent(scales.iter().copied().max().unwrap_or(1))
}

/// Largest distance any window in `scales` reaches from its anchor.
pub fn max_radius(scales: &[usize]) -> usize {
    max_extent(scales).0
}

#[inline]
pub fn bits_per_descriptor(k: usize) -> usize {
    k * k - 1
}

#[inline]
pub fn words_per_descriptor(k: usize) -> usize {
    bits_per_descriptor(k).div_ceil(64)
}

/// Neighbour offsets `(dx, dy)` of a `k`-window in descriptor bit order.
pub fn window_offsets(k: usize) -> Vec<(isize, isize)> {
    let (lo, hi) = window_extent(k);
    let (lo, hi) = (lo as isize, hi as isize);
    let mut out = Vec::with_capacity(k * k - 1);
    for dy in -lo..=hi {
        for dx in -lo..=hi {
            if dx != 0 || dy != 0 {
                out.push((dx, dy));
            }
        }
    }
    out
}

#[inline]
pub(crate) fn window_inside(
    x: usize,
    y: usize,
    (lo, hi): (usize, usize),
    width: usize,
    height: usize,
) -> bool {
    x >= lo && y >= lo && x + hi < width && y + hi < height
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`logistic`] without the `1 - s` cancellation.
#[inline]
pub fn logistic_derivative(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// A fixed-length bit string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            words[i / 64] |= 1 << (i % 64);
        }
        BitVector {
            words,
            len: bits.len(),
        }
    }

    /// Wraps packed words; bits at or beyond `len` must be zero.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::arg(format!(
                "{} words cannot hold exactly {len} bits",
                words.len()
            )));
        }
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last() {
                if last >> (len % 64) != 0 {
                    return Err(Error::arg("bits set beyond the vector length"));
                }
            }
        }
        Ok(BitVector { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Population count of `a XOR b` over packed words.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

pub fn hamming(a: &BitVector, b: &BitVector) -> Result<u32> {
    if a.len != b.len {
        return Err(Error::arg(format!(
            "hamming distance of {}-bit and {}-bit vectors",
            a.len, b.len
        )));
    }
    Ok(hamming_words(&a.words, &b.words))
}

/// Hamming distance divided by the window area `k * k`.
pub fn normalized_cost(a: &BitVector, b: &BitVector, k: usize) -> Result<f64> {
    if a.len != bits_per_descriptor(k) {
        return Err(Error::arg(format!(
            "descriptor has {} bits, window {k} needs {}",
            a.len,
            bits_per_descriptor(k)
        )));
    }
    Ok(hamming(a, b)? as f64 / (k * k) as f64)
}

/// Sum of squared differences; reduces to the Hamming distance on binary input.
pub fn soft_hamming(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "soft hamming of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(soft_hamming_unchecked(a, b))
}

#[inline]
pub(crate) fn soft_hamming_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hard descriptors of one scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusLayer {
    pub k: usize,
    words: usize,
    bits: Vec<u64>,
    valid: Vec<bool>,
}

/// Hard multi-scale census descriptors of an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusField {
    width: usize,
    height: usize,
    layers: Vec<CensusLayer>,
}

impl CensusField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scales(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.k).collect()
    }

    pub fn layers(&self) -> &[CensusLayer] {
        &self.layers
    }

    pub fn is_valid(&self, scale: usize, x: usize, y: usize) -> bool {
        self.layers[scale].valid[y * self.width + x]
    }

    /// Packed words of the descriptor at `(x, y)` for scale index `scale`,
    /// or `None` where the window leaves the frame.
    #[inline]
    pub fn descriptor(&self, scale: usize, x: usize, y: usize) -> Option<&[u64]> {
        let layer = &self.layers[scale];
        let i = y * self.width + x;
        layer.valid[i].then(|| &layer.bits[i * layer.words..(i + 1) * layer.words])
    }

    pub fn bit_vector(&self, scale: usize, x: usize, y: usize) -> Option<BitVector> {
        let k = self.layers[scale].k;
        self.descriptor(scale, x, y).map(|w| BitVector {
            words: w.to_vec(),
            len: bits_per_descriptor(k),
        })
    }

    /// Debug dump: one line per pixel, `x y` followed by one hex word group
    /// per scale (`-` where invalid), most significant word first.
    pub fn write_hex(&self, mut out: impl Write) -> Result<()> {
        for y in 0..self.height {
            for x in 0..self.width {
                write!(out, "{x} {y}")?;
                for s in 0..self.layers.len() {
                    match self.descriptor(s, x, y) {
                        Some(words) => {
                            write!(out, " ")?;
                            for w in words.iter().rev() {
                                write!(out, "{w:016x}")?;
                            }
                        }
                        None => write!(out, " -")?,
                    }
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

pub fn census_transform(img: &GrayImage, scales: &[usize]) -> Result<CensusField> {
    validate_scales(scales)?;
    let (width, height) = img.dims();
    let data = img.data();
    let layers = scales
        .iter()
        .map(|&k| {
            let words = words_per_descriptor(k);
            let offsets = window_offsets(k);
            let ext = window_extent(k);
            let mut bits = vec![0u64; width * height * words];
            let mut valid = vec![false; width * height];
            if width > 0 {
                bits.par_chunks_mut(width * words)
                    .zip(valid.par_chunks_mut(width))
                    .enumerate()
                    .for_each(|(y, (row_bits, row_valid))| {
                        for x in 0..width {
                            if !window_inside(x, y, ext, width, height) {
                                continue;
                            }
                            row_valid[x] = true;
                            let center = data[y * width + x];
                            let desc = &mut row_bits[x * words..(x + 1) * words];
                            for (i, &(dx, dy)) in offsets.iter().enumerate() {
                                let v = data[(y as isize + dy) as usize * width
                                    + (x as isize + dx) as usize];
                                if v >= center {
                                    desc[i / 64] |= 1 << (i % 64);
                                }
                            }
                        }
                    });
            }
            CensusLayer {
                k,
                words,
                bits,
                valid,
            }
        })
        .collect();
    Ok(CensusField {
        width,
        height,
        layers,
    })
}

/// Soft descriptors of one scale; `bits` holds `k*k - 1` values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCensusLayer {
    pub k: usize,
    bits: Vec<f64>,
    valid: Vec<bool>,
}

/// Differentiable multi-scale census field.
///
/// Soft bits lie strictly inside `(0, 1)` mathematically; in `f64` they
/// saturate to exactly 0 or 1 once `|C * (I(v) - I(u))|` exceeds about 37.
/// Pixels whose window leaves the frame carry placeholder bits of 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCensusField {
    width: usize,
    height: usize,
    steepness: f64,
    layers: Vec<SoftCensusLayer>,
}

impl SoftCensusField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn steepness(&self) -> f64 {
        self.steepness
    }

    pub fn scales(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.k).collect()
    }

    pub fn is_valid(&self, scale: usize, x: usize, y: usize) -> bool {
        self.layers[scale].valid[y * self.width + x]
    }

    #[inline]
    pub fn descriptor(&self, scale: usize, x: usize, y: usize) -> Option<&[f64]> {
        let layer = &self.layers[scale];
        let n = bits_per_descriptor(layer.k);
        let i = y * self.width + x;
        layer.valid[i].then(|| &layer.bits[i * n..(i + 1) * n])
    }
}

pub fn soft_census_transform(
    img: &GrayImage,
    scales: &[usize],
    steepness: f64,
) -> Result<SoftCensusField> {
    validate_scales(scales)?;
    validate_steepness(steepness)?;
    let (width, height) = img.dims();
    let layers = scales
        .iter()
        .map(|&k| {
            let (bits, valid) = soft_layer(img.data(), width, height, k, steepness);
            SoftCensusLayer { k, bits, valid }
        })
        .collect();
    Ok(SoftCensusField {
        width,
        height,
        steepness,
        layers,
    })
}

pub(crate) fn validate_steepness(steepness: f64) -> Result<()> {
    if !(steepness > 0.0 && steepness.is_finite()) {
        return Err(Error::arg(format!(
            "steepness must be positive and finite, got {steepness}"
        )));
    }
    Ok(())
}

/// Soft bits for one scale over a raw (unvalidated) intensity buffer.
pub(crate) fn soft_layer(
    data: &[f64],
    width: usize,
    height: usize,
    k: usize,
    steepness: f64,
) -> (Vec<f64>, Vec<bool>) {
    let n = bits_per_descriptor(k);
    let offsets = window_offsets(k);
    let ext = window_extent(k);
    let mut bits = vec![0.5; width * height * n];
    let mut valid = vec![false; width * height];
    if width == 0 {
        return (bits, valid);
    }
    bits.par_chunks_mut(width * n)
        .zip(valid.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (row_bits, row_valid))| {
            for x in 0..width {
                if !window_inside(x, y, ext, width, height) {
                    continue;
                }
                row_valid[x] = true;
                let center = data[y * width + x];
                let desc = &mut row_bits[x * n..(x + 1) * n];
                for (b, &(dx, dy)) in desc.iter_mut().zip(&offsets) {
                    let v = data[(y as isize + dy) as usize * width + (x as isize + dx) as usize];
                    *b = logistic(steepness * (v - center));
                }
            }
        });
    (bits, valid)
}
