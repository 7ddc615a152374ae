//! Image and disparity-map containers plus the file formats the experiments use:
//! binary PGM (P5), single-channel PFM (`Pf`), 16-bit KITTI disparity PNGs and
//! 8-bit color/gray PNGs collapsed to luma.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Rec.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::arg(format!(
                "image buffer has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg(format!(
                "intensity {} at index {} is outside [0, 1]",
                data[i], i
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Skips the range check; used for probe images during finite differencing.
    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Applies `f` to every intensity; the result must stay in `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Row-major real-valued disparity map with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl DisparityMap {
    /// Builds a map; entries that are non-finite or negative are forced invalid.
    pub fn new(width: usize, height: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if data.len() != width * height || valid.len() != width * height {
            return Err(Error::arg(format!(
                "disparity buffers have {}/{} entries, expected {}x{}",
                data.len(),
                valid.len(),
                width,
                height
            )));
        }
        let valid = data
            .iter()
            .zip(valid)
            .map(|(d, v)| v && d.is_finite() && *d >= 0.0)
            .collect();
        Ok(DisparityMap {
            width,
            height,
            data,
            valid,
        })
    }

    /// Dense map, every finite non-negative value valid.
    pub fn dense(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let valid = vec![true; data.len()];
        Self::new(width, height, data, valid)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::dense(width, height, data)
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }
}

/// Row-major boolean mask in left-image coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::arg(format!(
                "mask has {} entries, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Mask {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            data,
        }
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Axis-aligned pixel rectangle `x, y, w, h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Rect::new(0, 0, width, height)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }

    /// Shrinks the rectangle by `margin` pixels on every side.
    pub fn inset(&self, margin: usize) -> Rect {
        let w = self.w.saturating_sub(2 * margin);
        let h = self.h.saturating_sub(2 * margin);
        Rect::new(self.x + margin, self.y + margin, w, h)
    }

    /// Parses `x,y,w,h`.
    pub fn parse(s: &str) -> Result<Rect> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::arg(format!("rectangle `{s}` is not x,y,w,h")))?;
        match parts.as_slice() {
            [x, y, w, h] => Ok(Rect::new(*x, *y, *w, *h)),
            _ => Err(Error::arg(format!("rectangle `{s}` is not x,y,w,h"))),
        }
    }
}

/// Rec. 601 luma; equal channels pass through unchanged.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    if r == g && g == b {
        return r;
    }
    (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(0.0, 1.0)
}

/// Collapses row-major RGB triplets to a luma image.
pub fn to_gray(width: usize, height: usize, rgb: &[[f64; 3]]) -> Result<GrayImage> {
    if let Some(p) = rgb.iter().flatten().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::arg(format!("channel value {p} outside [0, 1]")));
    }
    GrayImage::new(
        width,
        height,
        rgb.iter().map(|&[r, g, b]| luma(r, g, b)).collect(),
    )
}

// ---------------------------------------------------------------------------
// netpbm header scanning

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderCursor { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<(usize, &'a str)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, "unexpected end of header"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start, "header token is not ASCII"))?;
        Ok((start, text))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (offset, text) = self.token()?;
        text.parse()
            .map_err(|_| Error::format(offset, format!("invalid {what} `{text}`")))
    }

    /// Consumes the single whitespace byte that terminates a header.
    fn end_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::format(self.pos, "missing whitespace after header")),
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_pgm(&read_all(path.as_ref())?)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = HeaderCursor::new(bytes);
    let (offset, magic) = cur.token()?;
    if magic != "P5" {
        return Err(Error::Unsupported(format!(
            "netpbm magic `{magic}` at byte {offset}; only binary P5 is supported"
        )));
    }
    let width: usize = cur.number("width")?;
    let height: usize = cur.number("height")?;
    let maxval_offset = {
        cur.skip_space_and_comments();
        cur.pos
    };
    let maxval: u32 = cur.number("maxval")?;
    if maxval != 255 && maxval != 65535 {
        return Err(Error::format(
            maxval_offset,
            format!("unsupported maxval {maxval}; expected 255 or 65535"),
        ));
    }
    let start = cur.end_header()?;
    let bytes_per = if maxval == 255 { 1 } else { 2 };
    let need = width * height * bytes_per;
    let payload = &bytes[start..];
    if payload.len() < need {
        return Err(Error::format(
            start + payload.len(),
            format!("truncated payload: {} of {} bytes", payload.len(), need),
        ));
    }
    let scale = maxval as f64;
    let data = if bytes_per == 1 {
        payload[..need].iter().map(|&b| b as f64 / scale).collect()
    } else {
        payload[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    GrayImage::new(width, height, data)
}

/// Sample depth for PGM output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>, depth: PgmDepth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_pgm(img, depth))?;
    w.flush()?;
    Ok(())
}

pub fn encode_pgm(img: &GrayImage, depth: PgmDepth) -> Vec<u8> {
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &v in &img.data {
        let q = (v * maxval as f64).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

/// Writes a mask as an 8-bit PGM with 0 / 255 samples.
pub fn write_mask_pgm(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let img = GrayImage {
        width: mask.width,
        height: mask.height,
        data: mask
            .data
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    };
    write_pgm(&img, path, PgmDepth::Eight)
}

/// Reads a PGM mask; any sample at or above half range is set.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<Mask> {
    let img = read_pgm(path)?;
    Ok(Mask {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v >= 0.5).collect(),
    })
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DisparityMap> {
    parse_pfm(&read_all(path.as_ref())?)
}

/// Raw single-channel PFM contents as `(width, height, values)`, top row first.
pub fn parse_pfm_values(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut cur = HeaderCursor::new(bytes);
    let (offset, magic) = cur.token()?;
    match magic {
        "Pf" => {}
        "PF" => {
            return Err(Error::Unsupported(
                "color PFM (`PF`); only single-channel `Pf` is supported".into(),
            ))
        }
        other => {
            return Err(Error::Unsupported(format!(
                "PFM magic `{other}` at byte {offset}"
            )))
        }
    }
    let width: usize = cur.number("width")?;
    let height: usize = cur.number("height")?;
    cur.skip_space_and_comments();
    let scale_offset = cur.pos;
    let scale: f64 = cur.number("scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(
            scale_offset,
            format!("invalid PFM scale {scale}"),
        ));
    }
    let little = scale < 0.0;
    let start = cur.end_header()?;
    let need = width * height * 4;
    let payload = &bytes[start..];
    if payload.len() < need {
        return Err(Error::format(
            start + payload.len(),
            format!("truncated payload: {} of {} bytes", payload.len(), need),
        ));
    }
    let mut data = vec![0.0; width * height];
    for (i, c) in payload[..need].chunks_exact(4).enumerate() {
        let raw = [c[0], c[1], c[2], c[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, col) = (i / width.max(1), i % width.max(1));
        data[(height - 1 - row) * width + col] = v as f64;
    }
    Ok((width, height, data))
}

pub fn parse_pfm(bytes: &[u8]) -> Result<DisparityMap> {
    let (width, height, data) = parse_pfm_values(bytes)?;
    let valid = data.iter().map(|d| d.is_finite() && *d >= 0.0).collect();
    DisparityMap::new(width, height, data, valid)
}

pub fn write_pfm(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_pfm(map))?;
    w.flush()?;
    Ok(())
}

/// Little-endian `Pf` encoding; invalid pixels are stored as -1.0.
pub fn encode_pfm(map: &DisparityMap) -> Vec<u8> {
    let values: Vec<f64> = map
        .data
        .iter()
        .zip(&map.valid)
        .map(|(&d, &v)| if v { d } else { -1.0 })
        .collect();
    encode_pfm_values(map.width, map.height, &values)
}

/// Little-endian `Pf` encoding of arbitrary values (stored as f32).
pub fn encode_pfm_values(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * 4);
    for y in (0..height).rev() {
        for &v in &values[y * width..(y + 1) * width] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_pfm_values(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    parse_pfm_values(&read_all(path.as_ref())?)
}

pub fn write_pfm_values(
    width: usize,
    height: usize,
    values: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::arg(format!(
            "{} values for a {width}x{height} map",
            values.len()
        )));
    }
    std::fs::write(path, encode_pfm_values(width, height, values))?;
    Ok(())
}

/// KITTI 2015 disparity PNG: 16-bit gray, disparity = raw / 256, raw 0 = no data.
pub fn read_kitti_disparity(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Unsupported(format!("PNG decode: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(Error::Unsupported(format!(
            "KITTI disparity must be 16-bit grayscale PNG, found {color:?} {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Unsupported("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Unsupported(format!("PNG decode: {e}")))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(width * height);
    let mut valid = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &buf[y * info.line_size..][..width * 2];
        for c in row.chunks_exact(2) {
            let raw = u16::from_be_bytes([c[0], c[1]]);
            data.push(raw as f64 / 256.0);
            valid.push(raw != 0);
        }
    }
    DisparityMap::new(width, height, data, valid)
}

/// Inverse of [`read_kitti_disparity`]; invalid pixels and values that would
/// round to zero are stored as raw 0.
pub fn write_kitti_disparity(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, map.width as u32, map.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::Unsupported(format!("PNG encode: {e}")))?;
    let mut buf = Vec::with_capacity(map.width * map.height * 2);
    for (d, v) in map.data.iter().zip(&map.valid) {
        let raw = if *v {
            (d * 256.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        buf.extend_from_slice(&raw.to_be_bytes());
    }
    writer
        .write_image_data(&buf)
        .map_err(|e| Error::Unsupported(format!("PNG encode: {e}")))?;
    Ok(())
}

/// Reads an 8-bit gray, gray-alpha, RGB or RGBA PNG and collapses it to luma.
pub fn read_png_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Unsupported(format!("PNG decode: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Unsupported("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Unsupported(format!("PNG decode: {e}")))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &buf[y * info.line_size..][..width * channels];
        for px in row.chunks_exact(channels) {
            let c = |i: usize| px[i] as f64 / 255.0;
            data.push(match channels {
                1 | 2 => c(0),
                _ => luma(c(0), c(1), c(2)),
            });
        }
    }
    GrayImage::new(width, height, data)
}

/// Dispatches on extension: `.png` through [`read_png_gray`], anything else as PGM.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("png") => read_png_gray(path),
        _ => read_pgm(path),
    }
}

/// Dispatches on extension: `.png` as KITTI 16-bit, anything else as PFM.
pub fn read_disparity(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("png") => read_kitti_disparity(path),
        _ => read_pfm(path),
    }
}

/// Renders a disparity map as a binary PPM with a blue-to-red ramp over
/// `[0, max_disp]`; invalid pixels are black.
pub fn write_disparity_ppm(
    map: &DisparityMap,
    max_disp: f64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", map.width, map.height).into_bytes();
    for (d, v) in map.data.iter().zip(&map.valid) {
        if !*v {
            out.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let t = (d / max_disp.max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
        let r = (255.0 * (1.5 - (4.0 * t - 3.0).abs()).clamp(0.0, 1.0)).round() as u8;
        let g = (255.0 * (1.5 - (4.0 * t - 2.0).abs()).clamp(0.0, 1.0)).round() as u8;
        let b = (255.0 * (1.5 - (4.0 * t - 1.0).abs()).clamp(0.0, 1.0)).round() as u8;
        out.extend_from_slice(&[r, g, b]);
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&out)?;
    w.flush()?;
    Ok(())
}
