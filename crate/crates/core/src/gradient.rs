//! Attack objective through the differentiable matching pipeline and its
//! exact adjoint.
//!
//! Forward map, for a perturbation `P` in right-image coordinates:
//!
//! 1. `R' = R + P`, `L'(x, y) = L(x, y) + P(round(x - D), y)` on attackable pixels
//! 2. per-scale costs (soft census, hard census, or SAD), averaged over scales
//! 3. box aggregation, then soft-argmin over candidates
//! 4. mean absolute error against the ground truth over the evaluation mask
//!
//! The backward pass walks the same stages in reverse. Hard census has no
//! usable derivative: its gradient is reported as exactly zero and flagged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::PerturbationMap;
use crate::census::{self, bits_per_descriptor, window_extent, window_inside, window_offsets};
use crate::costvolume::{
    census_volume_from_fields, reduce_scales, sad_volume_raw, soft_census_volume_from_layers,
    CostVolume, SoftLayers,
};
use crate::error::{Error, Result};
use crate::eval::{build_eval_mask, matching_frame, EvalMask};
use crate::imageio::{DisparityMap, GrayImage, Mask};
use crate::matcher::{
    box_count, box_mean_raw, box_sum_raw, correspondence, soft_argmin_pixel, SoftMatchParams,
};
use crate::scene::SyntheticScene;

/// Steepness used where gradients are compared against finite differences.
pub const GRADCHECK_STEEPNESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Descriptor {
    CensusSoft,
    CensusHard,
    Sad,
}

impl Descriptor {
    pub fn name(&self) -> &'static str {
        match self {
            Descriptor::CensusSoft => "census-soft",
            Descriptor::CensusHard => "census-hard",
            Descriptor::Sad => "sad",
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Descriptor::CensusHard)
    }
}

impl std::str::FromStr for Descriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "census-soft" => Ok(Descriptor::CensusSoft),
            "census-hard" | "census" => Ok(Descriptor::CensusHard),
            "sad" => Ok(Descriptor::Sad),
            other => Err(Error::arg(format!("unknown descriptor `{other}`"))),
        }
    }
}

/// Everything that determines the map from perturbation to loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub descriptor: Descriptor,
    pub scales: Vec<usize>,
    pub max_disp: usize,
    /// Soft census steepness `C`; ignored by the other descriptors.
    pub steepness: f64,
    pub matching: SoftMatchParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            descriptor: Descriptor::CensusSoft,
            scales: census::default_scales(),
            max_disp: crate::costvolume::DEFAULT_MAX_DISP,
            steepness: census::DEFAULT_STEEPNESS,
            matching: SoftMatchParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        census::validate_scales(&self.scales)?;
        if self.descriptor == Descriptor::CensusSoft {
            census::validate_steepness(self.steepness)?;
        }
        if self.max_disp == 0 {
            return Err(Error::arg("max_disp must be at least 1"));
        }
        self.matching.validate()
    }
}

/// A stereo pair, its ground truth, and the pixels the attack may touch and
/// is scored on.
#[derive(Debug, Clone)]
pub struct AttackProblem {
    left: GrayImage,
    right: GrayImage,
    gt: DisparityMap,
    occl: Mask,
    eval: EvalMask,
    corr: Vec<Option<usize>>,
}

impl AttackProblem {
    pub fn new(
        left: GrayImage,
        right: GrayImage,
        gt: DisparityMap,
        occl: Mask,
        eval: EvalMask,
    ) -> Result<Self> {
        let dims = left.dims();
        for other in [right.dims(), gt.dims(), occl.dims(), eval.dims()] {
            if other != dims {
                return Err(Error::dims(dims, other));
            }
        }
        let (w, h) = dims;
        let corr = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if !gt.is_valid(x, y) || occl.get(x, y) {
                    return None;
                }
                correspondence(x, gt.get(x, y), w).map(|xr| y * w + xr)
            })
            .collect();
        Ok(AttackProblem {
            left,
            right,
            gt,
            occl,
            eval,
            corr,
        })
    }

    /// Uses the evaluation mask restricted to the frame where every matching
    /// window fits.
    pub fn with_matching_mask(
        left: GrayImage,
        right: GrayImage,
        gt: DisparityMap,
        occl: Mask,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        let (w, h) = gt.dims();
        let frame = matching_frame(w, h, &cfg.scales);
        let eval = build_eval_mask(&gt, Some(&occl), Some(frame), cfg.max_disp)?;
        Self::new(left, right, gt, occl, eval)
    }

    pub fn from_scene(scene: &SyntheticScene, cfg: &PipelineConfig) -> Result<Self> {
        Self::with_matching_mask(
            scene.left.clone(),
            scene.right.clone(),
            scene.gt.clone(),
            scene.occl.clone(),
            cfg,
        )
    }

    pub fn left(&self) -> &GrayImage {
        &self.left
    }

    pub fn right(&self) -> &GrayImage {
        &self.right
    }

    pub fn gt(&self) -> &DisparityMap {
        &self.gt
    }

    pub fn occl(&self) -> &Mask {
        &self.occl
    }

    pub fn eval_mask(&self) -> &EvalMask {
        &self.eval
    }

    pub fn dims(&self) -> (usize, usize) {
        self.left.dims()
    }

    /// Right-image pixel index a left pixel index is tied to, if attackable.
    #[inline]
    pub fn correspondence(&self, i: usize) -> Option<usize> {
        self.corr[i]
    }

    /// Left-image additive field induced by a right-coordinate perturbation.
    pub fn left_delta(&self, p: &[f64]) -> Vec<f64> {
        self.corr.iter().map(|c| c.map_or(0.0, |j| p[j])).collect()
    }

    /// Adjoint of `p -> (left_delta(p), p)`.
    pub fn pull_back(&self, g_left: &[f64], g_right: &[f64]) -> Vec<f64> {
        let mut g = g_right.to_vec();
        for (i, c) in self.corr.iter().enumerate() {
            if let Some(j) = c {
                g[*j] += g_left[i];
            }
        }
        g
    }

    fn check_map(&self, p: &PerturbationMap) -> Result<()> {
        if p.dims() != self.dims() {
            return Err(Error::dims(self.dims(), p.dims()));
        }
        Ok(())
    }

    fn constrained_images(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ld = self.left_delta(p);
        let left = self
            .left
            .data()
            .iter()
            .zip(&ld)
            .map(|(a, b)| a + b)
            .collect();
        let right = self
            .right
            .data()
            .iter()
            .zip(p)
            .map(|(a, b)| a + b)
            .collect();
        (left, right)
    }

    fn split_images(
        &self,
        left_delta: &[f64],
        right_delta: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.left.data().len();
        if left_delta.len() != n || right_delta.len() != n {
            return Err(Error::arg("perturbation fields must match the image size"));
        }
        let left = self
            .left
            .data()
            .iter()
            .zip(left_delta)
            .map(|(a, b)| a + b)
            .collect();
        let right = self
            .right
            .data()
            .iter()
            .zip(right_delta)
            .map(|(a, b)| a + b)
            .collect();
        Ok((left, right))
    }
}

/// Loss value and gradient with respect to a perturbation map.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Set when the descriptor is non-differentiable and `grad` is zero by fiat.
    pub blocked: bool,
}

/// Loss and gradients for independent left / right perturbation fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGradient {
    pub loss: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub blocked: bool,
}

enum Features {
    Soft(SoftLayers, SoftLayers),
    None,
}

struct Tape {
    left: Vec<f64>,
    right: Vec<f64>,
    features: Features,
    valid: Vec<bool>,
    probs: Vec<f64>,
    pred: Vec<f64>,
}

fn build_costs(
    left: &[f64],
    right: &[f64],
    w: usize,
    h: usize,
    cfg: &PipelineConfig,
) -> (CostVolume, Features) {
    match cfg.descriptor {
        Descriptor::CensusSoft => {
            let lf = SoftLayers::compute(left, w, h, &cfg.scales, cfg.steepness);
            let rf = SoftLayers::compute(right, w, h, &cfg.scales, cfg.steepness);
            let vol = soft_census_volume_from_layers(&lf, &rf, w, h, cfg.max_disp);
            (vol, Features::Soft(lf, rf))
        }
        Descriptor::CensusHard => {
            let li = GrayImage::from_raw_unchecked(w, h, left.to_vec());
            let ri = GrayImage::from_raw_unchecked(w, h, right.to_vec());
            let lf = census::census_transform(&li, &cfg.scales).expect("validated scales");
            let rf = census::census_transform(&ri, &cfg.scales).expect("validated scales");
            (
                census_volume_from_fields(&lf, &rf, &cfg.scales, cfg.max_disp),
                Features::None,
            )
        }
        Descriptor::Sad => (
            sad_volume_raw(left, right, w, h, &cfg.scales, cfg.max_disp),
            Features::None,
        ),
    }
}

fn run_forward(
    problem: &AttackProblem,
    left: Vec<f64>,
    right: Vec<f64>,
    cfg: &PipelineConfig,
) -> Result<(f64, Tape)> {
    cfg.validate()?;
    let (w, h) = problem.dims();
    let nd = cfg.max_disp;
    let (full, features) = build_costs(&left, &right, w, h, cfg);
    let reduced = reduce_scales(&full);
    drop(full);
    let agg = box_mean_raw(reduced.costs(), w, h, nd, cfg.matching.agg_window);
    let mut probs = vec![0.0; w * h * nd];
    let mut pred = vec![0.0; w * h];
    probs
        .par_chunks_mut(nd.max(1))
        .zip(pred.par_iter_mut())
        .enumerate()
        .for_each(|(i, (p, out))| {
            *out = soft_argmin_pixel(&agg[i * nd..(i + 1) * nd], cfg.matching.tau, p);
        });
    let loss = masked_mae(&pred, problem)?;
    Ok((
        loss,
        Tape {
            left,
            right,
            features,
            valid: reduced.valid().to_vec(),
            probs,
            pred,
        },
    ))
}

fn masked_mae(pred: &[f64], problem: &AttackProblem) -> Result<f64> {
    let mask = problem.eval.mask().data();
    let n = problem.eval.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let sum: f64 = pred
        .iter()
        .zip(problem.gt.data())
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((p, g), _)| (p - g).abs())
        .sum();
    Ok(sum / n as f64)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradients of the loss with respect to the perturbed left and right images.
fn run_backward(
    problem: &AttackProblem,
    tape: &Tape,
    cfg: &PipelineConfig,
) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = problem.dims();
    let nd = cfg.max_disp;
    let tau = cfg.matching.tau;
    let mask = problem.eval.mask().data();
    let n = problem.eval.count() as f64;

    // soft-argmin and masked MAE
    let mut g_agg = vec![0.0; w * h * nd];
    g_agg.par_chunks_mut(nd).enumerate().for_each(|(i, g)| {
        if !mask[i] {
            return;
        }
        let g_pred = sign(tape.pred[i] - problem.gt.data()[i]) / n;
        if g_pred == 0.0 {
            return;
        }
        let (x, y) = (i % w, i / w);
        let scale = 1.0 / box_count(x, y, w, h, cfg.matching.agg_window);
        let probs = &tape.probs[i * nd..(i + 1) * nd];
        for (d, (gd, p)) in g.iter_mut().zip(probs).enumerate() {
            // box-mean normalization of this output pixel folded in
            *gd = -g_pred * p * (d as f64 - tape.pred[i]) / tau * scale;
        }
    });

    // box aggregation, then drop constant (invalid) entries
    let mut g_cost = box_sum_raw(&g_agg, w, h, nd, cfg.matching.agg_window);
    drop(g_agg);
    g_cost.iter_mut().zip(&tape.valid).for_each(|(g, &v)| {
        if !v {
            *g = 0.0
        }
    });
    let inv_k = 1.0 / cfg.scales.len() as f64;

    match (&tape.features, cfg.descriptor) {
        (Features::Soft(lf, rf), Descriptor::CensusSoft) => {
            backward_soft_census(lf, rf, &g_cost, inv_k, tape, w, h, cfg)
        }
        (_, Descriptor::Sad) => backward_sad(&tape.left, &tape.right, &g_cost, inv_k, w, h, cfg),
        _ => (vec![0.0; w * h], vec![0.0; w * h]),
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_soft_census(
    lf: &SoftLayers,
    rf: &SoftLayers,
    g_cost: &[f64],
    inv_k: f64,
    tape: &Tape,
    w: usize,
    h: usize,
    cfg: &PipelineConfig,
) -> (Vec<f64>, Vec<f64>) {
    let nd = cfg.max_disp;
    let stride = lf.stride;
    let coefs: Vec<f64> = cfg
        .scales
        .iter()
        .map(|&k| 2.0 * inv_k / (k * k) as f64)
        .collect();

    // gradients w.r.t. soft bits; each cost couples row y of both images only
    let mut g_lb = vec![0.0; w * h * stride];
    let mut g_rb = vec![0.0; w * h * stride];
    g_lb.par_chunks_mut(w * stride)
        .zip(g_rb.par_chunks_mut(w * stride))
        .enumerate()
        .for_each(|(y, (gl_row, gr_row))| {
            for x in 0..w {
                let i = y * w + x;
                for d in 0..nd.min(x + 1) {
                    let g = g_cost[i * nd + d];
                    if g == 0.0 {
                        continue;
                    }
                    for (s, &k) in cfg.scales.iter().enumerate() {
                        let c = coefs[s] * g;
                        let a = lf.descriptor(s, i);
                        let b = rf.descriptor(s, i - d);
                        let off = lf.offsets[s];
                        let nb = bits_per_descriptor(k);
                        let gl = &mut gl_row[x * stride + off..][..nb];
                        for ((gl, a), b) in gl.iter_mut().zip(a).zip(b) {
                            *gl += c * (a - b);
                        }
                        let gr = &mut gr_row[(x - d) * stride + off..][..nb];
                        for ((gr, a), b) in gr.iter_mut().zip(a).zip(b) {
                            *gr -= c * (a - b);
                        }
                    }
                }
            }
        });

    let gl = soft_bits_backward(&tape.left, &g_lb, lf, w, h, cfg.steepness);
    let gr = soft_bits_backward(&tape.right, &g_rb, rf, w, h, cfg.steepness);
    (gl, gr)
}

/// Pulls soft-bit gradients back through `logistic(C * (I(v) - I(u)))`.
fn soft_bits_backward(
    img: &[f64],
    g_bits: &[f64],
    layers: &SoftLayers,
    w: usize,
    h: usize,
    steepness: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; w * h];
    let offsets: Vec<Vec<(isize, isize)>> =
        layers.scales.iter().map(|&k| window_offsets(k)).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let center = img[i];
            for (s, &k) in layers.scales.iter().enumerate() {
                if !window_inside(x, y, window_extent(k), w, h) {
                    continue;
                }
                let gb = &g_bits[i * layers.stride + layers.offsets[s]..][..bits_per_descriptor(k)];
                let mut g_center = 0.0;
                for (&gbj, &(dx, dy)) in gb.iter().zip(&offsets[s]) {
                    if gbj == 0.0 {
                        continue;
                    }
                    let j = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                    let t = gbj
                        * steepness
                        * census::logistic_derivative(steepness * (img[j] - center));
                    g[j] += t;
                    g_center -= t;
                }
                g[i] += g_center;
            }
        }
    }
    g
}

fn backward_sad(
    left: &[f64],
    right: &[f64],
    g_cost: &[f64],
    inv_k: f64,
    w: usize,
    h: usize,
    cfg: &PipelineConfig,
) -> (Vec<f64>, Vec<f64>) {
    let nd = cfg.max_disp;
    let mut gl = vec![0.0; w * h];
    let mut gr = vec![0.0; w * h];
    let mut a = vec![0.0; w * h];
    let mut horiz = vec![0.0; w * h];
    let mut total = vec![0.0; w * h];
    for d in 0..nd.min(w) {
        total.fill(0.0);
        let mut any = false;
        for &k in &cfg.scales {
            let norm = inv_k / (k * k) as f64;
            for (i, av) in a.iter_mut().enumerate() {
                *av = g_cost[i * nd + d] * norm;
                any |= *av != 0.0;
            }
            if !any {
                break;
            }
            // adjoint of the anchored window sum: output (x, y) read inputs
            // x - lo ..= x + hi, so input x' collects outputs x' - hi ..= x' + lo
            let (lo, hi) = window_extent(k);
            for y in 0..h {
                for x in 0..w {
                    let from = x.saturating_sub(hi);
                    let to = (x + lo).min(w - 1);
                    horiz[y * w + x] = a[y * w + from..=y * w + to].iter().sum();
                }
            }
            for y in 0..h {
                let from = y.saturating_sub(hi);
                let to = (y + lo).min(h - 1);
                for x in 0..w {
                    let mut acc = 0.0;
                    for yy in from..=to {
                        acc += horiz[yy * w + x];
                    }
                    total[y * w + x] += acc;
                }
            }
        }
        if !any {
            continue;
        }
        for y in 0..h {
            for x in d..w {
                let t = total[y * w + x];
                if t == 0.0 {
                    continue;
                }
                let s = sign(left[y * w + x] - right[y * w + x - d]) * t;
                gl[y * w + x] += s;
                gr[y * w + x - d] -= s;
            }
        }
    }
    (gl, gr)
}

/// Loss of the pipeline on the pair perturbed by `p` through the
/// correspondence rule.
pub fn forward_loss(
    problem: &AttackProblem,
    p: &PerturbationMap,
    cfg: &PipelineConfig,
) -> Result<f64> {
    problem.check_map(p)?;
    let (l, r) = problem.constrained_images(p.data());
    Ok(run_forward(problem, l, r, cfg)?.0)
}

/// Loss with independent additive fields on each image.
pub fn forward_loss_split(
    problem: &AttackProblem,
    left_delta: &[f64],
    right_delta: &[f64],
    cfg: &PipelineConfig,
) -> Result<f64> {
    let (l, r) = problem.split_images(left_delta, right_delta)?;
    Ok(run_forward(problem, l, r, cfg)?.0)
}

/// Soft-pipeline disparity on the perturbed pair.
pub fn predict(
    problem: &AttackProblem,
    p: &PerturbationMap,
    cfg: &PipelineConfig,
) -> Result<DisparityMap> {
    problem.check_map(p)?;
    let (l, r) = problem.constrained_images(p.data());
    tape_prediction(problem, run_forward(problem, l, r, cfg)?.1)
}

pub fn predict_split(
    problem: &AttackProblem,
    left_delta: &[f64],
    right_delta: &[f64],
    cfg: &PipelineConfig,
) -> Result<DisparityMap> {
    let (l, r) = problem.split_images(left_delta, right_delta)?;
    tape_prediction(problem, run_forward(problem, l, r, cfg)?.1)
}

fn tape_prediction(problem: &AttackProblem, tape: Tape) -> Result<DisparityMap> {
    let (w, h) = problem.dims();
    let nd = (tape.valid.len() / (w * h).max(1)).max(1);
    let valid = tape
        .valid
        .chunks(nd)
        .map(|c| c.iter().any(|&v| v))
        .collect();
    DisparityMap::new(w, h, tape.pred, valid)
}

/// Exact gradient of [`forward_loss`] with respect to `p`.
pub fn grad_loss(
    problem: &AttackProblem,
    p: &PerturbationMap,
    cfg: &PipelineConfig,
) -> Result<Gradient> {
    problem.check_map(p)?;
    let (l, r) = problem.constrained_images(p.data());
    let (loss, tape) = run_forward(problem, l, r, cfg)?;
    if !cfg.descriptor.is_differentiable() {
        return Ok(Gradient {
            loss,
            grad: vec![0.0; p.data().len()],
            blocked: true,
        });
    }
    let (gl, gr) = run_backward(problem, &tape, cfg);
    Ok(Gradient {
        loss,
        grad: problem.pull_back(&gl, &gr),
        blocked: false,
    })
}

/// Exact gradients of [`forward_loss_split`] with respect to both fields.
pub fn grad_loss_split(
    problem: &AttackProblem,
    left_delta: &[f64],
    right_delta: &[f64],
    cfg: &PipelineConfig,
) -> Result<SplitGradient> {
    let (l, r) = problem.split_images(left_delta, right_delta)?;
    let (loss, tape) = run_forward(problem, l, r, cfg)?;
    if !cfg.descriptor.is_differentiable() {
        let n = left_delta.len();
        return Ok(SplitGradient {
            loss,
            left: vec![0.0; n],
            right: vec![0.0; n],
            blocked: true,
        });
    }
    let (left, right) = run_backward(problem, &tape, cfg);
    Ok(SplitGradient {
        loss,
        left,
        right,
        blocked: false,
    })
}

/// Central differences `(f(x + h e_c) - f(x - h e_c)) / 2h` at each index `c`.
pub fn central_differences(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    point: &[f64],
    indices: &[usize],
    step: f64,
) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::arg(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut probe = point.to_vec();
    let mut out = Vec::with_capacity(indices.len());
    for &c in indices {
        if c >= point.len() {
            return Err(Error::arg(format!("coordinate index {c} out of bounds")));
        }
        probe[c] = point[c] + step;
        let plus = f(&probe)?;
        probe[c] = point[c] - step;
        let minus = f(&probe)?;
        probe[c] = point[c];
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// Finite-difference probe of [`forward_loss`] at pixel coordinates `(x, y)`,
/// without clipping the probed perturbation.
pub fn fd_grad(
    problem: &AttackProblem,
    p: &PerturbationMap,
    cfg: &PipelineConfig,
    coords: &[(usize, usize)],
    step: f64,
) -> Result<Vec<f64>> {
    problem.check_map(p)?;
    let (w, h) = problem.dims();
    let indices = coords
        .iter()
        .map(|&(x, y)| {
            if x >= w || y >= h {
                Err(Error::arg(format!("coordinate ({x}, {y}) outside {w}x{h}")))
            } else {
                Ok(y * w + x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    central_differences(
        |probe| {
            let (l, r) = problem.constrained_images(probe);
            Ok(run_forward(problem, l, r, cfg)?.0)
        },
        p.data(),
        &indices,
        step,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{make_scene, SceneSpec};

    fn small_cfg(descriptor: Descriptor) -> PipelineConfig {
        PipelineConfig {
            descriptor,
            scales: vec![3, 4],
            max_disp: 6,
            steepness: GRADCHECK_STEEPNESS,
            matching: SoftMatchParams {
                agg_window: 3,
                tau: 0.1,
            },
        }
    }

    #[test]
    fn central_differences_exact_on_affine() {
        let f = |v: &[f64]| Ok(3.0 * v[0] - 2.0 * v[1] + 0.5);
        let g = central_differences(f, &[0.5, -1.0], &[0, 1], 0.25).unwrap();
        assert_eq!(g, vec![3.0, -2.0]);
        assert!(central_differences(f, &[0.0, 0.0], &[2], 0.1).is_err());
        assert!(central_differences(f, &[0.0, 0.0], &[0], 0.0).is_err());
    }

    #[test]
    fn hard_census_gradient_is_blocked() {
        let cfg = small_cfg(Descriptor::CensusHard);
        let scene = make_scene(&SceneSpec::plane(24, 12, 2.0), 1).unwrap();
        let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
        let p = PerturbationMap::zeros(24, 12, 0.03);
        let g = grad_loss(&problem, &p, &cfg).unwrap();
        assert!(g.blocked);
        assert!(g.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn left_delta_follows_correspondences() {
        let cfg = small_cfg(Descriptor::Sad);
        let scene = make_scene(&SceneSpec::plane(16, 8, 3.0), 2).unwrap();
        let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
        let mut p = vec![0.0; 16 * 8];
        p[2 * 16 + 5] = 0.01;
        let ld = problem.left_delta(&p);
        assert_eq!(ld[2 * 16 + 8], 0.01);
        assert_eq!(ld.iter().filter(|&&v| v != 0.0).count(), 1);
        let back = problem.pull_back(&ld, &p);
        assert_eq!(back[2 * 16 + 5], 0.02);
    }

    #[test]
    fn descriptor_names_roundtrip() {
        for d in [
            Descriptor::CensusSoft,
            Descriptor::CensusHard,
            Descriptor::Sad,
        ] {
            assert_eq!(d.name().parse::<Descriptor>().unwrap(), d);
        }
        assert!("orb".parse::<Descriptor>().is_err());
    }
}
