//! Stereo-constrained sign-PGD, its unconstrained baseline, and patch attacks.
//!
//! A constrained attack owns one field `P` in right-image coordinates. The
//! right image receives `P` directly; every attackable left pixel receives
//! `P(round(x - D), y)`, so corresponding pixels always move together.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{self, AttackProblem, PipelineConfig};
use crate::imageio::{DisparityMap, GrayImage, Mask, Rect};
use crate::matcher::correspondence;

pub const DEFAULT_EPS: f64 = 0.03;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_STEPS: usize = 20;
pub const DEFAULT_PATCH_STEPS: usize = 100;
pub const DEFAULT_PATCH_EPS: f64 = 1.0;

/// Additive perturbation in right-image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    eps: f64,
    support: Option<Mask>,
}

impl PerturbationMap {
    pub fn zeros(width: usize, height: usize, eps: f64) -> Self {
        PerturbationMap {
            width,
            height,
            data: vec![0.0; width * height],
            eps,
            support: None,
        }
    }

    /// Checks `|P| <= eps` and `P == 0` outside `support`.
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        eps: f64,
        support: Option<Mask>,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::arg(format!(
                "{} values for a {width}x{height} perturbation",
                data.len()
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::arg(format!("eps must be positive, got {eps}")));
        }
        if let Some(i) = data.iter().position(|v| v.is_nan() || v.abs() > eps) {
            return Err(Error::arg(format!(
                "perturbation {} at index {i} exceeds eps {eps}",
                data[i]
            )));
        }
        if let Some(s) = &support {
            if s.dims() != (width, height) {
                return Err(Error::dims((width, height), s.dims()));
            }
            if data.iter().zip(s.data()).any(|(&v, &m)| !m && v != 0.0) {
                return Err(Error::arg("perturbation is nonzero outside its support"));
            }
        }
        Ok(PerturbationMap {
            width,
            height,
            data,
            eps,
            support,
        })
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn support(&self) -> Option<&Mask> {
        self.support.as_ref()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    Constrained,
    Unconstrained,
    Patch,
}

impl AttackMode {
    pub fn name(&self) -> &'static str {
        match self {
            AttackMode::Constrained => "constrained",
            AttackMode::Unconstrained => "unconstrained",
            AttackMode::Patch => "patch",
        }
    }
}

impl std::str::FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constrained" => Ok(AttackMode::Constrained),
            "unconstrained" => Ok(AttackMode::Unconstrained),
            "patch" => Ok(AttackMode::Patch),
            other => Err(Error::arg(format!("unknown attack mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mode: AttackMode,
    pub eps: f64,
    pub alpha: f64,
    pub steps: usize,
    pub patch_rect: Option<Rect>,
    pub pipeline: PipelineConfig,
    /// Run a non-differentiable pipeline anyway, with a zero gradient.
    pub allow_zero_grad: bool,
}

impl AttackConfig {
    pub fn constrained(pipeline: PipelineConfig) -> Self {
        AttackConfig {
            mode: AttackMode::Constrained,
            eps: DEFAULT_EPS,
            alpha: DEFAULT_ALPHA,
            steps: DEFAULT_STEPS,
            patch_rect: None,
            pipeline,
            allow_zero_grad: false,
        }
    }

    pub fn unconstrained(pipeline: PipelineConfig) -> Self {
        AttackConfig {
            mode: AttackMode::Unconstrained,
            ..Self::constrained(pipeline)
        }
    }

    pub fn patch(pipeline: PipelineConfig, rect: Rect) -> Self {
        AttackConfig {
            mode: AttackMode::Patch,
            eps: DEFAULT_PATCH_EPS,
            steps: DEFAULT_PATCH_STEPS,
            patch_rect: Some(rect),
            ..Self::constrained(pipeline)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::arg(format!("eps {} outside (0, 1]", self.eps)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::arg(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.steps == 0 {
            return Err(Error::arg("steps must be at least 1"));
        }
        if self.mode == AttackMode::Patch && self.patch_rect.is_none() {
            return Err(Error::arg("patch mode needs a rectangle"));
        }
        self.pipeline.validate()
    }

    fn check_gradient(&self) -> Result<()> {
        if !self.pipeline.descriptor.is_differentiable() && !self.allow_zero_grad {
            return Err(Error::BlockedGradient);
        }
        Ok(())
    }
}

/// Final perturbation and loss trace (`steps + 1` entries, initial first).
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub perturbation: PerturbationMap,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedOutcome {
    pub left: PerturbationMap,
    pub right: PerturbationMap,
    pub trace: Vec<f64>,
}

/// Per-coordinate admissible interval for `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ClipBounds {
    /// `[-eps, eps]` intersected with the colour range of the right pixel and
    /// of every attackable left pixel mapped onto it; `[0, 0]` off `support`.
    pub fn constrained(problem: &AttackProblem, eps: f64, support: Option<&Mask>) -> Self {
        let right = problem.right().data();
        let mut lo: Vec<f64> = right.iter().map(|&r| (-eps).max(-r)).collect();
        let mut hi: Vec<f64> = right.iter().map(|&r| eps.min(1.0 - r)).collect();
        for (i, &l) in problem.left().data().iter().enumerate() {
            if let Some(j) = problem.correspondence(i) {
                lo[j] = lo[j].max(-l);
                hi[j] = hi[j].min(1.0 - l);
            }
        }
        if let Some(s) = support {
            for (i, &m) in s.data().iter().enumerate() {
                if !m {
                    lo[i] = 0.0;
                    hi[i] = 0.0;
                }
            }
        }
        ClipBounds { lo, hi }
    }

    /// Ball and colour range of a single image.
    pub fn independent(img: &GrayImage, eps: f64) -> Self {
        ClipBounds {
            lo: img.data().iter().map(|&v| (-eps).max(-v)).collect(),
            hi: img.data().iter().map(|&v| eps.min(1.0 - v)).collect(),
        }
    }

    pub fn clip(&self, raw: &mut [f64]) {
        for ((v, &lo), &hi) in raw.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Projects `raw` onto the admissible set for a single shared perturbation.
pub fn joint_clip(
    raw: &[f64],
    left: &GrayImage,
    right: &GrayImage,
    gt: &DisparityMap,
    occl: &Mask,
    eps: f64,
) -> Result<PerturbationMap> {
    let (w, h) = right.dims();
    for other in [left.dims(), gt.dims(), occl.dims()] {
        if other != (w, h) {
            return Err(Error::dims((w, h), other));
        }
    }
    if raw.len() != w * h {
        return Err(Error::arg("raw perturbation must match the image size"));
    }
    let problem = AttackProblem::new(
        left.clone(),
        right.clone(),
        gt.clone(),
        occl.clone(),
        crate::eval::EvalMask::new(Mask::empty(w, h)),
    )?;
    let mut data = raw.to_vec();
    ClipBounds::constrained(&problem, eps, None).clip(&mut data);
    PerturbationMap::new(w, h, data, eps, None)
}

fn add_clamped(img: &GrayImage, delta: &[f64]) -> Result<GrayImage> {
    // bounds keep the sum in range up to one rounding step
    let data = img
        .data()
        .iter()
        .zip(delta)
        .map(|(a, b)| (a + b).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// Perturbed `(left, right)` pair; the inputs are left untouched.
pub fn apply_perturbation(
    left: &GrayImage,
    right: &GrayImage,
    gt: &DisparityMap,
    occl: &Mask,
    p: &PerturbationMap,
) -> Result<(GrayImage, GrayImage)> {
    let (w, h) = right.dims();
    for other in [left.dims(), gt.dims(), occl.dims(), p.dims()] {
        if other != (w, h) {
            return Err(Error::dims((w, h), other));
        }
    }
    let left_delta: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !gt.is_valid(x, y) || occl.get(x, y) {
                return 0.0;
            }
            correspondence(x, gt.get(x, y), w).map_or(0.0, |xr| p.get(xr, y))
        })
        .collect();
    Ok((
        add_clamped(left, &left_delta)?,
        add_clamped(right, p.data())?,
    ))
}

/// [`apply_perturbation`] for a prepared problem.
pub fn apply_to_problem(
    problem: &AttackProblem,
    p: &PerturbationMap,
) -> Result<(GrayImage, GrayImage)> {
    apply_perturbation(
        problem.left(),
        problem.right(),
        problem.gt(),
        problem.occl(),
        p,
    )
}

/// Independent fields on both images.
pub fn apply_split(
    left: &GrayImage,
    right: &GrayImage,
    left_delta: &PerturbationMap,
    right_delta: &PerturbationMap,
) -> Result<(GrayImage, GrayImage)> {
    if left_delta.dims() != left.dims() || right_delta.dims() != right.dims() {
        return Err(Error::dims(left.dims(), left_delta.dims()));
    }
    Ok((
        add_clamped(left, left_delta.data())?,
        add_clamped(right, right_delta.data())?,
    ))
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

fn ascend(p: &mut [f64], grad: &[f64], alpha: f64, bounds: &ClipBounds) {
    for (v, g) in p.iter_mut().zip(grad) {
        *v += alpha * sign(*g);
    }
    bounds.clip(p);
}

fn constrained_loop(
    problem: &AttackProblem,
    cfg: &AttackConfig,
    support: Option<Mask>,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    cfg.check_gradient()?;
    let (w, h) = problem.dims();
    let bounds = ClipBounds::constrained(problem, cfg.eps, support.as_ref());
    let mut p = PerturbationMap::zeros(w, h, cfg.eps);
    p.support = support;
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for _ in 0..cfg.steps {
        let g = gradient::grad_loss(problem, &p, &cfg.pipeline)?;
        trace.push(g.loss);
        let mut grad = g.grad;
        if let Some(s) = &p.support {
            grad.iter_mut().zip(s.data()).for_each(|(g, &m)| {
                if !m {
                    *g = 0.0
                }
            });
        }
        ascend(&mut p.data, &grad, cfg.alpha, &bounds);
    }
    trace.push(gradient::forward_loss(problem, &p, &cfg.pipeline)?);
    Ok(AttackOutcome {
        perturbation: p,
        trace,
    })
}

/// Sign-PGD from `P = 0`, projected with [`ClipBounds::constrained`] after
/// every step. Patch configs are routed to [`patch_attack`].
pub fn pgd_attack(problem: &AttackProblem, cfg: &AttackConfig) -> Result<AttackOutcome> {
    match cfg.mode {
        AttackMode::Patch => {
            let rect = cfg
                .patch_rect
                .ok_or_else(|| Error::arg("patch mode needs a rectangle"))?;
            patch_attack(problem, rect, cfg)
        }
        AttackMode::Unconstrained => Err(Error::arg(
            "unconstrained mode perturbs two fields; use unconstrained_pgd",
        )),
        AttackMode::Constrained => constrained_loop(problem, cfg, None),
    }
}

/// Constrained PGD with `P` confined to `rect` in right-image coordinates.
/// The ground truth is not modified.
pub fn patch_attack(
    problem: &AttackProblem,
    rect: Rect,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    let (w, h) = problem.dims();
    if !rect.fits_in(w, h) || rect.w == 0 || rect.h == 0 {
        return Err(Error::arg(format!(
            "patch {},{},{},{} outside the {w}x{h} image",
            rect.x, rect.y, rect.w, rect.h
        )));
    }
    let support = Mask::from_fn(w, h, |x, y| rect.contains(x, y));
    constrained_loop(problem, cfg, Some(support))
}

/// Independent sign-PGD on left and right fields; occlusion is not enforced.
pub fn unconstrained_pgd(
    problem: &AttackProblem,
    cfg: &AttackConfig,
) -> Result<UnconstrainedOutcome> {
    cfg.validate()?;
    cfg.check_gradient()?;
    let (w, h) = problem.dims();
    let lb = ClipBounds::independent(problem.left(), cfg.eps);
    let rb = ClipBounds::independent(problem.right(), cfg.eps);
    let mut pl = vec![0.0; w * h];
    let mut pr = vec![0.0; w * h];
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for _ in 0..cfg.steps {
        let g = gradient::grad_loss_split(problem, &pl, &pr, &cfg.pipeline)?;
        trace.push(g.loss);
        ascend(&mut pl, &g.left, cfg.alpha, &lb);
        ascend(&mut pr, &g.right, cfg.alpha, &rb);
    }
    trace.push(gradient::forward_loss_split(
        problem,
        &pl,
        &pr,
        &cfg.pipeline,
    )?);
    Ok(UnconstrainedOutcome {
        left: PerturbationMap::new(w, h, pl, cfg.eps, None)?,
        right: PerturbationMap::new(w, h, pr, cfg.eps, None)?,
        trace,
    })
}
