//! Stereo matching on multi-scale census cost volumes, and adversarial
//! robustness tooling around it.
//!
//! The pieces, roughly in pipeline order:
//!
//! - [`imageio`]: grayscale images, disparity maps, PGM / PFM / KITTI PNG
//! - [`census`]: packed census descriptors, Hamming costs, soft census
//! - [`costvolume`]: `H x W x max_disp x K` cost volumes (census or SAD)
//! - [`matcher`]: SGM + winner-take-all and the differentiable soft-argmin
//! - [`gradient`]: attack loss through the soft pipeline and its exact adjoint
//! - [`attack`]: stereo-constrained PGD, unconstrained PGD, patch attacks
//! - [`eval`]: EPE, bad-pixel rates, evaluation masks, smooth-L1
//! - [`scene`]: seeded random-dot scenes with exact ground truth
//! - [`cli`]: the `census-stereo` command line

pub mod attack;
pub mod census;
pub mod cli;
pub mod costvolume;
pub mod error;
pub mod eval;
pub mod gradient;
pub mod imageio;
pub mod matcher;
pub mod scene;

pub use attack::{
    apply_perturbation, joint_clip, patch_attack, pgd_attack, unconstrained_pgd, AttackConfig,
    AttackMode, AttackOutcome, PerturbationMap,
};
pub use census::{census_transform, hamming, BitVector, CensusField};
pub use costvolume::{build_census_volume, build_sad_volume, build_soft_census_volume, CostVolume};
pub use error::{Error, Result};
pub use eval::{bad, build_eval_mask, epe, evaluate, EvalMask, Metrics};
pub use gradient::{fd_grad, forward_loss, grad_loss, AttackProblem, Descriptor, PipelineConfig};
pub use imageio::{DisparityMap, GrayImage, Mask, Rect};
pub use matcher::{sgm_aggregate, soft_argmin, wta, SgmParams, SoftMatchParams};
pub use scene::{make_scene, SceneSpec, SyntheticScene};
