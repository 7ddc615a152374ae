//! The `census-stereo` command line: `match`, `attack`, `eval`, `synth`, `report`.
//!
//! Every command writes one JSON manifest next to its outputs. Exit codes:
//! 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{self, AttackConfig, AttackMode, PerturbationMap};
use crate::census;
use crate::costvolume::{build_volume, CostKind, DEFAULT_MAX_DISP};
use crate::error::{Error, Result};
use crate::eval::{build_eval_mask, evaluate, matching_frame, Metrics};
use crate::gradient::{self, AttackProblem, Descriptor, PipelineConfig};
use crate::imageio::{self, DisparityMap, PgmDepth, Rect};
use crate::matcher::{occlusion_mask, sgm_aggregate, soft_argmin, wta, SgmParams, SoftMatchParams};
use crate::scene::{make_scene, DisparityModel, SceneSpec};

#[derive(Debug, Parser)]
#[command(
    name = "census-stereo",
    version,
    about = "Census stereo matching and adversarial robustness runs"
)]
pub struct Cli {
    /// Worker threads for data-parallel stages (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a disparity map from a rectified pair.
    Match(MatchArgs),
    /// Run a PGD or patch attack against the differentiable pipeline.
    Attack(AttackArgs),
    /// Score a disparity map against ground truth.
    Eval(EvalArgs),
    /// Generate a random-dot scene with exact ground truth.
    Synth(SynthArgs),
    /// Summarize run manifests into a CSV table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    /// Window sizes, `lo..hi` (inclusive) or a comma list.
    #[arg(long, default_value = "3..11")]
    pub scales: String,
    #[arg(long, default_value_t = DEFAULT_MAX_DISP)]
    pub max_disp: usize,
    /// Soft census steepness.
    #[arg(long, default_value_t = census::DEFAULT_STEEPNESS)]
    pub steepness: f64,
    /// Softmax temperature of the soft aggregator.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    /// Box filter size of the soft aggregator.
    #[arg(long, default_value_t = 7)]
    pub agg_window: usize,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// census, census-soft or sad.
    #[arg(long, default_value = "census")]
    pub descriptor: String,
    /// sgm or soft.
    #[arg(long, default_value = "sgm")]
    pub aggregator: String,
    #[arg(long, default_value_t = 0.05)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p2: f64,
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    #[command(flatten)]
    pub cost: CostArgs,
    /// Disparity output (`.pfm`, or `.png` in KITTI encoding).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground truth to score the result against.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub scene: Option<String>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Occlusion mask PGM; derived from the ground truth when absent.
    #[arg(long)]
    pub occl: Option<PathBuf>,
    /// constrained, unconstrained or patch.
    #[arg(long, default_value = "constrained")]
    pub mode: String,
    /// Budget (default 0.03; 1.0 in patch mode).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = attack::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Iterations (default 20; 100 in patch mode).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Patch rectangle `x,y,w,h` in right-image coordinates.
    #[arg(long)]
    pub rect: Option<String>,
    /// census-soft, census-hard or sad.
    #[arg(long, default_value = "census-soft")]
    pub descriptor: String,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Run a hard-census attack with its zero gradient instead of refusing.
    #[arg(long)]
    pub allow_zero_grad: bool,
    #[arg(long)]
    pub scene: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub occl: Option<PathBuf>,
    /// Evaluation crop `x,y,w,h`.
    #[arg(long)]
    pub crop: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_DISP)]
    pub max_disp: usize,
    /// Metrics JSON output; printed to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub scene: Option<String>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["plane", "slant", "step"])))]
pub struct SynthArgs {
    /// Constant disparity.
    #[arg(long)]
    pub plane: Option<f64>,
    /// Slanted plane `base,dx,dy`.
    #[arg(long)]
    pub slant: Option<String>,
    /// Step `background:foreground`, boundary at mid-width.
    #[arg(long)]
    pub step: Option<String>,
    /// Image size `HxW`.
    #[arg(long, default_value = "64x128")]
    pub size: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    #[arg(long, default_value_t = 1)]
    pub dot_size: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `*manifest.json`.
    #[arg(long)]
    pub dir: PathBuf,
    /// CSV output (default `<dir>/report.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Fields `report` turns into one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scene: String,
    pub descriptor: String,
    pub aggregator: String,
    pub mode: Option<String>,
    pub eps: Option<f64>,
    pub steps: Option<usize>,
    pub clean: Option<Metrics>,
    pub attacked: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: Vec<String>,
    pub summary: Option<RunSummary>,
    pub duration_secs: f64,
}

pub const REPORT_HEADER: &str =
    "scene,descriptor,aggregator,mode,eps,steps,epe,bad1,bad3,epe_adv,bad1_adv,bad3_adv";

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Error::Argument(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::arg("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    pool.install(|| match cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Report(a) => cmd_report(a),
    })
}

pub fn parse_scales(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::arg(format!("cannot parse scales `{s}`"));
    let scales: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    census::validate_scales(&scales)?;
    Ok(scales)
}

/// `HxW` into `(width, height)`.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::arg(format!("size `{s}` is not HxW"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    Ok((w, h))
}

fn parse_floats(s: &str, sep: char, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(sep)
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::arg(format!("cannot parse `{s}`")))?;
    if v.len() != n {
        return Err(Error::arg(format!("`{s}` needs {n} values")));
    }
    Ok(v)
}

fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn digests(inputs: &[(&str, &Path)]) -> Result<BTreeMap<String, InputDigest>> {
    inputs
        .iter()
        .map(|(k, p)| Ok((k.to_string(), digest(p)?)))
        .collect()
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn manifest_beside(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn scene_name(explicit: &Option<String>, left: &Path) -> String {
    if let Some(s) = explicit {
        return s.clone();
    }
    left.parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| {
            left.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => Ok(std::fs::create_dir_all(d)?),
        _ => Ok(()),
    }
}

fn write_disparity(map: &DisparityMap, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => imageio::write_kitti_disparity(map, path),
        _ => imageio::write_pfm(map, path),
    }
}

fn read_occl(path: &Option<PathBuf>, gt: &DisparityMap) -> Result<imageio::Mask> {
    match path {
        Some(p) => {
            let m = imageio::read_mask_pgm(p)?;
            if m.dims() != gt.dims() {
                return Err(Error::dims(gt.dims(), m.dims()));
            }
            Ok(m)
        }
        None => Ok(occlusion_mask(gt)),
    }
}

fn cmd_match(a: MatchArgs) -> Result<()> {
    let start = Instant::now();
    let scales = parse_scales(&a.cost.scales)?;
    let kind = match a.descriptor.as_str() {
        "census" | "census-hard" => CostKind::CensusHard,
        "census-soft" => CostKind::CensusSoft {
            steepness: a.cost.steepness,
        },
        "sad" => CostKind::Sad,
        other => return Err(Error::arg(format!("unknown descriptor `{other}`"))),
    };
    let sgm = SgmParams {
        p1: a.p1,
        p2: a.p2,
        directions: a.directions,
    };
    let soft = SoftMatchParams {
        agg_window: a.cost.agg_window,
        tau: a.cost.tau,
    };
    match a.aggregator.as_str() {
        "sgm" => sgm.validate()?,
        "soft" => soft.validate()?,
        other => return Err(Error::arg(format!("unknown aggregator `{other}`"))),
    }
    let left = imageio::read_gray(&a.left)?;
    let right = imageio::read_gray(&a.right)?;
    let vol = build_volume(&left, &right, kind, &scales, a.cost.max_disp, false)?;
    let disp = if a.aggregator == "sgm" {
        wta(&sgm_aggregate(&vol, &sgm)?)?
    } else {
        soft_argmin(&vol, &soft)?
    };
    drop(vol);
    write_disparity(&disp, &a.out)?;

    let mut inputs = vec![("left", a.left.as_path()), ("right", a.right.as_path())];
    let clean = match &a.gt {
        Some(p) => {
            inputs.push(("gt", p.as_path()));
            let gt = imageio::read_disparity(p)?;
            let (w, h) = gt.dims();
            let mask = build_eval_mask(
                &gt,
                Some(&occlusion_mask(&gt)),
                Some(matching_frame(w, h, &scales)),
                a.cost.max_disp,
            )?;
            Some(evaluate(&disp, &gt, &mask)?)
        }
        None => None,
    };
    let config = serde_json::json!({
        "descriptor": a.descriptor,
        "aggregator": a.aggregator,
        "scales": scales,
        "max_disp": a.cost.max_disp,
        "steepness": a.cost.steepness,
        "sgm": sgm,
        "soft": soft,
    });
    let manifest = RunManifest {
        command: "match".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        inputs: digests(&inputs)?,
        outputs: vec![a.out.display().to_string()],
        summary: Some(RunSummary {
            scene: scene_name(&a.scene, &a.left),
            descriptor: a.descriptor.clone(),
            aggregator: a.aggregator.clone(),
            mode: None,
            eps: None,
            steps: None,
            clean,
            attacked: None,
        }),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_manifest(&manifest_beside(&a.out), &manifest)
}

fn trace_csv(trace: &[f64]) -> String {
    let mut s = String::from("step,loss\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{v}");
    }
    s
}

fn cmd_attack(a: AttackArgs) -> Result<()> {
    let start = Instant::now();
    let mode: AttackMode = a.mode.parse()?;
    let descriptor: Descriptor = a.descriptor.parse()?;
    let pipeline = PipelineConfig {
        descriptor,
        scales: parse_scales(&a.cost.scales)?,
        max_disp: a.cost.max_disp,
        steepness: a.cost.steepness,
        matching: SoftMatchParams {
            agg_window: a.cost.agg_window,
            tau: a.cost.tau,
        },
    };
    let mut cfg = match mode {
        AttackMode::Constrained => AttackConfig::constrained(pipeline),
        AttackMode::Unconstrained => AttackConfig::unconstrained(pipeline),
        AttackMode::Patch => {
            let rect = a
                .rect
                .as_deref()
                .ok_or_else(|| Error::arg("patch mode requires --rect"))?;
            AttackConfig::patch(pipeline, Rect::parse(rect)?)
        }
    };
    if let Some(eps) = a.eps {
        cfg.eps = eps;
    }
    if let Some(steps) = a.steps {
        cfg.steps = steps;
    }
    cfg.alpha = a.alpha;
    cfg.allow_zero_grad = a.allow_zero_grad;
    cfg.validate()?;
    if !descriptor.is_differentiable() && !cfg.allow_zero_grad {
        return Err(Error::BlockedGradient);
    }

    let left = imageio::read_gray(&a.left)?;
    let right = imageio::read_gray(&a.right)?;
    let gt = imageio::read_disparity(&a.gt)?;
    let occl = read_occl(&a.occl, &gt)?;
    let problem = AttackProblem::with_matching_mask(left, right, gt, occl, &cfg.pipeline)?;
    let (w, h) = problem.dims();
    std::fs::create_dir_all(&a.out_dir)?;
    let out = |name: &str| a.out_dir.join(name);
    let mut outputs = Vec::new();

    let zero = PerturbationMap::zeros(w, h, cfg.eps);
    let clean_pred = gradient::predict(&problem, &zero, &cfg.pipeline)?;
    let (trace, adv_pred, left_adv, right_adv) = if mode == AttackMode::Unconstrained {
        let res = attack::unconstrained_pgd(&problem, &cfg)?;
        for (name, p) in [
            ("perturbation_left.pfm", &res.left),
            ("perturbation_right.pfm", &res.right),
        ] {
            imageio::write_pfm_values(w, h, p.data(), out(name))?;
            outputs.push(name.to_string());
        }
        let pred =
            gradient::predict_split(&problem, res.left.data(), res.right.data(), &cfg.pipeline)?;
        let (l, r) = attack::apply_split(problem.left(), problem.right(), &res.left, &res.right)?;
        (res.trace, pred, l, r)
    } else {
        let res = attack::pgd_attack(&problem, &cfg)?;
        imageio::write_pfm_values(w, h, res.perturbation.data(), out("perturbation.pfm"))?;
        outputs.push("perturbation.pfm".to_string());
        let pred = gradient::predict(&problem, &res.perturbation, &cfg.pipeline)?;
        let (l, r) = attack::apply_to_problem(&problem, &res.perturbation)?;
        (res.trace, pred, l, r)
    };
    imageio::write_pgm(&left_adv, out("left_adv.pgm"), PgmDepth::Sixteen)?;
    imageio::write_pgm(&right_adv, out("right_adv.pgm"), PgmDepth::Sixteen)?;
    std::fs::write(out("loss.csv"), trace_csv(&trace))?;
    let mut config_text = serde_json::to_string_pretty(&cfg)?;
    config_text.push('\n');
    std::fs::write(out("config.json"), config_text)?;
    outputs.extend(["left_adv.pgm", "right_adv.pgm", "loss.csv", "config.json"].map(String::from));

    let mask = problem.eval_mask();
    let clean = evaluate(&clean_pred, problem.gt(), mask)?;
    let attacked = evaluate(&adv_pred, problem.gt(), mask)?;
    let mut inputs = vec![
        ("left", a.left.as_path()),
        ("right", a.right.as_path()),
        ("gt", a.gt.as_path()),
    ];
    if let Some(p) = &a.occl {
        inputs.push(("occl", p.as_path()));
    }
    let manifest = RunManifest {
        command: "attack".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&cfg)?,
        inputs: digests(&inputs)?,
        outputs: outputs
            .iter()
            .map(|n| out(n).display().to_string())
            .collect(),
        summary: Some(RunSummary {
            scene: scene_name(&a.scene, &a.left),
            descriptor: descriptor.name().into(),
            aggregator: "soft".into(),
            mode: Some(mode.name().into()),
            eps: Some(cfg.eps),
            steps: Some(cfg.steps),
            clean: Some(clean),
            attacked: Some(attacked),
        }),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_manifest(&out("manifest.json"), &manifest)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let start = Instant::now();
    let pred = imageio::read_disparity(&a.pred)?;
    let gt = imageio::read_disparity(&a.gt)?;
    let occl = match &a.occl {
        Some(p) => Some(imageio::read_mask_pgm(p)?),
        None => None,
    };
    let crop = a.crop.as_deref().map(Rect::parse).transpose()?;
    let mask = build_eval_mask(&gt, occl.as_ref(), crop, a.max_disp)?;
    let metrics = evaluate(&pred, &gt, &mask)?;
    let mut text = serde_json::to_string_pretty(&metrics)?;
    text.push('\n');
    print!("{text}");
    let mut inputs = vec![("pred", a.pred.as_path()), ("gt", a.gt.as_path())];
    if let Some(p) = &a.occl {
        inputs.push(("occl", p.as_path()));
    }
    let (manifest_path, outputs) = match &a.out {
        Some(out) => {
            ensure_parent(out)?;
            std::fs::write(out, &text)?;
            (manifest_beside(out), vec![out.display().to_string()])
        }
        None => (a.pred.with_extension("eval.manifest.json"), Vec::new()),
    };
    let manifest = RunManifest {
        command: "eval".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::json!({ "crop": crop, "max_disp": a.max_disp }),
        inputs: digests(&inputs)?,
        outputs,
        summary: Some(RunSummary {
            scene: scene_name(&a.scene, &a.pred),
            descriptor: String::new(),
            aggregator: String::new(),
            mode: None,
            eps: None,
            steps: None,
            clean: Some(metrics),
            attacked: None,
        }),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_manifest(&manifest_path, &manifest)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let start = Instant::now();
    let (width, height) = parse_size(&a.size)?;
    let model = if let Some(d) = a.plane {
        DisparityModel::Plane { disparity: d }
    } else if let Some(s) = &a.slant {
        let v = parse_floats(s, ',', 3)?;
        DisparityModel::Slanted {
            base: v[0],
            dx: v[1],
            dy: v[2],
        }
    } else {
        let s = a.step.as_deref().unwrap_or_default();
        let v = parse_floats(s, ':', 2)?;
        DisparityModel::Step {
            background: v[0],
            foreground: v[1],
            boundary: None,
        }
    };
    let spec = SceneSpec::new(width, height, model)
        .with_contrast(a.contrast)
        .with_dot_size(a.dot_size)
        .with_noise(a.noise);
    spec.validate().map_err(|e| Error::arg(e.to_string()))?;
    let scene = make_scene(&spec, a.seed)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let out = |name: &str| a.out_dir.join(name);
    // 8-bit texture levels survive the 8-bit encoding exactly, unless noise was added
    let depth = if a.noise > 0.0 {
        PgmDepth::Sixteen
    } else {
        PgmDepth::Eight
    };
    imageio::write_pgm(&scene.left, out("left.pgm"), depth)?;
    imageio::write_pgm(&scene.right, out("right.pgm"), depth)?;
    imageio::write_pfm(&scene.gt, out("gt.pfm"))?;
    imageio::write_mask_pgm(&scene.occl, out("occl.pgm"))?;
    let manifest = RunManifest {
        command: "synth".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::json!({ "spec": spec, "seed": a.seed }),
        inputs: BTreeMap::new(),
        outputs: ["left.pgm", "right.pgm", "gt.pfm", "occl.pgm"]
            .iter()
            .map(|n| out(n).display().to_string())
            .collect(),
        summary: None,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_manifest(&out("manifest.json"), &manifest)
}

fn find_manifests(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_manifests(&p, found)?;
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with("manifest.json"))
        {
            found.push(p);
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One CSV row per manifest carrying a run summary.
pub fn report_csv(manifests: &[RunManifest]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for m in manifests {
        let Some(r) = &m.summary else { continue };
        let c = r.clean.as_ref();
        let adv = r.attacked.as_ref();
        let fields = [
            csv_field(&r.scene),
            csv_field(&r.descriptor),
            csv_field(&r.aggregator),
            csv_field(r.mode.as_deref().unwrap_or_default()),
            opt(r.eps),
            opt(r.steps),
            opt(c.map(|m| m.epe)),
            opt(c.map(|m| m.bad1)),
            opt(c.map(|m| m.bad3)),
            opt(adv.map(|m| m.epe)),
            opt(adv.map(|m| m.bad1)),
            opt(adv.map(|m| m.bad3)),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let start = Instant::now();
    let mut paths = Vec::new();
    find_manifests(&a.dir, &mut paths)?;
    let mut manifests = Vec::new();
    let mut inputs = BTreeMap::new();
    for p in &paths {
        let text = std::fs::read_to_string(p)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.command != "report" {
            // hash the run without its wall-clock time so reports are reproducible
            let mut stable = m.clone();
            stable.duration_secs = 0.0;
            let sha256 = hex::encode(Sha256::digest(serde_json::to_vec(&stable)?));
            inputs.insert(
                format!("manifest_{}", manifests.len()),
                InputDigest {
                    path: p.display().to_string(),
                    sha256,
                },
            );
            manifests.push(m);
        }
    }
    if manifests.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no run manifests under {}", a.dir.display()),
        )));
    }
    let out = a.out.clone().unwrap_or_else(|| a.dir.join("report.csv"));
    ensure_parent(&out)?;
    std::fs::write(&out, report_csv(&manifests))?;
    let manifest = RunManifest {
        command: "report".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::json!({ "dir": a.dir.display().to_string() }),
        inputs,
        outputs: vec![out.display().to_string()],
        summary: None,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    write_manifest(&manifest_beside(&out), &manifest)
}
