use census_stereo::attack::{
    apply_to_problem, patch_attack, pgd_attack, unconstrained_pgd, AttackConfig,
};
use census_stereo::gradient::{
    fd_grad, forward_loss, forward_loss_split, grad_loss, AttackProblem, Descriptor, PipelineConfig,
};
use census_stereo::{
    make_scene, Error, EvalMask, GrayImage, Mask, PerturbationMap, Rect, SceneSpec, SoftMatchParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pipeline(descriptor: Descriptor, steepness: f64) -> PipelineConfig {
    PipelineConfig {
        descriptor,
        scales: (3..=7).collect(),
        max_disp: 12,
        steepness,
        matching: SoftMatchParams {
            agg_window: 5,
            tau: 0.1,
        },
    }
}

fn scene_spec(i: u64, w: usize, h: usize) -> SceneSpec {
    match i % 3 {
        0 => SceneSpec::plane(w, h, (2 + i % 7) as f64),
        1 => SceneSpec::step(w, h, 2.0, 8.0),
        _ => SceneSpec::plane(w, h, 5.0).with_contrast(0.5),
    }
}

#[test]
fn pgd_trace_has_initial_entry_and_ascends() {
    let cfg = AttackConfig::constrained(pipeline(Descriptor::CensusSoft, 1e5));
    let mut ascended = 0;
    for i in 0..10 {
        let scene = make_scene(&scene_spec(i, 96, 48), i).unwrap();
        let problem = AttackProblem::from_scene(&scene, &cfg.pipeline).unwrap();
        let out = pgd_attack(&problem, &cfg).unwrap();
        assert_eq!(out.trace.len(), 21);
        assert!(out.perturbation.max_abs() <= 0.03);
        if out.trace[20] >= out.trace[0] {
            ascended += 1;
        }
    }
    assert!(ascended >= 9, "loss rose on only {ascended}/10 scenes");
}

#[test]
fn unconstrained_relaxation_reaches_higher_loss() {
    let pipe = pipeline(Descriptor::Sad, 1.0);
    let constrained = AttackConfig::constrained(pipe.clone());
    let unconstrained = AttackConfig::unconstrained(pipe);
    let mut wins = 0;
    for i in 0..10 {
        let scene = make_scene(&scene_spec(i, 64, 32), 50 + i).unwrap();
        let problem = AttackProblem::from_scene(&scene, &constrained.pipeline).unwrap();
        let c = pgd_attack(&problem, &constrained).unwrap();
        let u = unconstrained_pgd(&problem, &unconstrained).unwrap();
        assert_eq!(u.trace.len(), 21);
        assert!(u.left.max_abs() <= 0.03 && u.right.max_abs() <= 0.03);
        if u.trace[20] >= c.trace[20] {
            wins += 1;
        }
    }
    assert!(wins >= 8, "unconstrained won on only {wins}/10 scenes");
}

#[test]
fn constrained_and_unconstrained_agree_at_zero_disparity() {
    let cfg = pipeline(Descriptor::CensusSoft, 10.0);
    let scene = make_scene(&SceneSpec::plane(48, 24, 0.0), 1).unwrap();
    let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
    assert_eq!(problem.occl().count(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data: Vec<f64> = (0..48 * 24).map(|_| rng.gen_range(-0.03..0.03)).collect();
    let p = PerturbationMap::new(48, 24, data.clone(), 0.03, None).unwrap();
    let tied = forward_loss(&problem, &p, &cfg).unwrap();
    let split = forward_loss_split(&problem, &data, &data, &cfg).unwrap();
    assert_eq!(tied, split);
}

#[test]
fn hard_census_refuses_unless_opted_in() {
    let mut cfg = AttackConfig::constrained(pipeline(Descriptor::CensusHard, 1e5));
    let scene = make_scene(&SceneSpec::plane(48, 24, 3.0), 0).unwrap();
    let problem = AttackProblem::from_scene(&scene, &cfg.pipeline).unwrap();
    assert!(matches!(
        pgd_attack(&problem, &cfg),
        Err(Error::BlockedGradient)
    ));
    cfg.allow_zero_grad = true;
    cfg.steps = 3;
    let out = pgd_attack(&problem, &cfg).unwrap();
    assert!(out.perturbation.data().iter().all(|&v| v == 0.0));
    assert!(out.trace.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn one_step_with_zero_gradient_is_a_fixed_point() {
    // flat pair: every SAD residual is zero, and so is its sign subgradient
    let cfg = pipeline(Descriptor::Sad, 1.0);
    let img = GrayImage::filled(32, 16, 0.5).unwrap();
    let gt = census_stereo::DisparityMap::from_fn(32, 16, |_, _| 2.0).unwrap();
    let occl = census_stereo::matcher::occlusion_mask(&gt);
    let problem = AttackProblem::with_matching_mask(img.clone(), img, gt, occl, &cfg).unwrap();
    let mut attack = AttackConfig::constrained(cfg);
    attack.steps = 1;
    let out = pgd_attack(&problem, &attack).unwrap();
    assert!(out.perturbation.data().iter().all(|&v| v == 0.0));
    assert_eq!(out.trace[0], out.trace[1]);
}

#[test]
fn patch_support_is_respected() {
    let cfg = pipeline(Descriptor::Sad, 1.0);
    let scene = make_scene(&SceneSpec::plane(64, 32, 4.0), 5).unwrap();
    let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
    let rect = Rect::new(20, 8, 12, 12);
    let mut attack = AttackConfig::patch(cfg, rect);
    attack.steps = 10;
    let out = patch_attack(&problem, rect, &attack).unwrap();
    assert_eq!(out.trace.len(), 11);
    let p = &out.perturbation;
    for y in 0..32 {
        for x in 0..64 {
            if !rect.contains(x, y) {
                assert_eq!(p.get(x, y), 0.0);
            }
        }
    }
    let (l, r) = apply_to_problem(&problem, p).unwrap();
    for y in 0..32 {
        for x in 0..64 {
            if !rect.contains(x, y) {
                assert_eq!(r.get(x, y), scene.right.get(x, y));
            }
            // left pixels move only through correspondences into the patch
            let reads_patch = x >= 4 && rect.contains(x - 4, y);
            if !reads_patch {
                assert_eq!(l.get(x, y), scene.left.get(x, y));
            }
        }
    }
    assert!(patch_attack(&problem, Rect::new(60, 0, 10, 10), &attack).is_err());
}

#[test]
fn patch_over_occluded_band_leaves_left_image_alone() {
    let cfg = pipeline(Descriptor::Sad, 1.0);
    // step scene: the foreground (D = 10) hides a band of background, and no
    // visible left pixel lands on the right image's last ten columns
    let scene = make_scene(&SceneSpec::step(64, 32, 2.0, 10.0), 6).unwrap();
    let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
    assert!(problem.occl().count() > 0);
    let rect = Rect::new(55, 4, 6, 20);
    for y in 0..32 {
        for x in 0..64 {
            if let Some(j) = problem.correspondence(y * 64 + x) {
                assert!(
                    !rect.contains(j % 64, j / 64),
                    "({x},{y}) maps into the rect"
                );
            }
        }
    }
    let mut attack = AttackConfig::patch(cfg, rect);
    attack.steps = 5;
    let out = patch_attack(&problem, rect, &attack).unwrap();
    let (l, _) = apply_to_problem(&problem, &out.perturbation).unwrap();
    assert_eq!(l, scene.left);
}

#[test]
fn gradient_vanishes_on_dead_coordinates() {
    let cfg = pipeline(Descriptor::CensusSoft, 10.0);
    let scene = make_scene(&SceneSpec::plane(48, 24, 3.0), 2).unwrap();
    // evaluate a single pixel: only P entries within reach of its windows matter
    let mask = Mask::from_fn(48, 24, |x, y| (x, y) == (24, 12));
    let problem = AttackProblem::new(
        scene.left.clone(),
        scene.right.clone(),
        scene.gt.clone(),
        scene.occl.clone(),
        EvalMask::new(mask),
    )
    .unwrap();
    let p = PerturbationMap::zeros(48, 24, 0.03);
    let g = grad_loss(&problem, &p, &cfg).unwrap();
    let fd = fd_grad(&problem, &p, &cfg, &[(0, 0), (47, 23), (2, 2)], 1e-5).unwrap();
    assert_eq!(g.grad[0], 0.0);
    assert_eq!(g.grad[47 + 23 * 48], 0.0);
    assert!(fd.iter().all(|&v| v == 0.0));
    assert!(g.grad.iter().any(|&v| v != 0.0));
}

#[test]
fn gradient_matches_finite_differences_for_sad() {
    let cfg = pipeline(Descriptor::Sad, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scene = make_scene(&SceneSpec::step(48, 24, 2.0, 6.0).with_noise(0.05), 3).unwrap();
    let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
    let data: Vec<f64> = (0..48 * 24).map(|_| rng.gen_range(-0.02..0.02)).collect();
    let p = PerturbationMap::new(48, 24, data, 0.03, None).unwrap();
    let g = grad_loss(&problem, &p, &cfg).unwrap();
    let coords: Vec<(usize, usize)> = (0..40)
        .map(|_| (rng.gen_range(0..48), rng.gen_range(0..24)))
        .collect();
    let fd = fd_grad(&problem, &p, &cfg, &coords, 1e-6).unwrap();
    for (&(x, y), f) in coords.iter().zip(&fd) {
        let a = g.grad[y * 48 + x];
        let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-7);
        assert!(rel <= 1e-4, "({x},{y}): adjoint {a} fd {f}");
    }
}

#[test]
fn finite_differences_are_second_order() {
    let cfg = pipeline(Descriptor::CensusSoft, 10.0);
    let scene = make_scene(&SceneSpec::plane(48, 24, 4.0).with_noise(0.05), 4).unwrap();
    let problem = AttackProblem::from_scene(&scene, &cfg).unwrap();
    let p = PerturbationMap::zeros(48, 24, 0.03);
    let g = grad_loss(&problem, &p, &cfg).unwrap();
    // the coordinate with the largest gradient is far from any kink
    let (i, _) = g
        .grad
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    let c = [(i % 48, i / 48)];
    let e1 = (fd_grad(&problem, &p, &cfg, &c, 2e-3).unwrap()[0] - g.grad[i]).abs();
    let e2 = (fd_grad(&problem, &p, &cfg, &c, 1e-3).unwrap()[0] - g.grad[i]).abs();
    let ratio = e1 / e2;
    assert!((3.0..5.0).contains(&ratio), "error ratio {ratio}");
}
