//! A 40x40 adversarial patch (100 constrained PGD steps, full colour range)
//! against the soft-census and SAD pipelines on the same scenes.

use std::time::Instant;

use census_stereo::attack::{patch_attack, AttackConfig};
use census_stereo::gradient::{predict, AttackProblem, Descriptor, PipelineConfig};
use census_stereo::{evaluate, make_scene, PerturbationMap, Rect, SceneSpec, SoftMatchParams};

fn main() -> census_stereo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let scenes: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let (w, h) = (128, 64);
    let rect = Rect::new(44, 12, 40, 40);
    let census = PipelineConfig {
        descriptor: Descriptor::CensusSoft,
        scales: (3..=11).collect(),
        max_disp: 16,
        steepness: 1e5,
        matching: SoftMatchParams {
            agg_window: 7,
            tau: 0.1,
        },
    };
    let sad = PipelineConfig {
        descriptor: Descriptor::Sad,
        ..census.clone()
    };
    for seed in 0..scenes {
        let scene = make_scene(&SceneSpec::plane(w, h, (3 + seed * 2) as f64), 100 + seed)?;
        for cfg in [&census, &sad] {
            let t = Instant::now();
            let problem = AttackProblem::from_scene(&scene, cfg)?;
            let clean = predict(&problem, &PerturbationMap::zeros(w, h, 1.0), cfg)?;
            let clean = evaluate(&clean, problem.gt(), problem.eval_mask())?;
            let out = patch_attack(&problem, rect, &AttackConfig::patch(cfg.clone(), rect))?;
            let adv = predict(&problem, &out.perturbation, cfg)?;
            let adv = evaluate(&adv, problem.gt(), problem.eval_mask())?;
            let outside = (0..w * h)
                .filter(|&i| !rect.contains(i % w, i / w) && out.perturbation.data()[i] != 0.0)
                .count();
            println!(
                "scene {seed} {:<11} bad3 {:6.2} -> {:6.2}  loss {:.3} -> {:.3}  nonzero outside patch: {outside}  ({:.1}s)",
                cfg.descriptor.name(),
                clean.bad3,
                adv.bad3,
                out.trace[0],
                out.trace[out.trace.len() - 1],
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
