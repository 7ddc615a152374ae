//! Constrained PGD against the soft pipeline with soft-census costs and with
//! SAD costs on the same scenes; prints the Bad 3.0 increase for each.

use std::time::Instant;

use census_stereo::attack::{pgd_attack, AttackConfig};
use census_stereo::gradient::{predict, AttackProblem, Descriptor, PipelineConfig};
use census_stereo::{evaluate, make_scene, PerturbationMap, SceneSpec, SoftMatchParams};

fn bad3_increase(
    problem: &AttackProblem,
    cfg: &PipelineConfig,
) -> census_stereo::Result<(f64, f64)> {
    let (w, h) = problem.dims();
    let clean = predict(problem, &PerturbationMap::zeros(w, h, 0.03), cfg)?;
    let clean = evaluate(&clean, problem.gt(), problem.eval_mask())?;
    let out = pgd_attack(problem, &AttackConfig::constrained(cfg.clone()))?;
    let adv = predict(problem, &out.perturbation, cfg)?;
    let adv = evaluate(&adv, problem.gt(), problem.eval_mask())?;
    Ok((clean.bad3, adv.bad3 - clean.bad3))
}

fn main() -> census_stereo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let scenes: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = PipelineConfig {
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
        ..base.clone()
    };
    println!("scene  census clean/+bad3   sad clean/+bad3");
    for seed in 0..scenes {
        let spec = SceneSpec::plane(96, 48, (2 + seed % 9) as f64);
        let scene = make_scene(&spec, seed)?;
        let t = Instant::now();
        let problem = AttackProblem::from_scene(&scene, &base)?;
        let (cc, ci) = bad3_increase(&problem, &base)?;
        let (sc, si) = bad3_increase(&problem, &sad)?;
        println!(
            "{seed:5}  {cc:6.2} / {ci:+6.2}   {sc:6.2} / {si:+6.2}   ({:.1}s)",
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
