//! Consistency-preserving PGD against soft census, then the same attack with
//! the two views perturbed independently.

use census_stereo::attack::{apply_to_problem, pgd_attack, unconstrained_pgd, AttackConfig};
use census_stereo::gradient::{predict, AttackProblem, Descriptor, PipelineConfig};
use census_stereo::matcher::correspondence;
use census_stereo::{evaluate, make_scene, SceneSpec, SoftMatchParams};

fn main() -> census_stereo::Result<()> {
    let (w, h) = (96, 48);
    let scene = make_scene(&SceneSpec::plane(w, h, 6.0).with_contrast(0.5), 7)?;
    let pipeline = PipelineConfig {
        descriptor: Descriptor::CensusSoft,
        scales: (3..=11).collect(),
        max_disp: 16,
        steepness: 1e5,
        matching: SoftMatchParams {
            agg_window: 7,
            tau: 0.1,
        },
    };
    let problem = AttackProblem::from_scene(&scene, &pipeline)?;

    let cfg = AttackConfig::constrained(pipeline.clone());
    let out = pgd_attack(&problem, &cfg)?;
    let adv = evaluate(
        &predict(&problem, &out.perturbation, &pipeline)?,
        problem.gt(),
        problem.eval_mask(),
    )?;
    println!(
        "constrained   loss {:.4} -> {:.4}  bad3 {:.2}%",
        out.trace[0], out.trace[cfg.steps], adv.bad3
    );

    // every visible left pixel moved with its right correspondent
    let (la, ra) = apply_to_problem(&problem, &out.perturbation)?;
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            if scene.occl.get(x, y) {
                continue;
            }
            if let Some(xr) = correspondence(x, scene.gt.get(x, y), w) {
                let before = scene.left.get(x, y) - scene.right.get(xr, y);
                let after = la.get(x, y) - ra.get(xr, y);
                worst = worst.max((before - after).abs());
            }
        }
    }
    println!("largest change in L - R at a correspondence: {worst:e}");

    let sad = PipelineConfig {
        descriptor: Descriptor::Sad,
        ..pipeline
    };
    let problem = AttackProblem::from_scene(&scene, &sad)?;
    let tied = pgd_attack(&problem, &AttackConfig::constrained(sad.clone()))?;
    let free = unconstrained_pgd(&problem, &AttackConfig::unconstrained(sad))?;
    println!(
        "SAD final loss: constrained {:.4}, independent views {:.4}",
        tied.trace[tied.trace.len() - 1],
        free.trace[free.trace.len() - 1]
    );
    Ok(())
}
