//! The differentiable pipeline: soft census volume, box aggregation and
//! soft-argmin, compared with the hard SGM result on the same scene.

use census_stereo::census::default_scales;
use census_stereo::costvolume::{build_volume, CostKind};
use census_stereo::gradient::{forward_loss, predict, AttackProblem, Descriptor, PipelineConfig};
use census_stereo::{
    evaluate, make_scene, sgm_aggregate, wta, PerturbationMap, SceneSpec, SgmParams,
    SoftMatchParams,
};

fn main() -> census_stereo::Result<()> {
    let scene = make_scene(&SceneSpec::step(96, 48, 2.0, 9.0), 3)?;
    let (w, h) = (96, 48);
    for steepness in [10.0, 1e3, 1e5] {
        let cfg = PipelineConfig {
            descriptor: Descriptor::CensusSoft,
            scales: default_scales(),
            max_disp: 16,
            steepness,
            matching: SoftMatchParams {
                agg_window: 7,
                tau: 0.1,
            },
        };
        let problem = AttackProblem::from_scene(&scene, &cfg)?;
        let zero = PerturbationMap::zeros(w, h, 0.03);
        let m = evaluate(
            &predict(&problem, &zero, &cfg)?,
            problem.gt(),
            problem.eval_mask(),
        )?;
        println!(
            "soft census C={steepness:<7} loss {:.4}  epe {:.3}  bad3 {:5.2}%",
            forward_loss(&problem, &zero, &cfg)?,
            m.epe,
            m.bad3
        );
    }

    let cfg = PipelineConfig::default();
    let problem = AttackProblem::from_scene(
        &scene,
        &PipelineConfig {
            max_disp: 16,
            ..cfg.clone()
        },
    )?;
    let vol = build_volume(
        &scene.left,
        &scene.right,
        CostKind::CensusHard,
        &cfg.scales,
        16,
        false,
    )?;
    let hard = wta(&sgm_aggregate(&vol, &SgmParams::default())?)?;
    let m = evaluate(&hard, problem.gt(), problem.eval_mask())?;
    println!(
        "hard census + SGM        epe {:.3}  bad3 {:5.2}%",
        m.epe, m.bad3
    );
    Ok(())
}
