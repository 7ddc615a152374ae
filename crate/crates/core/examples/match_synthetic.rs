//! Hard census + 8-path SGM + winner-take-all on synthetic planes and a step.

use std::time::Instant;

use census_stereo::census::default_scales;
use census_stereo::costvolume::{build_volume, CostKind};
use census_stereo::eval::{build_eval_mask, matching_frame};
use census_stereo::{evaluate, make_scene, sgm_aggregate, wta, SceneSpec, SgmParams};

fn main() -> census_stereo::Result<()> {
    let (w, h, max_disp) = (128, 64, 32);
    let scales = default_scales();
    let specs = [
        ("plane 0", SceneSpec::plane(w, h, 0.0)),
        ("plane 5", SceneSpec::plane(w, h, 5.0)),
        ("plane 12", SceneSpec::plane(w, h, 12.0)),
        ("step 3:14", SceneSpec::step(w, h, 3.0, 14.0)),
    ];
    for (i, (name, spec)) in specs.iter().enumerate() {
        let t = Instant::now();
        let scene = make_scene(spec, i as u64)?;
        let vol = build_volume(
            &scene.left,
            &scene.right,
            CostKind::CensusHard,
            &scales,
            max_disp,
            false,
        )?;
        let disp = wta(&sgm_aggregate(&vol, &SgmParams::default())?)?;
        let frame = matching_frame(w, h, &scales);
        let mask = build_eval_mask(&scene.gt, Some(&scene.occl), Some(frame), max_disp)?;
        let m = evaluate(&disp, &scene.gt, &mask)?;
        println!(
            "{name:<10} epe {:.3}  bad1 {:5.2}%  bad3 {:5.2}%  ({} px, {:.2}s)",
            m.epe,
            m.bad1,
            m.bad3,
            m.pixels,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
