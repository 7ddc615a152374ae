//! Round trips through the on-disk formats: 8/16-bit PGM, PFM disparities,
//! signed PFM perturbations, KITTI 16-bit PNG and occlusion masks.

use census_stereo::imageio::{
    read_kitti_disparity, read_mask_pgm, read_pfm, read_pfm_values, read_pgm,
    write_kitti_disparity, write_mask_pgm, write_pfm, write_pfm_values, write_pgm, PgmDepth,
};
use census_stereo::{make_scene, SceneSpec};

fn main() -> census_stereo::Result<()> {
    let dir = std::env::temp_dir().join(format!("census-stereo-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let scene = make_scene(&SceneSpec::step(64, 32, 2.0, 8.0), 4)?;

    write_pgm(&scene.left, dir.join("left8.pgm"), PgmDepth::Eight)?;
    println!(
        "8-bit PGM exact: {}",
        read_pgm(dir.join("left8.pgm"))? == scene.left
    );

    let noisy = scene.left.map(|v| (v + 1e-4).min(1.0))?;
    write_pgm(&noisy, dir.join("left16.pgm"), PgmDepth::Sixteen)?;
    let back = read_pgm(dir.join("left16.pgm"))?;
    let err = back
        .data()
        .iter()
        .zip(noisy.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("16-bit PGM max error: {err:.2e}");

    write_pfm(&scene.gt, dir.join("gt.pfm"))?;
    println!(
        "PFM disparity exact: {}",
        read_pfm(dir.join("gt.pfm"))? == scene.gt
    );

    let signed: Vec<f64> = (0..64 * 32)
        .map(|i| if i % 2 == 0 { -0.03 } else { 0.015 })
        .collect();
    write_pfm_values(64, 32, &signed, dir.join("p.pfm"))?;
    let (_, _, p) = read_pfm_values(dir.join("p.pfm"))?;
    println!("signed PFM keeps negatives: {}", p[0] < 0.0);

    write_kitti_disparity(&scene.gt, dir.join("gt.png"))?;
    let kitti = read_kitti_disparity(dir.join("gt.png"))?;
    let err = kitti
        .data()
        .iter()
        .zip(scene.gt.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("KITTI PNG max error: {err:.2e} (1/256 quantisation)");

    write_mask_pgm(&scene.occl, dir.join("occl.pgm"))?;
    println!(
        "occlusion mask exact: {} ({} occluded pixels)",
        read_mask_pgm(dir.join("occl.pgm"))? == scene.occl,
        scene.occl.count()
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
