//! Multi-scale census descriptors: bit layout, Hamming costs, and invariance
//! under a gamma curve.

use census_stereo::census::{bits_per_descriptor, default_scales, hamming, normalized_cost};
use census_stereo::{census_transform, make_scene, SceneSpec};

fn main() -> census_stereo::Result<()> {
    let scene = make_scene(&SceneSpec::plane(48, 24, 4.0), 1)?;
    let scales = default_scales();
    let field = census_transform(&scene.left, &scales)?;

    let (x, y) = (24, 12);
    for (s, &k) in scales.iter().enumerate() {
        let a = field
            .bit_vector(s, x, y)
            .expect("centre pixel is inside every window");
        let b = field
            .bit_vector(s, x + 1, y)
            .expect("neighbour is inside every window");
        println!(
            "k={k:2} bits={:3} hamming to right neighbour={:3} cost={:.3}",
            bits_per_descriptor(k),
            hamming(&a, &b)?,
            normalized_cost(&a, &b, k)?
        );
    }

    // any strictly increasing remap leaves every bit alone
    let darker = scene.left.map(|v| v.powf(2.2))?;
    let same = census_transform(&darker, &scales)? == field;
    println!("descriptors unchanged under gamma 2.2: {same}");
    Ok(())
}
