mod common;

use census_stereo::attack::{apply_perturbation, joint_clip};
use census_stereo::census::{hamming, BitVector};
use census_stereo::imageio::{encode_pfm, encode_pgm, parse_pfm, parse_pgm, PgmDepth};
use census_stereo::{
    build_sad_volume, census_transform, make_scene, DisparityMap, GrayImage, PerturbationMap,
    SceneSpec,
};
use proptest::prelude::*;

fn image(w: usize, h: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
}

fn bits(n: usize) -> impl Strategy<Value = BitVector> {
    prop::collection::vec(any::<bool>(), n).prop_map(|b| BitVector::from_bits(&b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn census_ignores_monotone_remaps(img in image(12, 9), gamma in 0.2f64..5.0, gain in 0.1f64..1.0) {
        // x -> gain * x^gamma is strictly increasing on [0, 1]; exponent and
        // gain keep distinct 8-bit levels distinct
        let q = img.map(|v| (v * 255.0).round() / 255.0).unwrap();
        let remapped = q.map(|v| gain * v.powf(gamma)).unwrap();
        let scales = [3, 4, 5];
        prop_assert_eq!(census_transform(&q, &scales).unwrap(), census_transform(&remapped, &scales).unwrap());
    }

    #[test]
    fn hamming_is_a_metric(a in bits(80), b in bits(80), c in bits(80)) {
        let ab = hamming(&a, &b).unwrap();
        prop_assert_eq!(ab, hamming(&b, &a).unwrap());
        prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
        prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
        prop_assert!(ab as usize <= 80);
    }

    #[test]
    fn pfm_roundtrip(values in prop::collection::vec(prop_oneof![Just(-1.0f64), 0.0f64..300.0], 35)) {
        let values: Vec<f64> = values.iter().map(|&v| v as f32 as f64).collect();
        let map = DisparityMap::dense(7, 5, values).unwrap();
        prop_assert_eq!(parse_pfm(&encode_pfm(&map)).unwrap(), map);
    }

    #[test]
    fn sixteen_bit_pgm_roundtrip(levels in prop::collection::vec(0u16..=u16::MAX, 24)) {
        let img = GrayImage::new(6, 4, levels.iter().map(|&l| l as f64 / 65535.0).collect()).unwrap();
        let back = parse_pgm(&encode_pgm(&img, PgmDepth::Sixteen)).unwrap();
        prop_assert_eq!(back, img);
    }

    #[test]
    fn joint_clip_keeps_both_views_in_range(
        raw in prop::collection::vec(-0.2f64..0.2, 30 * 4),
        d in 0u32..6,
        seed in 0u64..1000,
    ) {
        let scene = make_scene(&SceneSpec::plane(30, 4, d as f64).with_noise(0.3), seed).unwrap();
        let p = joint_clip(&raw, &scene.left, &scene.right, &scene.gt, &scene.occl, 0.03).unwrap();
        prop_assert!(p.max_abs() <= 0.03);
        let (w, h) = (30, 4);
        for y in 0..h {
            for x in 0..w {
                let v = scene.right.get(x, y) + p.get(x, y);
                prop_assert!((0.0..=1.0).contains(&v));
                if !scene.occl.get(x, y) {
                    if let Some(xr) = common::round_corr(x, scene.gt.get(x, y), w) {
                        let v = scene.left.get(x, y) + p.get(xr, y);
                        prop_assert!((0.0..=1.0).contains(&v));
                    }
                }
            }
        }
    }
}

#[test]
fn sad_cost_at_true_disparity_survives_any_admissible_attack() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let (w, h, d) = (40, 12, 4);
    let scene = make_scene(&SceneSpec::plane(w, h, d as f64), 3).unwrap();
    let scales = [3, 5];
    let clean = build_sad_volume(&scene.left, &scene.right, &scales, 8).unwrap();
    for _ in 0..10 {
        let raw: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let p = joint_clip(
            &raw,
            &scene.left,
            &scene.right,
            &scene.gt,
            &scene.occl,
            0.03,
        )
        .unwrap();
        let (l, r) =
            apply_perturbation(&scene.left, &scene.right, &scene.gt, &scene.occl, &p).unwrap();
        let adv = build_sad_volume(&l, &r, &scales, 8).unwrap();
        for y in 0..h {
            for x in 0..w {
                if clean.is_valid(x, y, d) {
                    for k in 0..scales.len() {
                        assert_eq!(clean.cost(x, y, d, k), adv.cost(x, y, d, k));
                    }
                }
            }
        }
    }
}

#[test]
fn perturbation_pfm_keeps_negative_values() {
    use census_stereo::imageio::{encode_pfm_values, parse_pfm_values};
    let p =
        PerturbationMap::new(3, 2, vec![-0.03, 0.0, 0.01, 0.02, -0.01, 0.03], 0.03, None).unwrap();
    let (w, h, back) = parse_pfm_values(&encode_pfm_values(3, 2, p.data())).unwrap();
    assert_eq!((w, h), (3, 2));
    for (a, b) in back.iter().zip(p.data()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}
