//! Compares the hand-derived adjoint against central finite differences on a
//! few random scenes with a moderate census steepness.

use census_stereo::gradient::{fd_grad, grad_loss, AttackProblem, Descriptor, PipelineConfig};
use census_stereo::{make_scene, PerturbationMap, SceneSpec, SoftMatchParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> census_stereo::Result<()> {
    let (w, h) = (48, 24);
    let cfg = PipelineConfig {
        descriptor: Descriptor::CensusSoft,
        scales: (3..=11).collect(),
        max_disp: 16,
        steepness: 10.0,
        matching: SoftMatchParams {
            agg_window: 7,
            tau: 0.1,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let spec = SceneSpec::plane(w, h, rng.gen_range(1..8) as f64);
        let scene = make_scene(&spec, seed)?;
        let problem = AttackProblem::from_scene(&scene, &cfg)?;
        // a small random starting point, away from P = 0
        let data = (0..w * h).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let p = PerturbationMap::new(w, h, data, 0.03, None)?;
        let g = grad_loss(&problem, &p, &cfg)?;
        let coords: Vec<(usize, usize)> = (0..20)
            .map(|_| (rng.gen_range(0..w), rng.gen_range(0..h)))
            .collect();
        let fd = fd_grad(&problem, &p, &cfg, &coords, 1e-5)?;
        for (&(x, y), f) in coords.iter().zip(&fd) {
            let a = g.grad[y * w + x];
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-7);
            worst = worst.max(rel);
            println!("seed {seed} ({x:2},{y:2}) adjoint {a:+.6e} fd {f:+.6e} rel {rel:.2e}");
        }
    }
    println!("worst relative error {worst:.3e}");
    Ok(())
}
