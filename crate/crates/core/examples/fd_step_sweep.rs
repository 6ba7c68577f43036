//! Compares the analytic gradient with finite differences over a range of
//! steps on random ten-agent configurations.
//!
//! `cargo run --release --example fd_step_sweep [resolution]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covsim::config::REFERENCE_ALPHAS;
use covsim::grid::{DensityField, Environment};
use covsim::objective::{analytic_gradient, fd_gradient_oracle};
use covsim::partition::assign;
use covsim::{ConvexPolygon, NodeFunctionSpec, Vec2};

fn main() {
    let res: f64 = std::env::args()
        .nth(1)
        .map_or(50.0, |s| s.parse().expect("resolution"));
    let steps = [0.1, 0.05, 0.02, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
    let densities = [
        DensityField::Uniform { level: 1.0 },
        DensityField::Gaussian {
            amplitude: 0.9,
            decay: 0.04,
            center: Vec2::new(10.0, 10.0),
        },
    ];
    let square = ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut fails = vec![0usize; steps.len()];
    let mut worst = vec![0.0f64; steps.len()];
    let mut components = 0;
    for _ in 0..5 {
        for &n in &[2usize, 5, 10] {
            for density in &densities {
                let env = Environment::new(square.clone(), res, density.clone()).unwrap();
                let pos: Vec<Vec2> = (0..n)
                    .map(|_| Vec2::new(rng.gen_range(0.5..9.5), rng.gen_range(0.5..9.5)))
                    .collect();
                let specs: Vec<_> = REFERENCE_ALPHAS[..n]
                    .iter()
                    .map(|&a| NodeFunctionSpec::quadratic(a))
                    .collect();
                let labels = assign(&env.grid, &pos, &specs).unwrap();
                let g = analytic_gradient(&env, &labels, &pos, &specs).unwrap();
                let fd: Vec<Vec<Vec2>> = steps
                    .iter()
                    .map(|&h| fd_gradient_oracle(&env, &pos, &specs, h).unwrap().gradient)
                    .collect();
                for i in 0..n {
                    components += 2;
                    for (k, f) in fd.iter().enumerate() {
                        for (a, b) in [(g[i].x, f[i].x), (g[i].y, f[i].y)] {
                            let r = (a - b).abs() / (0.02 * b.abs()).max(1e-3);
                            worst[k] = worst[k].max(r);
                            fails[k] += usize::from(r > 1.0);
                        }
                    }
                }
            }
        }
    }
    println!("resolution {res}, {components} components, tolerance max(2% rel, 1e-3 abs)");
    for (k, h) in steps.iter().enumerate() {
        println!("h = {h:<8e} failing {:>4}  worst error/tolerance {:.3e}", fails[k], worst[k]);
    }
}
