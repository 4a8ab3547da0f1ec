//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yamabe::{Assembly, Grid, Model, Weight};

pub fn assembly(label: &str, r_max: f64, nodes: usize) -> Assembly {
    let m = Model::from_label(label).unwrap();
    let g = Grid::build(&m, 0.0, r_max, nodes).unwrap();
    Assembly::assemble(&m, &g, &Weight::default()).unwrap()
}

/// Quotient of `|x|` written out from the nodal forms only, so the oracle
/// shares nothing with the minimizer beyond the assembled matrices.
fn objective(a: &Assembly, x: &[f64], alpha: f64, p: f64) -> f64 {
    let v: Vec<f64> = x.iter().map(|t| t.abs()).collect();
    let w = a.weighted_mass(alpha, p).unwrap();
    let e = a.energy(&v).unwrap();
    let s: f64 = v.iter().zip(&w).map(|(&t, &m)| m * t.powf(p)).sum();
    e / s.powf(2.0 / p)
}

fn fd_gradient(a: &Assembly, x: &[f64], alpha: f64, p: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1e-3);
            y[i] = x[i] + h;
            let up = objective(a, &y, alpha, p);
            y[i] = x[i] - h;
            let down = objective(a, &y, alpha, p);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Smallest value found by nonlinear conjugate gradients (finite-difference
/// gradients, backtracking) from `starts` random positive fields.
pub fn brute_force_min(a: &Assembly, alpha: f64, p: f64, starts: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.len();
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mut f = objective(a, &x, alpha, p);
        let mut g = fd_gradient(a, &x, alpha, p);
        let mut d: Vec<f64> = g.iter().map(|t| -t).collect();
        let mut step = 1e-2;
        for it in 0..20_000 {
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if slope >= 0.0 {
                d = g.iter().map(|t| -t).collect();
                continue;
            }
            let mut t = step * 4.0;
            let mut accepted = None;
            while t > 1e-16 {
                let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let fy = objective(a, &y, alpha, p);
                if fy <= f + 1e-4 * t * slope {
                    accepted = Some((y, fy));
                    break;
                }
                t *= 0.5;
            }
            let Some((y, fy)) = accepted else { break };
            let done = (f - fy).abs() <= 1e-15 * f.abs();
            step = t;
            x = y;
            // rescale so the finite-difference steps stay well sized
            let s = x.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            x.iter_mut().for_each(|t| *t /= s);
            step /= s;
            f = fy;
            let g_new = fd_gradient(a, &x, alpha, p);
            let num: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
            let den: f64 = g.iter().map(|t| t * t).sum();
            let beta = if it % n == n - 1 { 0.0 } else { (num / den).max(0.0) };
            d = g_new.iter().zip(&d).map(|(g, d)| -g + beta * d).collect();
            g = g_new;
            if done {
                break;
            }
        }
        best = best.min(f);
    }
    best
}
