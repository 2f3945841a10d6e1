#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use optosqueeze::model::EffectiveParams;

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random effective model kept away from the `g_eff² = κ_a κ_b` pole.
pub fn effective_draw(rng: &mut ChaCha8Rng) -> EffectiveParams {
    loop {
        let ep = EffectiveParams {
            g_eff: log_uniform(rng, 1e-3, 2e-2),
            kappa_a: log_uniform(rng, 5e-4, 5e-3),
            kappa_b: log_uniform(rng, 5e-4, 5e-3),
            n_a: rng.gen_range(0.0..2.0),
            n_b: rng.gen_range(0.0..2.0),
        };
        let gap = (ep.g_eff * ep.g_eff - ep.kappa_a * ep.kappa_b).abs();
        if gap > 1e-3 * ep.kappa_a * ep.kappa_b {
            return ep;
        }
    }
}

/// Random symmetric positive-definite 4×4 matrix.
pub fn spd4(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(4, 4) * rng.gen_range(0.05..1.0)
}

/// `max|a − b| / max(1, max|b|)`.
pub fn scaled_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}
