//! Finite-difference verification of analytic gradients.
//!
//! Runs in f64 with stochastic layers disabled; the forward closure must be
//! deterministic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::ParamSet;

/// Compares analytic gradients against central differences on a sample of
/// coordinates from every parameter, returning the worst relative error
/// `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// `backward` must populate the gradients for the loss it returns; `loss`
/// must evaluate the same loss without touching gradients.
pub fn grad_check<P, L, B>(
    params: &mut P,
    mut loss: L,
    mut backward: B,
    epsilon: f64,
    coords_per_param: usize,
    seed: u64,
) -> f64
where
    P: ParamSet<f64>,
    L: FnMut(&mut P) -> f64,
    B: FnMut(&mut P) -> f64,
{
    params.zero_grads();
    let _ = backward(params);
    let analytic: Vec<Vec<f64>> = (0..params.param_count())
        .map(|i| params.param(i).grad.data().to_vec())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for (i, analytic_grad) in analytic.iter().enumerate() {
        let n = params.param(i).value.len();
        if n == 0 {
            continue;
        }
        let mut coords: Vec<usize> = if n <= coords_per_param {
            (0..n).collect()
        } else {
            (0..coords_per_param)
                .map(|_| rng.random_range(0..n))
                .collect()
        };
        coords.sort_unstable();
        coords.dedup();
        for c in coords {
            let original = params.param(i).value.data()[c];
            params.param_mut(i).value.data_mut()[c] = original + epsilon;
            let plus = loss(params);
            params.param_mut(i).value.data_mut()[c] = original - epsilon;
            let minus = loss(params);
            params.param_mut(i).value.data_mut()[c] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic_grad[c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > worst {
                worst = rel;
            }
        }
    }
    params.zero_grads();
    worst
}
