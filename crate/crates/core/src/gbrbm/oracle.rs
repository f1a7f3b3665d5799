//! Exact log-likelihood and gradient for small models by enumerating every
//! hidden configuration.
//!
//! For a fixed `h`, the visible units are independent Gaussians, so the
//! integral over `v` completes the square per unit. With `a = W h`:
//!
//! ```text
//! ∫ exp(-E(v, h)) dv = Π_i σ_i √(2π) · exp(c·h + Σ_i (b_i a_i / σ_i + a_i² / 2))
//! ```
//!
//! and `v | h` has mean `b + σ ⊙ a`.

use ndarray::{Array1, Array2};

use super::{GbrbmModel, Gradients};
use crate::error::{Error, Result};

/// Enumeration is `2^n`; beyond this it is not an oracle anymore.
pub const MAX_EXACT_HIDDEN: usize = 20;

fn check_size(model: &GbrbmModel) -> Result<()> {
    if model.n_hidden() > MAX_EXACT_HIDDEN {
        return Err(Error::TooManyHidden { max: MAX_EXACT_HIDDEN, found: model.n_hidden() });
    }
    Ok(())
}

fn hidden_config(bits: usize, n: usize) -> Array1<f64> {
    (0..n).map(|j| ((bits >> j) & 1) as f64).collect()
}

/// Log of the per-configuration partition term `ln ∫ exp(-E(v, h)) dv`,
/// plus the coupling `a = W h`.
fn log_z_given_h(model: &GbrbmModel, h: &Array1<f64>) -> (f64, Array1<f64>) {
    let a = model.weights.dot(h);
    let log_norm: f64 = model.sigma.iter().map(|s| (s * (2.0 * std::f64::consts::PI).sqrt()).ln()).sum();
    let coupling: f64 =
        a.iter().zip(&model.visible_bias).zip(&model.sigma).map(|((a, b), s)| b * a / s + 0.5 * a * a).sum();
    (log_norm + model.hidden_bias.dot(h) + coupling, a)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln Z` with `Z = Σ_h ∫ exp(-E(v, h)) dv`.
pub fn log_partition(model: &GbrbmModel) -> Result<f64> {
    check_size(model)?;
    let n = model.n_hidden();
    let terms: Vec<f64> = (0..1usize << n).map(|bits| log_z_given_h(model, &hidden_config(bits, n)).0).collect();
    Ok(log_sum_exp(&terms))
}

/// `ln p(v)` under the model.
pub fn exact_log_likelihood(model: &GbrbmModel, v: &[f64]) -> Result<f64> {
    let log_z = log_partition(model)?;
    Ok(-model.free_energy(v)? - log_z)
}

/// `∂ ln p(v) / ∂θ` for `W`, `b` and `c`: data expectation under `p(h | v)`
/// minus the model expectation over the joint.
pub fn exact_gradient(model: &GbrbmModel, v: &[f64]) -> Result<Gradients> {
    check_size(model)?;
    let (m, n) = (model.n_visible(), model.n_hidden());
    let pos = model.hidden_conditional(v)?;
    let scaled: Array1<f64> = v.iter().zip(&model.sigma).map(|(x, s)| x / s).collect();
    let var = model.sigma.mapv(|s| s * s);

    let mut d_weights = outer(&scaled, &pos);
    let mut d_visible_bias: Array1<f64> =
        v.iter().zip(&model.visible_bias).zip(&var).map(|((x, b), s2)| (x - b) / s2).collect();
    let mut d_hidden_bias = pos;

    let configs: Vec<(Array1<f64>, f64, Array1<f64>)> = (0..1usize << n)
        .map(|bits| {
            let h = hidden_config(bits, n);
            let (lz, a) = log_z_given_h(model, &h);
            (h, lz, a)
        })
        .collect();
    let log_z = log_sum_exp(&configs.iter().map(|c| c.1).collect::<Vec<_>>());
    let b_over_sigma = &model.visible_bias / &model.sigma;

    let mut neg_w = Array2::<f64>::zeros((m, n));
    let mut neg_b = Array1::<f64>::zeros(m);
    let mut neg_c = Array1::<f64>::zeros(n);
    for (h, lz, a) in &configs {
        let p = (lz - log_z).exp();
        // E[v_i / σ_i | h] = b_i / σ_i + a_i
        let mean_scaled = &b_over_sigma + a;
        neg_w.scaled_add(p, &outer(&mean_scaled, h));
        neg_b.scaled_add(p, &(a / &model.sigma));
        neg_c.scaled_add(p, h);
    }
    d_weights -= &neg_w;
    d_visible_bias -= &neg_b;
    d_hidden_bias -= &neg_c;
    Ok(Gradients { d_weights, d_visible_bias, d_hidden_bias })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}
