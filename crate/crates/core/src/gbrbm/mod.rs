//! Gaussian-Bernoulli restricted Boltzmann machine.
//!
//! Real-valued visible units `v` (length `m`) with per-unit standard
//! deviations `sigma`, binary hidden units `h` (length `n`). The energy is
//!
//! ```text
//! E(v, h) = -Σ_ij w_ij h_j v_i / σ_i + Σ_i (v_i - b_i)² / (2 σ_i²) - Σ_j c_j h_j
//! ```
//!
//! which gives `p(h_j = 1 | v) = sigmoid(Σ_i w_ij v_i / σ_i + c_j)` and
//! `v_i | h ~ Normal(b_i + σ_i Σ_j w_ij h_j, σ_i²)`.

mod io;
mod oracle;
mod train;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::features::TfIdfMatrix;
use crate::Rng;

pub use oracle::{exact_gradient, exact_log_likelihood, log_partition, MAX_EXACT_HIDDEN};
pub use train::{
    cd_k_gradient, cd_k_gradient_dense, reconstruction_error, save_loss_trace, train, TrainConfig, TrainOutput,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GbrbmModel {
    /// `m × n`; `weights[[i, j]]` couples visible `i` and hidden `j`.
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
    pub sigma: Array1<f64>,
    /// Seed the model was initialized/trained with, kept for provenance.
    pub seed: u64,
}

/// Numerically stable logistic function, kept strictly inside (0, 1).
pub(crate) fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl GbrbmModel {
    /// Weights drawn from `Normal(0, weight_init_std²)`, hidden biases zero,
    /// visible biases `data_mean` (or zero), unit standard deviations.
    pub fn init(m: usize, n: usize, config: &TrainConfig, data_mean: Option<&[f64]>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::config("model needs at least one visible and one hidden unit"));
        }
        if let Some(mean) = data_mean {
            if mean.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: mean.len() });
            }
        }
        let mut rng = crate::derived_rng(config.seed, INIT_STREAM);
        let normal =
            Normal::new(0.0, config.weight_init_std).map_err(|e| Error::config(format!("weight_init_std: {e}")))?;
        let weights = Array2::from_shape_simple_fn((m, n), || normal.sample(&mut rng));
        let visible_bias = match data_mean {
            Some(mean) => Array1::from(mean.to_vec()),
            None => Array1::zeros(m),
        };
        Ok(Self { weights, visible_bias, hidden_bias: Array1::zeros(n), sigma: Array1::ones(m), seed: config.seed })
    }

    /// Build from raw parameters, checking shapes, finiteness and `sigma > 0`.
    pub fn from_parts(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        sigma: Array1<f64>,
    ) -> Result<Self> {
        let model = Self { weights, visible_bias, hidden_bias, sigma, seed: 0 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.weights.dim();
        for (expected, found) in [(m, self.visible_bias.len()), (n, self.hidden_bias.len()), (m, self.sigma.len())] {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        let finite = |a: ArrayView1<f64>| a.iter().all(|x| x.is_finite());
        if !self.weights.iter().all(|x| x.is_finite())
            || !finite(self.visible_bias.view())
            || !finite(self.hidden_bias.view())
        {
            return Err(Error::Corrupt("non-finite model parameter".into()));
        }
        if !self.sigma.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::Corrupt("sigma must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    fn check_visible(&self, len: usize) -> Result<()> {
        if len != self.n_visible() {
            return Err(Error::DimensionMismatch { expected: self.n_visible(), found: len });
        }
        Ok(())
    }

    fn check_hidden(&self, len: usize) -> Result<()> {
        if len != self.n_hidden() {
            return Err(Error::DimensionMismatch { expected: self.n_hidden(), found: len });
        }
        Ok(())
    }

    /// `E(v, h)`. Hidden entries are expected to be 0 or 1.
    pub fn energy(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        self.check_visible(v.len())?;
        self.check_hidden(h.len())?;
        let mut e = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            let s = self.sigma[i];
            let coupling: f64 = self.weights.row(i).iter().zip(h).map(|(w, hj)| w * hj).sum();
            let d = vi - self.visible_bias[i];
            e += d * d / (2.0 * s * s) - coupling * vi / s;
        }
        e -= self.hidden_bias.iter().zip(h).map(|(c, hj)| c * hj).sum::<f64>();
        Ok(e)
    }

    /// Free energy `F(v) = -ln Σ_h exp(-E(v, h))`.
    pub fn free_energy(&self, v: &[f64]) -> Result<f64> {
        self.check_visible(v.len())?;
        let quad: f64 = v
            .iter()
            .zip(&self.visible_bias)
            .zip(&self.sigma)
            .map(|((x, b), s)| (x - b) * (x - b) / (2.0 * s * s))
            .sum();
        let pre = self.hidden_preactivation(v);
        Ok(quad - pre.iter().map(|&x| softplus(x)).sum::<f64>())
    }

    fn hidden_preactivation(&self, v: &[f64]) -> Array1<f64> {
        let scaled: Array1<f64> = v.iter().zip(&self.sigma).map(|(x, s)| x / s).collect();
        scaled.dot(&self.weights) + &self.hidden_bias
    }

    /// `p(h_j = 1 | v)` for every hidden unit.
    pub fn hidden_conditional(&self, v: &[f64]) -> Result<Array1<f64>> {
        self.check_visible(v.len())?;
        Ok(self.hidden_preactivation(v).mapv(sigmoid))
    }

    /// Mean and standard deviation of the Gaussian `p(v | h)`.
    pub fn visible_conditional(&self, h: &[f64]) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_hidden(h.len())?;
        let wh = self.weights.dot(&ArrayView1::from(h));
        let mean = &self.visible_bias + &(&self.sigma * &wh);
        Ok((mean, self.sigma.clone()))
    }

    /// Row-wise `p(h | v)` for a batch of visible vectors (`batch × m`).
    pub fn hidden_probs_batch(&self, v: ArrayView2<'_, f64>) -> Array2<f64> {
        let scaled = &v / &self.sigma;
        let mut pre = scaled.dot(&self.weights);
        pre += &self.hidden_bias;
        pre.mapv_inplace(sigmoid);
        pre
    }

    /// Row-wise mean of `p(v | h)` for a batch of hidden vectors (`batch × n`).
    pub fn visible_mean_batch(&self, h: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut mean = h.dot(&self.weights.t());
        mean *= &self.sigma;
        mean += &self.visible_bias;
        mean
    }

    /// One Gibbs sweep: `h ~ p(h | v)` then `v' ~ p(v | h)`.
    pub fn gibbs_step(&self, v: &[f64], rng: &mut Rng) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_visible(v.len())?;
        let v = ArrayView2::from_shape((1, v.len()), v).expect("contiguous slice");
        let (h, v_next) = self.gibbs_batch(v, rng);
        Ok((h.index_axis_move(Axis(0), 0), v_next.index_axis_move(Axis(0), 0)))
    }

    /// Batched Gibbs sweep. Samples are drawn in row-major order: all hidden
    /// units of the batch first, then all visible units.
    pub fn gibbs_batch(&self, v: ArrayView2<'_, f64>, rng: &mut Rng) -> (Array2<f64>, Array2<f64>) {
        let h = sample_bernoulli(&self.hidden_probs_batch(v), rng);
        let v_next = self.sample_visible_batch(h.view(), rng);
        (h, v_next)
    }

    /// Draw `v ~ p(v | h)` for every row of `h` (`batch × n`).
    pub fn sample_visible_batch(&self, h: ArrayView2<'_, f64>, rng: &mut Rng) -> Array2<f64> {
        let mut v = self.visible_mean_batch(h);
        for mut row in v.rows_mut() {
            Zip::from(&mut row).and(&self.sigma).for_each(|x, s| {
                let z: f64 = StandardNormal.sample(rng);
                *x += s * z;
            });
        }
        v
    }

    /// Deterministic embedding: hidden activation probabilities per document.
    pub fn embed(&self, data: &TfIdfMatrix) -> Result<EmbeddingMatrix> {
        self.check_visible(data.n_terms())?;
        let n_docs = data.n_docs();
        let mut out = Array2::zeros((n_docs, self.n_hidden()));
        let inv_sigma = self.sigma.mapv(|s| 1.0 / s);
        for d in 0..n_docs {
            let mut pre = self.hidden_bias.clone();
            for (i, x) in data.row(d) {
                pre.scaled_add(x * inv_sigma[i], &self.weights.row(i));
            }
            out.row_mut(d).assign(&pre.mapv(sigmoid));
        }
        Ok(EmbeddingMatrix { values: out, row_ids: data.row_ids().to_vec() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::save(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io::load(path.as_ref())
    }
}

const INIT_STREAM: u64 = 0;

/// Independent Bernoulli draws, one per entry of `probs`.
pub fn sample_bernoulli(probs: &Array2<f64>, rng: &mut Rng) -> Array2<f64> {
    probs.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
}

/// Standalone form of [`GbrbmModel::init`].
pub fn init_model(m: usize, n: usize, config: &TrainConfig, data_mean: Option<&[f64]>) -> Result<GbrbmModel> {
    GbrbmModel::init(m, n, config, data_mean)
}

/// Ascent direction on the log-likelihood for each parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_weights: Array2<f64>,
    pub d_visible_bias: Array1<f64>,
    pub d_hidden_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { d_weights: Array2::zeros((m, n)), d_visible_bias: Array1::zeros(m), d_hidden_bias: Array1::zeros(n) }
    }

    /// All components flattened as `[dW (row-major), db, dc]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.d_weights.iter().chain(&self.d_visible_bias).chain(&self.d_hidden_bias).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Gradients) -> f64 {
        self.to_vec().iter().zip(other.to_vec()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// Dense documents × hidden matrix of activation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Array2<f64>,
    pub row_ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>, row_ids: Vec<String>) -> Result<Self> {
        if values.nrows() != row_ids.len() {
            return Err(Error::DimensionMismatch { expected: values.nrows(), found: row_ids.len() });
        }
        Ok(Self { values, row_ids })
    }

    pub fn n_docs(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// CSV with header `record_id,e0,e1,...`; values use shortest round-trip formatting.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec!["record_id".to_string()];
        header.extend((0..self.dim()).map(|j| format!("e{j}")));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (id, row) in self.row_ids.iter().zip(self.values.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let dim = r.headers().map_err(|e| csv_err(path, e))?.len().saturating_sub(1);
        let mut ids = Vec::new();
        let mut flat = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            if rec.len() != dim + 1 {
                return Err(Error::Parse { line: line + 2, message: format!("expected {} fields", dim + 1) });
            }
            ids.push(rec[0].to_string());
            for f in rec.iter().skip(1) {
                flat.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse { line: line + 2, message: format!("bad number {f:?}") })?,
                );
            }
        }
        let values = Array2::from_shape_vec((ids.len(), dim), flat).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(values, ids)
    }
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}
