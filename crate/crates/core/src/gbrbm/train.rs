//! Contrastive divergence and the mini-batch SGD trainer.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{sample_bernoulli, GbrbmModel, Gradients};
use crate::error::{Error, Result};
use crate::features::TfIdfMatrix;
use crate::Rng;

const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub cd_k: usize,
    pub seed: u64,
    pub weight_init_std: f64,
    /// Start visible biases at the column means of the training data.
    pub visible_bias_from_data: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            batch_size: 20,
            epochs: 30,
            cd_k: 1,
            seed: 0,
            weight_init_std: 0.01,
            visible_bias_from_data: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // learning rate 0 is allowed: it turns training into a no-op
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.cd_k == 0 {
            return Err(Error::config("cd_k must be >= 1"));
        }
        if !(self.weight_init_std >= 0.0 && self.weight_init_std.is_finite()) {
            return Err(Error::config("weight_init_std must be finite and >= 0"));
        }
        Ok(())
    }
}

/// CD-k gradient estimate averaged over the rows of `batch`.
///
/// Each row starts a Gibbs chain; after `k` sweeps the statistics use the
/// mean-field hidden probabilities at both ends of the chain.
pub fn cd_k_gradient(model: &GbrbmModel, batch: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> Result<Gradients> {
    if batch.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if k == 0 {
        return Err(Error::config("cd_k must be >= 1"));
    }
    model.check_visible(batch.ncols())?;

    let pos_probs = model.hidden_probs_batch(batch);
    let mut neg_visible = batch.to_owned();
    let mut neg_probs = pos_probs.clone();
    for _ in 0..k {
        let h = sample_bernoulli(&neg_probs, rng);
        neg_visible = model.sample_visible_batch(h.view(), rng);
        neg_probs = model.hidden_probs_batch(neg_visible.view());
    }
    Ok(statistics(model, batch, &pos_probs, neg_visible.view(), &neg_probs))
}

/// Same as [`cd_k_gradient`] but over explicit row references.
pub fn cd_k_gradient_dense(model: &GbrbmModel, rows: &[&[f64]], k: usize, rng: &mut Rng) -> Result<Gradients> {
    let m = model.n_visible();
    let mut batch = Array2::zeros((rows.len(), m));
    for (i, r) in rows.iter().enumerate() {
        model.check_visible(r.len())?;
        batch.row_mut(i).assign(&ndarray::ArrayView1::from(*r));
    }
    cd_k_gradient(model, batch.view(), k, rng)
}

fn statistics(
    model: &GbrbmModel,
    pos_visible: ArrayView2<'_, f64>,
    pos_probs: &Array2<f64>,
    neg_visible: ArrayView2<'_, f64>,
    neg_probs: &Array2<f64>,
) -> Gradients {
    let scale = 1.0 / pos_visible.nrows() as f64;
    let pos_scaled = &pos_visible / &model.sigma;
    let neg_scaled = &neg_visible / &model.sigma;
    let mut d_weights = pos_scaled.t().dot(pos_probs);
    d_weights -= &neg_scaled.t().dot(neg_probs);
    d_weights *= scale;

    let var = model.sigma.mapv(|s| s * s);
    let d_visible_bias = (&pos_visible - &neg_visible).sum_axis(Axis(0)) / &var * scale;
    let d_hidden_bias = (pos_probs - neg_probs).sum_axis(Axis(0)) * scale;
    Gradients { d_weights, d_visible_bias, d_hidden_bias }
}

impl GbrbmModel {
    /// `θ ← θ + learning_rate · grad`.
    pub fn apply_gradients(&mut self, grad: &Gradients, learning_rate: f64) {
        self.weights.scaled_add(learning_rate, &grad.d_weights);
        self.visible_bias.scaled_add(learning_rate, &grad.d_visible_bias);
        self.hidden_bias.scaled_add(learning_rate, &grad.d_hidden_bias);
    }
}

/// Mean squared reconstruction error `‖v - E[v | p(h|v)]‖²` over all documents.
pub fn reconstruction_error(model: &GbrbmModel, data: &TfIdfMatrix) -> Result<f64> {
    model.check_visible(data.n_terms())?;
    let n = data.n_docs();
    if n == 0 {
        return Ok(0.0);
    }
    let rows: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for chunk in rows.chunks(128) {
        let v = data.dense_rows(chunk);
        let probs = model.hidden_probs_batch(v.view());
        let recon = model.visible_mean_batch(probs.view());
        total += (&v - &recon).iter().map(|d| d * d).sum::<f64>();
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: GbrbmModel,
    /// Mean reconstruction error after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch SGD on the CD-k gradient for a fixed number of epochs.
pub fn train(data: &TfIdfMatrix, n_hidden: usize, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if data.n_docs() == 0 {
        return Err(Error::config("training data has no documents"));
    }
    if n_hidden == 0 {
        return Err(Error::config("n_hidden must be >= 1"));
    }
    let mean = config.visible_bias_from_data.then(|| data.column_means());
    let mut model = GbrbmModel::init(data.n_terms(), n_hidden, config, mean.as_deref())?;
    let mut rng = crate::derived_rng(config.seed, TRAIN_STREAM);
    let mut order: Vec<usize> = (0..data.n_docs()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = data.dense_rows(chunk);
            let grad = cd_k_gradient(&model, batch.view(), config.cd_k, &mut rng)?;
            model.apply_gradients(&grad, config.learning_rate);
        }
        let loss = reconstruction_error(&model, data)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch: loss_trace.len() + 1 });
        }
        loss_trace.push(loss);
    }
    Ok(TrainOutput { model, loss_trace })
}

/// Write a loss trace as CSV `epoch,loss` with 1-based epochs.
pub fn save_loss_trace(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = || -> std::io::Result<()> {
        writeln!(out, "epoch,loss")?;
        for (i, l) in trace.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, l)?;
        }
        out.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{SparseRows, TfIdfMatrix};
    use ndarray::{array, Array1};

    fn matrix(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> TfIdfMatrix {
        let ids = (0..rows.len()).map(|i| format!("d{i}")).collect();
        TfIdfMatrix::from_sparse(SparseRows::from_rows(cols, rows, ids).unwrap(), false).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { cd_k: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { learning_rate: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let m = GbrbmModel::init(3, 2, &TrainConfig::default(), None).unwrap();
        let empty = Array2::<f64>::zeros((0, 3));
        let err = cd_k_gradient(&m, empty.view(), 1, &mut crate::seeded_rng(0)).unwrap_err();
        assert!(matches!(err, Error::EmptyBatch));
    }

    #[test]
    fn phases_cancel_when_chain_returns_to_start() {
        let cfg = TrainConfig { seed: 2, weight_init_std: 0.4, ..Default::default() };
        let m = GbrbmModel::init(3, 2, &cfg, None).unwrap();
        let v0 = array![[0.3, -0.2, 0.8], [0.0, 1.0, 0.5]];
        let p0 = m.hidden_probs_batch(v0.view());
        let g = statistics(&m, v0.view(), &p0, v0.view(), &p0);
        assert!(g.to_vec().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pinned_chain_gives_vanishing_gradient() {
        // W = 0, b = v0 and a tiny sigma pin the chain at v0; dW and db carry
        // 1/sigma and 1/sigma^2 factors, so compare them on the data scale
        let v0 = array![0.3, -0.2, 0.8];
        let sigma = 1e-9;
        let m =
            GbrbmModel::from_parts(Array2::zeros((3, 2)), v0.clone(), Array1::zeros(2), Array1::from_elem(3, sigma))
                .unwrap();
        let batch = v0.clone().insert_axis(Axis(0));
        let g = cd_k_gradient(&m, batch.view(), 3, &mut crate::seeded_rng(5)).unwrap();
        assert!(g.d_hidden_bias.iter().all(|x| x.abs() < 1e-12));
        assert!(g.d_weights.iter().all(|x| (x * sigma).abs() < 1e-8));
        assert!(g.d_visible_bias.iter().all(|x| (x * sigma * sigma).abs() < 1e-8));
    }

    #[test]
    fn fixed_seed_gives_identical_gradients() {
        let cfg = TrainConfig { seed: 11, weight_init_std: 0.3, ..Default::default() };
        let m = GbrbmModel::init(4, 3, &cfg, None).unwrap();
        let batch = array![[0.1, 0.2, 0.0, 0.5], [0.0, 0.3, 0.3, 0.1]];
        let a = cd_k_gradient(&m, batch.view(), 2, &mut crate::seeded_rng(1)).unwrap();
        let b = cd_k_gradient(&m, batch.view(), 2, &mut crate::seeded_rng(1)).unwrap();
        assert_eq!(a, b);
        let rows: Vec<&[f64]> = batch.rows().into_iter().map(|r| r.to_slice().unwrap()).collect();
        let c = cd_k_gradient_dense(&m, &rows, 2, &mut crate::seeded_rng(1)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn single_document_reconstruction_improves() {
        // unnormalized weights so the drift toward the document dominates the
        // unit-variance sampling noise in the negative phase
        let data = matrix(vec![vec![(0, 6.0), (2, 8.0)]], 4);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            weight_init_std: 0.0,
            visible_bias_from_data: false,
            epochs: 10,
            seed: 4,
            ..Default::default()
        };
        let out = train(&data, 3, &cfg).unwrap();
        let initial = 100.0; // W = 0, b = 0: reconstruction is the zero vector
        assert!(out.loss_trace[0] < initial);
        for w in out.loss_trace[..4].windows(2) {
            assert!(w[1] < w[0], "{:?}", out.loss_trace);
        }
    }

    #[test]
    fn oversized_learning_rate_reports_divergence() {
        let rows = (0..40).map(|i| vec![(i % 4, 1.0), (4 + (i * 3) % 4, 0.5)]).collect();
        let data = matrix(rows, 8);
        let cfg = TrainConfig { learning_rate: 5.0, epochs: 30, seed: 1, ..Default::default() };
        assert!(matches!(train(&data, 300, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let data = matrix(vec![vec![(0, 1.0)], vec![(1, 0.6), (2, 0.8)], vec![(3, 1.0)]], 4);
        let cfg = TrainConfig { epochs: 4, batch_size: 2, seed: 99, ..Default::default() };
        let a = train(&data, 5, &cfg).unwrap();
        let b = train(&data, 5, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let data = matrix(vec![vec![(0, 1.0)], vec![(1, 1.0)]], 3);
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, seed: 2, ..Default::default() };
        let out = train(&data, 2, &cfg).unwrap();
        let init = GbrbmModel::init(3, 2, &cfg, Some(&data.column_means())).unwrap();
        assert_eq!(out.model, init);
    }
}
