//! Exact t-SNE to two dimensions.
//!
//! Gaussian conditional affinities with per-point bandwidths found by
//! bisection on the target perplexity, symmetrized into a joint `P`; a
//! Student-t (one degree of freedom) joint `Q` over the 2-D points; gradient
//! descent on `KL(P ‖ Q)` with momentum, per-coordinate gains and early
//! exaggeration.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbrbm::EmbeddingMatrix;

/// Conditionals below this are floored so duplicates and far outliers keep finite logs.
pub const CONDITIONAL_FLOOR: f64 = 1e-12;
pub const PERPLEXITY_TOLERANCE: f64 = 1e-3;
pub const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    /// Symmetric joint probabilities with zero diagonal, summing to one.
    pub p: Array2<f64>,
    /// Row-normalized conditionals `p_{j|i}` before symmetrization.
    pub conditional: Array2<f64>,
    pub target_perplexity: f64,
    /// Perplexity actually reached by each row's bandwidth.
    pub row_perplexity: Vec<f64>,
    pub row_ids: Vec<String>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }
}

fn squared_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Conditional row for precision `beta`; returns the row and its perplexity `e^H`.
fn conditional_row(dist: &[f64], skip: usize, beta: f64) -> (Vec<f64>, f64) {
    let d_min = dist.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &d)| d).fold(f64::INFINITY, f64::min);
    let mut row: Vec<f64> =
        dist.iter().enumerate().map(|(j, &d)| if j == skip { 0.0 } else { (-beta * (d - d_min)).exp() }).collect();
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= sum);
    let entropy: f64 = -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    (row, entropy.exp())
}

/// Bisection on the Gaussian precision until the row's perplexity is within
/// tolerance of `target`. Rows whose perplexity cannot move (all distances
/// equal) stop at the step limit with the best row found.
fn search_row(dist: &[f64], i: usize, target: f64) -> (Vec<f64>, f64) {
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut best = conditional_row(dist, i, beta);
    for _ in 0..MAX_BISECTION_STEPS {
        let (row, perp) = conditional_row(dist, i, beta);
        if (perp - target).abs() < (best.1 - target).abs() {
            best = (row.clone(), perp);
        }
        if (perp - target).abs() < PERPLEXITY_TOLERANCE {
            return (row, perp);
        }
        if perp > target {
            // too flat: sharpen
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    best
}

/// Joint affinities `P = (P_{j|i} + P_{i|j}) / 2N` at the given perplexity.
pub fn pairwise_affinities(x: ArrayView2<'_, f64>, perplexity: f64) -> Result<AffinityMatrix> {
    let n = x.nrows();
    if n < 4 {
        return Err(Error::config(format!("t-SNE needs at least 4 points, got {n}")));
    }
    let limit = (n as f64 - 1.0) / 3.0;
    if !(perplexity > 0.0 && perplexity < limit) {
        return Err(Error::PerplexityTooLarge { perplexity, n, limit });
    }
    let d = squared_distances(x);
    let mut conditional = Array2::zeros((n, n));
    let mut row_perplexity = Vec::with_capacity(n);
    for i in 0..n {
        let dist = d.row(i).to_vec();
        let (mut row, perp) = search_row(&dist, i, perplexity);
        for (j, p) in row.iter_mut().enumerate() {
            if j != i {
                *p = p.max(CONDITIONAL_FLOOR);
            }
        }
        let s: f64 = row.iter().sum();
        conditional.row_mut(i).assign(&Array1::from_iter(row.into_iter().map(|p| p / s)));
        row_perplexity.push(perp);
    }
    let mut p = &conditional + &conditional.t();
    p /= 2.0 * n as f64;
    // exact normalization against rounding
    let total = p.sum();
    p /= total;
    Ok(AffinityMatrix {
        p,
        conditional,
        target_perplexity: perplexity,
        row_perplexity,
        row_ids: (0..n).map(|i| i.to_string()).collect(),
    })
}

/// Affinities over embedding rows, keeping their record ids.
pub fn embedding_affinities(embedding: &EmbeddingMatrix, perplexity: f64) -> Result<AffinityMatrix> {
    let mut a = pairwise_affinities(embedding.values.view(), perplexity)?;
    a.row_ids = embedding.row_ids.clone();
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub min_gain: f64,
    /// Standard deviation of the random initial layout.
    pub init_std: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            min_gain: 0.01,
            init_std: 1e-2,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity > 0.0 && self.perplexity.is_finite()) {
            return Err(Error::config(format!("perplexity {} must be positive", self.perplexity)));
        }
        if self.iterations == 0 {
            return Err(Error::config("t-SNE needs at least one iteration"));
        }
        let positive = [self.learning_rate, self.exaggeration, self.min_gain, self.init_std];
        if !positive.iter().all(|x| *x > 0.0 && x.is_finite()) {
            return Err(Error::config("t-SNE learning_rate, exaggeration, min_gain and init_std must be positive"));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::config(format!("momentum {m} must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `N × 2` coordinates, centered at the origin.
    pub points: Array2<f64>,
    /// `KL(P ‖ Q)` at the start of every iteration, then after the last one.
    pub kl_trace: Vec<f64>,
    pub row_ids: Vec<String>,
}

impl Projection {
    /// CSV `record_id,x,y,label`.
    pub fn save_csv(&self, path: impl AsRef<Path>, label: impl Fn(&str) -> String) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::gbrbm::csv_err(path, e))?;
        let mut write = || -> std::result::Result<(), csv::Error> {
            w.write_record(["record_id", "x", "y", "label"])?;
            for (id, row) in self.row_ids.iter().zip(self.points.rows()) {
                w.write_record([id.clone(), row[0].to_string(), row[1].to_string(), label(id)])?;
            }
            w.flush()?;
            Ok(())
        };
        write().map_err(|e| crate::gbrbm::csv_err(path, e))
    }

    /// CSV `iteration,kl`.
    pub fn save_kl_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut body = || -> std::io::Result<()> {
            writeln!(out, "iteration,kl")?;
            for (i, kl) in self.kl_trace.iter().enumerate() {
                writeln!(out, "{i},{kl}")?;
            }
            out.flush()
        };
        body().map_err(|e| Error::io(path, e))
    }
}

/// Student-t kernel `1 / (1 + ‖y_i - y_j‖²)` with zero diagonal, and its sum.
fn student_kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let pts: Vec<(f64, f64)> = y.rows().into_iter().map(|r| (r[0], r[1])).collect();
    let mut num = Array2::zeros((n, n));
    let mut sum = 0.0;
    for (i, row) in num.rows_mut().into_iter().enumerate() {
        let row = row.into_slice().expect("standard layout");
        let (xi, yi) = pts[i];
        for (j, (out, &(xj, yj))) in row.iter_mut().zip(&pts).enumerate() {
            if j != i {
                let (dx, dy) = (xi - xj, yi - yj);
                *out = 1.0 / (1.0 + dx * dx + dy * dy);
                sum += *out;
            }
        }
    }
    (num, sum)
}

fn kl_divergence(p: &Array2<f64>, num: &Array2<f64>, sum: f64) -> f64 {
    let mut kl = 0.0;
    for (prow, qrow) in p.rows().into_iter().zip(num.rows()) {
        for (&pij, &k) in prow.iter().zip(qrow.iter()) {
            if pij > 0.0 && k > 0.0 {
                let q = (k / sum).max(f64::MIN_POSITIVE);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl.max(0.0)
}

/// Run t-SNE for `iterations` steps with the default schedule.
pub fn project(affinities: &AffinityMatrix, iterations: usize, seed: u64) -> Result<Projection> {
    project_with(affinities, &TsneConfig { iterations, ..TsneConfig::default() }, seed)
}

pub fn project_with(affinities: &AffinityMatrix, config: &TsneConfig, seed: u64) -> Result<Projection> {
    config.validate()?;
    let p = &affinities.p;
    let n = p.nrows();
    if n < 2 {
        return Err(Error::config("projection needs at least two points"));
    }
    let normal = Normal::new(0.0, config.init_std).map_err(|e| Error::config(format!("init_std: {e}")))?;
    let mut rng = crate::derived_rng(seed, 0);
    let mut y = Array2::from_shape_simple_fn((n, 2), || normal.sample(&mut rng));
    recenter(&mut y);
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let mut kl_trace = Vec::with_capacity(config.iterations + 1);

    for iter in 0..config.iterations {
        let (num, sum) = student_kernel(&y);
        kl_trace.push(kl_divergence(p, &num, sum));
        let exaggeration = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.momentum_switch_iter { config.initial_momentum } else { config.final_momentum };

        let mut grad = Array2::<f64>::zeros((n, 2));
        let pts: Vec<(f64, f64)> = y.rows().into_iter().map(|r| (r[0], r[1])).collect();
        for (i, (prow, krow)) in p.rows().into_iter().zip(num.rows()).enumerate() {
            let (xi, yi) = pts[i];
            let (mut gx, mut gy) = (0.0, 0.0);
            // the zero diagonal of the kernel drops the j = i term
            for ((&pij, &k), &(xj, yj)) in prow.iter().zip(krow.iter()).zip(&pts) {
                let w = (exaggeration * pij - k / sum) * k;
                gx += w * (xi - xj);
                gy += w * (yi - yj);
            }
            grad[[i, 0]] = 4.0 * gx;
            grad[[i, 1]] = 4.0 * gy;
        }

        ndarray::Zip::from(&mut gains).and(&grad).and(&update).for_each(|g, &d, &u| {
            *g = if (d > 0.0) != (u > 0.0) { *g + 0.2 } else { *g * 0.8 };
            *g = g.max(config.min_gain);
        });
        ndarray::Zip::from(&mut update).and(&gains).and(&grad).for_each(|u, &g, &d| {
            *u = momentum * *u - config.learning_rate * g * d;
        });
        y += &update;
        recenter(&mut y);
    }
    let (num, sum) = student_kernel(&y);
    kl_trace.push(kl_divergence(p, &num, sum));

    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Format("t-SNE diverged to non-finite coordinates".into()));
    }
    Ok(Projection { points: y, kl_trace, row_ids: affinities.row_ids.clone() })
}

fn recenter(y: &mut Array2<f64>) {
    let mean = y.mean_axis(Axis(0)).expect("non-empty");
    *y -= &mean;
}
