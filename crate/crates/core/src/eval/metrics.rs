//! kNN purity and silhouette over labelled embedding rows.
//!
//! Labels are `Option<String>`: `Some(series)` for records of a known series,
//! `None` for unrelated background cases. Both metrics average over series
//! points only; background points still act as neighbours and as a cluster.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn distance(points: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnPurity {
    pub overall: f64,
    /// Series label → (point count, purity).
    pub per_series: BTreeMap<String, (usize, f64)>,
}

/// Fraction of series points whose `k` nearest neighbours (self excluded,
/// ties broken by record id) hold at least `⌈k/2⌉` points of the same series.
pub fn knn_purity(
    points: ArrayView2<'_, f64>,
    ids: &[String],
    labels: &[Option<String>],
    k: usize,
) -> Result<KnnPurity> {
    let n = points.nrows();
    check_lengths(n, ids, labels)?;
    if k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    let labelled: Vec<usize> = (0..n).filter(|&i| labels[i].is_some()).collect();
    if labelled.len() < 2 {
        return Err(Error::config("kNN purity needs at least two series points"));
    }
    let need = k.div_ceil(2);
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for &i in &labelled {
        let mut others: Vec<(f64, &str, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (distance(points, i, j), ids[j].as_str(), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let same = others.iter().take(k).filter(|&&(_, _, j)| labels[j] == labels[i]).count();
        let entry = hits.entry(labels[i].clone().unwrap()).or_default();
        entry.0 += 1;
        entry.1 += usize::from(same >= need);
    }
    let total_hits: usize = hits.values().map(|h| h.1).sum();
    Ok(KnnPurity {
        overall: total_hits as f64 / labelled.len() as f64,
        per_series: hits.into_iter().map(|(s, (cnt, ok))| (s, (cnt, ok as f64 / cnt as f64))).collect(),
    })
}

/// Mean silhouette over series points, with background records grouped into
/// one extra cluster. A point alone in its cluster scores 0.
pub fn silhouette(points: ArrayView2<'_, f64>, labels: &[Option<String>]) -> Result<f64> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
    }
    let mut clusters: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        clusters.entry(l.as_deref()).or_default().push(i);
    }
    if clusters.len() < 2 {
        return Err(Error::config("silhouette needs at least two clusters"));
    }
    let series_points: Vec<usize> = (0..n).filter(|&i| labels[i].is_some()).collect();
    if series_points.is_empty() {
        return Err(Error::config("silhouette needs at least one series point"));
    }
    let mut total = 0.0;
    for &i in &series_points {
        let own_key = labels[i].as_deref();
        let own = &clusters[&own_key];
        if own.len() < 2 {
            continue;
        }
        let mean_to = |members: &[usize]| {
            let s: f64 = members.iter().filter(|&&j| j != i).map(|&j| distance(points, i, j)).sum();
            s / members.iter().filter(|&&j| j != i).count() as f64
        };
        let a = mean_to(own);
        let b = clusters
            .iter()
            .filter(|(key, _)| **key != own_key)
            .map(|(_, members)| mean_to(members))
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / series_points.len() as f64)
}

fn check_lengths(n: usize, ids: &[String], labels: &[Option<String>]) -> Result<()> {
    for len in [ids.len(), labels.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPurity {
    pub series: String,
    pub size: usize,
    pub purity: f64,
}

/// Cluster-quality summary for one embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub dim: usize,
    pub k: usize,
    pub knn_purity: f64,
    pub silhouette: f64,
    pub per_series: Vec<SeriesPurity>,
}

impl MetricReport {
    pub fn compute(
        method: impl Into<String>,
        points: ArrayView2<'_, f64>,
        ids: &[String],
        labels: &[Option<String>],
        k: usize,
    ) -> Result<Self> {
        let purity = knn_purity(points, ids, labels, k)?;
        let sil = silhouette(points, labels)?;
        Ok(Self {
            method: method.into(),
            dim: points.ncols(),
            k,
            knn_purity: purity.overall,
            silhouette: sil,
            per_series: purity
                .per_series
                .into_iter()
                .map(|(series, (size, purity))| SeriesPurity { series, size, purity })
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, StandardNormal};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i:03}")).collect()
    }

    fn lab(s: &str) -> Option<String> {
        Some(s.to_string())
    }

    #[test]
    fn collapsed_series_are_pure() {
        let pts = array![[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0], [5.0, 5.0]];
        let labels = vec![lab("a"), lab("a"), lab("a"), lab("b"), lab("b"), lab("b")];
        let p = knn_purity(pts.view(), &ids(6), &labels, 2).unwrap();
        assert_eq!(p.overall, 1.0);
        assert_eq!(p.per_series["a"], (3, 1.0));
    }

    #[test]
    fn small_series_among_distant_background() {
        let mut pts = Array2::zeros((23, 2));
        for i in 3..23 {
            pts[[i, 0]] = 100.0 + i as f64;
            pts[[i, 1]] = -50.0 * (i % 3) as f64;
        }
        let mut labels = vec![None; 23];
        labels[..3].fill(lab("s"));
        // k = 3 needs 2 same-label neighbours; the two partners are at distance 0
        let p = knn_purity(pts.view(), &ids(23), &labels, 3).unwrap();
        assert_eq!(p.overall, 1.0);
    }

    #[test]
    fn ties_break_by_record_id() {
        // point 0 is equidistant from 1 (same series) and 2 (background);
        // with k = 1 the lower id wins
        let pts = array![[0.0], [1.0], [-1.0], [10.0]];
        let labels = vec![lab("a"), lab("a"), None, lab("a")];
        let ids_low = vec!["m".to_string(), "a".to_string(), "z".to_string(), "q".to_string()];
        let ids_high = vec!["m".to_string(), "z".to_string(), "a".to_string(), "q".to_string()];
        let low = knn_purity(pts.view(), &ids_low, &labels, 1).unwrap();
        let high = knn_purity(pts.view(), &ids_high, &labels, 1).unwrap();
        assert!(low.overall > high.overall);
    }

    #[test]
    fn shuffled_labels_give_base_rate_purity() {
        let mut rng = crate::seeded_rng(2024);
        let n = 500;
        let pts = Array2::from_shape_simple_fn((n, 10), || StandardNormal.sample(&mut rng));
        let mut labels: Vec<Option<String>> = (0..n).map(|i| Some(format!("s{}", i % 5))).collect();
        let mut acc = 0.0;
        let trials = 5;
        for _ in 0..trials {
            labels.shuffle(&mut rng);
            acc += knn_purity(pts.view(), &ids(n), &labels, 5).unwrap().overall;
        }
        // P(Binomial(5, 0.2) >= 3) ≈ 0.058
        assert!(acc / (trials as f64) < 0.2);
    }

    #[test]
    fn tight_separated_blobs_have_high_silhouette() {
        let mut rng = crate::seeded_rng(8);
        let mut pts = Array2::zeros((40, 2));
        let mut labels = Vec::new();
        for i in 0..40 {
            let off = if i < 20 { 0.0 } else { 100.0 };
            let (dx, dy): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            pts[[i, 0]] = off + 0.1 * dx;
            pts[[i, 1]] = 0.1 * dy;
            labels.push(lab(if i < 20 { "a" } else { "b" }));
        }
        assert!(silhouette(pts.view(), &labels).unwrap() > 0.9);
    }

    #[test]
    fn identical_points_score_zero() {
        let pts = Array2::zeros((6, 3));
        let labels = vec![lab("a"), lab("a"), lab("b"), lab("b"), None, None];
        assert_eq!(silhouette(pts.view(), &labels).unwrap(), 0.0);
    }

    #[test]
    fn singleton_cluster_contributes_zero() {
        let pts = array![[0.0], [0.1], [5.0]];
        let labels = vec![lab("a"), lab("a"), lab("b")];
        let s = silhouette(pts.view(), &labels).unwrap();
        // two points of "a" score (5-0.1)/5 and (4.9-0.1)/4.9; "b" scores 0
        let expected = ((5.0 - 0.1) / 5.0 + (4.9 - 0.1) / 4.9) / 3.0;
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn random_labels_give_near_zero_silhouette() {
        let mut rng = crate::seeded_rng(99);
        let n = 300;
        let pts = Array2::from_shape_simple_fn((n, 5), || StandardNormal.sample(&mut rng));
        let mut labels: Vec<Option<String>> = (0..n).map(|i| Some(format!("s{}", i % 3))).collect();
        labels.shuffle(&mut rng);
        assert!(silhouette(pts.view(), &labels).unwrap().abs() < 0.05);
    }

    #[test]
    fn report_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pts = array![[0.0], [0.1], [5.0], [5.1], [9.0]];
        let labels = vec![lab("a"), lab("a"), lab("b"), lab("b"), None];
        let r = MetricReport::compute("test", pts.view(), &ids(5), &labels, 1).unwrap();
        assert_eq!(r.knn_purity, 1.0);
        let p = dir.path().join("m.json");
        r.save(&p).unwrap();
        assert_eq!(MetricReport::load(&p).unwrap(), r);
    }

    fn rotate_scale_translate(pts: &Array2<f64>, theta: f64, scale: f64, shift: (f64, f64)) -> Array2<f64> {
        let (c, s) = (theta.cos(), theta.sin());
        Array2::from_shape_fn(pts.dim(), |(i, j)| {
            let (x, y) = (pts[[i, 0]], pts[[i, 1]]);
            if j == 0 {
                scale * (c * x - s * y) + shift.0
            } else {
                scale * (s * x + c * y) + shift.1
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn metrics_invariant_under_similarity_transforms(
            seed in 0u64..1000,
            theta in 0.0f64..std::f64::consts::TAU,
            scale in 0.1f64..10.0,
            shift in (-50.0f64..50.0, -50.0f64..50.0),
        ) {
            let mut rng = crate::seeded_rng(seed);
            let n = 30;
            let pts = Array2::from_shape_simple_fn((n, 2), || StandardNormal.sample(&mut rng));
            let labels: Vec<Option<String>> =
                (0..n).map(|i| if i % 3 == 0 { None } else { Some(format!("s{}", i % 2)) }).collect();
            let moved = rotate_scale_translate(&pts, theta, scale, shift);
            let a = knn_purity(pts.view(), &ids(n), &labels, 5).unwrap();
            let b = knn_purity(moved.view(), &ids(n), &labels, 5).unwrap();
            prop_assert_eq!(a, b);
            let (sa, sb) = (silhouette(pts.view(), &labels).unwrap(), silhouette(moved.view(), &labels).unwrap());
            prop_assert!((sa - sb).abs() < 1e-9);
        }
    }
}
