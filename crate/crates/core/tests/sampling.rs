use narrembed::gbrbm::{cd_k_gradient, exact_gradient, sample_bernoulli};
use narrembed::{seeded_rng, GbrbmModel};
use ndarray::{array, Array2, Axis};

fn model() -> GbrbmModel {
    GbrbmModel::from_parts(
        array![[0.8, -0.4], [0.3, 1.2], [-1.0, 0.5]],
        array![0.5, -0.25, 1.0],
        array![-0.3, 0.6],
        array![1.0, 0.5, 2.0],
    )
    .unwrap()
}

#[test]
fn gaussian_visible_moments() {
    let m = model();
    let draws = 20_000;
    let h = Array2::from_shape_fn((draws, 2), |(_, j)| if j == 0 { 1.0 } else { 0.0 });
    let v = m.sample_visible_batch(h.view(), &mut seeded_rng(31));
    let (mean, std) = m.visible_conditional(&[1.0, 0.0]).unwrap();
    let emp_mean = v.mean_axis(Axis(0)).unwrap();
    let emp_var = v.var_axis(Axis(0), 1.0);
    let nf = draws as f64;
    for i in 0..3 {
        let var = std[i] * std[i];
        assert!((emp_mean[i] - mean[i]).abs() < 3.0 * (var / nf).sqrt(), "mean {i}");
        assert!((emp_var[i] - var).abs() < 3.0 * var * (2.0 / (nf - 1.0)).sqrt(), "var {i}");
    }
}

#[test]
fn bernoulli_hidden_moments() {
    let m = model();
    let p = m.hidden_conditional(&[0.2, -0.7, 1.5]).unwrap();
    let draws = 20_000;
    let probs = Array2::from_shape_fn((draws, 2), |(_, j)| p[j]);
    let h = sample_bernoulli(&probs, &mut seeded_rng(32));
    assert!(h.iter().all(|&x| x == 0.0 || x == 1.0));
    let emp = h.mean_axis(Axis(0)).unwrap();
    for j in 0..2 {
        let se = (p[j] * (1.0 - p[j]) / draws as f64).sqrt();
        assert!((emp[j] - p[j]).abs() < 3.0 * se, "unit {j}");
    }
}

#[test]
fn long_chains_approach_the_exact_gradient() {
    let m =
        GbrbmModel::from_parts(array![[1.5, -1.0], [0.8, 1.2]], array![0.3, -0.2], array![-0.5, 0.4], array![1.0, 0.8])
            .unwrap();
    let v = [1.5, -1.0];
    let exact = exact_gradient(&m, &v).unwrap();
    let batch = Array2::from_shape_fn((4000, 2), |(_, i)| v[i]);
    let short = cd_k_gradient(&m, batch.view(), 1, &mut seeded_rng(1)).unwrap();
    let long = cd_k_gradient(&m, batch.view(), 50, &mut seeded_rng(1)).unwrap();
    assert!(long.distance(&exact) < short.distance(&exact));
    // the model term of the exact gradient is matched up to Monte Carlo noise
    assert!(long.distance(&exact) < 0.1 * exact.norm().max(1.0));
}
