use plfc_core::simulation::{curve_id, sample_cluster, sample_dataset, JitterSet, ModelSpec, DOMAIN_END, N_POINTS};
use plfc_core::Exec;

#[test]
fn cluster_labels_are_uniform() {
    // Pearson chi-square on 4 equiprobable cells, 3 degrees of freedom.
    // 16.27 is the 0.999 quantile.
    let n = 4000;
    for (model, seed) in [(ModelSpec::model1(), 31), (ModelSpec::model2(), 32)] {
        let sim = sample_dataset(&model, 1.0, n, seed, JitterSet::Verbatim, Exec::Parallel).unwrap();
        let mut counts = [0usize; 4];
        for l in sim.labels() {
            counts[l - 1] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 16.27, "counts {counts:?}, chi2 {chi2}");
    }
}

#[test]
fn shifts_follow_the_jitter_sets() {
    let n = 7000;
    let sim = sample_dataset(&ModelSpec::model1(), 0.0, n, 5, JitterSet::Verbatim, Exec::Parallel).unwrap();
    let tens = sim.truths.iter().filter(|t| t.u == 10.0).count() as f64 / n as f64;
    assert!((tens - 2.0 / 7.0).abs() < 0.02, "{tens}");
    assert!(sim.truths.iter().all(|t| t.u != -10.0));

    let sym = sample_dataset(&ModelSpec::model1(), 0.0, n, 5, JitterSet::Symmetric, Exec::Parallel).unwrap();
    for u in [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0] {
        let p = sym.truths.iter().filter(|t| t.u == u).count() as f64 / n as f64;
        assert!((p - 1.0 / 7.0).abs() < 0.02, "u={u}: {p}");
    }
}

#[test]
fn noiseless_curves_are_the_truth_on_the_grid() {
    let sim = sample_dataset(&ModelSpec::model2(), 0.0, 50, 8, JitterSet::Verbatim, Exec::Parallel).unwrap();
    for (i, (c, t)) in sim.dataset.curves.iter().zip(&sim.truths).enumerate() {
        assert_eq!(c.id, curve_id(i));
        assert_eq!(c.len(), N_POINTS);
        assert_eq!(c.x_last(), DOMAIN_END);
        for (x, y) in c.x.iter().zip(&c.y) {
            assert!((y - t.eval(*x)).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn curves_do_not_depend_on_sample_size() {
    let small = sample_dataset(&ModelSpec::model1(), 2.0, 10, 77, JitterSet::Verbatim, Exec::Sequential).unwrap();
    let large = sample_dataset(&ModelSpec::model1(), 2.0, 40, 77, JitterSet::Verbatim, Exec::Parallel).unwrap();
    assert_eq!(small.dataset.curves[..], large.dataset.curves[..10]);
}

#[test]
fn forced_cluster_keeps_every_curve_in_it() {
    let sim = sample_cluster(&ModelSpec::model2(), 4, 1.0, 30, 3, JitterSet::Verbatim, Exec::Parallel).unwrap();
    assert!(sim.labels().iter().all(|&l| l == 4));
    assert!(sim.truths.iter().all(|t| t.knots.len() == 3));
}

#[test]
fn noise_has_the_requested_scale() {
    let sigma = 5.0;
    let sim = sample_dataset(&ModelSpec::model1(), sigma, 400, 12, JitterSet::Verbatim, Exec::Parallel).unwrap();
    let resid: Vec<f64> = sim
        .dataset
        .curves
        .iter()
        .zip(&sim.truths)
        .flat_map(|(c, t)| c.x.iter().zip(&c.y).map(move |(x, y)| y - t.eval(*x)))
        .collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 0.1, "{mean}");
    assert!((sd / sigma - 1.0).abs() < 0.02, "{sd}");
}
