use plfc_core::spline::{featurize_summaries, project, scale_features, CurveSummary, SplineBasis};
use plfc_core::Curve;
use proptest::prelude::*;

/// Sorted, well-separated interior knots on the grid `0, 10, …, 500`.
fn knots() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::btree_set(2usize..49, 0..6).prop_map(|s| {
        let mut out: Vec<f64> = Vec::new();
        for i in s {
            let t = 10.0 * i as f64;
            if out.last().is_none_or(|&p| t - p >= 20.0) {
                out.push(t);
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn basis_is_a_nonnegative_partition_of_unity(t in knots(), u in 0.0f64..=500.0) {
        let b = SplineBasis::new(0.0, 500.0, &t).unwrap();
        let vals = b.eval_all(u);
        prop_assert_eq!(vals.len(), t.len() + 2);
        prop_assert!(vals.iter().all(|&v| v >= 0.0));
        prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(vals.iter().filter(|&&v| v > 0.0).count() <= 2);
    }

    #[test]
    fn projection_of_a_spline_returns_its_nodes(
        t in knots(),
        theta in proptest::collection::vec(-1e3f64..1e3, 8),
    ) {
        let b = SplineBasis::new(0.0, 500.0, &t).unwrap();
        let theta = &theta[..t.len() + 2];
        let x: Vec<f64> = (0..=50).map(|i| 10.0 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&u| b.evaluate(theta, u)).collect();
        let c = Curve::new("c", x, y).unwrap();
        let fitted = project(&c, &b).unwrap();
        for (a, e) in fitted.iter().zip(theta) {
            prop_assert!((a - e).abs() <= 1e-9 * (1.0 + e.abs()), "{a} vs {e}");
        }
    }

    #[test]
    fn features_pad_to_the_widest_summary(ks in proptest::collection::vec(0usize..5, 1..8)) {
        let items: Vec<CurveSummary> = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| CurveSummary {
                id: format!("c{i}"),
                knots: (1..=k).map(|j| 50.0 * j as f64).collect(),
                theta: (0..k + 2).map(|j| (i * 10 + j) as f64).collect(),
            })
            .collect();
        let m = featurize_summaries(&items).unwrap();
        let k_m = *ks.iter().max().unwrap();
        prop_assert_eq!(m.k_m, k_m);
        for (row, s) in m.rows.iter().zip(&items) {
            prop_assert_eq!(row.len(), 2 * k_m + 2);
            let k = s.knots.len();
            prop_assert_eq!(&row[..k + 2], &s.theta[..]);
            prop_assert!(row[k + 2..k_m + 2].iter().all(|&v| v == 0.0));
            prop_assert_eq!(&row[k_m + 2..k_m + 2 + k], &s.knots[..]);
            prop_assert!(row[k_m + 2 + k..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn scaled_columns_have_zero_mean_and_unit_sd(rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 3..20)) {
        let (scaled, scaling) = scale_features(&rows).unwrap();
        let n = rows.len() as f64;
        for j in 0..3 {
            let col: Vec<f64> = scaled.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-12);
            if scaling.sd[j] > 0.0 {
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!((var - 1.0).abs() <= 1e-9);
            }
        }
    }
}
