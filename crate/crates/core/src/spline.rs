//! Order-2 B-splines on an augmented knot sequence, least-squares projection,
//! and the padded coefficient/knot feature layout used for clustering.

use crate::error::{Error, Result};
use crate::io::{Cell, Curve, Table};
use crate::linalg::GivensLs;

/// Hat-function basis with augmented knots `(x₁, x₁, t₁, …, t_K, xₙ, xₙ)`.
///
/// Basis functions are indexed from 0; function `i` peaks at `tau[i + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineBasis {
    tau: Vec<f64>,
}

impl SplineBasis {
    pub fn new(x1: f64, xn: f64, knots: &[f64]) -> Result<Self> {
        if !(x1 < xn) || !x1.is_finite() || !xn.is_finite() {
            return Err(Error::InvalidInput(format!("empty domain [{x1}, {xn}]")));
        }
        if let Some(w) = knots.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "interior knots must be strictly increasing (found {} then {})",
                w[0], w[1]
            )));
        }
        if let Some(t) = knots.iter().find(|&&t| !(t > x1 && t < xn)) {
            return Err(Error::InvalidInput(format!(
                "knot {t} outside the open interval ({x1}, {xn})"
            )));
        }
        let mut tau = Vec::with_capacity(knots.len() + 4);
        tau.extend([x1, x1]);
        tau.extend_from_slice(knots);
        tau.extend([xn, xn]);
        Ok(Self { tau })
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.tau[2..self.tau.len() - 2]
    }

    /// `(x₁, t₁, …, t_K, xₙ)`: the peak of each basis function.
    pub fn nodes(&self) -> &[f64] {
        &self.tau[1..self.tau.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.tau.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Order-1 indicator on `[τᵢ, τᵢ₊₁)`; the last non-degenerate interval is
    /// closed on the right so the basis still sums to one at `xₙ`.
    fn order1(&self, i: usize, u: f64) -> f64 {
        let (lo, hi) = (self.tau[i], self.tau[i + 1]);
        let last = self.tau.len() - 3;
        if (lo <= u && u < hi) || (i == last && u == hi) {
            1.0
        } else {
            0.0
        }
    }

    /// `B_{i,2}(u)` by the two-term recursion from order-1 indicators.
    pub fn eval(&self, i: usize, u: f64) -> f64 {
        let t = &self.tau;
        let left = if t[i + 1] > t[i] {
            (u - t[i]) / (t[i + 1] - t[i]) * self.order1(i, u)
        } else {
            0.0
        };
        let right = if t[i + 2] > t[i + 1] {
            (t[i + 2] - u) / (t[i + 2] - t[i + 1]) * self.order1(i + 1, u)
        } else {
            0.0
        };
        left + right
    }

    pub fn eval_all(&self, u: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(i, u)).collect()
    }

    /// The two possibly nonzero functions at `u`: `(j, B_j(u), B_{j+1}(u))`.
    /// `None` outside `[x₁, xₙ]`.
    pub fn locate(&self, u: f64) -> Option<(usize, f64, f64)> {
        locate_in(self.nodes(), u, 0)
    }

    pub fn evaluate(&self, theta: &[f64], u: f64) -> f64 {
        match self.locate(u) {
            Some((j, a, b)) => theta[j] * a + theta[j + 1] * b,
            None => 0.0,
        }
    }
}

/// Interval search over sorted `nodes` starting at `hint`.
fn locate_in(nodes: &[f64], u: f64, hint: usize) -> Option<(usize, f64, f64)> {
    let last = nodes.len() - 1;
    if !(u >= nodes[0] && u <= nodes[last]) {
        return None;
    }
    let mut j = hint.min(last - 1);
    if nodes[j] > u {
        j = 0;
    }
    while j + 1 < last && nodes[j + 1] <= u {
        j += 1;
    }
    let s = (u - nodes[j]) / (nodes[j + 1] - nodes[j]);
    Some((j, 1.0 - s, s))
}

/// Least-squares fit of sorted data onto the hat basis with the given nodes
/// (`x₁, t₁, …, t_K, xₙ`). Returns the rss; `ls` holds the factorization.
pub(crate) fn fit_nodes(x: &[f64], y: &[f64], nodes: &[f64], ls: &mut GivensLs) -> f64 {
    ls.reset(nodes.len());
    let mut hint = 0;
    for (&u, &v) in x.iter().zip(y) {
        let (j, a, b) = locate_in(nodes, u, hint).expect("data inside the node range");
        hint = j;
        ls.add_row(j, &[a, b], v);
    }
    ls.rss()
}

/// Least-squares coefficients of `curve` in `basis` (via Givens QR).
pub fn project(curve: &Curve, basis: &SplineBasis) -> Result<Vec<f64>> {
    if curve.x_first() < basis.nodes()[0] || curve.x_last() > *basis.nodes().last().unwrap() {
        return Err(Error::InvalidInput(format!(
            "curve `{}` extends beyond the basis domain",
            curve.id
        )));
    }
    let mut ls = GivensLs::new(basis.len());
    fit_nodes(&curve.x, &curve.y, basis.nodes(), &mut ls);
    ls.solve()
}

/// What the feature layout needs from one fitted curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSummary {
    pub id: String,
    pub knots: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Rows laid out as `(θ₁ … θ_{K_M+2} | t₁ … t_{K_M})`, zero-padded.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub k_hat: Vec<usize>,
    pub k_m: usize,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        2 * self.k_m + 2
    }

    pub fn column_names(k_m: usize) -> Vec<String> {
        (1..=k_m + 2)
            .map(|i| format!("theta_{i}"))
            .chain((1..=k_m).map(|i| format!("t_{i}")))
            .collect()
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["curve_id".to_string(), "k_hat".to_string()];
        header.extend(Self::column_names(self.k_m));
        let mut table = Table::new(header);
        for ((id, k), row) in self.ids.iter().zip(&self.k_hat).zip(&self.rows) {
            let mut cells = vec![Cell::from(id.as_str()), Cell::from(*k)];
            cells.extend(row.iter().map(|&v| Cell::Real(v)));
            table.rows.push(cells);
        }
        table
    }
}

pub fn featurize_summaries(items: &[CurveSummary]) -> Result<FeatureMatrix> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no curves to featurize".into()));
    }
    for s in items {
        if s.theta.len() != s.knots.len() + 2 {
            return Err(Error::InvalidInput(format!(
                "curve `{}`: {} coefficients for {} knots",
                s.id,
                s.theta.len(),
                s.knots.len()
            )));
        }
    }
    let k_m = items.iter().map(|s| s.knots.len()).max().unwrap_or(0);
    let rows = items
        .iter()
        .map(|s| {
            let mut row = vec![0.0; 2 * k_m + 2];
            row[..s.theta.len()].copy_from_slice(&s.theta);
            row[k_m + 2..k_m + 2 + s.knots.len()].copy_from_slice(&s.knots);
            row
        })
        .collect();
    Ok(FeatureMatrix {
        ids: items.iter().map(|s| s.id.clone()).collect(),
        k_hat: items.iter().map(|s| s.knots.len()).collect(),
        k_m,
        rows,
    })
}

pub fn featurize(segmentations: &[crate::segmentation::Segmentation]) -> Result<FeatureMatrix> {
    let items: Vec<CurveSummary> = segmentations.iter().map(|s| s.summary()).collect();
    featurize_summaries(&items)
}

/// Per-column standardization parameters (sample sd, `N − 1` denominator).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scaling {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Standardizes each column; constant columns become all zeros (sd reported as 0).
pub fn scale_features(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Scaling)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("scaling needs at least 2 rows, got {n}")));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidInput("ragged feature matrix".into()));
    }
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for j in 0..p {
        let first = rows[0][j];
        if rows.iter().all(|r| r[j] == first) {
            mean[j] = first;
            continue;
        }
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        mean[j] = m;
        sd[j] = var.sqrt();
    }
    let scaled = rows
        .iter()
        .map(|r| {
            (0..p)
                .map(|j| if sd[j] > 0.0 { (r[j] - mean[j]) / sd[j] } else { 0.0 })
                .collect()
        })
        .collect();
    Ok((scaled, Scaling { mean, sd }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_knots_gives_two_ramps() {
        let b = SplineBasis::new(0.0, 10.0, &[]).unwrap();
        assert_eq!(b.len(), 2);
        for u in [0.0, 2.5, 7.0, 10.0] {
            assert!((b.eval(0, u) - (10.0 - u) / 10.0).abs() < 1e-15);
            assert!((b.eval(1, u) - u / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_knot_tent() {
        let b = SplineBasis::new(0.0, 10.0, &[4.0]).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.eval(1, 4.0), 1.0);
        assert!((b.eval(1, 2.0) - 0.5).abs() < 1e-15);
        assert!((b.eval(1, 7.0) - 0.5).abs() < 1e-15);
        assert_eq!(b.eval(1, 0.0), 0.0);
        assert_eq!(b.eval(1, 10.0), 0.0);
    }

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        let b = SplineBasis::new(0.0, 500.0, &[37.0, 150.0, 151.5, 420.0]).unwrap();
        for k in 0..=1000 {
            let u = 0.5 * k as f64;
            let vals = b.eval_all(u);
            assert!(vals.iter().all(|v| *v >= 0.0));
            assert!((vals.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "u={u}");
        }
    }

    #[test]
    fn locate_agrees_with_recursion() {
        let b = SplineBasis::new(-3.0, 8.0, &[-1.0, 0.5, 6.0]).unwrap();
        for k in 0..=220 {
            let u = -3.0 + 0.05 * k as f64;
            let (j, a, c) = b.locate(u).unwrap();
            let all = b.eval_all(u);
            for (i, v) in all.iter().enumerate() {
                let fast = if i == j { a } else if i == j + 1 { c } else { 0.0 };
                assert!((fast - v).abs() < 1e-12, "u={u} i={i}");
            }
        }
        assert!(b.locate(8.5).is_none());
    }

    #[test]
    fn node_values_are_one() {
        let b = SplineBasis::new(0.0, 500.0, &[100.0, 200.0]).unwrap();
        for (i, &t) in b.nodes().iter().enumerate() {
            assert_eq!(b.eval(i, t), 1.0);
        }
    }

    #[test]
    fn duplicate_or_outside_knots_rejected() {
        assert!(SplineBasis::new(0.0, 10.0, &[3.0, 3.0]).is_err());
        assert!(SplineBasis::new(0.0, 10.0, &[0.0]).is_err());
        assert!(SplineBasis::new(0.0, 10.0, &[10.0]).is_err());
    }

    #[test]
    fn model1_cluster1_node_values() {
        // Table values: knots (150, 250), nodes (0, 1600, 1900, 2000).
        let x: Vec<f64> = (0..51).map(|i| 10.0 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&u| {
                if u <= 150.0 {
                    1600.0 * u / 150.0
                } else if u <= 250.0 {
                    1600.0 + 300.0 * (u - 150.0) / 100.0
                } else {
                    1900.0 + 100.0 * (u - 250.0) / 250.0
                }
            })
            .collect();
        let curve = Curve::new("c1", x, y).unwrap();
        let basis = SplineBasis::new(0.0, 500.0, &[150.0, 250.0]).unwrap();
        let theta = project(&curve, &basis).unwrap();
        assert!((basis.evaluate(&theta, 150.0) - 1600.0).abs() < 1e-9);
        assert!((basis.evaluate(&theta, 250.0) - 1900.0).abs() < 1e-9);
        assert!((basis.evaluate(&theta, 500.0) - 2000.0).abs() < 1e-9);
        assert!(basis.evaluate(&theta, 0.0).abs() < 1e-9);
    }

    #[test]
    fn knot_between_samples_without_support_is_empty_segment() {
        let curve = Curve::new("c", vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let basis = SplineBasis::new(0.0, 4.0, &[2.2, 2.5, 2.8]).unwrap();
        assert!(matches!(project(&curve, &basis), Err(Error::EmptySegment { .. })));
    }

    #[test]
    fn featurize_pads_to_widest_curve() {
        let items = vec![
            CurveSummary { id: "a".into(), knots: vec![100.0], theta: vec![0.0, 5.0, 6.0] },
            CurveSummary { id: "b".into(), knots: vec![100.0, 300.0], theta: vec![0.0, 5.0, 6.0, 7.0] },
        ];
        let fm = featurize_summaries(&items).unwrap();
        assert_eq!(fm.k_m, 2);
        assert_eq!(fm.width(), 6);
        assert_eq!(fm.rows[0], vec![0.0, 5.0, 6.0, 0.0, 100.0, 0.0]);
        assert_eq!(fm.rows[1], vec![0.0, 5.0, 6.0, 7.0, 100.0, 300.0]);
    }

    #[test]
    fn uniform_k_hat_width() {
        let items: Vec<CurveSummary> = (0..3)
            .map(|i| CurveSummary { id: format!("{i}"), knots: vec![1.0, 2.0], theta: vec![0.0; 4] })
            .collect();
        let fm = featurize_summaries(&items).unwrap();
        assert_eq!(fm.width(), 6);
        assert!(fm.rows.iter().all(|r| r.len() == 6));
    }

    #[test]
    fn scaling_rules() {
        let rows = vec![vec![3.0, 0.0], vec![3.0, 2.0]];
        let (scaled, params) = scale_features(&rows).unwrap();
        assert_eq!(scaled[0][0], 0.0);
        assert_eq!(scaled[1][0], 0.0);
        let h = 1.0 / 2f64.sqrt();
        assert!((scaled[0][1] + h).abs() < 1e-15);
        assert!((scaled[1][1] - h).abs() < 1e-15);
        assert_eq!(params.sd[0], 0.0);
        assert!(scale_features(&rows[..1]).is_err());
    }

    #[test]
    fn scaled_columns_are_standard() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64).sin() * 100.0 + 7.0, (i * i) as f64, 1.5])
            .collect();
        let (scaled, _) = scale_features(&rows).unwrap();
        for j in 0..2 {
            let m = scaled.iter().map(|r| r[j]).sum::<f64>() / 40.0;
            let v = scaled.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 39.0;
            assert!(m.abs() <= 1e-12);
            assert!((v.sqrt() - 1.0).abs() <= 1e-12);
        }
        assert!(scaled.iter().all(|r| r[2] == 0.0));
    }
}
