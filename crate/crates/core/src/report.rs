//! CSV layouts shared by the pipeline, the benchmark and the command line.
//!
//! List-valued fields (knots, coefficients) are `;`-separated inside one
//! cell so every file stays rectangular. Reals use the shortest
//! representation that parses back to the same value.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{parse_real, read_raw_table, Cell, RawTable, Table};
use crate::segmentation::Segmentation;
use crate::spline::{CurveSummary, FeatureMatrix};
use crate::trend_filter::TrendFit;

pub fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn split(field: &str, row: u64) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(';').map(|v| parse_real(v, row)).collect()
}

fn parse_count(field: &str, name: &str, row: u64) -> Result<usize> {
    field.parse().map_err(|_| Error::Parse {
        row,
        message: format!("{name} `{field}` is not a nonnegative integer"),
    })
}

pub fn fits_table<'a>(fits: impl IntoIterator<Item = (&'a str, &'a [f64], &'a TrendFit)>) -> Table {
    let mut t = Table::new(["curve_id", "lambda", "rss", "kkt_residual", "underfilled", "candidates", "beta"]);
    for (id, x, f) in fits {
        let cand: Vec<f64> = f.candidate_indices.iter().map(|&i| x[i]).collect();
        t.rows.push(vec![
            Cell::from(id),
            Cell::Real(f.lambda),
            Cell::Real(f.rss),
            Cell::Real(f.kkt_residual),
            Cell::from(f.underfilled.to_string()),
            Cell::from(join(&cand)),
            Cell::from(join(&f.beta)),
        ]);
    }
    t
}

pub const SEGMENT_HEADER: [&str; 8] =
    ["curve_id", "k_hat", "knots", "theta", "rss", "lambda", "underfilled", "candidates"];

pub fn segments_table(segs: &[Segmentation]) -> Table {
    let mut t = Table::new(SEGMENT_HEADER);
    for s in segs {
        t.rows.push(vec![
            Cell::from(s.curve_id.as_str()),
            Cell::from(s.k_hat),
            Cell::from(join(&s.knots)),
            Cell::from(join(&s.theta)),
            Cell::Real(s.rss),
            Cell::Real(s.lambda),
            Cell::from(s.underfilled.to_string()),
            Cell::from(join(&s.candidates)),
        ]);
    }
    t
}

/// Reads the summaries back from a segments file.
pub fn read_segments(path: impl AsRef<Path>) -> Result<Vec<CurveSummary>> {
    let raw = read_raw_table(path)?;
    let (id, k, knots, theta) = (
        raw.require_column("curve_id")?,
        raw.require_column("k_hat")?,
        raw.require_column("knots")?,
        raw.require_column("theta")?,
    );
    let mut out = Vec::with_capacity(raw.rows.len());
    for (line, rec) in &raw.rows {
        let cell = |j: usize| field(rec, j, *line);
        let k_hat = parse_count(cell(k)?, "k_hat", *line)?;
        let s = CurveSummary {
            id: cell(id)?.to_string(),
            knots: split(cell(knots)?, *line)?,
            theta: split(cell(theta)?, *line)?,
        };
        if s.knots.len() != k_hat || s.theta.len() != k_hat + 2 {
            return Err(Error::Parse {
                row: *line,
                message: format!("k_hat {k_hat} does not match {} knots / {} coefficients", s.knots.len(), s.theta.len()),
            });
        }
        out.push(s);
    }
    Ok(out)
}

fn field(rec: &[String], j: usize, line: u64) -> Result<&str> {
    rec.get(j).map(String::as_str).ok_or_else(|| Error::Parse {
        row: line,
        message: format!("expected at least {} fields, got {}", j + 1, rec.len()),
    })
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let raw = read_raw_table(path)?;
    features_from_raw(&raw)
}

fn features_from_raw(raw: &RawTable) -> Result<FeatureMatrix> {
    let id = raw.require_column("curve_id")?;
    let k = raw.require_column("k_hat")?;
    let width = raw.header.len() - 2;
    if width < 2 || !width.is_multiple_of(2) {
        return Err(Error::Parse {
            row: 1,
            message: format!("{width} feature columns is not of the form 2·K_M + 2"),
        });
    }
    let k_m = (width - 2) / 2;
    let names = FeatureMatrix::column_names(k_m);
    let cols: Vec<usize> = names.iter().map(|n| raw.require_column(n)).collect::<Result<_>>()?;
    let mut m = FeatureMatrix {
        ids: Vec::new(),
        k_hat: Vec::new(),
        k_m,
        rows: Vec::new(),
    };
    for (line, rec) in &raw.rows {
        m.ids.push(field(rec, id, *line)?.to_string());
        m.k_hat.push(parse_count(field(rec, k, *line)?, "k_hat", *line)?);
        m.rows.push(
            cols.iter()
                .map(|&c| parse_real(field(rec, c, *line)?, *line))
                .collect::<Result<_>>()?,
        );
    }
    if m.rows.is_empty() {
        return Err(Error::InvalidInput("feature file has no rows".into()));
    }
    Ok(m)
}

/// `curve_id,label` with 1-based labels.
pub fn labels_table(ids: &[String], labels: &[usize]) -> Table {
    let mut t = Table::new(["curve_id", "label"]);
    for (id, l) in ids.iter().zip(labels) {
        t.rows.push(vec![Cell::from(id.as_str()), Cell::from(*l)]);
    }
    t
}

/// Reads `curve_id` and a label column (`label` by default).
pub fn read_labels(path: impl AsRef<Path>, column: Option<&str>) -> Result<(Vec<String>, Vec<usize>)> {
    let raw = read_raw_table(path)?;
    let id = raw.require_column("curve_id")?;
    let col = raw.require_column(column.unwrap_or("label"))?;
    let mut ids = Vec::with_capacity(raw.rows.len());
    let mut labels = Vec::with_capacity(raw.rows.len());
    for (line, rec) in &raw.rows {
        ids.push(field(rec, id, *line)?.to_string());
        labels.push(parse_count(field(rec, col, *line)?, "label", *line)?);
    }
    Ok((ids, labels))
}

/// Aligns two labelings by curve id; every id must appear in both.
pub fn align_labels(a: (&[String], &[usize]), b: (&[String], &[usize])) -> Result<(Vec<usize>, Vec<usize>)> {
    let index: std::collections::HashMap<&str, usize> =
        b.0.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if a.0.len() != b.0.len() {
        return Err(Error::InvalidInput(format!(
            "label files have {} and {} rows",
            a.0.len(),
            b.0.len()
        )));
    }
    let mut q = Vec::with_capacity(a.0.len());
    for id in a.0 {
        let j = index
            .get(id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("curve `{id}` missing from second labeling")))?;
        q.push(b.1[*j]);
    }
    Ok((a.1.to_vec(), q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_table;

    #[test]
    fn segments_round_trip() {
        let seg = Segmentation {
            curve_id: "a".into(),
            knots: vec![100.0, 230.0],
            k_hat: 2,
            theta: vec![0.1, 1.0 / 3.0, 7.0, -2.5],
            rss: 1.25,
            cost_by_k: vec![],
            candidates: vec![100.0, 230.0, 300.0],
            lambda: 0.5,
            underfilled: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_table(&segments_table(&[seg.clone()]), &p).unwrap();
        assert_eq!(read_segments(&p).unwrap(), vec![seg.summary()]);
    }

    #[test]
    fn features_round_trip() {
        let m = FeatureMatrix {
            ids: vec!["a".into(), "b".into()],
            k_hat: vec![1, 0],
            k_m: 1,
            rows: vec![vec![1.0, 2.0, 3.0, 50.0], vec![0.5, 0.25, 0.0, 0.0]],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_table(&m.to_table(), &p).unwrap();
        assert_eq!(read_features(&p).unwrap(), m);
    }

    #[test]
    fn align_by_id() {
        let ids_a = vec!["x".to_string(), "y".to_string()];
        let ids_b = vec!["y".to_string(), "x".to_string()];
        let (p, q) = align_labels((&ids_a, &[1, 2]), (&ids_b, &[5, 6])).unwrap();
        assert_eq!((p, q), (vec![1, 2], vec![6, 5]));
    }
}
