//! k-means with majority-vote selection of the cluster count, and
//! membership profiles for grouped observations.

pub mod indices;
pub mod kmeans;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use indices::{IndexCurve, ValidityIndex};
pub use kmeans::{distinct_rows, kmeans, KMeansOptions, Partition};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub const DEFAULT_K_MIN: usize = 2;
pub const DEFAULT_K_MAX: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_min: usize,
    pub k_max: usize,
    pub per_index: BTreeMap<ValidityIndex, Option<usize>>,
    pub votes: BTreeMap<usize, usize>,
    pub k_star: usize,
    pub curves: Vec<IndexCurve>,
}

/// Most voted `k`, ties to the smallest; `None` when nobody voted.
pub fn majority(choices: impl IntoIterator<Item = usize>) -> Option<(usize, BTreeMap<usize, usize>)> {
    let mut votes = BTreeMap::new();
    for k in choices {
        *votes.entry(k).or_insert(0) += 1;
    }
    let top = votes.values().copied().max()?;
    let k = votes.iter().find(|(_, &v)| v == top).map(|(&k, _)| k)?;
    Some((k, votes))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MajoritySelection {
    pub selection: KSelection,
    /// Partitions for `k = k_min − 1 ..= k_max + 1`.
    pub ladder: Vec<Partition>,
}

impl MajoritySelection {
    pub fn partition(&self, k: usize) -> Option<&Partition> {
        self.ladder.iter().find(|p| p.k == k)
    }

    pub fn chosen(&self) -> &Partition {
        self.partition(self.selection.k_star).expect("k_star lies in the ladder")
    }
}

/// Runs k-means for every `k` in `k_min − 1 ..= k_max + 1` with the same
/// options, scores `k_min..=k_max` with KL, Hartigan, SD and Ptbiserial and
/// takes the majority. With no vote at all `k_min` is returned.
pub fn select_k_majority(
    points: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    opts: &KMeansOptions,
    exec: Exec,
) -> Result<MajoritySelection> {
    kmeans::check_points(points)?;
    if k_min < 2 || k_max < k_min {
        return Err(Error::InvalidInput(format!(
            "cluster range {k_min}..={k_max} must satisfy 2 <= k_min <= k_max"
        )));
    }
    let distinct = distinct_rows(points);
    if k_max + 1 > distinct {
        return Err(Error::TooManyClusters {
            k: k_max + 1,
            distinct,
        });
    }
    let ladder = par::map_range(exec, k_min - 1..k_max + 2, |k| kmeans(points, k, opts, exec))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let view = indices::Ladder {
        points,
        k_min,
        k_max,
        partitions: &ladder,
    };
    let curves = indices::evaluate_all(&view)?;
    let per_index: BTreeMap<_, _> = curves.iter().map(|c| (c.index, c.choice)).collect();
    let (k_star, votes) = majority(curves.iter().filter_map(|c| c.choice)).unwrap_or((k_min, BTreeMap::new()));
    Ok(MajoritySelection {
        selection: KSelection {
            k_min,
            k_max,
            per_index,
            votes,
            k_star,
            curves,
        },
        ladder,
    })
}

/// Fraction of each entity's observations in every cluster. Labels are
/// 1-based; row `e` corresponds to `groups[e]`.
pub fn membership_profiles(groups: &[Vec<usize>], n_clusters: usize) -> Result<Vec<Vec<f64>>> {
    groups
        .iter()
        .enumerate()
        .map(|(e, labels)| {
            if labels.is_empty() {
                return Err(Error::InvalidInput(format!("entity {} has no observations", e + 1)));
            }
            let mut row = vec![0u64; n_clusters];
            for &l in labels {
                if l == 0 || l > n_clusters {
                    return Err(Error::UnknownLabel {
                        label: l,
                        n_clusters,
                    });
                }
                row[l - 1] += 1;
            }
            let m = labels.len() as f64;
            Ok(row.into_iter().map(|c| c as f64 / m).collect())
        })
        .collect()
}

/// Groups per-observation labels by entity, keeping first-appearance order.
pub fn group_by_entity<'a>(
    entities: impl IntoIterator<Item = (&'a str, usize)>,
) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut order: Vec<String> = Vec::new();
    let mut index: BTreeMap<&'a str, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (e, l) in entities {
        let i = *index.entry(e).or_insert_with(|| {
            order.push(e.to_string());
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[i].push(l);
    }
    (order, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_to_smaller_k() {
        let (k, votes) = majority([4, 3, 4, 3]).unwrap();
        assert_eq!(k, 3);
        assert_eq!(votes[&3], 2);
        assert_eq!(majority(std::iter::empty()), None);
    }

    #[test]
    fn profiles() {
        let p = membership_profiles(&[vec![2, 2, 1, 2, 2], vec![2, 2, 2], vec![3]], 3).unwrap();
        assert_eq!(p[0], vec![0.2, 0.8, 0.0]);
        assert_eq!(p[1], vec![0.0, 1.0, 0.0]);
        assert_eq!(p[2], vec![0.0, 0.0, 1.0]);
        assert!(matches!(
            membership_profiles(&[vec![4]], 3),
            Err(Error::UnknownLabel { label: 4, n_clusters: 3 })
        ));
    }

    #[test]
    fn grouping_keeps_order() {
        let (ids, g) = group_by_entity([("b", 1), ("a", 2), ("b", 3)]);
        assert_eq!(ids, vec!["b", "a"]);
        assert_eq!(g, vec![vec![1, 3], vec![2]]);
    }
}
