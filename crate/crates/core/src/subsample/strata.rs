//! Strata for stratified sub-sampling, built by greedy splitting of the sorted
//! per-observation gradients at a reference point.
//!
//! The objective is `Σ_k |S_k| · diam(S_k)`. Each greedy step splits the group
//! whose best split lowers the objective the most; ties go to the earliest group
//! (in sorted order) and then to the smallest split index.

use std::ops::Range;

use crate::error::{Error, Result};

/// `r · (max − min)` of a group of `r` values.
pub fn f_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    values.len() as f64 * (hi - lo)
}

/// Score after splitting a sorted group into its first `k` values and the rest.
pub fn f_split_score(sorted: &[f64], k: usize) -> f64 {
    let r = sorted.len();
    debug_assert!(k >= 1 && k < r);
    let left = k as f64 * (sorted[k - 1] - sorted[0]);
    let right = (r - k) as f64 * (sorted[r - 1] - sorted[k]);
    left + right
}

fn best_split(sorted: &[f64]) -> Option<(usize, f64)> {
    let r = sorted.len();
    if r < 2 {
        return None;
    }
    let mut best = (1, f_split_score(sorted, 1));
    for k in 2..r {
        let s = f_split_score(sorted, k);
        if s < best.1 {
            best = (k, s);
        }
    }
    Some(best)
}

/// Partitions sorted values into `m` contiguous groups with `m − 1` greedy splits.
/// Returns position ranges into `sorted`, in order.
pub fn greedy_clustering(sorted: &[f64], m: usize) -> Result<Vec<Range<usize>>> {
    let n = sorted.len();
    if m == 0 || m > n {
        return Err(Error::usage(format!("strata count {m} must be in 1..={n}")));
    }
    if sorted.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::usage("greedy clustering requires values sorted ascending"));
    }

    struct Group {
        range: Range<usize>,
        split: Option<(usize, f64)>,
        gain: f64,
    }
    let group = |range: Range<usize>| {
        let vals = &sorted[range.clone()];
        let split = best_split(vals);
        let gain = split.map_or(f64::INFINITY, |(_, s)| s - f_score(vals));
        Group { range, split, gain }
    };

    let mut groups = vec![group(0..n)];
    for _ in 1..m {
        let mut pick = 0;
        for (idx, g) in groups.iter().enumerate().skip(1) {
            if g.gain < groups[pick].gain {
                pick = idx;
            }
        }
        let chosen = &groups[pick];
        let (k, _) = chosen
            .split
            .expect("m <= n guarantees a splittable group remains");
        let start = chosen.range.start;
        let end = chosen.range.end;
        let left = group(start..start + k);
        let right = group(start + k..end);
        groups.splice(pick..=pick, [left, right]);
    }
    Ok(groups.into_iter().map(|g| g.range).collect())
}

/// One dimension's partition of `{0, …, n−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strata {
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl Strata {
    /// Builds strata from per-observation values (e.g. `∂_i U^j(ξ*)` for all `j`).
    /// Observations are ordered by value, ties by index.
    pub fn from_values(values: &[f64], m: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("stratification values must be finite"));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let sorted: Vec<f64> = order.iter().map(|&j| values[j]).collect();
        let ranges = greedy_clustering(&sorted, m)?;
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        for r in &ranges {
            offsets.push(r.end);
        }
        Ok(Strata {
            offsets,
            members: order,
        })
    }

    /// Explicit partition; every index in `0..n` must appear exactly once.
    pub fn from_groups(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut offsets = vec![0];
        let mut members = Vec::with_capacity(n);
        for g in groups {
            if g.is_empty() {
                return Err(Error::usage("strata must be nonempty"));
            }
            for j in g {
                if j >= n || seen[j] {
                    return Err(Error::usage(format!("index {j} is out of range or repeated in strata")));
                }
                seen[j] = true;
                members.push(j);
            }
            offsets.push(members.len());
        }
        if members.len() != n {
            return Err(Error::usage("strata do not cover every observation"));
        }
        Ok(Strata { offsets, members })
    }

    pub fn count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn stratum(&self, k: usize) -> &[usize] {
        &self.members[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        (0..self.count()).map(|k| self.stratum(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_of_pair() {
        assert_eq!(f_score(&[0.0, 1.0]), 2.0);
        assert_eq!(f_score(&[4.0]), 0.0);
    }

    #[test]
    fn four_point_split_scores() {
        let x = [0.0, 0.1, 5.0, 5.1];
        let scores: Vec<f64> = (1..4).map(|k| f_split_score(&x, k)).collect();
        // k = 3 leaves {0, 0.1, 5} | {5.1}: 3·5 + 1·0
        let expect = [15.0, 0.4, 15.0];
        for (s, e) in scores.iter().zip(expect) {
            assert!((s - e).abs() < 1e-12, "{scores:?}");
        }
        assert_eq!(greedy_clustering(&x, 2).unwrap(), vec![0..2, 2..4]);
    }

    #[test]
    fn equal_values_split_left_to_right() {
        let x = [1.0; 5];
        assert_eq!(greedy_clustering(&x, 3).unwrap(), vec![0..1, 1..2, 2..5]);
    }

    #[test]
    fn single_stratum_and_singletons() {
        let x = [0.0, 1.0, 2.0];
        assert_eq!(greedy_clustering(&x, 1).unwrap(), vec![0..3]);
        assert_eq!(greedy_clustering(&x, 3).unwrap(), vec![0..1, 1..2, 2..3]);
    }

    #[test]
    fn too_many_strata() {
        assert!(matches!(greedy_clustering(&[1.0, 2.0], 3), Err(Error::Usage(_))));
        assert!(greedy_clustering(&[2.0, 1.0], 1).is_err());
    }

    #[test]
    fn strata_from_unsorted_values_partition_indices() {
        let s = Strata::from_values(&[5.1, 0.0, 5.0, 0.1], 2).unwrap();
        assert_eq!(s.count(), 2);
        assert_eq!(s.stratum(0), &[1, 3]);
        assert_eq!(s.stratum(1), &[2, 0]);
    }

    #[test]
    fn explicit_groups_validated() {
        assert!(Strata::from_groups(3, vec![vec![0, 1], vec![2]]).is_ok());
        assert!(Strata::from_groups(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Strata::from_groups(3, vec![vec![0, 1]]).is_err());
    }
}
