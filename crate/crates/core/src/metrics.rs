//! Distances between series or embeddings, and the 1-NN classifier.

use rayon::prelude::*;

use crate::error::{Result, WartemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    SquaredEuclidean,
    Euclidean,
    /// Dynamic time warping with squared local cost and an optional
    /// Sakoe-Chiba half-width.
    Dtw { band: Option<usize> },
}

impl DistanceKind {
    pub fn name(&self) -> String {
        match self {
            Self::SquaredEuclidean => "sqeuclidean".into(),
            Self::Euclidean => "euclidean".into(),
            Self::Dtw { band: None } => "dtw".into(),
            Self::Dtw { band: Some(b) } => format!("dtw[band={b}]"),
        }
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(WartemError::Argument(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    squared_euclidean(a, b).map(f64::sqrt)
}

/// DTW distance: the minimum, over monotone, contiguous, boundary-anchored
/// alignments, of the summed squared differences. No final square root.
///
/// `band` restricts admissible cells to `|i - j| <= band`.
pub fn dtw(a: &[f64], b: &[f64], band: Option<usize>) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(WartemError::Argument("dtw needs non-empty series".into()));
    }
    let band = match band {
        Some(w) if w >= n.max(m) => {
            return Err(WartemError::Argument(format!(
                "dtw band {w} must be below the series length {}",
                n.max(m)
            )))
        }
        Some(w) if n.abs_diff(m) > w => {
            return Err(WartemError::Argument(format!(
                "dtw band {w} cannot align lengths {n} and {m}"
            )))
        }
        Some(w) => w,
        None => n.max(m),
    };

    // Two rolling rows over b, with a sentinel column at index 0.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let lo = i.saturating_sub(band).max(1);
        let hi = (i + band).min(m);
        for j in lo..=hi {
            let d = a[i - 1] - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = d * d + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

pub fn distance(a: &[f64], b: &[f64], kind: DistanceKind) -> Result<f64> {
    match kind {
        DistanceKind::SquaredEuclidean => squared_euclidean(a, b),
        DistanceKind::Euclidean => euclidean(a, b),
        DistanceKind::Dtw { band } => dtw(a, b, band),
    }
}

/// Row-major `queries.len() x refs.len()` matrix of distances. Rows are
/// computed in parallel; each entry is an independent scalar computation,
/// so the result does not depend on the thread count.
pub fn distance_matrix<Q, R>(queries: &[Q], refs: &[R], kind: DistanceKind) -> Result<Vec<Vec<f64>>>
where
    Q: AsRef<[f64]> + Sync,
    R: AsRef<[f64]> + Sync,
{
    queries
        .par_iter()
        .map(|q| {
            refs.iter()
                .map(|r| distance(q.as_ref(), r.as_ref(), kind))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnResult {
    pub predicted_labels: Vec<usize>,
    /// Fraction of correct predictions in `[0, 1]`.
    pub accuracy: f64,
    pub distance_evaluations: usize,
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &d) in row.iter().enumerate().skip(1) {
        if d < row[best] {
            best = j;
        }
    }
    best
}

/// Labels each test vector with the label of its nearest training vector.
pub fn one_nn_accuracy<T, Q>(
    train: &[T],
    train_labels: &[usize],
    test: &[Q],
    test_labels: &[usize],
    kind: DistanceKind,
) -> Result<NnResult>
where
    T: AsRef<[f64]> + Sync,
    Q: AsRef<[f64]> + Sync,
{
    if train.is_empty() {
        return Err(WartemError::Argument("1-NN needs a non-empty training set".into()));
    }
    if train.len() != train_labels.len() || test.len() != test_labels.len() {
        return Err(WartemError::Argument("vectors and labels differ in count".into()));
    }
    let dist = distance_matrix(test, train, kind)?;
    let predicted_labels: Vec<usize> = dist.iter().map(|row| train_labels[argmin(row)]).collect();
    let correct = predicted_labels
        .iter()
        .zip(test_labels)
        .filter(|(p, t)| p == t)
        .count();
    let accuracy = if test.is_empty() {
        0.0
    } else {
        correct as f64 / test.len() as f64
    };
    Ok(NnResult {
        predicted_labels,
        accuracy,
        distance_evaluations: train.len() * test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum over warping paths: from (0,0) to (n-1,m-1) with
    /// steps (1,0), (0,1), (1,1).
    fn brute_force_dtw(a: &[f64], b: &[f64]) -> f64 {
        fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
            let acc = acc + (a[i] - b[j]).powi(2);
            if i + 1 == a.len() && j + 1 == b.len() {
                *best = best.min(acc);
                return;
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, acc, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, acc, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(a, b, 0, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn squared_euclidean_values() {
        assert_eq!(squared_euclidean(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(squared_euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(squared_euclidean(&[1.0; 3], &[2.0; 3]).unwrap(), 3.0);
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(squared_euclidean(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dtw_values() {
        let t = [0.5, -1.0, 3.0, 2.0];
        assert_eq!(dtw(&t, &t, None).unwrap(), 0.0);
        assert_eq!(dtw(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None).unwrap(), 0.0);
        assert_eq!(brute_force_dtw(&[0.0, 1.0, 2.0], &[0.0, 2.0]), 1.0);
        assert_eq!(dtw(&[0.0, 1.0, 2.0], &[0.0, 2.0], None).unwrap(), 1.0);
    }

    #[test]
    fn dtw_band_errors() {
        assert!(dtw(&[1.0; 4], &[1.0; 4], Some(4)).is_err());
        assert!(dtw(&[1.0; 6], &[1.0; 3], Some(2)).is_err());
        assert_eq!(dtw(&[1.0; 6], &[1.0; 3], Some(3)).unwrap(), 0.0);
        assert!(dtw(&[], &[1.0], None).is_err());
    }

    #[test]
    fn band_zero_is_squared_euclidean() {
        let a = [1.0, 4.0, 2.0, 0.0];
        let b = [0.0, 1.0, 5.0, 2.0];
        assert_eq!(dtw(&a, &b, Some(0)).unwrap(), squared_euclidean(&a, &b).unwrap());
    }

    #[test]
    fn matrix_matches_scalar_calls() {
        let q = vec![vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 1.0, 0.0, -1.0]];
        let r = vec![vec![0.0, 1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0, 0.0], vec![0.0; 4]];
        for kind in [
            DistanceKind::SquaredEuclidean,
            DistanceKind::Euclidean,
            DistanceKind::Dtw { band: None },
            DistanceKind::Dtw { band: Some(1) },
        ] {
            let d = distance_matrix(&q, &r, kind).unwrap();
            for (i, row) in d.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert_eq!(v.to_bits(), distance(&q[i], &r[j], kind).unwrap().to_bits());
                }
            }
        }
        let self_d = distance_matrix(&q, &q, DistanceKind::SquaredEuclidean).unwrap();
        assert_eq!(self_d[0][0], 0.0);
        assert_eq!(self_d[1][1], 0.0);
        let one = distance_matrix(&q[..1], &r[1..2], DistanceKind::SquaredEuclidean).unwrap();
        assert_eq!(one, vec![vec![20.0]]);
    }

    #[test]
    fn one_nn_cases() {
        let train = vec![vec![0.0], vec![10.0]];
        let res = one_nn_accuracy(&train, &[0, 1], &[vec![1.0], vec![9.0]], &[0, 1], DistanceKind::SquaredEuclidean).unwrap();
        assert_eq!(res.accuracy, 1.0);
        assert_eq!(res.distance_evaluations, 4);

        // Equidistant: lowest train index wins.
        let res = one_nn_accuracy(&train, &[1, 0], &[vec![5.0]], &[1], DistanceKind::Euclidean).unwrap();
        assert_eq!(res.predicted_labels, vec![1]);

        let pts = vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 4.0]];
        let res = one_nn_accuracy(&pts, &[0, 1, 2], &pts, &[0, 1, 2], DistanceKind::SquaredEuclidean).unwrap();
        assert_eq!(res.accuracy, 1.0);

        let empty: Vec<Vec<f64>> = vec![];
        assert!(one_nn_accuracy(&empty, &[], &pts, &[0, 1, 2], DistanceKind::Euclidean).is_err());
    }

    fn small_series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-4i32..=4, 1..=6).prop_map(|v| v.into_iter().map(f64::from).collect())
    }

    proptest! {
        #[test]
        fn dtw_matches_enumeration(a in small_series(), b in small_series()) {
            prop_assert_eq!(dtw(&a, &b, None).unwrap(), brute_force_dtw(&a, &b));
        }

        #[test]
        fn dtw_symmetric_and_bounded(pair in (4usize..20).prop_flat_map(|m| (
            prop::collection::vec(-10.0f64..10.0, m),
            prop::collection::vec(-10.0f64..10.0, m),
        ))) {
            let (a, b) = pair;
            let ab = dtw(&a, &b, None).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, dtw(&b, &a, None).unwrap());
            prop_assert!(ab <= squared_euclidean(&a, &b).unwrap());
            prop_assert_eq!(ab, dtw(&a, &b, Some(a.len() - 1)).unwrap());
        }

        #[test]
        fn nn_invariant_under_square_root(
            train in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..10),
            test in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..10),
        ) {
            let train_labels: Vec<usize> = (0..train.len()).collect();
            let test_labels = vec![0; test.len()];
            let sq = one_nn_accuracy(&train, &train_labels, &test, &test_labels, DistanceKind::SquaredEuclidean).unwrap();
            let eu = one_nn_accuracy(&train, &train_labels, &test, &test_labels, DistanceKind::Euclidean).unwrap();
            prop_assert_eq!(sq.predicted_labels, eu.predicted_labels);
        }
    }
}
