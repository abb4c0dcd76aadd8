use crate::matrix::Matrix;
use crate::scalar::Real;

/// Indices of the `k` rows of `data` closest to `query` under `dist`, nearest
/// first, ties broken by row index. Row `skip` is never returned.
pub fn nearest<T, D>(
    data: &Matrix<T>,
    query: &[T],
    k: usize,
    skip: Option<usize>,
    dist: D,
) -> Vec<usize>
where
    T: Real,
    D: Fn(&[T], &[T]) -> T,
{
    let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
    if k == 0 {
        return Vec::new();
    }
    for (i, row) in data.iter_rows().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = dist(query, row);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        // earlier rows win ties, so insert after every equal distance
        let pos = best.partition_point(|&(e, _)| e <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// `k` nearest neighbours of every row within `data`, excluding the row itself.
pub fn neighbor_table<T, D>(data: &Matrix<T>, k: usize, dist: D) -> Vec<Vec<usize>>
where
    T: Real,
    D: Fn(&[T], &[T]) -> T + Copy,
{
    (0..data.rows())
        .map(|i| nearest(data, data.row(i), k, Some(i), dist))
        .collect()
}

/// Splits `n` across `weights` in proportion, flooring and then handing the
/// remaining units to the largest fractional parts (lower index on ties).
/// All-zero weights split evenly.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let total: f64 = weights.iter().sum();
    let share: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| w / total * n as f64).collect()
    } else {
        vec![n as f64 / weights.len() as f64; weights.len()]
    };
    let mut out: Vec<usize> = share.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (share[a] - share[a].floor(), share[b] - share[b].floor());
        fb.partial_cmp(&fa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::squared_distance;
    use proptest::prelude::*;

    #[test]
    fn ties_go_to_lower_index() {
        let m = Matrix::from_vec(4, 1, vec![0.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(
            nearest(&m, &[0.0], 2, Some(0), squared_distance),
            vec![1, 2]
        );
        assert_eq!(
            nearest(&m, &[1.0], 3, None, squared_distance),
            vec![1, 3, 0]
        );
    }

    #[test]
    fn quotas_sum_exactly() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.0, 0.8], 5), vec![1, 0, 4]);
    }

    proptest! {
        #[test]
        fn nearest_matches_full_sort(vals in prop::collection::vec(-5i32..5, 1..40), q in -5i32..5, k in 1usize..10) {
            let m = Matrix::from_vec(vals.len(), 1, vals.iter().map(|&v| f64::from(v)).collect()).unwrap();
            let q = [f64::from(q)];
            let mut all: Vec<usize> = (0..vals.len()).collect();
            all.sort_by(|&a, &b| squared_distance(m.row(a), &q).partial_cmp(&squared_distance(m.row(b), &q)).unwrap().then(a.cmp(&b)));
            all.truncate(k);
            prop_assert_eq!(nearest(&m, &q, k, None, squared_distance), all);
        }

        #[test]
        fn largest_remainder_sums(ws in prop::collection::vec(0.0f64..10.0, 1..20), n in 0usize..500) {
            let q = largest_remainder(&ws, n);
            prop_assert_eq!(q.iter().sum::<usize>(), n);
            let total: f64 = ws.iter().sum();
            if total > 0.0 {
                for (qi, w) in q.iter().zip(&ws) {
                    prop_assert!((*qi as f64 - w / total * n as f64).abs() < 1.0);
                }
            }
        }
    }
}
