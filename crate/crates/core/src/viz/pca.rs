use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns, each flipped so its largest-magnitude entry is positive.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::<T>::identity(n);
    let two = T::of(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m.row(i)[j] * m.row(i)[j];
                if i == j {
                    diag += x;
                } else {
                    off += x;
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.row(p)[q];
                if apq == T::zero() {
                    continue;
                }
                let app = m.row(p)[p];
                let aqq = m.row(q)[q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.row(k)[p];
                    let akq = m.row(k)[q];
                    m.row_mut(k)[p] = c * akp - s * akq;
                    m.row_mut(k)[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m.row(p)[k];
                    let aqk = m.row(q)[k];
                    m.row_mut(p)[k] = c * apk - s * aqk;
                    m.row_mut(q)[k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.row(k)[p];
                    let vkq = v.row(k)[q];
                    v.row_mut(k)[p] = c * vkp - s * vkq;
                    v.row_mut(k)[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m.row(j)[j]
            .partial_cmp(&m.row(i)[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| m.row(i)[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &src) in order.iter().enumerate() {
        let mut lead = T::zero();
        for k in 0..n {
            if v.row(k)[src].abs() > lead.abs() {
                lead = v.row(k)[src];
            }
        }
        let sign = if lead < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for k in 0..n {
            vectors.row_mut(k)[c] = sign * v.row(k)[src];
        }
    }
    (values, vectors)
}

/// Projection of the mean-centred rows onto the top two principal axes.
pub fn pca2<T: Real>(rows: &Matrix<T>) -> Result<Matrix<T>> {
    let (n, d) = rows.shape();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 3 rows, got {n}"
        )));
    }
    let means = rows.column_means();
    let mut centred = rows.clone();
    let mut scale = T::one();
    for r in 0..n {
        for (x, m) in centred.row_mut(r).iter_mut().zip(&means) {
            scale = scale.max(x.abs());
            *x -= *m;
        }
    }
    if centred.max_abs() <= T::of(1e4) * T::epsilon() * scale {
        return Err(Error::DegenerateData("all rows are identical".into()));
    }
    let cov = centred
        .transpose()
        .matmul(&centred)
        .map(|x| x / T::of_usize(n - 1));
    let (_, vectors) = symmetric_eigen(&cov);
    let mut out = Matrix::zeros(n, 2);
    for r in 0..n {
        for c in 0..d.min(2) {
            out.row_mut(r)[c] = centred
                .row(r)
                .iter()
                .enumerate()
                .map(|(k, x)| *x * vectors.row(k)[c])
                .sum();
        }
    }
    Ok(out)
}
