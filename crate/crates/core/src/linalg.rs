//! Dense symmetric eigendecomposition with a reproducible ordering and sign
//! convention, plus subspace utilities (principal angles, orthonormality).

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs sorted by non-increasing eigenvalue.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    /// First `k` eigenvectors as a `d × k` matrix.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.vectors.columns(0, k).into_owned()
    }

    /// Last `k` eigenvectors, smallest eigenvalue first.
    pub fn trailing(&self, k: usize) -> DMatrix<f64> {
        let n = self.vectors.ncols();
        let idx: Vec<usize> = (n - k..n).rev().collect();
        self.vectors.select_columns(&idx)
    }
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come out non-increasing. Exact ties keep the solver's order.
/// Each eigenvector is signed so that its entry of largest magnitude is
/// positive (first such entry on ties).
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> SortedEigen {
    assert!(m.is_square(), "eigendecomposition needs a square matrix");
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    fix_signs(&mut vectors);
    SortedEigen { values, vectors }
}

/// Flips columns so the entry of largest magnitude is positive.
pub fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Orthonormal basis for the column span of `m`, preserving the nested
/// spans of its leading columns, sign-fixed.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, k) = m.shape();
    let mut q = DMatrix::zeros(d, k);
    for j in 0..k {
        let mut v = m.column(j).into_owned();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&v);
                v.axpy(-c, &qi, 1.0);
            }
        }
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        q.set_column(j, &v);
    }
    fix_signs(&mut q);
    q
}

/// Largest absolute entry of `WᵀW − I`.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let g = w.transpose() * w;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Principal angles (radians, ascending) between the spans of two matrices
/// with orthonormal columns.
///
/// Small angles come from the sines of `(I − AAᵀ)B` and large ones from the
/// cosines of `AᵀB`, which keeps both ends accurate.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.nrows(), b.nrows(), "principal angles need equal ambient dimension");
    let (a, b) = if a.ncols() >= b.ncols() { (a, b) } else { (b, a) };
    let m = b.ncols();
    if m == 0 {
        return Vec::new();
    }
    let mut cos = singular_values(&(a.transpose() * b));
    cos.sort_by(|x, y| y.total_cmp(x));
    let resid = b - a * (a.transpose() * b);
    let mut sin = singular_values(&resid);
    sin.sort_by(|x, y| x.total_cmp(y));
    (0..m)
        .map(|i| {
            let c = cos.get(i).copied().unwrap_or(0.0).min(1.0);
            let s = sin.get(i).copied().unwrap_or(0.0).min(1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect()
}

/// Largest principal angle, zero iff the spans coincide (equal dimension).
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b).into_iter().fold(0.0, f64::max)
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![0.0; m.ncols()];
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.resize(m.ncols(), 0.0);
    sv
}

/// `tr(WᵀCW)`.
pub fn trace_form(w: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    (w.transpose() * c * w).trace()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_sorted_and_signed() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, -2.0]));
        let e = sym_eigen_desc(&m);
        assert_eq!(e.values, vec![3.0, 1.0, -2.0]);
        assert_eq!(e.vectors.column(0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(e.trailing(1).column(0).as_slice(), &[0.0, 0.0, 1.0]);
        for c in e.vectors.column_iter() {
            assert!(c.iter().cloned().fold(f64::MIN, f64::max) > 0.0);
        }
    }

    #[test]
    fn angles_between_planes() {
        let e = DMatrix::<f64>::identity(3, 3);
        let a = e.columns(0, 2).into_owned();
        let t = 0.3f64;
        let b = DMatrix::from_column_slice(3, 1, &[t.cos(), 0.0, t.sin()]);
        let ang = principal_angles(&a, &b);
        assert_eq!(ang.len(), 1);
        assert!((ang[0] - t).abs() < 1e-14);
        assert!(max_principal_angle(&a, &a) < 1e-15);
        let c = e.columns(2, 1).into_owned();
        assert!((max_principal_angle(&a, &c) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn tiny_angles_resolved() {
        let t = 1e-9f64;
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
        assert!((max_principal_angle(&a, &b) - t).abs() < 1e-20);
    }

    #[test]
    fn orthonormalize_keeps_leading_span() {
        let m = DMatrix::from_column_slice(3, 2, &[2.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let q = orthonormalize(&m);
        assert!(orthonormality_error(&q) < 1e-15);
        assert_eq!(q.column(0).as_slice(), &[1.0, 0.0, 0.0]);
        assert!((q[(1, 1)] - 1.0).abs() < 1e-15);
    }
}
