//! Reference implementations used only by tests. None of these call into the
//! library's eigen or Gram-Schmidt code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use tangent_subspace::LabeledEmbeddingSet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Orthonormal `d × k` frame from the QR factorization of a Gaussian matrix.
pub fn qr_frame(rng: &mut ChaCha8Rng, d: usize, k: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, d, k);
    g.qr().q().columns(0, k).into_owned()
}

/// Haar-ish random rotation (QR with sign-corrected diagonal).
pub fn rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, d, d).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvalues
/// descending, eigenvectors as columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + a.norm()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Largest absolute eigenvalue of a symmetric matrix via Jacobi.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = jacobi_eigen(m);
    vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `sin` of the largest principal angle between the column spans of two
/// orthonormal frames of equal width: `‖AAᵀ − BBᵀ‖₂`.
pub fn sin_max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = a * a.transpose() - b * b.transpose();
    spectral_norm_sym(&diff)
}

/// Contrast matrix by explicit per-entry double loops.
/// `classes[j]` is a list of column vectors; weights are `1/n_j` when
/// `balanced`.
pub fn brute_contrast(classes: &[Vec<DVector<f64>>], target: usize, lambda: f64, balanced: bool) -> DMatrix<f64> {
    let d = classes[0][0].len();
    let mut c = DMatrix::zeros(d, d);
    for (j, cols) in classes.iter().enumerate() {
        let w = if balanced { 1.0 / cols.len() as f64 } else { 1.0 };
        let coef = if j == target { (1.0 - lambda) * w } else { -lambda * w };
        for r in 0..d {
            for s in 0..d {
                let mut acc = 0.0;
                for x in cols {
                    acc += x[r] * x[s];
                }
                c[(r, s)] += coef * acc;
            }
        }
    }
    c
}

/// Log map written from the textbook arccos formula.
pub fn log_ref(p: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    let c = p.dot(z).clamp(-1.0, 1.0);
    let u = z - p * c;
    let n = u.norm();
    if n == 0.0 {
        return DVector::zeros(p.len());
    }
    u * (c.acos() / n)
}

pub fn exp_ref(p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let t = v.norm();
    if t == 0.0 {
        return p.clone();
    }
    p * t.cos() + v * (t.sin() / t)
}

pub fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

/// Gaussian cloud with per-axis scales, normalized onto the sphere.
pub fn anisotropic_cloud(rng: &mut ChaCha8Rng, center: &DVector<f64>, scales: &[f64], n: usize) -> DMatrix<f64> {
    let d = center.len();
    let mut m = DMatrix::zeros(d, n);
    for j in 0..n {
        let mut x = center.clone();
        for i in 0..d {
            x[i] += scales[i] * rng.sample::<f64, _>(StandardNormal);
        }
        let nrm = x.norm();
        m.set_column(j, &(x / nrm));
    }
    m
}

/// Fréchet mean by plain fixed-point iteration on the textbook maps.
pub fn mean_ref(cols: &[DVector<f64>]) -> DVector<f64> {
    let mut mu = cols.iter().fold(DVector::zeros(cols[0].len()), |acc, c| acc + c);
    mu /= mu.norm();
    for _ in 0..1000 {
        let mut step = DVector::zeros(mu.len());
        for c in cols {
            step += log_ref(&mu, c);
        }
        step /= cols.len() as f64;
        mu = exp_ref(&mu, &step);
        mu /= mu.norm();
        if step.norm() < 1e-14 {
            break;
        }
    }
    mu
}

/// `(1/n) Σ y yᵀ` over the given columns.
pub fn moment(cols: &[DVector<f64>]) -> DMatrix<f64> {
    let d = cols[0].len();
    let mut m = DMatrix::zeros(d, d);
    for c in cols {
        m += c * c.transpose();
    }
    m / cols.len() as f64
}

pub fn leading(vectors: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    vectors.columns(0, k).into_owned()
}

pub fn trailing(vectors: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = vectors.ncols();
    vectors.columns(n - k, k).into_owned()
}

/// Three anisotropic clouds `k0, k1, k2` around nearby centers; class `c`
/// has `n + c` points.
pub fn cloud_set(seed: u64, d: usize, n: usize) -> LabeledEmbeddingSet {
    let mut g = rng(seed);
    let base = unit(&mut g, d);
    let parts: Vec<(String, DMatrix<f64>)> = (0..3)
        .map(|c| {
            let center = &base + unit(&mut g, d) * 0.3;
            let scales: Vec<f64> = (0..d).map(|i| 0.05 + 0.25 * ((i * 7 + c * 3) % d) as f64 / d as f64).collect();
            (format!("k{c}"), anisotropic_cloud(&mut g, &center, &scales, n + c))
        })
        .collect();
    LabeledEmbeddingSet::from_class_matrices(parts).unwrap()
}
