//! Exact primitives on the unit hypersphere S^{d-1}: logarithmic and
//! exponential maps, geodesic distance and the intrinsic (Fréchet) mean.
//!
//! ```text
//! Log_p(z) = θ · r / ‖r‖,   r = (I − ppᵀ) z,   θ = angle(p, z)
//! Exp_p(v) = cos(‖v‖) p + sin(‖v‖) v / ‖v‖
//! ```
//!
//! The angle is evaluated as `atan2(‖r‖, p·z)`, which equals
//! `arccos(clamp(p·z, −1, 1))` but keeps full precision for nearly
//! coincident points.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Inputs whose norm is further than this from 1 are rescaled on construction.
const RENORMALIZE_SLACK: f64 = 1e-14;
/// Norms below this cannot be normalized.
const MIN_NORM: f64 = 1e-12;
/// `p·z` at or above `1 − IDENTITY_GAP` is treated as `z = p`.
pub const IDENTITY_GAP: f64 = 1e-12;
/// `p·z` at or below `−1 + ANTIPODAL_GAP` has no logarithm.
pub const ANTIPODAL_GAP: f64 = 1e-9;
/// Exp rejects tangent vectors with norm at or above `π − EXP_MARGIN`.
pub const EXP_MARGIN: f64 = 1e-9;
/// Tangency tolerance relative to the tangent vector norm.
pub const TANGENT_TOL: f64 = 1e-8;

/// A point on S^{d-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    /// Normalizes `coords` onto the sphere. Vectors already unit-norm to
    /// within rounding are kept bit-for-bit.
    pub fn new(mut coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        normalize_in_place(coords.as_mut_slice())?;
        Ok(UnitVector(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// The i-th standard basis vector in `d` dimensions.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::DimensionMismatch { expected: d, actual: i + 1 });
        }
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        Self::new(v)
    }

    pub(crate) fn new_unchecked(coords: DVector<f64>) -> Self {
        UnitVector(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.0.dot(&other.0))
    }
}

/// An element of the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    vec: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: UnitVector, vec: DVector<f64>) -> Result<Self> {
        check_dim(base.dim(), vec.len())?;
        let along = vec.dot(base.as_vector()).abs();
        if along > TANGENT_TOL * vec.norm() {
            return Err(Error::NotTangent(along));
        }
        Ok(TangentVector { base, vec })
    }

    /// Zero vector at `base`.
    pub fn zero(base: UnitVector) -> Self {
        let vec = DVector::zeros(base.dim());
        TangentVector { base, vec }
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn into_parts(self) -> (UnitVector, DVector<f64>) {
        (self.base, self.vec)
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize_in_place(v: &mut [f64]) -> Result<()> {
    let n = norm(v);
    if !n.is_finite() || n < MIN_NORM {
        return Err(Error::ZeroVector(n));
    }
    if (n - 1.0).abs() > RENORMALIZE_SLACK {
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(())
}

/// Log map on raw slices; `p` and `z` must be unit vectors.
pub(crate) fn log_into(p: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
    let c = dot(p, z);
    if c >= 1.0 - IDENTITY_GAP {
        out.fill(0.0);
        return Ok(());
    }
    if c <= -1.0 + ANTIPODAL_GAP {
        return Err(Error::AntipodalPoint(c));
    }
    for ((o, &zi), &pi) in out.iter_mut().zip(z).zip(p) {
        *o = zi - c * pi;
    }
    // one more Gram-Schmidt pass removes the residual p component
    let c2 = dot(p, out);
    for (o, &pi) in out.iter_mut().zip(p) {
        *o -= c2 * pi;
    }
    let rn = norm(out);
    if rn == 0.0 {
        out.fill(0.0);
        return Ok(());
    }
    let scale = rn.atan2(c) / rn;
    out.iter_mut().for_each(|o| *o *= scale);
    Ok(())
}

/// Exp map on raw slices. Caller checks the norm bound.
pub(crate) fn exp_into(p: &[f64], v: &[f64], out: &mut [f64]) {
    let n = norm(v);
    if n < 1e-12 {
        out.copy_from_slice(p);
        return;
    }
    let (s, c) = n.sin_cos();
    let s = s / n;
    for ((o, &pi), &vi) in out.iter_mut().zip(p).zip(v) {
        *o = c * pi + s * vi;
    }
    // exp of a valid tangent vector is unit to rounding; never near zero
    let _ = normalize_in_place(out);
}

fn angle(p: &[f64], q: &[f64]) -> f64 {
    let c = dot(p, q);
    let r: f64 = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            let x = pi - c * qi;
            x * x
        })
        .sum::<f64>()
        .sqrt();
    r.atan2(c)
}

/// Logarithmic map Log_p(z) into the tangent space at `p`.
pub fn log_map(p: &UnitVector, z: &UnitVector) -> Result<TangentVector> {
    check_dim(p.dim(), z.dim())?;
    let mut out = DVector::zeros(p.dim());
    log_into(p.as_slice(), z.as_slice(), out.as_mut_slice())?;
    Ok(TangentVector { base: p.clone(), vec: out })
}

/// Exponential map Exp_p(v) back onto the sphere.
pub fn exp_map(v: &TangentVector) -> Result<UnitVector> {
    let n = v.norm();
    if n >= std::f64::consts::PI - EXP_MARGIN {
        return Err(Error::TangentNormTooLarge(n));
    }
    let mut out = DVector::zeros(v.base.dim());
    exp_into(v.base.as_slice(), v.vec.as_slice(), out.as_mut_slice());
    Ok(UnitVector(out))
}

/// Great-circle distance in radians, in `[0, π]`.
pub fn geodesic_distance(p: &UnitVector, q: &UnitVector) -> Result<f64> {
    check_dim(p.dim(), q.dim())?;
    Ok(angle(p.as_slice(), q.as_slice()))
}

/// Fixed-point iteration settings for [`intrinsic_mean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MeanParams {
    fn default() -> Self {
        MeanParams {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Intrinsic (Fréchet) mean of a list of points.
///
/// Iterates `μ ← Exp_μ(mean_n Log_μ(x_n))` from the normalized Euclidean
/// mean until the averaged tangent vector has norm at most `tol`.
pub fn intrinsic_mean(points: &[UnitVector], tol: f64, max_iter: usize) -> Result<UnitVector> {
    let first = points.first().ok_or(Error::EmptyInput("intrinsic mean of no points"))?;
    let d = first.dim();
    let mut data = DMatrix::zeros(d, points.len());
    for (j, p) in points.iter().enumerate() {
        check_dim(d, p.dim())?;
        data.column_mut(j).copy_from(p.as_vector());
    }
    intrinsic_mean_columns(&data, MeanParams { tol, max_iter }, Exec::default())
}

/// Intrinsic mean of the columns of `data`, which must already be unit-norm.
pub fn intrinsic_mean_columns(data: &DMatrix<f64>, params: MeanParams, exec: Exec) -> Result<UnitVector> {
    let (d, n) = data.shape();
    if n == 0 {
        return Err(Error::EmptyInput("intrinsic mean of no points"));
    }
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    let mut mu: DVector<f64> = data.column_sum();
    if normalize_in_place(mu.as_mut_slice()).is_err() {
        mu = data.column(0).into_owned();
    }
    let mut step = DVector::zeros(d);
    for iter in 0..=params.max_iter {
        let mean_log = mean_log(mu.as_slice(), data, exec)?;
        if mean_log.norm() <= params.tol {
            log::debug!("intrinsic mean converged after {iter} iterations");
            return Ok(UnitVector(mu));
        }
        if iter == params.max_iter {
            break;
        }
        exp_into(mu.as_slice(), mean_log.as_slice(), step.as_mut_slice());
        std::mem::swap(&mut mu, &mut step);
    }
    Err(Error::NoConvergence(params.max_iter))
}

fn mean_log(mu: &[f64], data: &DMatrix<f64>, exec: Exec) -> Result<DVector<f64>> {
    let (d, n) = data.shape();
    let partials = par::map_chunks(exec, n, par::CHUNK, |range| -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(d);
        let mut buf = vec![0.0; d];
        for j in range {
            log_into(mu, data.column(j).as_slice(), &mut buf)?;
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        Ok(acc)
    });
    let mut total = DVector::zeros(d);
    for part in partials {
        total += part?;
    }
    Ok(total / n as f64)
}

/// Log-maps every column of `data` at `base`; columns must be unit-norm.
pub fn log_map_columns(base: &UnitVector, data: &DMatrix<f64>, exec: Exec) -> Result<DMatrix<f64>> {
    let (d, n) = data.shape();
    check_dim(base.dim(), d)?;
    let p = base.as_slice();
    let chunks = par::map_chunks(exec, n, par::CHUNK, |range| -> Result<Vec<f64>> {
        let mut out = vec![0.0; d * range.len()];
        for (slot, j) in out.chunks_mut(d).zip(range) {
            log_into(p, data.column(j).as_slice(), slot)?;
        }
        Ok(out)
    });
    let mut flat = Vec::with_capacity(d * n);
    for c in chunks {
        flat.extend(c?);
    }
    Ok(DMatrix::from_vec(d, n, flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::from_slice(c).unwrap()
    }

    #[test]
    fn construction_normalizes_and_rejects() {
        let v = uv(&[3.0, 4.0]);
        assert!((v.as_vector().norm() - 1.0).abs() < 1e-15);
        assert!(matches!(UnitVector::from_slice(&[0.0, 1e-13]), Err(Error::ZeroVector(_))));
        assert!(matches!(UnitVector::from_slice(&[1.0]), Err(Error::DimensionTooSmall(1))));
        // already-unit input is kept bit-for-bit
        let raw = [0.6, 0.8];
        assert_eq!(uv(&raw).as_slice(), &raw);
    }

    #[test]
    fn tangent_vector_checks_orthogonality() {
        let p = uv(&[1.0, 0.0, 0.0]);
        assert!(TangentVector::new(p.clone(), DVector::from_vec(vec![0.0, 1.0, 2.0])).is_ok());
        assert!(TangentVector::new(p.clone(), DVector::zeros(3)).is_ok());
        assert!(matches!(
            TangentVector::new(p, DVector::from_vec(vec![0.1, 1.0, 0.0])),
            Err(Error::NotTangent(_))
        ));
    }

    #[test]
    fn log_of_self_is_zero() {
        let p = uv(&[0.2, -0.5, 0.7, 0.1]);
        assert_eq!(log_map(&p, &p).unwrap().norm(), 0.0);
    }

    #[test]
    fn log_of_orthogonal_point() {
        let v = log_map(&uv(&[1.0, 0.0, 0.0]), &uv(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(v.vec().as_slice(), &[0.0, FRAC_PI_2, 0.0]);
    }

    #[test]
    fn log_rejects_antipodal_and_mismatch() {
        let p = uv(&[1.0, 0.0, 0.0]);
        assert!(matches!(log_map(&p, &uv(&[-1.0, 0.0, 0.0])), Err(Error::AntipodalPoint(_))));
        assert!(matches!(
            log_map(&p, &uv(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn exp_quarter_turn_and_zero() {
        let base = uv(&[1.0, 0.0, 0.0]);
        let v = TangentVector::new(base.clone(), DVector::from_vec(vec![0.0, FRAC_PI_2, 0.0])).unwrap();
        let z = exp_map(&v).unwrap();
        assert!((z.as_vector() - DVector::from_vec(vec![0.0, 1.0, 0.0])).norm() < 1e-15);
        assert_eq!(exp_map(&TangentVector::zero(base.clone())).unwrap(), base);
    }

    #[test]
    fn exp_rejects_long_vectors() {
        let base = uv(&[1.0, 0.0]);
        let v = TangentVector::new(base, DVector::from_vec(vec![0.0, PI])).unwrap();
        assert!(matches!(exp_map(&v), Err(Error::TangentNormTooLarge(_))));
    }

    #[test]
    fn distance_special_cases() {
        let p = uv(&[0.0, 0.0, 1.0]);
        assert_eq!(geodesic_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(geodesic_distance(&p, &uv(&[0.0, 0.0, -1.0])).unwrap(), PI);
        assert!((geodesic_distance(&p, &uv(&[1.0, 0.0, 0.0])).unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn mean_of_single_point() {
        let p = uv(&[0.3, 0.4, 0.5, 0.1]);
        assert_eq!(intrinsic_mean(std::slice::from_ref(&p), 1e-10, 200).unwrap(), p);
    }

    #[test]
    fn mean_of_two_orthogonal_points() {
        let m = intrinsic_mean(&[uv(&[1.0, 0.0, 0.0]), uv(&[0.0, 1.0, 0.0])], 1e-10, 200).unwrap();
        let expect = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        assert!((m.as_vector() - expect).norm() < 1e-12);
    }

    #[test]
    fn mean_errors() {
        assert!(matches!(intrinsic_mean(&[], 1e-10, 10), Err(Error::EmptyInput(_))));
        // a spread-out set cannot converge in zero iterations
        let pts = [uv(&[1.0, 0.0, 0.0]), uv(&[0.0, 1.0, 0.0]), uv(&[0.0, 0.0, 1.0]), uv(&[1.0, 1.0, 0.0])];
        assert!(matches!(intrinsic_mean(&pts, 1e-10, 0), Err(Error::NoConvergence(0))));
    }
}
