//! Applying fitted subspaces to embeddings.
//!
//! Sphere subspaces project in the tangent space at their base point and map
//! back with Exp (`Π(z) = Exp_μ(WWᵀ Log_μ z)`, `Π⊥(z) = Exp_μ((I − WWᵀ) Log_μ z)`).
//! Euclidean subspaces use `P = WWᵀ` and `P⊥ = I − P` on the raw vector; the
//! `UnitVector` outputs are renormalized, the `*_raw` variants are not.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::solver::{Geometry, Subspace};
use crate::sphere::{self, UnitVector};

/// Which part of the decomposition to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Span,
    Complement,
}

fn check_dim(sub: &Subspace, z: &[f64]) -> Result<()> {
    if sub.dim() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: sub.dim(),
            actual: z.len(),
        });
    }
    Ok(())
}

fn base_of(sub: &Subspace) -> Result<&UnitVector> {
    sub.base_point().ok_or(Error::MissingBasePoint)
}

fn split_vec(w: &DMatrix<f64>, v: &DVector<f64>, part: Part) -> DVector<f64> {
    let inside = w * (w.transpose() * v);
    match part {
        Part::Span => inside,
        Part::Complement => v - inside,
    }
}

/// The vector actually fed to Exp (sphere) or returned unnormalized
/// (euclidean).
fn apply_raw(sub: &Subspace, z: &[f64], part: Part) -> Result<DVector<f64>> {
    check_dim(sub, z)?;
    match sub.geometry() {
        Geometry::Sphere => {
            let mu = base_of(sub)?;
            let mut v = DVector::zeros(z.len());
            sphere::log_into(mu.as_slice(), z, v.as_mut_slice())?;
            let t = split_vec(sub.basis(), &v, part);
            let mut out = DVector::zeros(z.len());
            sphere::exp_into(mu.as_slice(), t.as_slice(), out.as_mut_slice());
            Ok(out)
        }
        Geometry::Euclidean => {
            let v = DVector::from_column_slice(z);
            Ok(split_vec(sub.basis(), &v, part))
        }
    }
}

/// Projection onto the subspace (`Π` or normalized `P z`).
pub fn project(sub: &Subspace, z: &UnitVector) -> Result<UnitVector> {
    UnitVector::new(apply_raw(sub, z.as_slice(), Part::Span)?)
}

/// Projection onto the orthogonal complement (`Π⊥` or normalized `P⊥ z`).
pub fn project_complement(sub: &Subspace, z: &UnitVector) -> Result<UnitVector> {
    UnitVector::new(apply_raw(sub, z.as_slice(), Part::Complement)?)
}

/// Unnormalized projection. Identical to [`project`] for sphere subspaces;
/// for euclidean ones this is `P z` itself.
pub fn project_raw(sub: &Subspace, z: &UnitVector, part: Part) -> Result<DVector<f64>> {
    apply_raw(sub, z.as_slice(), part)
}

/// `WᵀLog_μ(z)` (sphere) or `Wᵀz` (euclidean).
pub fn tangent_coordinates(sub: &Subspace, z: &UnitVector) -> Result<DVector<f64>> {
    check_dim(sub, z.as_slice())?;
    let v = match sub.geometry() {
        Geometry::Sphere => sphere::log_map(base_of(sub)?, z)?.into_parts().1,
        Geometry::Euclidean => z.as_vector().clone(),
    };
    Ok(sub.basis().transpose() * v)
}

/// Like [`tangent_coordinates`] but refuses euclidean subspaces.
pub fn sphere_coordinates(sub: &Subspace, z: &UnitVector) -> Result<DVector<f64>> {
    if sub.geometry() != Geometry::Sphere {
        return Err(Error::GeometryMismatch);
    }
    tangent_coordinates(sub, z)
}

/// Tangent (or raw) vector split into its span and complement parts.
pub fn decompose(sub: &Subspace, z: &UnitVector) -> Result<(DVector<f64>, DVector<f64>)> {
    check_dim(sub, z.as_slice())?;
    let v = match sub.geometry() {
        Geometry::Sphere => sphere::log_map(base_of(sub)?, z)?.into_parts().1,
        Geometry::Euclidean => z.as_vector().clone(),
    };
    let inside = split_vec(sub.basis(), &v, Part::Span);
    let outside = v - &inside;
    Ok((inside, outside))
}

/// Projects every column of `x`. With `normalize`, euclidean outputs are
/// rescaled to unit norm.
pub fn project_columns(sub: &Subspace, x: &DMatrix<f64>, part: Part, normalize: bool, exec: Exec) -> Result<DMatrix<f64>> {
    let (d, n) = x.shape();
    if d != sub.dim() {
        return Err(Error::DimensionMismatch { expected: sub.dim(), actual: d });
    }
    let cols = par::map_indices(exec, n, |j| -> Result<DVector<f64>> {
        let mut out = apply_raw(sub, x.column(j).as_slice(), part)?;
        if normalize {
            sphere::normalize_in_place(out.as_mut_slice())?;
        }
        Ok(out)
    });
    let mut result = DMatrix::zeros(d, n);
    for (j, c) in cols.into_iter().enumerate() {
        result.set_column(j, &c?);
    }
    Ok(result)
}
