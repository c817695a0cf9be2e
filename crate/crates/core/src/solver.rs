//! Contrastive subspace fitting.
//!
//! For a target class `t` with (possibly Log-mapped or centered) data `Y_t`
//! and nuisance classes `Y_j`, the contrast matrix is
//!
//! ```text
//! C = (1 − λ)/n_t · Y_t Y_tᵀ − Σ_{j≠t} λ/n_j · Y_j Y_jᵀ
//! ```
//!
//! and the orthonormal `W` maximizing `tr(WᵀCW)` is given by the leading `k`
//! eigenvectors of `C`. With [`Weighting::Unweighted`] the `1/n` factors are
//! dropped.
//!
//! In sphere geometry the columns of `Y` are `Log_μ(x)` at the pooled
//! intrinsic mean `μ`, and the eigenproblem is solved inside the tangent
//! space `μ⊥` so the basis never picks up the `μ` direction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledEmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::{self, SortedEigen};
use crate::par::{self, Exec};
use crate::sphere::{self, MeanParams, UnitVector};

/// Orthonormality tolerance for fitted and loaded bases.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Column counts above which chunk partial sums are compensated.
pub const COMPENSATED_ABOVE: usize = 100_000;
/// Relative cutoff for the summed-scatter spectrum in FKT whitening.
pub const FKT_CUTOFF: f64 = 1e-10;
/// Ridge added to the within-class scatter, relative to its mean eigenvalue.
pub const FDA_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Sphere,
    Euclidean,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Sphere => "sphere",
            Geometry::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Geometry::Sphere),
            "euclidean" => Ok(Geometry::Euclidean),
            other => Err(Error::InvalidArgument(format!("unknown geometry {other:?}"))),
        }
    }
}

/// Per-class scaling of the moment terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Each class term divided by its size.
    #[default]
    Balanced,
    /// Raw sums.
    Unweighted,
}

/// A fitted subspace: orthonormal `d × k` basis plus the metadata needed to
/// apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    class_name: String,
    basis: DMatrix<f64>,
    base_point: Option<UnitVector>,
    geometry: Geometry,
    lambda: f64,
    eigenvalues: Vec<f64>,
    centered: bool,
    weighting: Weighting,
}

impl Subspace {
    /// Validates and assembles a subspace.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        class_name: impl Into<String>,
        basis: DMatrix<f64>,
        base_point: Option<UnitVector>,
        geometry: Geometry,
        lambda: f64,
        eigenvalues: Vec<f64>,
        centered: bool,
        weighting: Weighting,
    ) -> Result<Self> {
        let (d, k) = basis.shape();
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        check_lambda(lambda)?;
        if k == 0 || k > d {
            return Err(Error::KTooLarge { k, max: d });
        }
        if eigenvalues.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: eigenvalues.len(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("eigenvalues must be non-increasing".into()));
        }
        let err = linalg::orthonormality_error(&basis);
        if err.is_nan() || err > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(err));
        }
        match (geometry, &base_point) {
            (Geometry::Sphere, None) => return Err(Error::MissingBasePoint),
            (Geometry::Sphere, Some(mu)) => {
                if mu.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, actual: mu.dim() });
                }
                let along = (basis.transpose() * mu.as_vector()).amax();
                if along > ORTHONORMAL_TOL {
                    return Err(Error::NotTangent(along));
                }
            }
            (Geometry::Euclidean, Some(_)) => {
                return Err(Error::InvalidArgument("euclidean subspaces carry no base point".into()))
            }
            (Geometry::Euclidean, None) => {}
        }
        Ok(Subspace {
            class_name: class_name.into(),
            basis,
            base_point,
            geometry,
            lambda,
            eigenvalues,
            centered,
            weighting,
        })
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn base_point(&self) -> Option<&UnitVector> {
        self.base_point.as_ref()
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    /// Same subspace with its basis replaced by `basis` (e.g. a rotated
    /// frame of the same span).
    pub fn with_basis(&self, basis: DMatrix<f64>) -> Result<Self> {
        Subspace::new(
            self.class_name.clone(),
            basis,
            self.base_point.clone(),
            self.geometry,
            self.lambda,
            self.eigenvalues.clone(),
            self.centered,
            self.weighting,
        )
    }
}

/// The symmetric contrast matrix for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
    pub target_class: String,
}

/// How raw embeddings become moment-matrix columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastOptions {
    /// Euclidean only: subtract the pooled mean first.
    pub center: bool,
    pub weighting: Weighting,
    pub exec: Exec,
}

impl Default for ContrastOptions {
    fn default() -> Self {
        ContrastOptions {
            center: true,
            weighting: Weighting::Balanced,
            exec: Exec::default(),
        }
    }
}

/// Everything a fit needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub lambda: f64,
    pub k: usize,
    pub geometry: Geometry,
    pub center: bool,
    pub weighting: Weighting,
    pub mean: MeanParams,
    pub exec: Exec,
}

impl FitParams {
    pub fn new(lambda: f64, k: usize, geometry: Geometry) -> Self {
        FitParams {
            lambda,
            k,
            geometry,
            center: true,
            weighting: Weighting::Balanced,
            mean: MeanParams::default(),
            exec: Exec::default(),
        }
    }

    pub fn contrast_options(&self) -> ContrastOptions {
        ContrastOptions {
            center: self.center,
            weighting: self.weighting,
            exec: self.exec,
        }
    }

    fn centered(&self) -> bool {
        self.geometry == Geometry::Euclidean && self.center
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    Ok(())
}

fn check_k(k: usize, d: usize, geometry: Geometry) -> Result<()> {
    let max = match geometry {
        Geometry::Sphere => d - 1,
        Geometry::Euclidean => d,
    };
    if k == 0 || k > max {
        return Err(Error::KTooLarge { k, max });
    }
    Ok(())
}

/// `Σ_n y_n y_nᵀ` over the columns of `y`, accumulated in fixed chunks and
/// reduced in chunk order so every execution mode gives identical bits.
pub fn second_moment(y: &DMatrix<f64>, exec: Exec) -> DMatrix<f64> {
    let (d, n) = y.shape();
    let partials = par::map_chunks(exec, n, par::CHUNK, |range| {
        let block = y.columns(range.start, range.len());
        block * block.transpose()
    });
    let mut total = DMatrix::zeros(d, d);
    if n > COMPENSATED_ABOVE {
        let mut carry = DMatrix::<f64>::zeros(d, d);
        for p in partials {
            for ((t, c), v) in total.iter_mut().zip(carry.iter_mut()).zip(p.iter()) {
                let y = v - *c;
                let s = *t + y;
                *c = (s - *t) - y;
                *t = s;
            }
        }
    } else {
        for p in partials {
            total += p;
        }
    }
    linalg::symmetrize(&mut total);
    total
}

/// Data columns as they enter the moment matrices: Log-mapped at `base`
/// (sphere), shifted by `center` (euclidean, centered), or raw.
pub(crate) fn prepare(
    x: &DMatrix<f64>,
    geometry: Geometry,
    base: Option<&UnitVector>,
    center: Option<&DVector<f64>>,
    exec: Exec,
) -> Result<DMatrix<f64>> {
    match geometry {
        Geometry::Sphere => sphere::log_map_columns(base.ok_or(Error::MissingBasePoint)?, x, exec),
        Geometry::Euclidean => Ok(match center {
            Some(c) => {
                let mut y = x.clone();
                for mut col in y.column_iter_mut() {
                    col -= c;
                }
                y
            }
            None => x.clone(),
        }),
    }
}

fn pooled_mean(cols: &[&DMatrix<f64>]) -> DVector<f64> {
    let d = cols[0].nrows();
    let n: usize = cols.iter().map(|m| m.ncols()).sum();
    let mut s = DVector::zeros(d);
    for m in cols {
        s += m.column_sum();
    }
    s / n as f64
}

/// Intrinsic mean of every point in `set`, plus any extra columns.
pub fn pooled_base_point(set: &LabeledEmbeddingSet, extra: Option<&DMatrix<f64>>, params: MeanParams, exec: Exec) -> Result<UnitVector> {
    match extra {
        None => sphere::intrinsic_mean_columns(set.points(), params, exec),
        Some(e) => {
            let mut all = DMatrix::zeros(set.dim(), set.len() + e.ncols());
            all.columns_mut(0, set.len()).copy_from(set.points());
            all.columns_mut(set.len(), e.ncols()).copy_from(e);
            sphere::intrinsic_mean_columns(&all, params, exec)
        }
    }
}

struct Prepared {
    /// Per-class columns in set class order.
    classes: Vec<DMatrix<f64>>,
    /// Extra (theme) columns, if any.
    extra: Option<DMatrix<f64>>,
}

fn prepare_set(
    set: &LabeledEmbeddingSet,
    extra: Option<&DMatrix<f64>>,
    geometry: Geometry,
    base: Option<&UnitVector>,
    center: bool,
    exec: Exec,
) -> Result<Prepared> {
    if let Some(e) = extra {
        if e.nrows() != set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), actual: e.nrows() });
        }
    }
    if let Some(b) = base {
        if b.dim() != set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), actual: b.dim() });
        }
    }
    let shift = if geometry == Geometry::Euclidean && center {
        let mut parts = vec![set.points()];
        if let Some(e) = extra {
            parts.push(e);
        }
        Some(pooled_mean(&parts))
    } else {
        None
    };
    let all = prepare(set.points(), geometry, base, shift.as_ref(), exec)?;
    let classes = (0..set.classes().len()).map(|i| all.select_columns(set.members(i))).collect();
    let extra = extra
        .map(|e| prepare(e, geometry, base, shift.as_ref(), exec))
        .transpose()?;
    Ok(Prepared { classes, extra })
}

fn class_weight(weighting: Weighting, n: usize) -> f64 {
    match weighting {
        Weighting::Balanced => 1.0 / n as f64,
        Weighting::Unweighted => 1.0,
    }
}

fn combine(target: &DMatrix<f64>, negatives: &[&DMatrix<f64>], lambda: f64, weighting: Weighting, exec: Exec) -> DMatrix<f64> {
    let mut c = second_moment(target, exec) * ((1.0 - lambda) * class_weight(weighting, target.ncols()));
    for y in negatives {
        let m = second_moment(y, exec);
        c -= m * (lambda * class_weight(weighting, y.ncols()));
    }
    linalg::symmetrize(&mut c);
    c
}

/// Contrast matrix for class `target` with default options (centered,
/// class-balanced).
pub fn build_contrast_matrix(
    set: &LabeledEmbeddingSet,
    target: &str,
    lambda: f64,
    geometry: Geometry,
    base_point: Option<&UnitVector>,
) -> Result<ContrastMatrix> {
    build_contrast_matrix_with(set, target, lambda, geometry, base_point, ContrastOptions::default())
}

pub fn build_contrast_matrix_with(
    set: &LabeledEmbeddingSet,
    target: &str,
    lambda: f64,
    geometry: Geometry,
    base_point: Option<&UnitVector>,
    opts: ContrastOptions,
) -> Result<ContrastMatrix> {
    let t = set.class_index(target)?;
    check_lambda(lambda)?;
    if geometry == Geometry::Sphere && base_point.is_none() {
        return Err(Error::MissingBasePoint);
    }
    let prep = prepare_set(set, None, geometry, base_point, opts.center, opts.exec)?;
    let negatives: Vec<_> = prep.classes.iter().enumerate().filter(|(j, _)| *j != t).map(|(_, y)| y).collect();
    Ok(ContrastMatrix {
        matrix: combine(&prep.classes[t], &negatives, lambda, opts.weighting, opts.exec),
        lambda,
        target_class: target.to_string(),
    })
}

/// Householder basis of the tangent space at `mu`: `d × (d−1)`, orthonormal,
/// orthogonal to `mu`.
pub(crate) fn tangent_frame(mu: &UnitVector) -> DMatrix<f64> {
    let d = mu.dim();
    let mut u = mu.as_vector().clone();
    let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += s;
    let uu = u.dot(&u);
    let mut h = DMatrix::<f64>::identity(d, d);
    h.ger(-2.0 / uu, &u, &u, 1.0);
    h.columns(1, d - 1).into_owned()
}

/// Eigenpairs of `c`, restricted to the tangent space at `base` when given.
pub(crate) fn eigen_in(c: &DMatrix<f64>, base: Option<&UnitVector>) -> SortedEigen {
    match base {
        None => linalg::sym_eigen_desc(c),
        Some(mu) => {
            let q = tangent_frame(mu);
            let mut inner = q.transpose() * c * &q;
            linalg::symmetrize(&mut inner);
            let eig = linalg::sym_eigen_desc(&inner);
            let mut vectors = &q * eig.vectors;
            linalg::fix_signs(&mut vectors);
            SortedEigen { values: eig.values, vectors }
        }
    }
}

fn solve(
    name: &str,
    c: &DMatrix<f64>,
    base: Option<UnitVector>,
    params: &FitParams,
) -> Result<Subspace> {
    let eig = eigen_in(c, base.as_ref());
    let k = params.k;
    Subspace::new(
        name,
        eig.leading(k),
        base,
        params.geometry,
        params.lambda,
        eig.values[..k].to_vec(),
        params.centered(),
        params.weighting,
    )
}

fn resolve_base(
    set: &LabeledEmbeddingSet,
    extra: Option<&DMatrix<f64>>,
    params: &FitParams,
    base: Option<&UnitVector>,
) -> Result<Option<UnitVector>> {
    match params.geometry {
        Geometry::Euclidean => Ok(None),
        Geometry::Sphere => match base {
            Some(b) => Ok(Some(b.clone())),
            None => pooled_base_point(set, extra, params.mean, params.exec).map(Some),
        },
    }
}

/// Leading `k` eigenvectors of an explicit contrast matrix (euclidean).
pub fn fit_from_contrast(c: &ContrastMatrix, k: usize) -> Result<Subspace> {
    let d = c.matrix.nrows();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    check_lambda(c.lambda)?;
    check_k(k, d, Geometry::Euclidean)?;
    let params = FitParams {
        center: false,
        ..FitParams::new(c.lambda, k, Geometry::Euclidean)
    };
    let mut m = c.matrix.clone();
    linalg::symmetrize(&mut m);
    solve(&c.target_class, &m, None, &params)
}

/// Fits the subspace for class `target`. Sphere fits compute the pooled
/// intrinsic mean of `set` as base point.
pub fn fit_subspace(set: &LabeledEmbeddingSet, target: &str, params: &FitParams) -> Result<Subspace> {
    fit_subspace_at(set, target, params, None)
}

/// As [`fit_subspace`], reusing a precomputed base point for sphere fits.
pub fn fit_subspace_at(
    set: &LabeledEmbeddingSet,
    target: &str,
    params: &FitParams,
    base_point: Option<&UnitVector>,
) -> Result<Subspace> {
    let t = set.class_index(target)?;
    check_lambda(params.lambda)?;
    check_k(params.k, set.dim(), params.geometry)?;
    let base = resolve_base(set, None, params, base_point)?;
    let prep = prepare_set(set, None, params.geometry, base.as_ref(), params.center, params.exec)?;
    let negatives: Vec<_> = prep.classes.iter().enumerate().filter(|(j, _)| *j != t).map(|(_, y)| y).collect();
    let c = combine(&prep.classes[t], &negatives, params.lambda, params.weighting, params.exec);
    solve(target, &c, base, params)
}

/// Fits a subspace for a free-standing set of theme embeddings (columns of
/// `theme`), using every class of `set` as a nuisance term.
pub fn fit_theme_subspace(
    set: &LabeledEmbeddingSet,
    theme: &DMatrix<f64>,
    theme_name: &str,
    params: &FitParams,
) -> Result<Subspace> {
    fit_theme_subspace_at(set, theme, theme_name, params, None)
}

pub fn fit_theme_subspace_at(
    set: &LabeledEmbeddingSet,
    theme: &DMatrix<f64>,
    theme_name: &str,
    params: &FitParams,
    base_point: Option<&UnitVector>,
) -> Result<Subspace> {
    check_lambda(params.lambda)?;
    if theme.nrows() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), actual: theme.nrows() });
    }
    if theme.ncols() == 0 {
        return Err(Error::EmptyInput("theme embeddings"));
    }
    check_k(params.k, set.dim(), params.geometry)?;
    if params.k > theme.ncols() {
        return Err(Error::KExceedsThemeRank { k: params.k, max: theme.ncols() });
    }
    let mut theme = theme.clone();
    for mut col in theme.column_iter_mut() {
        sphere::normalize_in_place(col.as_mut_slice())?;
    }
    let base = resolve_base(set, Some(&theme), params, base_point)?;
    let prep = prepare_set(set, Some(&theme), params.geometry, base.as_ref(), params.center, params.exec)?;
    let negatives: Vec<_> = prep.classes.iter().collect();
    let target = prep.extra.as_ref().expect("theme columns prepared");
    let c = combine(target, &negatives, params.lambda, params.weighting, params.exec);
    solve(theme_name, &c, base, params)
}

/// Which data a PCA baseline describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaTarget<'a> {
    /// One class on its own (the λ = 0 fit).
    Class(&'a str),
    /// All classes pooled: `C = Σ_j w_j Y_j Y_jᵀ`.
    Pooled,
}

/// Name stored in pooled PCA/PGA subspaces.
pub const POOLED_NAME: &str = "ALL";

/// PCA (euclidean) or PGA (sphere) baseline.
pub fn pca_baseline(set: &LabeledEmbeddingSet, target: PcaTarget<'_>, params: &FitParams) -> Result<Subspace> {
    let params = FitParams { lambda: 0.0, ..*params };
    match target {
        PcaTarget::Class(name) => fit_subspace(set, name, &params),
        PcaTarget::Pooled => {
            check_k(params.k, set.dim(), params.geometry)?;
            let base = resolve_base(set, None, &params, None)?;
            let prep = prepare_set(set, None, params.geometry, base.as_ref(), params.center, params.exec)?;
            let d = set.dim();
            let mut c = DMatrix::zeros(d, d);
            for y in &prep.classes {
                c += second_moment(y, params.exec) * class_weight(params.weighting, y.ncols());
            }
            linalg::symmetrize(&mut c);
            solve(POOLED_NAME, &c, base, &params)
        }
    }
}

/// Principal geodesic analysis: [`pca_baseline`] in sphere geometry.
pub fn pga_baseline(set: &LabeledEmbeddingSet, target: PcaTarget<'_>, params: &FitParams) -> Result<Subspace> {
    pca_baseline(set, target, &FitParams { geometry: Geometry::Sphere, ..*params })
}

/// Fukunaga-Koontz transform on raw column matrices: whiten by the summed
/// scatter `X₁X₁ᵀ + X₂X₂ᵀ`, then take the leading eigenvectors of the
/// whitened class-1 scatter. Returns a euclidean subspace named `"fkt"`.
pub fn fkt_baseline(x1: &DMatrix<f64>, x2: &DMatrix<f64>, k: usize) -> Result<Subspace> {
    let (basis, values) = fkt_solve(x1, x2, k, None, Exec::default())?;
    Subspace::new("fkt", basis, None, Geometry::Euclidean, 0.0, values, false, Weighting::Unweighted)
}

fn fkt_solve(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    k: usize,
    base: Option<&UnitVector>,
    exec: Exec,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = x1.nrows();
    if x2.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x2.nrows() });
    }
    if k == 0 || k > d {
        return Err(Error::KTooLarge { k, max: d });
    }
    let s1 = second_moment(x1, exec);
    let sum = &s1 + second_moment(x2, exec);
    let eig = linalg::sym_eigen_desc(&sum);
    let top = eig.values.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 {
        eig.values.iter().take_while(|&&v| v > FKT_CUTOFF * top).count()
    } else {
        0
    };
    if rank < k {
        return Err(Error::RankDeficientSum { rank, k });
    }
    let mut whiten = eig.leading(rank);
    for (j, mut col) in whiten.column_iter_mut().enumerate() {
        col /= eig.values[j].sqrt();
    }
    let mut inner = whiten.transpose() * &s1 * &whiten;
    linalg::symmetrize(&mut inner);
    let inner_eig = linalg::sym_eigen_desc(&inner);
    let mut raw = &whiten * inner_eig.leading(k);
    if let Some(mu) = base {
        project_out(&mut raw, mu);
    }
    Ok((linalg::orthonormalize(&raw), inner_eig.values[..k].to_vec()))
}

fn project_out(m: &mut DMatrix<f64>, mu: &UnitVector) {
    let mu = mu.as_vector();
    for mut col in m.column_iter_mut() {
        let c = col.dot(mu);
        col.axpy(-c, mu, 1.0);
    }
}

/// FKT between class `target` and the single other class of a two-class set,
/// in the requested geometry.
pub fn fkt_subspace(set: &LabeledEmbeddingSet, target: &str, params: &FitParams) -> Result<Subspace> {
    fkt_subspace_at(set, target, params, None)
}

pub fn fkt_subspace_at(
    set: &LabeledEmbeddingSet,
    target: &str,
    params: &FitParams,
    base_point: Option<&UnitVector>,
) -> Result<Subspace> {
    if set.classes().len() != 2 {
        return Err(Error::NotTwoClasses(set.classes().len()));
    }
    let t = set.class_index(target)?;
    check_k(params.k, set.dim(), params.geometry)?;
    let base = resolve_base(set, None, params, base_point)?;
    let prep = prepare_set(set, None, params.geometry, base.as_ref(), params.center, params.exec)?;
    let (basis, values) = fkt_solve(&prep.classes[t], &prep.classes[1 - t], params.k, base.as_ref(), params.exec)?;
    Subspace::new("fkt", basis, base, params.geometry, 0.0, values, params.centered(), Weighting::Unweighted)
}

/// Multi-class Fisher discriminant analysis on raw (euclidean) data.
pub fn fda_baseline(set: &LabeledEmbeddingSet, k: usize) -> Result<Subspace> {
    let params = FitParams {
        center: false,
        ..FitParams::new(0.0, k, Geometry::Euclidean)
    };
    fda_subspace_at(set, &params, None)
}

/// FDA in the requested geometry: leading generalized eigenvectors of the
/// between-class scatter against the (ridged) within-class scatter.
pub fn fda_subspace_at(set: &LabeledEmbeddingSet, params: &FitParams, base_point: Option<&UnitVector>) -> Result<Subspace> {
    let n_classes = set.classes().len();
    let k = params.k;
    let max = n_classes.saturating_sub(1);
    if k == 0 || k > max {
        return Err(Error::KExceedsFdaRank { k, max });
    }
    check_k(k, set.dim(), params.geometry)?;
    let base = resolve_base(set, None, params, base_point)?;
    let prep = prepare_set(set, None, params.geometry, base.as_ref(), params.center, params.exec)?;
    let d = set.dim();
    let n_total: usize = prep.classes.iter().map(|y| y.ncols()).sum();
    let means: Vec<DVector<f64>> = prep.classes.iter().map(|y| y.column_mean()).collect();
    let mut overall = DVector::zeros(d);
    for (y, m) in prep.classes.iter().zip(&means) {
        overall.axpy(y.ncols() as f64 / n_total as f64, m, 1.0);
    }
    let mut between = DMatrix::zeros(d, d);
    let mut within = DMatrix::zeros(d, d);
    for (y, m) in prep.classes.iter().zip(&means) {
        let diff = m - &overall;
        between.ger(y.ncols() as f64, &diff, &diff, 1.0);
        let mut centered = y.clone();
        for mut col in centered.column_iter_mut() {
            col -= m;
        }
        within += second_moment(&centered, params.exec);
    }
    let tr = within.trace();
    if tr.is_nan() || tr <= 0.0 {
        return Err(Error::SingularWithinScatter);
    }
    for i in 0..d {
        within[(i, i)] += FDA_RIDGE * tr / d as f64;
    }
    let chol = within.cholesky().ok_or(Error::SingularWithinScatter)?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or(Error::SingularWithinScatter)?;
    let mut inner = &l_inv * &between * l_inv.transpose();
    linalg::symmetrize(&mut inner);
    let eig = linalg::sym_eigen_desc(&inner);
    let mut raw = l_inv.transpose() * eig.leading(k);
    if let Some(mu) = &base {
        project_out(&mut raw, mu);
    }
    let basis = linalg::orthonormalize(&raw);
    Subspace::new("fda", basis, base, params.geometry, 0.0, eig.values[..k].to_vec(), params.centered(), Weighting::Unweighted)
}

/// Rebuilds the contrast matrix a subspace was fitted against, using its
/// stored λ, geometry, base point, centering and weighting.
pub fn contrast_for(sub: &Subspace, set: &LabeledEmbeddingSet, exec: Exec) -> Result<ContrastMatrix> {
    if sub.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: sub.dim(), actual: set.dim() });
    }
    let opts = ContrastOptions {
        center: sub.centered(),
        weighting: sub.weighting(),
        exec,
    };
    build_contrast_matrix_with(set, sub.class_name(), sub.lambda(), sub.geometry(), sub.base_point(), opts)
}
