//! Class-invariance matrix, cosine similarity, zero-shot classification and
//! objective re-evaluation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::LabeledEmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::par::{self, Exec};
use crate::projection::{self, Part};
use crate::solver::{self, Geometry, Subspace};
use crate::sphere::{self, UnitVector};

/// Base points closer than this are considered identical.
pub const BASE_POINT_TOL: f64 = 1e-12;

/// Mean squared projected norm of each class (columns) in each subspace (rows).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceMatrix {
    /// Class name of each subspace, one per row.
    pub subspaces: Vec<String>,
    /// Data classes, one per column.
    pub classes: Vec<String>,
    #[serde(serialize_with = "serialize_rows")]
    pub values: DMatrix<f64>,
    pub row_normalized: bool,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl InvarianceMatrix {
    /// Divides every row by its maximum; all-zero rows are left alone.
    pub fn row_normalize(&mut self) {
        for mut row in self.values.row_iter_mut() {
            let max = row.max();
            if max > 0.0 {
                row /= max;
            }
        }
        self.row_normalized = true;
    }

    /// CSV with a header of class names and one row per subspace. The first
    /// column holds the subspace name.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subspace");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (name, row) in self.subspaces.iter().zip(self.values.row_iter()) {
            out.push_str(name);
            for v in row.iter() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn same_base(a: Option<&UnitVector>, b: Option<&UnitVector>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a.as_vector() - b.as_vector()).amax() <= BASE_POINT_TOL,
        _ => false,
    }
}

/// Entry `(i, j)` is `(1/n_j) ‖W_iᵀ Y_j‖²_F` with `Y_j` the class-`j` points
/// Log-mapped at the shared base point (sphere) or raw (euclidean).
pub fn invariance_matrix(subspaces: &[Subspace], set: &LabeledEmbeddingSet, row_normalize: bool) -> Result<InvarianceMatrix> {
    invariance_matrix_with(subspaces, set, row_normalize, Exec::default())
}

pub fn invariance_matrix_with(
    subspaces: &[Subspace],
    set: &LabeledEmbeddingSet,
    row_normalize: bool,
    exec: Exec,
) -> Result<InvarianceMatrix> {
    let first = subspaces.first().ok_or(Error::EmptyInput("no subspaces"))?;
    for s in subspaces {
        if s.dim() != set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), actual: s.dim() });
        }
        if s.geometry() != first.geometry() {
            return Err(Error::GeometryMismatch);
        }
        if !same_base(s.base_point(), first.base_point()) {
            return Err(Error::BasePointMismatch);
        }
    }
    let y = solver::prepare(set.points(), first.geometry(), first.base_point(), None, exec)?;
    let n_classes = set.classes().len();
    let rows = par::map_indices(exec, subspaces.len(), |i| {
        let coords = subspaces[i].basis().transpose() * &y;
        let mut sums = vec![0.0; n_classes];
        for (col, &label) in coords.column_iter().zip(set.labels()) {
            sums[label] += col.norm_squared();
        }
        sums.iter()
            .enumerate()
            .map(|(j, s)| s / set.class_len(j) as f64)
            .collect::<Vec<_>>()
    });
    let values = DMatrix::from_fn(subspaces.len(), n_classes, |i, j| rows[i][j]);
    let mut m = InvarianceMatrix {
        subspaces: subspaces.iter().map(|s| s.class_name().to_string()).collect(),
        classes: set.classes().to_vec(),
        values,
        row_normalized: false,
    };
    if row_normalize {
        m.row_normalize();
    }
    Ok(m)
}

/// `aᵀb / (‖a‖‖b‖)`, clamped to `[−1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || !na.is_finite() {
        return Err(Error::ZeroVector(na));
    }
    if nb == 0.0 || !nb.is_finite() {
        return Err(Error::ZeroVector(nb));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAccuracy {
    pub class: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub dataset_name: String,
    pub top1: f64,
    pub n_samples: usize,
    pub per_class_accuracy: Vec<ClassAccuracy>,
    /// Predicted label index for every image, in input order.
    #[serde(skip)]
    pub predictions: Vec<usize>,
    /// Softmax over label similarities per image, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotOptions {
    pub dataset_name: String,
    pub softmax: bool,
    pub exec: Exec,
}

impl Default for ZeroShotOptions {
    fn default() -> Self {
        ZeroShotOptions {
            dataset_name: "dataset".into(),
            softmax: false,
            exec: Exec::default(),
        }
    }
}

/// Assigns each image the label whose text embedding has the highest cosine
/// similarity with the image (projected onto `sub` when given). Ties go to
/// the lowest label index.
pub fn zero_shot_classify(
    images: &LabeledEmbeddingSet,
    label_texts: &DMatrix<f64>,
    label_names: &[String],
    sub: Option<&Subspace>,
) -> Result<ClassificationReport> {
    zero_shot_classify_with(images, label_texts, label_names, sub, &ZeroShotOptions::default())
}

pub fn zero_shot_classify_with(
    images: &LabeledEmbeddingSet,
    label_texts: &DMatrix<f64>,
    label_names: &[String],
    sub: Option<&Subspace>,
    opts: &ZeroShotOptions,
) -> Result<ClassificationReport> {
    if label_texts.ncols() != label_names.len() {
        return Err(Error::LabelMismatch(format!(
            "{} label embeddings for {} label names",
            label_texts.ncols(),
            label_names.len()
        )));
    }
    if label_texts.ncols() == 0 {
        return Err(Error::EmptyInput("label embeddings"));
    }
    if label_texts.nrows() != images.dim() {
        return Err(Error::DimensionMismatch { expected: images.dim(), actual: label_texts.nrows() });
    }
    let truth_of_class: Vec<usize> = images
        .classes()
        .iter()
        .map(|c| {
            label_names
                .iter()
                .position(|l| l == c)
                .ok_or_else(|| Error::LabelMismatch(format!("image class {c:?} has no label embedding")))
        })
        .collect::<Result<_>>()?;
    let mut texts = label_texts.clone();
    for mut col in texts.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector(n));
        }
        col /= n;
    }
    let points = images.points();
    let scored = par::map_indices(opts.exec, images.len(), |j| -> Result<(usize, Vec<f64>)> {
        let z = points.column(j);
        let query: DVector<f64> = match sub {
            Some(s) => projection::project_raw(s, &UnitVector::new_unchecked(z.into_owned()), Part::Span)?,
            None => z.into_owned(),
        };
        let qn = query.norm();
        if qn == 0.0 || !qn.is_finite() {
            return Err(Error::ZeroVector(qn));
        }
        let sims: Vec<f64> = texts.column_iter().map(|t| (t.dot(&query) / qn).clamp(-1.0, 1.0)).collect();
        let mut best = 0;
        for (i, &s) in sims.iter().enumerate() {
            if s > sims[best] {
                best = i;
            }
        }
        Ok((best, sims))
    });
    let mut predictions = Vec::with_capacity(images.len());
    let mut probabilities = opts.softmax.then(Vec::new);
    let mut correct = vec![0usize; images.classes().len()];
    for (j, r) in scored.into_iter().enumerate() {
        let (pred, sims) = r?;
        let class = images.labels()[j];
        if pred == truth_of_class[class] {
            correct[class] += 1;
        }
        predictions.push(pred);
        if let Some(p) = probabilities.as_mut() {
            p.push(softmax(&sims));
        }
    }
    let n = images.len();
    let total_correct: usize = correct.iter().sum();
    let per_class_accuracy = images
        .classes()
        .iter()
        .enumerate()
        .map(|(i, c)| ClassAccuracy {
            class: c.clone(),
            correct: correct[i],
            total: images.class_len(i),
            accuracy: correct[i] as f64 / images.class_len(i) as f64,
        })
        .collect();
    Ok(ClassificationReport {
        dataset_name: opts.dataset_name.clone(),
        top1: total_correct as f64 / n as f64,
        n_samples: n,
        per_class_accuracy,
        predictions,
        probabilities,
    })
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `tr(WᵀCW)` with `C` rebuilt from `set` using the subspace's own settings.
pub fn objective_value(sub: &Subspace, set: &LabeledEmbeddingSet) -> Result<f64> {
    let c = solver::contrast_for(sub, set, Exec::default())?;
    Ok(linalg::trace_form(sub.basis(), &c.matrix))
}

/// Mean squared norm of the Log-mapped (or raw) points of class `j`.
pub fn mean_squared_norm(set: &LabeledEmbeddingSet, j: usize, geometry: Geometry, base: Option<&UnitVector>) -> Result<f64> {
    let x = set.class_matrix(j);
    let y = match geometry {
        Geometry::Sphere => sphere::log_map_columns(base.ok_or(Error::MissingBasePoint)?, &x, Exec::default())?,
        Geometry::Euclidean => x,
    };
    Ok(y.norm_squared() / y.ncols() as f64)
}
