use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sphere::normalize_in_place;

/// Unit-norm embeddings tagged with class labels.
///
/// Points are kept in their original order as the columns of a `d × n`
/// matrix; per-class matrices `X_i` are gathered on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddingSet {
    classes: Vec<String>,
    points: DMatrix<f64>,
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl LabeledEmbeddingSet {
    /// Builds a set from columns and per-column class indices. Columns are
    /// normalized; every class must own at least one column.
    pub fn new(classes: Vec<String>, mut points: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let (d, n) = points.shape();
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        if classes.is_empty() || n == 0 {
            return Err(Error::EmptyInput("labeled embedding set"));
        }
        if labels.len() != n {
            return Err(Error::LabelMismatch(format!("{} labels for {} points", labels.len(), n)));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::DuplicateClass(c.clone()));
            }
        }
        let mut members = vec![Vec::new(); classes.len()];
        for (j, &l) in labels.iter().enumerate() {
            let slot = members.get_mut(l).ok_or(Error::LabelIndexOutOfRange {
                index: l as u32,
                classes: classes.len(),
            })?;
            slot.push(j);
        }
        if let Some(i) = members.iter().position(Vec::is_empty) {
            return Err(Error::EmptyClass(classes[i].clone()));
        }
        for mut col in points.column_iter_mut() {
            normalize_in_place(col.as_mut_slice())?;
        }
        Ok(LabeledEmbeddingSet {
            classes,
            points,
            labels,
            members,
        })
    }

    /// Concatenates per-class `d × n_i` matrices in the given class order.
    pub fn from_class_matrices<S: Into<String>>(parts: Vec<(S, DMatrix<f64>)>) -> Result<Self> {
        let d = parts.first().map(|(_, m)| m.nrows()).ok_or(Error::EmptyInput("no classes"))?;
        let n: usize = parts.iter().map(|(_, m)| m.ncols()).sum();
        let mut points = DMatrix::zeros(d, n);
        let mut labels = Vec::with_capacity(n);
        let mut classes = Vec::with_capacity(parts.len());
        let mut col = 0;
        for (i, (name, m)) in parts.into_iter().enumerate() {
            if m.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: m.nrows() });
            }
            points.columns_mut(col, m.ncols()).copy_from(&m);
            col += m.ncols();
            labels.extend(std::iter::repeat_n(i, m.ncols()));
            classes.push(name.into());
        }
        Self::new(classes, points, labels)
    }

    pub fn dim(&self) -> usize {
        self.points.nrows()
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// All points as columns, in input order.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn class_len(&self, i: usize) -> usize {
        self.members[i].len()
    }

    /// Column indices belonging to class `i`.
    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    /// `X_i` as a `d × n_i` matrix.
    pub fn class_matrix(&self, i: usize) -> DMatrix<f64> {
        self.points.select_columns(&self.members[i])
    }
}
