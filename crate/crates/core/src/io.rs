//! On-disk formats.
//!
//! Embedding files (`EMB1`):
//!
//! ```text
//! b"EMB1"
//! {"version":1,"d":D,"n":N,"dtype":"f32"|"f64","classes":[...],"labels_present":B}\n
//! N × u32 LE class indices          (only if labels_present)
//! N × D floats LE, row-major        (one embedding per row)
//! ```
//!
//! Subspace files (`PSS1`):
//!
//! ```text
//! b"PSS1"
//! {"version":1,"d":D,"k":K,"lambda":L,"class_name":S,"geometry":"sphere"|"euclidean","centered":B}\n
//! D × f64 LE base point             (sphere only)
//! D·K × f64 LE basis, column-major
//! K × f64 LE eigenvalues
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledEmbeddingSet;
use crate::error::{Error, Result};
use crate::solver::{Geometry, Subspace, Weighting};
use crate::sphere::UnitVector;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";
pub const SUBSPACE_MAGIC: &[u8; 4] = b"PSS1";
pub const FORMAT_VERSION: u32 = 1;
/// Rows whose norm is further than this from 1 are renormalized on read.
pub const NORM_WARN_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFileHeader {
    pub version: u32,
    pub d: usize,
    pub n: usize,
    pub dtype: Dtype,
    pub classes: Vec<String>,
    pub labels_present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFileHeader {
    pub version: u32,
    pub d: usize,
    pub k: usize,
    pub lambda: f64,
    pub class_name: String,
    pub geometry: Geometry,
    pub centered: bool,
    #[serde(default, skip_serializing_if = "is_balanced")]
    pub weighting: Weighting,
}

fn is_balanced(w: &Weighting) -> bool {
    *w == Weighting::Balanced
}

/// Contents of an embedding file, possibly unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dtype: Dtype,
    pub classes: Vec<String>,
    pub labels: Option<Vec<u32>>,
    /// `d × n`, one embedding per column.
    pub points: DMatrix<f64>,
}

impl EmbeddingFile {
    pub fn unlabeled(points: DMatrix<f64>, dtype: Dtype) -> Self {
        EmbeddingFile {
            dtype,
            classes: Vec::new(),
            labels: None,
            points,
        }
    }

    pub fn from_labeled(set: &LabeledEmbeddingSet, dtype: Dtype) -> Self {
        EmbeddingFile {
            dtype,
            classes: set.classes().to_vec(),
            labels: Some(set.labels().iter().map(|&l| l as u32).collect()),
            points: set.points().clone(),
        }
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

    pub fn header(&self) -> EmbeddingFileHeader {
        EmbeddingFileHeader {
            version: FORMAT_VERSION,
            d: self.dim(),
            n: self.len(),
            dtype: self.dtype,
            classes: self.classes.clone(),
            labels_present: self.labels.is_some(),
        }
    }

    /// Converts to a labeled set; fails on unlabeled files.
    pub fn into_labeled(self) -> Result<LabeledEmbeddingSet> {
        let labels = self
            .labels
            .ok_or_else(|| Error::LabelMismatch("embedding file carries no labels".into()))?;
        LabeledEmbeddingSet::new(self.classes, self.points, labels.into_iter().map(|l| l as usize).collect())
    }

    /// Class name of each column, if labeled.
    pub fn label_names(&self) -> Option<Vec<String>> {
        self.labels
            .as_ref()
            .map(|ls| ls.iter().map(|&l| self.classes[l as usize].clone()).collect())
    }
}

fn split_header<'a>(bytes: &'a [u8], magic: &'static [u8; 4], path: &Path) -> Result<(&'a str, &'a [u8])> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: std::str::from_utf8(magic).expect("ascii magic"),
        });
    }
    let rest = &bytes[4..];
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptHeader("header line is not terminated".into()))?;
    let line = std::str::from_utf8(&rest[..nl]).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    Ok((line, &rest[nl + 1..]))
}

fn check_len(payload: &[u8], expected: usize) -> Result<()> {
    match payload.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        }),
        std::cmp::Ordering::Greater => Err(Error::CorruptHeader(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        ))),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

fn read_floats(bytes: &[u8], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    }
}

fn push_floats(out: &mut Vec<u8>, values: &[f64], dtype: Dtype) {
    for &v in values {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

/// Parses an `EMB1` byte string. `path` is only used in error messages.
pub fn parse_embeddings(bytes: &[u8], path: &Path) -> Result<EmbeddingFile> {
    let (line, payload) = split_header(bytes, EMBEDDING_MAGIC, path)?;
    let header: EmbeddingFileHeader = serde_json::from_str(line).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::CorruptHeader(format!("unsupported version {}", header.version)));
    }
    if header.d < 2 || header.n == 0 {
        return Err(Error::CorruptHeader(format!("invalid shape d = {}, n = {}", header.d, header.n)));
    }
    if header.labels_present && header.classes.is_empty() {
        return Err(Error::CorruptHeader("labels present but class table empty".into()));
    }
    let label_bytes = if header.labels_present { 4 * header.n } else { 0 };
    let float_bytes = header
        .n
        .checked_mul(header.d)
        .and_then(|x| x.checked_mul(header.dtype.width()))
        .ok_or_else(|| Error::CorruptHeader("payload size overflows".into()))?;
    check_len(payload, label_bytes + float_bytes)?;
    let labels = if header.labels_present {
        let ls: Vec<u32> = payload[..label_bytes]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if let Some(&bad) = ls.iter().find(|&&l| l as usize >= header.classes.len()) {
            return Err(Error::LabelIndexOutOfRange {
                index: bad,
                classes: header.classes.len(),
            });
        }
        Some(ls)
    } else {
        None
    };
    let mut points = DMatrix::from_vec(header.d, header.n, read_floats(&payload[label_bytes..], header.dtype));
    let mut renormalized = 0usize;
    for mut col in points.column_iter_mut() {
        let n = col.norm();
        if (n - 1.0).abs() > NORM_WARN_TOL {
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroVector(n));
            }
            col /= n;
            renormalized += 1;
        }
    }
    if renormalized > 0 {
        log::warn!(
            "{}: renormalized {renormalized} embeddings whose norm deviated from 1 by more than {NORM_WARN_TOL}",
            path.display()
        );
    }
    Ok(EmbeddingFile {
        dtype: header.dtype,
        classes: header.classes,
        labels,
        points,
    })
}

/// Serializes an embedding file to bytes.
pub fn encode_embeddings(file: &EmbeddingFile) -> Result<Vec<u8>> {
    if let Some(ls) = &file.labels {
        if ls.len() != file.len() {
            return Err(Error::LabelMismatch(format!("{} labels for {} points", ls.len(), file.len())));
        }
        if let Some(&bad) = ls.iter().find(|&&l| l as usize >= file.classes.len()) {
            return Err(Error::LabelIndexOutOfRange {
                index: bad,
                classes: file.classes.len(),
            });
        }
    }
    let header = serde_json::to_string(&file.header()).expect("header serializes");
    let mut out = Vec::with_capacity(5 + header.len() + file.len() * (4 + file.dim() * file.dtype.width()));
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    if let Some(ls) = &file.labels {
        for l in ls {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    push_floats(&mut out, file.points.as_slice(), file.dtype);
    Ok(out)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes, path)
}

/// Reads an `EMB1` file that must carry labels.
pub fn read_labeled(path: impl AsRef<Path>) -> Result<LabeledEmbeddingSet> {
    read_embeddings(path)?.into_labeled()
}

pub fn write_embeddings(file: &EmbeddingFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_bytes(path, &encode_embeddings(file)?)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_subspace(sub: &Subspace) -> Vec<u8> {
    let header = SubspaceFileHeader {
        version: FORMAT_VERSION,
        d: sub.dim(),
        k: sub.k(),
        lambda: sub.lambda(),
        class_name: sub.class_name().to_string(),
        geometry: sub.geometry(),
        centered: sub.centered(),
        weighting: sub.weighting(),
    };
    let line = serde_json::to_string(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(SUBSPACE_MAGIC);
    out.extend_from_slice(line.as_bytes());
    out.push(b'\n');
    if let Some(mu) = sub.base_point() {
        push_floats(&mut out, mu.as_slice(), Dtype::F64);
    }
    push_floats(&mut out, sub.basis().as_slice(), Dtype::F64);
    push_floats(&mut out, sub.eigenvalues(), Dtype::F64);
    out
}

pub fn parse_subspace(bytes: &[u8], path: &Path) -> Result<Subspace> {
    let (line, payload) = split_header(bytes, SUBSPACE_MAGIC, path)?;
    let h: SubspaceFileHeader = serde_json::from_str(line).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    if h.version != FORMAT_VERSION {
        return Err(Error::CorruptHeader(format!("unsupported version {}", h.version)));
    }
    if h.k == 0 {
        return Err(Error::CorruptHeader("subspace has k = 0".into()));
    }
    if h.d < 2 || h.k > h.d {
        return Err(Error::CorruptHeader(format!("invalid shape d = {}, k = {}", h.d, h.k)));
    }
    let mu_len = if h.geometry == Geometry::Sphere { h.d } else { 0 };
    let expected = 8 * (mu_len + h.d * h.k + h.k);
    check_len(payload, expected)?;
    let floats = read_floats(payload, Dtype::F64);
    let (mu, rest) = floats.split_at(mu_len);
    let (w, eig) = rest.split_at(h.d * h.k);
    let base = if mu_len > 0 {
        Some(UnitVector::from_slice(mu).map_err(|e| Error::CorruptHeader(format!("base point: {e}")))?)
    } else {
        None
    };
    let basis = DMatrix::from_column_slice(h.d, h.k, w);
    Subspace::new(h.class_name, basis, base, h.geometry, h.lambda, eig.to_vec(), h.centered, h.weighting).map_err(|e| match e {
        Error::NotOrthonormal(_) => e,
        other => Error::CorruptHeader(other.to_string()),
    })
}

pub fn read_subspace(path: impl AsRef<Path>) -> Result<Subspace> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_subspace(&bytes, path)
}

pub fn write_subspace(sub: &Subspace, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_subspace(sub))
}

/// Reads a CSV with header `class,v0,...,v{d-1}` into a labeled `f64`
/// embedding file. Classes are numbered by first appearance.
pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings_csv(&text)
}

pub fn parse_embeddings_csv(text: &str) -> Result<EmbeddingFile> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::CorruptHeader("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"class") || cols.len() < 3 {
        return Err(Error::CorruptHeader("CSV header must be class,v0,...".into()));
    }
    let d = cols.len() - 1;
    let mut classes: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::CorruptHeader(format!("CSV row {} has {} fields, expected {}", row + 1, fields.len(), d + 1)));
        }
        let class = fields[0];
        let idx = match classes.iter().position(|c| c == class) {
            Some(i) => i,
            None => {
                classes.push(class.to_string());
                classes.len() - 1
            }
        };
        labels.push(idx as u32);
        for f in &fields[1..] {
            values.push(
                f.parse::<f64>()
                    .map_err(|e| Error::CorruptHeader(format!("CSV row {}: {e}", row + 1)))?,
            );
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("CSV has no rows"));
    }
    let mut points = DMatrix::from_vec(d, labels.len(), values);
    for mut col in points.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector(n));
        }
        if (n - 1.0).abs() > NORM_WARN_TOL {
            col /= n;
        }
    }
    Ok(EmbeddingFile {
        dtype: Dtype::F64,
        classes,
        labels: Some(labels),
        points,
    })
}

/// Non-empty trimmed lines of a word-list file.
pub fn read_wordlist(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// Drops every word (compared case-insensitively) that occurs in two or more
/// lists, and repeated words within a list. Order is preserved.
pub fn dedupe_wordlists(lists: &[(String, Vec<String>)]) -> Vec<(String, Vec<String>)> {
    let mut owners: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut shared: HashSet<String> = HashSet::new();
    for (i, (_, words)) in lists.iter().enumerate() {
        for w in words {
            let key = w.to_lowercase();
            match owners.get(&key) {
                Some(&o) if o != i => {
                    shared.insert(key);
                }
                Some(_) => {}
                None => {
                    owners.insert(key, i);
                }
            }
        }
    }
    lists
        .iter()
        .map(|(name, words)| {
            let mut seen = HashSet::new();
            let kept = words
                .iter()
                .filter(|w| {
                    let key = w.to_lowercase();
                    !shared.contains(&key) && seen.insert(key)
                })
                .cloned()
                .collect();
            (name.clone(), kept)
        })
        .collect()
}
