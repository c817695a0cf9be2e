//! Synthetic data on the sphere: von Mises–Fisher samples, classes planted
//! in disjoint geodesic submanifolds, and a two-class contrast fixture.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::dataset::LabeledEmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::solver::{Geometry, Subspace, Weighting};
use crate::sphere::{self, UnitVector};

/// Deterministic generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Uniformly random point on S^{d-1}.
pub fn uniform_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> UnitVector {
    loop {
        let g = gaussian_vector(rng, d);
        if let Ok(u) = UnitVector::new(g) {
            return u;
        }
    }
}

/// Random `d × k` matrix with orthonormal columns (Gram-Schmidt of a
/// Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, k, |_, _| rng.sample(StandardNormal));
    linalg::orthonormalize(&g)
}

/// Cosine to the mean direction, drawn with Wood's rejection scheme.
struct RadialSampler {
    kappa: f64,
    m1: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl RadialSampler {
    fn new(d: usize, kappa: f64) -> Self {
        let m1 = (d - 1) as f64;
        // b = (−2κ + √(4κ² + m1²)) / m1, written without cancellation
        let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(m1 / 2.0, m1 / 2.0).expect("positive shape");
        RadialSampler { kappa, m1, b, x0, c, beta }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let z = self.beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + self.m1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return w;
            }
        }
    }
}

fn vmf_point<R: Rng + ?Sized>(rng: &mut R, mu: &DVector<f64>, radial: &RadialSampler) -> DVector<f64> {
    let w = radial.sample(rng).clamp(-1.0, 1.0);
    let v = loop {
        let mut g = gaussian_vector(rng, mu.len());
        let along = g.dot(mu);
        g.axpy(-along, mu, 1.0);
        let n = g.norm();
        if n > 1e-12 {
            break g / n;
        }
    };
    let mut x = mu * w + v * (1.0 - w * w).max(0.0).sqrt();
    // |x| = 1 up to rounding; the 1e-14 rule keeps exact unit vectors
    sphere::normalize_in_place(x.as_mut_slice()).expect("unit combination");
    x
}

/// `n` samples from the von Mises–Fisher distribution with the given mean
/// direction and concentration, as columns. Deterministic per seed.
pub fn sample_vmf(mean_direction: &UnitVector, concentration: f64, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut r = rng(seed);
    sample_vmf_with(&mut r, mean_direction, concentration, n)
}

pub fn sample_vmf_with<R: Rng + ?Sized>(rng: &mut R, mean_direction: &UnitVector, concentration: f64, n: usize) -> Result<DMatrix<f64>> {
    if !concentration.is_finite() || concentration < 0.0 {
        return Err(Error::InvalidConcentration(concentration));
    }
    let d = mean_direction.dim();
    let radial = RadialSampler::new(d, concentration);
    let mut out = DMatrix::zeros(d, n);
    for j in 0..n {
        let x = vmf_point(rng, mean_direction.as_vector(), &radial);
        out.set_column(j, &x);
    }
    Ok(out)
}

/// Settings for [`planted_classes`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub classes: usize,
    pub n_per_class: usize,
    pub d: usize,
    pub kappa: f64,
    pub planted_k: usize,
    pub seed: u64,
    /// Isotropic jitter concentration as a multiple of `kappa`; 0 disables it.
    pub jitter_scale: f64,
}

impl PlantedConfig {
    pub fn new(classes: usize, n_per_class: usize, d: usize, kappa: f64, planted_k: usize, seed: u64) -> Self {
        PlantedConfig {
            classes,
            n_per_class,
            d,
            kappa,
            planted_k,
            seed,
            jitter_scale: 100.0,
        }
    }
}

/// Labeled points plus the ground truth they were generated from.
#[derive(Debug, Clone)]
pub struct PlantedData {
    pub set: LabeledEmbeddingSet,
    pub mean: UnitVector,
    /// Planted tangent basis of each class, `d × planted_k`.
    pub bases: Vec<DMatrix<f64>>,
}

impl PlantedData {
    /// Ground-truth bases as sphere subspaces at the planted mean
    /// (eigenvalues are zero placeholders).
    pub fn subspaces(&self) -> Result<Vec<Subspace>> {
        self.bases
            .iter()
            .zip(self.set.classes())
            .map(|(b, name)| {
                Subspace::new(
                    name.clone(),
                    b.clone(),
                    Some(self.mean.clone()),
                    Geometry::Sphere,
                    0.0,
                    vec![0.0; b.ncols()],
                    false,
                    Weighting::Balanced,
                )
            })
            .collect()
    }
}

/// Classes `c0, c1, ...` that vary only inside disjoint `planted_k`-dimensional
/// tangent subspaces around a shared random mean.
///
/// Each point is a vMF(κ) draw on the (planted_k)-sphere spanned by the mean
/// and the class basis, followed by a small isotropic jitter (tangent
/// Gaussian with per-coordinate variance `1 / (jitter_scale · κ)`).
pub fn planted_classes(cfg: &PlantedConfig) -> Result<PlantedData> {
    let PlantedConfig {
        classes,
        n_per_class,
        d,
        kappa,
        planted_k,
        seed,
        jitter_scale,
    } = *cfg;
    if classes == 0 || n_per_class == 0 || planted_k == 0 {
        return Err(Error::InvalidArgument("classes, n and planted-k must be positive".into()));
    }
    if 1 + classes * planted_k > d {
        return Err(Error::InvalidArgument(format!(
            "{classes} classes × planted-k {planted_k} do not fit in the {}-dimensional tangent space",
            d.saturating_sub(1)
        )));
    }
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::InvalidConcentration(kappa));
    }
    let mut r = rng(seed);
    let mean = uniform_unit(&mut r, d);
    let mut frame = DMatrix::zeros(d, 1 + classes * planted_k);
    frame.set_column(0, mean.as_vector());
    frame
        .columns_mut(1, classes * planted_k)
        .copy_from(&DMatrix::from_fn(d, classes * planted_k, |_, _| r.sample(StandardNormal)));
    let frame = linalg::orthonormalize(&frame);
    let bases: Vec<DMatrix<f64>> = (0..classes)
        .map(|c| frame.columns(1 + c * planted_k, planted_k).into_owned())
        .collect();

    let local_pole = UnitVector::basis(planted_k + 1, 0)?;
    let radial = RadialSampler::new(planted_k + 1, kappa);
    let jitter_sd = if jitter_scale > 0.0 && kappa > 0.0 {
        Some((1.0 / (jitter_scale * kappa)).sqrt())
    } else {
        None
    };
    let mut points = DMatrix::zeros(d, classes * n_per_class);
    let mut labels = Vec::with_capacity(classes * n_per_class);
    let mut buf = DVector::zeros(d);
    for (c, basis) in bases.iter().enumerate() {
        for i in 0..n_per_class {
            let local = vmf_point(&mut r, local_pole.as_vector(), &radial);
            let mut x = mean.as_vector() * local[0] + basis * local.rows(1, planted_k);
            sphere::normalize_in_place(x.as_mut_slice())?;
            if let Some(sd) = jitter_sd {
                let mut t = gaussian_vector(&mut r, d) * sd;
                let along = t.dot(&x);
                t.axpy(-along, &x, 1.0);
                let n = t.norm();
                if n >= 3.0 {
                    t *= 3.0 / n;
                }
                sphere::exp_into(x.as_slice(), t.as_slice(), buf.as_mut_slice());
                x.copy_from(&buf);
            }
            points.set_column(c * n_per_class + i, &x);
            labels.push(c);
        }
    }
    let names = (0..classes).map(|c| format!("c{c}")).collect();
    let set = LabeledEmbeddingSet::new(names, points, labels)?;
    Ok(PlantedData { set, mean, bases })
}

/// Two classes near the pole `e_3` of S²: `blue` spreads widely along a
/// direction tilted 20° from `e_1` and sits at `+y`; `red` spreads along `e_2`
/// and sits at `−y`. The blue spread direction separates the classes' variance
/// while the class means differ along `e_2`.
pub fn contrast_pair_fixture(n_per_class: usize, seed: u64) -> Result<LabeledEmbeddingSet> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut r = rng(seed);
    let pole = UnitVector::basis(3, 2)?;
    let a = 0.1;
    let tilt = 20f64.to_radians();
    let (st, ct) = tilt.sin_cos();
    let mut make = |major: (f64, f64), minor: (f64, f64), offset: (f64, f64)| -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(3, n_per_class);
        for j in 0..n_per_class {
            let s: f64 = r.sample(StandardNormal);
            let t: f64 = r.sample(StandardNormal);
            let x = offset.0 + 3.0 * a * s * major.0 + 0.3 * a * t * minor.0;
            let y = offset.1 + 3.0 * a * s * major.1 + 0.3 * a * t * minor.1;
            let v = sphere::TangentVector::new(pole.clone(), DVector::from_vec(vec![x, y, 0.0]))?;
            m.set_column(j, sphere::exp_map(&v)?.as_vector());
        }
        Ok(m)
    };
    let blue = make((ct, st), (-st, ct), (0.0, 1.5 * a))?;
    let red = make((0.0, 1.0), (1.0, 0.0), (0.0, -1.5 * a))?;
    LabeledEmbeddingSet::from_class_matrices(vec![("blue", blue), ("red", red)])
}
