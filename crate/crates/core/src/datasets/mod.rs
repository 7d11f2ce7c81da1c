//! Point-cloud containers, synthetic benchmark manifolds and CSV I/O.
//!
//! Every generator draws from a [`ChaCha12Rng`] seeded with the 64-bit
//! `seed` of its [`GenSpec`]. ChaCha is a portable stream cipher, so the same
//! spec yields bit-identical coordinates on every platform. Samples are
//! computed in `f64` and converted to the target scalar at the end.

mod csv;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CamlError, Result};
use crate::scalar::{lit, Real};

pub use self::csv::{load_csv, parse_csv, save_csv, write_atomic, write_matrix_csv};

/// N×D point matrix with optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet<T: Real> {
    /// One point per row.
    pub points: DMatrix<T>,
    pub labels: Option<Vec<i64>>,
    pub name: String,
    /// Generator parameters (N×2) kept for diagnostics only; no algorithm
    /// reads this field.
    pub latent: Option<DMatrix<T>>,
}

impl<T: Real> DataSet<T> {
    pub fn new(points: DMatrix<T>, labels: Option<Vec<i64>>, name: impl Into<String>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(CamlError::invalid(format!(
                "data set must have N >= 1 and D >= 1 (got {}x{})",
                points.nrows(),
                points.ncols()
            )));
        }
        if let Some((idx, _)) = points.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let n = points.nrows();
            return Err(CamlError::invalid(format!(
                "non-finite coordinate at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(CamlError::invalid(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.nrows()
                )));
            }
        }
        Ok(DataSet {
            points,
            labels,
            name: name.into(),
            latent: None,
        })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    #[inline]
    pub fn dist2(&self, i: usize, j: usize) -> T {
        let mut s = T::zero();
        for c in 0..self.points.ncols() {
            let d = self.points[(i, c)] - self.points[(j, c)];
            s += d * d;
        }
        s
    }

    /// Applies `f` to every coordinate, keeping labels and latent metadata.
    pub fn map_points(&self, f: impl Fn(T) -> T) -> Self {
        DataSet {
            points: self.points.map(&f),
            labels: self.labels.clone(),
            name: self.name.clone(),
            latent: self.latent.clone(),
        }
    }
}

/// Synthetic manifold family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    SwissRoll,
    PuncturedSphere,
    TwinPeaks,
    Gaussian,
    /// Oracle surface: full sphere (param: radius, default 1).
    UnitSphere,
    /// Oracle surface z = a x² + b y² + c x y (params: a, b, c).
    Paraboloid,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 6] = [
        ManifoldKind::SwissRoll,
        ManifoldKind::PuncturedSphere,
        ManifoldKind::TwinPeaks,
        ManifoldKind::Gaussian,
        ManifoldKind::UnitSphere,
        ManifoldKind::Paraboloid,
    ];

    /// The four benchmark manifolds (not the oracle surfaces).
    pub const BENCHMARKS: [ManifoldKind; 4] = [
        ManifoldKind::SwissRoll,
        ManifoldKind::PuncturedSphere,
        ManifoldKind::TwinPeaks,
        ManifoldKind::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::SwissRoll => "swiss-roll",
            ManifoldKind::PuncturedSphere => "punctured-sphere",
            ManifoldKind::TwinPeaks => "twin-peaks",
            ManifoldKind::Gaussian => "gaussian",
            ManifoldKind::UnitSphere => "unit-sphere",
            ManifoldKind::Paraboloid => "paraboloid",
        }
    }

    /// Defaults for the kind-specific parameter vector.
    pub fn default_params(self) -> &'static [f64] {
        match self {
            ManifoldKind::SwissRoll | ManifoldKind::TwinPeaks => &[],
            // largest polar angle, as a fraction of pi
            ManifoldKind::PuncturedSphere => &[0.9],
            // variance of the bump
            ManifoldKind::Gaussian => &[0.25],
            ManifoldKind::UnitSphere => &[1.0],
            ManifoldKind::Paraboloid => &[1.0, 1.0, 0.0],
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = CamlError;

    fn from_str(s: &str) -> Result<Self> {
        ManifoldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CamlError::UnknownKind(s.to_string()))
    }
}

/// Full description of a synthetic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: ManifoldKind,
    pub n: usize,
    /// Standard deviation of isotropic Gaussian noise added to each coordinate.
    pub noise: f64,
    pub seed: u64,
    /// Kind-specific parameters; missing trailing entries take the defaults
    /// from [`ManifoldKind::default_params`].
    pub params: Vec<f64>,
}

impl GenSpec {
    pub fn new(kind: ManifoldKind, n: usize, seed: u64) -> Self {
        GenSpec {
            kind,
            n,
            noise: 0.0,
            seed,
            params: Vec::new(),
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parameter vector with defaults filled in.
    pub fn resolved_params(&self) -> Vec<f64> {
        let defaults = self.kind.default_params();
        let mut p = defaults.to_vec();
        for (slot, v) in p.iter_mut().zip(&self.params) {
            *slot = *v;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CamlError::invalid("point count n must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CamlError::invalid(format!("noise must be >= 0 (got {})", self.noise)));
        }
        let max = self.kind.default_params().len();
        if self.params.len() > max {
            return Err(CamlError::invalid(format!(
                "{} takes at most {} parameters (got {})",
                self.kind,
                max,
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(CamlError::invalid("parameters must be finite"));
        }
        let p = self.resolved_params();
        match self.kind {
            ManifoldKind::PuncturedSphere if !(p[0] > 0.0 && p[0] <= 1.0) => {
                Err(CamlError::invalid("punctured-sphere polar fraction must be in (0, 1]"))
            }
            ManifoldKind::Gaussian if p[0] <= 0.0 => Err(CamlError::invalid("gaussian variance must be positive")),
            ManifoldKind::UnitSphere if p[0] <= 0.0 => Err(CamlError::invalid("sphere radius must be positive")),
            _ => Ok(()),
        }
    }
}

/// Draws the 2-D latent parameters of one sample.
fn draw_latent(kind: ManifoldKind, params: &[f64], rng: &mut ChaCha12Rng) -> [f64; 2] {
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    match kind {
        ManifoldKind::SwissRoll => [1.5 * PI * (1.0 + 2.0 * r1), 21.0 * r2],
        ManifoldKind::PuncturedSphere => [params[0] * PI * r1, 2.0 * PI * r2],
        ManifoldKind::UnitSphere => [(1.0 - 2.0 * r1).acos(), 2.0 * PI * r2],
        ManifoldKind::TwinPeaks | ManifoldKind::Gaussian => [2.0 * r1 - 1.0, 2.0 * r2 - 1.0],
        ManifoldKind::Paraboloid => [r1 - 0.5, r2 - 0.5],
    }
}

/// Noiseless embedding of the latent parameters in ℝ³.
pub fn surface_point(kind: ManifoldKind, params: &[f64], latent: [f64; 2]) -> [f64; 3] {
    let [s, t] = latent;
    match kind {
        ManifoldKind::SwissRoll => [s * s.cos(), t, s * s.sin()],
        ManifoldKind::PuncturedSphere => [s.sin() * t.cos(), s.sin() * t.sin(), s.cos()],
        ManifoldKind::UnitSphere => {
            let r = params[0];
            [r * s.sin() * t.cos(), r * s.sin() * t.sin(), r * s.cos()]
        }
        ManifoldKind::TwinPeaks => [s, t, (PI * s).sin() * (3.0 * t).tanh()],
        ManifoldKind::Gaussian => [s, t, (-(s * s + t * t) / (2.0 * params[0])).exp()],
        ManifoldKind::Paraboloid => {
            let (a, b, c) = (params[0], params[1], params[2]);
            [s, t, a * s * s + b * t * t + c * s * t]
        }
    }
}

/// Samples a synthetic manifold. Deterministic in `spec`.
pub fn generate<T: Real>(spec: &GenSpec) -> Result<DataSet<T>> {
    spec.validate()?;
    let params = spec.resolved_params();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut points = DMatrix::<T>::zeros(spec.n, 3);
    let mut latent = DMatrix::<T>::zeros(spec.n, 2);
    for i in 0..spec.n {
        let z = draw_latent(spec.kind, &params, &mut rng);
        let mut x = surface_point(spec.kind, &params, z);
        if spec.noise > 0.0 {
            for c in x.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *c += spec.noise * e;
            }
        }
        for c in 0..3 {
            points[(i, c)] = lit(x[c]);
        }
        latent[(i, 0)] = lit(z[0]);
        latent[(i, 1)] = lit(z[1]);
    }
    let mut ds = DataSet::new(points, None, spec.kind.name())?;
    ds.latent = Some(latent);
    Ok(ds)
}

/// Two labeled isotropic Gaussian blobs in ℝ^dim, centered at
/// `±separation/2` along the first axis. Labels are 0 and 1; rows are
/// interleaved (0, 1, 0, 1, ...).
pub fn two_blobs<T: Real>(n_per_class: usize, dim: usize, separation: f64, spread: f64, seed: u64) -> Result<DataSet<T>> {
    if n_per_class == 0 || dim == 0 {
        return Err(CamlError::invalid("two_blobs needs n_per_class >= 1 and dim >= 1"));
    }
    if !(spread >= 0.0) {
        return Err(CamlError::invalid("spread must be >= 0"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let mut points = DMatrix::<T>::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 2) as i64;
        let offset = if class == 0 { -0.5 * separation } else { 0.5 * separation };
        for c in 0..dim {
            let e: f64 = StandardNormal.sample(&mut rng);
            let center = if c == 0 { offset } else { 0.0 };
            points[(i, c)] = lit(center + spread * e);
        }
        labels.push(class);
    }
    DataSet::new(points, Some(labels), "two-blobs")
}
