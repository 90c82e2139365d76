//! Synthetic datasets, each a pure function of its spec and seed.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{MercatError, Result};
use crate::rng;

const DOMAIN_DATAGEN: u64 = 16;
const CLUSTER_DIM: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Smiley,
    Circle,
    Unif5,
    Gauss5,
    Gauss10,
    Gauss5S,
    Gauss5D,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 7] = [
        DatasetKind::Smiley,
        DatasetKind::Circle,
        DatasetKind::Unif5,
        DatasetKind::Gauss5,
        DatasetKind::Gauss10,
        DatasetKind::Gauss5S,
        DatasetKind::Gauss5D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Smiley => "smiley",
            DatasetKind::Circle => "circle",
            DatasetKind::Unif5 => "unif5",
            DatasetKind::Gauss5 => "gauss5",
            DatasetKind::Gauss10 => "gauss10",
            DatasetKind::Gauss5S => "gauss5_s",
            DatasetKind::Gauss5D => "gauss5_d",
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            DatasetKind::Smiley => 3000,
            DatasetKind::Circle => 900,
            DatasetKind::Unif5 | DatasetKind::Gauss5 | DatasetKind::Gauss5D => 500,
            DatasetKind::Gauss10 => 1000,
            DatasetKind::Gauss5S => 750,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = MercatError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| MercatError::BadSpec(format!("unknown dataset kind '{s}'")))
    }
}

/// How the circle noise level is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScale {
    #[default]
    Variance,
    Std,
}

/// Mouth shape of the smiley.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MouthShape {
    /// `x = r cos t, y = -r sin t`: the lower half circle.
    #[default]
    Lower,
    /// `x = r sin t, y = -r cos t` taken verbatim: a right-facing arc.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Total sample count; per-kind default if unset.
    pub n: Option<usize>,
    pub seed: u64,
    /// Ambient dimension of the cluster datasets.
    pub dim: Option<usize>,
    pub circle_noise: f64,
    pub noise_scale: NoiseScale,
    pub mouth: MouthShape,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, seed: u64) -> Self {
        Self {
            kind,
            n: None,
            seed,
            dim: None,
            circle_noise: 0.01,
            noise_scale: NoiseScale::Variance,
            mouth: MouthShape::Lower,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(self.kind.default_n())
    }

    fn noise_std(&self) -> Result<f64> {
        if !(self.circle_noise >= 0.0 && self.circle_noise.is_finite()) {
            return Err(MercatError::BadSpec(format!(
                "noise level {}",
                self.circle_noise
            )));
        }
        Ok(match self.noise_scale {
            NoiseScale::Variance => self.circle_noise.sqrt(),
            NoiseScale::Std => self.circle_noise,
        })
    }
}

pub fn generate(spec: &DatasetSpec) -> Result<DataMatrix> {
    match spec.kind {
        DatasetKind::Smiley => gen_smiley_with(spec.n(), spec.seed, spec.mouth),
        DatasetKind::Circle => gen_circle_with(spec.n(), spec.seed, spec.noise_std()?),
        _ => gen_clusters(spec),
    }
}

fn stream(seed: u64, part: u64) -> ChaCha8Rng {
    rng::stream(seed, &[DOMAIN_DATAGEN, part])
}

pub fn gen_smiley(n: usize, seed: u64) -> Result<DataMatrix> {
    gen_smiley_with(n, seed, MouthShape::Lower)
}

pub fn gen_smiley_with(n: usize, seed: u64, mouth: MouthShape) -> Result<DataMatrix> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(MercatError::BadN {
            n,
            reason: "smiley needs a positive multiple of 4",
        });
    }
    let quarter = n / 4;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);

    let mut r = stream(seed, 0);
    for i in 0..quarter {
        let rad = 0.1 * r.random::<f64>().sqrt();
        let t = r.random_range(0.0..TAU);
        let dx = if i < quarter / 2 { 0.25 } else { -0.25 };
        rows.push(vec![rad * t.sin() + dx, rad * t.cos() + 0.25]);
        labels.push("eye");
    }
    let mut r = stream(seed, 1);
    for _ in 0..2 * quarter {
        let rad = r.random_range(0.81..=1.0f64).sqrt();
        let t = r.random_range(0.0..TAU);
        rows.push(vec![rad * t.sin(), rad * t.cos()]);
        labels.push("face");
    }
    let mut r = stream(seed, 2);
    for _ in 0..quarter {
        let rad = r.random_range(0.45f64 * 0.45..=0.55 * 0.55).sqrt();
        let t = r.random_range(0.0..PI);
        rows.push(match mouth {
            MouthShape::Lower => vec![rad * t.cos(), -rad * t.sin()],
            MouthShape::Literal => vec![rad * t.sin(), -rad * t.cos()],
        });
        labels.push("mouth");
    }
    for row in &mut rows {
        row[0] *= 2.0;
        row[1] *= 2.0;
    }
    DataMatrix::from_rows(&rows)?.with_labels(labels.into_iter().map(String::from).collect())
}

/// Radius-3 circle with i.i.d. Gaussian noise of the given standard
/// deviation on both coordinates.
pub fn gen_circle_with(n: usize, seed: u64, noise_std: f64) -> Result<DataMatrix> {
    if n < 3 {
        return Err(MercatError::BadN {
            n,
            reason: "need at least 3 points",
        });
    }
    let noise = Normal::new(0.0, noise_std).map_err(|e| MercatError::BadSpec(e.to_string()))?;
    let mut r = stream(seed, 0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let t = r.random_range(0.0..TAU);
            let (ex, ey) = (noise.sample(&mut r), noise.sample(&mut r));
            vec![3.0 * t.cos() + ex, 3.0 * t.sin() + ey]
        })
        .collect();
    DataMatrix::from_rows(&rows)
}

/// Circle with noise variance 0.01.
pub fn gen_circle(n: usize, seed: u64) -> Result<DataMatrix> {
    gen_circle_with(n, seed, 0.1)
}

enum ClusterShape {
    Uniform,
    /// Per-dimension std drawn from U(0.5, 2).
    RandomStd,
    /// Fixed per-cluster variance.
    Variance(f64),
}

fn cluster_sizes(spec: &DatasetSpec) -> Result<Vec<usize>> {
    let per = |k: usize| -> Result<Vec<usize>> {
        let n = spec.n();
        if n == 0 || !n.is_multiple_of(k) {
            return Err(MercatError::BadN {
                n,
                reason: "cluster datasets need a positive multiple of the cluster count",
            });
        }
        Ok(vec![n / k; k])
    };
    match spec.kind {
        DatasetKind::Unif5 | DatasetKind::Gauss5 | DatasetKind::Gauss5D => per(5),
        DatasetKind::Gauss10 => per(10),
        DatasetKind::Gauss5S => match spec.n {
            None | Some(750) => Ok(vec![50, 100, 150, 200, 250]),
            Some(n) => Err(MercatError::BadN {
                n,
                reason: "gauss5_s has fixed sizes summing to 750",
            }),
        },
        DatasetKind::Smiley | DatasetKind::Circle => Err(MercatError::BadSpec(format!(
            "{} is not a cluster dataset",
            spec.kind
        ))),
    }
}

pub fn gen_clusters(spec: &DatasetSpec) -> Result<DataMatrix> {
    let sizes = cluster_sizes(spec)?;
    let dim = spec.dim.unwrap_or(CLUSTER_DIM);
    if dim == 0 {
        return Err(MercatError::BadSpec("dimension must be positive".into()));
    }
    let mut rows = Vec::with_capacity(sizes.iter().sum());
    let mut labels = Vec::with_capacity(rows.capacity());
    for (c, &size) in sizes.iter().enumerate() {
        let shape = match spec.kind {
            DatasetKind::Unif5 => ClusterShape::Uniform,
            DatasetKind::Gauss5D => ClusterShape::Variance((c + 1) as f64),
            _ => ClusterShape::RandomStd,
        };
        let mut r = stream(spec.seed, 1 + c as u64);
        let center: Vec<f64> = (0..dim).map(|_| r.random_range(-10.0..10.0)).collect();
        let std: Vec<f64> = match shape {
            ClusterShape::Uniform => vec![0.0; dim],
            ClusterShape::RandomStd => (0..dim).map(|_| r.random_range(0.5..2.0)).collect(),
            ClusterShape::Variance(v) => vec![v.sqrt(); dim],
        };
        for _ in 0..size {
            let row = match shape {
                ClusterShape::Uniform => center.iter().map(|c| c + r.random::<f64>()).collect(),
                _ => center
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let z: f64 = r.sample(rand_distr::StandardNormal);
                        m + s * z
                    })
                    .collect(),
            };
            rows.push(row);
            labels.push(format!("cluster{}", c + 1));
        }
    }
    DataMatrix::from_rows(&rows)?.with_labels(labels)
}
