//! Observed point sets, their affine map into the unit domain, CSV ingestion
//! and the synthetic generators used by the bundled experiments.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kl_basis::check_in_domain;

/// Padding applied to both ends of every axis when rescaling raw data.
pub const RESCALE_PADDING: f64 = 1e-6;

/// Per-axis affine map `raw = offset + scale * unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn to_raw(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(u, (o, s))| o + s * u)
            .collect()
    }

    pub fn to_unit(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(r, (o, s))| (r - o) / s)
            .collect()
    }

    /// Product of the scales: multiply a unit-domain measure by this to get raw measure.
    pub fn jacobian(&self) -> f64 {
        self.scale.iter().product()
    }
}

/// Points in `[0, 1]^dim`, stored row-major, with the map back to raw coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    rescale: AffineMap,
    raw_bounds: Vec<(f64, f64)>,
}

impl Dataset {
    /// Wraps points that already live in the unit domain (identity rescale).
    pub fn from_unit_points(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        for (row, x) in points.chunks_exact(dim).enumerate() {
            check_in_domain(x).map_err(|e| Error::Row {
                row,
                source: Box::new(e),
            })?;
        }
        let raw_bounds = bounds(dim, &points).unwrap_or_else(|| vec![(0.0, 1.0); dim]);
        Ok(Self {
            dim,
            points,
            rescale: AffineMap::identity(dim),
            raw_bounds,
        })
    }

    /// Maps raw points affinely onto `[RESCALE_PADDING, 1 - RESCALE_PADDING]` per axis.
    pub fn from_raw_points(dim: usize, raw: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        let n = raw.len() / dim;
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("raw data"));
        }
        let raw_bounds = bounds(dim, &raw).expect("non-empty");
        let mut offset = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        for (axis, &(lo, hi)) in raw_bounds.iter().enumerate() {
            if !(hi > lo) {
                return Err(Error::InvalidParameter(format!(
                    "axis {axis} has zero spread; cannot rescale"
                )));
            }
            let s = (hi - lo) / (1.0 - 2.0 * RESCALE_PADDING);
            scale.push(s);
            offset.push(lo - RESCALE_PADDING * s);
        }
        let rescale = AffineMap { offset, scale };
        let mut points = Vec::with_capacity(raw.len());
        for x in raw.chunks_exact(dim) {
            points.extend(rescale.to_unit(x).into_iter().map(|u| u.clamp(0.0, 1.0)));
        }
        Ok(Self {
            dim,
            points,
            rescale,
            raw_bounds,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn rescale(&self) -> &AffineMap {
        &self.rescale
    }

    pub fn raw_bounds(&self) -> &[(f64, f64)] {
        &self.raw_bounds
    }

    /// The points in raw coordinates.
    pub fn raw_points(&self) -> Vec<Vec<f64>> {
        self.points().map(|x| self.rescale.to_raw(x)).collect()
    }

    /// Reorders points by `perm` (`new[i] = old[perm[i]]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut points = Vec::with_capacity(self.points.len());
        for &i in perm {
            points.extend_from_slice(self.point(i));
        }
        Self {
            points,
            ..self.clone()
        }
    }
}

fn bounds(dim: usize, flat: &[f64]) -> Option<Vec<(f64, f64)>> {
    if flat.is_empty() {
        return None;
    }
    let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    for x in flat.chunks_exact(dim) {
        for (axis, &v) in x.iter().enumerate() {
            b[axis].0 = b[axis].0.min(v);
            b[axis].1 = b[axis].1.max(v);
        }
    }
    Some(b)
}

/// Reads `dim` numeric columns from a CSV file. A non-numeric first row is
/// treated as a header. Extra columns are ignored.
pub fn ingest_csv(path: impl AsRef<Path>, dim: usize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut raw = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            (0..dim).map(|c| record.get(c).unwrap_or("").parse::<f64>()).collect();
        if row == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        for (column, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => raw.push(v),
                _ => {
                    return Err(Error::Parse {
                        row,
                        column,
                        message: format!("not a finite number: {:?}", record.get(column).unwrap_or("")),
                    })
                }
            }
        }
    }
    Dataset::from_raw_points(dim, raw)
}

/// One component of a truncated Gaussian mixture on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub sd: [f64; 2],
}

/// Synthetic data recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Synthetic {
    /// Beta(a, b) on the unit interval.
    Beta { a: f64, b: f64 },
    /// Mixture of axis-aligned Gaussians truncated to the unit square.
    #[serde(rename = "trunc_gauss_mixture_2d")]
    TruncGaussMixture2d { components: Vec<GaussComponent> },
    /// Uniform angle on a circle, radius perturbed by Gaussian noise,
    /// rejected outside the unit square.
    #[serde(rename = "noisy_circle_2d")]
    NoisyCircle2d {
        center: [f64; 2],
        radius: f64,
        noise: f64,
    },
    /// Clustered pattern on the unit square: Poisson-many parents, Gaussian
    /// offspring around each, rejected outside the square. Stands in for
    /// field survey data such as plant locations.
    #[serde(rename = "cluster_2d")]
    Cluster2d {
        parents: usize,
        spread: f64,
    },
}

impl Synthetic {
    pub fn dim(&self) -> usize {
        match self {
            Synthetic::Beta { .. } => 1,
            _ => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            Synthetic::Beta { a, b } => {
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return bad(format!("beta parameters must be positive, got ({a}, {b})"));
                }
            }
            Synthetic::TruncGaussMixture2d { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                for c in components {
                    if !(c.weight > 0.0 && c.sd[0] > 0.0 && c.sd[1] > 0.0) {
                        return bad(format!("invalid mixture component {c:?}"));
                    }
                }
            }
            Synthetic::NoisyCircle2d { radius, noise, center } => {
                if !(*radius > 0.0 && *noise >= 0.0) || center.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return bad("circle needs positive radius, non-negative noise, centre in the square".into());
                }
            }
            Synthetic::Cluster2d { parents, spread } => {
                if *parents == 0 || !(*spread > 0.0) {
                    return bad("cluster pattern needs parents > 0 and spread > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Default mixture used for the two-dimensional examples.
    pub fn default_mixture() -> Self {
        Synthetic::TruncGaussMixture2d {
            components: vec![
                GaussComponent {
                    weight: 0.5,
                    mean: [0.3, 0.3],
                    sd: [0.1, 0.12],
                },
                GaussComponent {
                    weight: 0.3,
                    mean: [0.72, 0.65],
                    sd: [0.08, 0.1],
                },
                GaussComponent {
                    weight: 0.2,
                    mean: [0.3, 0.8],
                    sd: [0.12, 0.06],
                },
            ],
        }
    }
}

const MAX_REJECTIONS: usize = 1_000_000;

/// Draws `n` i.i.d. points from a synthetic recipe; deterministic in `seed`.
pub fn generate_synthetic(recipe: &Synthetic, n: usize, seed: u64) -> Result<Dataset> {
    recipe.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n * recipe.dim());
    match recipe {
        Synthetic::Beta { a, b } => {
            let dist = Beta::new(*a, *b).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for _ in 0..n {
                pts.push(dist.sample(&mut rng));
            }
        }
        Synthetic::TruncGaussMixture2d { components } => {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            for _ in 0..n {
                let mut u = rng.random::<f64>() * total;
                let mut comp = &components[components.len() - 1];
                for c in components {
                    if u < c.weight {
                        comp = c;
                        break;
                    }
                    u -= c.weight;
                }
                let p = reject_into_square(&mut rng, |rng| {
                    [
                        comp.mean[0] + comp.sd[0] * rng.sample::<f64, _>(rand_distr::StandardNormal),
                        comp.mean[1] + comp.sd[1] * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    ]
                })?;
                pts.extend_from_slice(&p);
            }
        }
        Synthetic::NoisyCircle2d { center, radius, noise } => {
            let normal = Normal::new(0.0, *noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for _ in 0..n {
                let p = reject_into_square(&mut rng, |rng| {
                    let theta = 2.0 * PI * rng.random::<f64>();
                    let r = radius + normal.sample(rng);
                    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
                })?;
                pts.extend_from_slice(&p);
            }
        }
        Synthetic::Cluster2d { parents, spread } => {
            let centres: Vec<[f64; 2]> = (0..*parents).map(|_| [rng.random(), rng.random()]).collect();
            for _ in 0..n {
                let c = centres[rng.random_range(0..centres.len())];
                let p = reject_into_square(&mut rng, |rng| {
                    [
                        c[0] + spread * rng.sample::<f64, _>(rand_distr::StandardNormal),
                        c[1] + spread * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    ]
                })?;
                pts.extend_from_slice(&p);
            }
        }
    }
    Dataset::from_unit_points(recipe.dim(), pts)
}

fn reject_into_square<R: Rng>(rng: &mut R, mut draw: impl FnMut(&mut R) -> [f64; 2]) -> Result<[f64; 2]> {
    for _ in 0..MAX_REJECTIONS {
        let p = draw(rng);
        if p.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Ok(p);
        }
    }
    Err(Error::InvalidParameter(
        "recipe places almost no mass inside the unit square".into(),
    ))
}
