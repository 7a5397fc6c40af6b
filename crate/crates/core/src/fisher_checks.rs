//! Numerical checks of the Fisher-Rao geometry on densities over `[0, 1]^dim`:
//! the metric by quadrature, its square-root isometry, density-space geodesics
//! and a finite-dimensional harness for truncated geodesic flows.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kl_basis::{quadrature_grid, QuadratureGrid};
use crate::sphere_geometry::{geodesic_flow, project_to_tangent, SpherePoint};

/// Densities below this value at a quadrature node make the metric singular.
pub const DENSITY_FLOOR: f64 = 1e-12;
pub const DENSITY_MASS_TOL: f64 = 1e-6;
pub const TANGENT_MASS_TOL: f64 = 1e-8;

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A probability density on `[0, 1]^dim` together with the quadrature grid
/// used to integrate against it.
#[derive(Clone)]
pub struct DensityFunction {
    eval: Evaluator,
    grid: Arc<QuadratureGrid>,
    level: usize,
}

impl fmt::Debug for DensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityFunction")
            .field("dim", &self.grid.dim())
            .field("level", &self.level)
            .finish()
    }
}

impl DensityFunction {
    pub fn new(dim: usize, level: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::from_evaluator(dim, level, Arc::new(eval))
    }

    pub fn from_evaluator(dim: usize, level: usize, eval: Evaluator) -> Result<Self> {
        let grid = Arc::new(quadrature_grid(dim, level)?);
        for (k, x) in grid.nodes().enumerate() {
            let v = eval(x);
            if !v.is_finite() {
                return Err(Error::NonFinite("density value"));
            }
            if v < 0.0 {
                return Err(Error::Constraint(format!("density is negative ({v}) at node {k}")));
            }
        }
        let mass = grid.integrate(|x| eval(x));
        if (mass - 1.0).abs() > DENSITY_MASS_TOL {
            return Err(Error::Constraint(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self { eval, grid, level })
    }

    pub fn uniform(dim: usize, level: usize) -> Result<Self> {
        Self::new(dim, level, |_| 1.0)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Same density integrated at another quadrature level.
    pub fn with_level(&self, level: usize) -> Result<Self> {
        Self::from_evaluator(self.dim(), level, self.eval.clone())
    }

    fn check_positive(&self) -> Result<()> {
        for (node, x) in self.grid.nodes().enumerate() {
            let value = self.eval(x);
            if value < DENSITY_FLOOR {
                return Err(Error::SingularMetric { node, value });
            }
        }
        Ok(())
    }
}

/// A zero-mean perturbation direction at a density.
#[derive(Clone)]
pub struct TangentFunction {
    eval: Evaluator,
}

impl fmt::Debug for TangentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TangentFunction")
    }
}

impl TangentFunction {
    /// Checks `∫ f = 0` on the Gauss-Legendre grid of the given level.
    pub fn new(dim: usize, level: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let grid = quadrature_grid(dim, level)?;
        let mass = grid.integrate(&eval);
        if !mass.is_finite() {
            return Err(Error::NonFinite("tangent integral"));
        }
        if mass.abs() > TANGENT_MASS_TOL {
            return Err(Error::Constraint(format!("tangent function integrates to {mass}, not 0")));
        }
        Ok(Self { eval: Arc::new(eval) })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// `a * self`.
    pub fn scaled(&self, a: f64) -> Self {
        let eval = self.eval.clone();
        Self {
            eval: Arc::new(move |x| a * eval(x)),
        }
    }
}

/// `∫ phi psi / p` on the grid attached to `p`.
pub fn fisher_metric(p: &DensityFunction, phi: &TangentFunction, psi: &TangentFunction) -> Result<f64> {
    p.check_positive()?;
    Ok(p.grid.integrate(|x| phi.eval(x) * psi.eval(x) / p.eval(x)))
}

/// `⟨phi / sqrt p, psi / sqrt p⟩` in L², the inner product of the pushed
/// forward directions under `p -> sqrt p`.
pub fn sqrt_pushforward_inner(p: &DensityFunction, phi: &TangentFunction, psi: &TangentFunction) -> Result<f64> {
    p.check_positive()?;
    Ok(p.grid.integrate(|x| {
        let r = p.eval(x).sqrt();
        (phi.eval(x) / r) * (psi.eval(x) / r)
    }))
}

/// Gap between the metric and the L² inner product of the pushed forward
/// directions, both on the grid of `p`.
pub fn isometry_residual(p: &DensityFunction, phi: &TangentFunction, psi: &TangentFunction) -> Result<f64> {
    Ok((fisher_metric(p, phi, psi)? - sqrt_pushforward_inner(p, phi, psi)?).abs())
}

/// As [`isometry_residual`] with the L² side integrated at another level.
pub fn isometry_residual_across(
    p: &DensityFunction,
    phi: &TangentFunction,
    psi: &TangentFunction,
    other_level: usize,
) -> Result<f64> {
    let other = p.with_level(other_level)?;
    Ok((fisher_metric(p, phi, psi)? - sqrt_pushforward_inner(&other, phi, psi)?).abs())
}

/// Great circle through `sqrt p0` in the direction `f / (2 sqrt p0)`, scaled to
/// unit L² norm, squared back to a density at time `t`.
pub fn density_geodesic(p0: &DensityFunction, f: &TangentFunction, t: f64) -> Result<DensityFunction> {
    p0.check_positive()?;
    let direction = |x: &[f64]| f.eval(x) / (2.0 * p0.eval(x).sqrt());
    let norm = p0.grid.integrate(|x| direction(x).powi(2)).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Constraint("tangent direction has zero norm".into()));
    }
    let (s, c) = t.sin_cos();
    let p_eval = p0.eval.clone();
    let f_eval = f.eval.clone();
    let eval = move |x: &[f64]| {
        let root = p_eval(x).sqrt();
        let u = f_eval(x) / (2.0 * root * norm);
        let q = c * root + s * u;
        q * q
    };
    DensityFunction::new(p0.dim(), p0.level(), eval)
}

/// Settings for one truncated-flow comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub b_full: usize,
    pub truncation: usize,
    pub seed: u64,
    pub horizon: f64,
    pub time_points: usize,
    /// Coefficient `i` (1-based) has variance `i^-decay` before normalization.
    pub decay: f64,
    pub speed: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            b_full: 512,
            truncation: 10,
            seed: 0,
            horizon: 3.0,
            time_points: 201,
            decay: 2.2,
            speed: 1.0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation < 2 || self.truncation > self.b_full {
            return Err(Error::InvalidParameter(format!(
                "truncation {} must lie in [2, {}]",
                self.truncation, self.b_full
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter("time horizon must be positive".into()));
        }
        if self.time_points < 2 {
            return Err(Error::InvalidParameter("time grid needs at least 2 points".into()));
        }
        if !(self.speed > 0.0) || !self.speed.is_finite() {
            return Err(Error::InvalidParameter("speed must be positive".into()));
        }
        if !self.decay.is_finite() {
            return Err(Error::NonFinite("decay"));
        }
        Ok(())
    }
}

/// Outcome of one truncated-flow comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub truncation: usize,
    pub f0: f64,
    pub max_f: f64,
    pub integral_f: f64,
    pub bound_violations: usize,
    /// Largest `|f(t) - f(0)|` on the time grid.
    pub max_drift: f64,
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) {
        return Err(Error::DegenerateTruncation);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tangent_at(q: &[f64], w: &[f64], speed: f64) -> Result<Vec<f64>> {
    let d = dot(q, w);
    let v: Vec<f64> = w.iter().zip(q).map(|(w, q)| w - d * q).collect();
    Ok(unit(&v)?.into_iter().map(|x| speed * x).collect())
}

/// Position and velocity at time `t` along the great circle from `(q, v)`.
fn flow(q: &[f64], v: &[f64], speed: f64, t: f64) -> (Vec<f64>, Vec<f64>) {
    let (s, c) = (speed * t).sin_cos();
    let pos = q.iter().zip(v).map(|(q, v)| c * q + s * v / speed).collect();
    let vel = q.iter().zip(v).map(|(q, v)| -speed * s * q + c * v).collect();
    (pos, vel)
}

/// Random start on the sphere of dimension `b_full`: position and unit-speed
/// direction with independent Gaussian coefficients of variance `i^-decay`.
fn full_start(config: &TrialConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut draw = || -> Vec<f64> {
        (1..=config.b_full)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * (i as f64).powf(-config.decay / 2.0)
            })
            .collect()
    };
    let q = unit(&draw())?;
    let w = draw();
    let v = tangent_at(&q, &w, config.speed)?;
    Ok((q, v))
}

/// Truncates `(q, v)` to the first `k` coordinates, renormalizes the position,
/// projects the velocity onto the new tangent space and restores its speed.
/// The result is zero-padded back to the full dimension.
pub fn truncate_start(q: &[f64], v: &[f64], k: usize, speed: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut qi = unit(&q[..k])?;
    let mut vi = tangent_at(&qi, &v[..k], speed)?;
    qi.resize(q.len(), 0.0);
    vi.resize(v.len(), 0.0);
    Ok((qi, vi))
}

/// Flows the full and truncated starts side by side and measures
/// `f(t) = |q(t) - q_I(t)|² + |q'(t) - q_I'(t)|²` on the time grid.
pub fn geodesic_convergence_trial(config: &TrialConfig) -> Result<TrialReport> {
    config.validate()?;
    let (q, v) = full_start(config)?;
    let (qi, vi) = truncate_start(&q, &v, config.truncation, config.speed)?;
    let n = config.time_points;
    let dt = config.horizon / (n - 1) as f64;
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let f: Vec<f64> = (0..n)
        .map(|j| {
            let t = j as f64 * dt;
            let (p1, v1) = flow(&q, &v, config.speed, t);
            let (p2, v2) = flow(&qi, &vi, config.speed, t);
            gap(&p1, &p2) + gap(&v1, &v2)
        })
        .collect();
    let f0 = f[0];
    let growth = 1.0 - config.speed * config.speed;
    let bound_violations = f
        .iter()
        .enumerate()
        .filter(|(j, fj)| **fj > f0 * (*j as f64 * dt * growth).exp() + 1e-9)
        .count();
    let integral_f = dt * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]));
    Ok(TrialReport {
        truncation: config.truncation,
        f0,
        max_f: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        integral_f,
        bound_violations,
        max_drift: f.iter().map(|x| (x - f0).abs()).fold(0.0, f64::max),
    })
}

/// One trial per truncation level, all from the same seeded start.
pub fn convergence_table(base: &TrialConfig, truncations: &[usize]) -> Result<Vec<TrialReport>> {
    truncations
        .par_iter()
        .map(|&k| {
            geodesic_convergence_trial(&TrialConfig {
                truncation: k,
                ..base.clone()
            })
        })
        .collect()
}

/// Whether `integral_f` strictly decreases along the table.
pub fn is_monotone_decreasing(table: &[TrialReport]) -> bool {
    table.windows(2).all(|w| w[1].integral_f < w[0].integral_f)
}

/// Largest deviation of `|q(t)|` from 1 and of `|q'(t)|` from the initial
/// speed along the great-circle flow of a random start in dimension `dim`,
/// over `points` equispaced times in `[0, horizon]`.
pub fn geodesic_conservation(dim: usize, seed: u64, horizon: f64, points: usize) -> Result<(f64, f64)> {
    if dim < 2 || points < 2 {
        return Err(Error::InvalidParameter("need dim >= 2 and at least 2 time points".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut gauss = |n: usize| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let q = SpherePoint::normalize(gauss(dim))?;
    let v = project_to_tangent(&q, &gauss(dim));
    let speed = v.norm();
    let (mut norm_err, mut speed_err) = (0.0f64, 0.0f64);
    for j in 0..points {
        let t = horizon * j as f64 / (points - 1) as f64;
        let (qt, vt) = geodesic_flow(&q, &v, t);
        norm_err = norm_err.max((qt.coords().norm() - 1.0).abs());
        speed_err = speed_err.max((vt.norm() - speed).abs());
    }
    Ok((norm_err, speed_err))
}
