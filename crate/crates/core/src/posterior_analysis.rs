//! Density grids, pointwise posterior summaries and posterior predictive draws.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kl_basis::{sup_bound, BasisSpec};
use crate::spherical_hmc::Chain;

/// Default quantile levels for summaries.
pub const DEFAULT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];
pub const DEFAULT_GRID_1D: usize = 512;
pub const DEFAULT_GRID_2D: usize = 128;

/// Uniform grid over `[0, 1]^dim`, endpoints included, with trapezoid weights.
///
/// The trapezoid rule on `m` points integrates `cos(pi k x)` exactly for
/// `k < 2(m - 1)`, so for squared cosine expansions of moderate degree grid
/// integrals are exact up to round-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    dim: usize,
    per_axis: usize,
}

impl UniformGrid {
    pub fn new(dim: usize, per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if per_axis < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
        }
        Ok(Self { dim, per_axis })
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        Self::new(dim, if dim == 1 { DEFAULT_GRID_1D } else { DEFAULT_GRID_2D })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn coord(&self, i: usize) -> f64 {
        i as f64 / (self.per_axis - 1) as f64
    }

    /// Node `k`; in 2D the first coordinate varies slowest.
    pub fn node(&self, k: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.coord(k)],
            _ => vec![self.coord(k / self.per_axis), self.coord(k % self.per_axis)],
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        let h = 1.0 / (self.per_axis - 1) as f64;
        let axis = |i: usize| if i == 0 || i + 1 == self.per_axis { 0.5 * h } else { h };
        match self.dim {
            1 => axis(k),
            _ => axis(k / self.per_axis) * axis(k % self.per_axis),
        }
    }

    /// Trapezoid integral of node values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(k, v)| self.weight(k) * v).sum()
    }

    /// Basis rows at every node, node-major.
    pub fn basis_rows(&self, basis: &BasisSpec) -> Vec<f64> {
        let b = basis.len();
        let mut rows = vec![0.0; self.len() * b];
        rows.par_chunks_mut(b).enumerate().for_each(|(k, row)| {
            basis.eval_row_unchecked(&self.node(k), row);
        });
        rows
    }
}

/// Density values of every stored draw at every grid node (draw-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub grid: UniformGrid,
    pub draws: usize,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn draw(&self, d: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[d * n..(d + 1) * n]
    }

    /// Values of all draws at node `k`.
    pub fn node_values(&self, k: usize) -> Vec<f64> {
        (0..self.draws).map(|d| self.draw(d)[k]).collect()
    }
}

fn check_chain(chain: &Chain, grid: &UniformGrid) -> Result<()> {
    if chain.is_empty() {
        return Err(Error::InvalidParameter("chain has no stored draws".into()));
    }
    if chain.basis.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: chain.basis.dim(),
            got: grid.dim(),
        });
    }
    Ok(())
}

/// Evaluates `p = q^2` for every draw at every node.
pub fn evaluate_draws(chain: &Chain, grid: &UniformGrid) -> Result<DensityGrid> {
    check_chain(chain, grid)?;
    let b = chain.basis.len();
    let rows = grid.basis_rows(&chain.basis);
    let n = grid.len();
    let mut values = vec![0.0; chain.len() * n];
    values
        .par_chunks_mut(n)
        .zip(chain.draws.par_iter())
        .for_each(|(out, draw)| {
            let c = draw.coeffs().as_slice();
            for (k, o) in out.iter_mut().enumerate() {
                let q: f64 = rows[k * b..(k + 1) * b].iter().zip(c).map(|(r, c)| r * c).sum();
                *o = q * q;
            }
        });
    Ok(DensityGrid {
        grid: grid.clone(),
        draws: chain.len(),
        values,
    })
}

/// Per-node mean and quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSummary {
    pub levels: Vec<f64>,
    pub mean: Vec<f64>,
    /// `quantiles[j][k]` is quantile `levels[j]` at node `k`.
    pub quantiles: Vec<Vec<f64>>,
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("quantile list is empty".into()));
    }
    if let Some(l) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidParameter(format!("quantile level {l} outside [0, 1]")));
    }
    Ok(())
}

/// Quantile by linear interpolation between order statistics: position
/// `(n - 1) p` in the sorted sample.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize_node(mut column: Vec<f64>, levels: &[f64]) -> (f64, Vec<f64>) {
    let mean = column.iter().sum::<f64>() / column.len() as f64;
    column.sort_by(f64::total_cmp);
    (mean, levels.iter().map(|&l| quantile_sorted(&column, l)).collect())
}

fn assemble(levels: &[f64], per_node: Vec<(f64, Vec<f64>)>) -> PointwiseSummary {
    let mut quantiles = vec![Vec::with_capacity(per_node.len()); levels.len()];
    let mut mean = Vec::with_capacity(per_node.len());
    for (m, qs) in per_node {
        mean.push(m);
        for (j, q) in qs.into_iter().enumerate() {
            quantiles[j].push(q);
        }
    }
    PointwiseSummary {
        levels: levels.to_vec(),
        mean,
        quantiles,
    }
}

/// Pointwise mean and quantiles over the draws of a [`DensityGrid`].
pub fn pointwise_summary(grid_values: &DensityGrid, levels: &[f64]) -> Result<PointwiseSummary> {
    check_levels(levels)?;
    if grid_values.draws == 0 {
        return Err(Error::InvalidParameter("no draws to summarize".into()));
    }
    let per_node: Vec<_> = (0..grid_values.grid.len())
        .into_par_iter()
        .map(|k| summarize_node(grid_values.node_values(k), levels))
        .collect();
    Ok(assemble(levels, per_node))
}

/// Same result as `pointwise_summary(evaluate_draws(..))` without holding the
/// full draws-by-nodes matrix: nodes are processed independently, each
/// needing one column of draws.
pub fn summarize_chain(chain: &Chain, grid: &UniformGrid, levels: &[f64]) -> Result<PointwiseSummary> {
    check_levels(levels)?;
    check_chain(chain, grid)?;
    let b = chain.basis.len();
    let coeffs: Vec<f64> = chain.draws.iter().flat_map(|d| d.coeffs().as_slice().to_vec()).collect();
    let per_node: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let mut row = vec![0.0; b];
            chain.basis.eval_row_unchecked(&grid.node(k), &mut row);
            let column: Vec<f64> = coeffs
                .chunks_exact(b)
                .map(|c| {
                    let q: f64 = row.iter().zip(c).map(|(r, c)| r * c).sum();
                    q * q
                })
                .collect();
            summarize_node(column, levels)
        })
        .collect();
    Ok(assemble(levels, per_node))
}

/// Rejection envelope `(sum_b |q_b| c_max)^2`, a rigorous bound on `q(x)^2`.
pub fn envelope(coeffs: &[f64], dim: usize) -> f64 {
    let l1: f64 = coeffs.iter().map(|c| c.abs()).sum();
    let m = l1 * sup_bound(dim);
    m * m
}

/// Draws `count` points from the posterior predictive: pick a stored draw
/// uniformly, then rejection-sample its density with uniform proposals.
/// Points are in unit coordinates.
pub fn predictive_sample<R: Rng + ?Sized>(chain: &Chain, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if chain.is_empty() {
        return Err(Error::InvalidParameter("chain has no stored draws".into()));
    }
    let dim = chain.basis.dim();
    let b = chain.basis.len();
    let mut row = vec![0.0; b];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let draw = &chain.draws[rng.random_range(0..chain.len())];
        let c = draw.coeffs().as_slice();
        let m = envelope(c, dim);
        loop {
            let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            chain.basis.eval_row_unchecked(&x, &mut row);
            let q: f64 = row.iter().zip(c).map(|(r, c)| r * c).sum();
            if rng.random::<f64>() * m < q * q {
                out.push(x);
                break;
            }
        }
    }
    Ok(out)
}
