//! Matérn Karhunen-Loève basis on the unit interval and the unit square.
//!
//! The covariance operator `K = sigma^2 (alpha - Laplacian)^(-s)` with Neumann
//! boundary conditions is diagonalised by products of cosines. Eigenvalues are
//! `sigma^2 (alpha + pi^2 |i|^2)^(-s)` and eigenfunctions are `c_i cos(pi i x)`
//! per axis with `c_0 = 1`, `c_i = sqrt(2)` for `i >= 1`, which makes every
//! basis element exactly unit-norm in `L^2`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Points may sit this far outside `[0, 1]` and still count as inside.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default Gauss-Legendre node count for one-dimensional checks.
pub const DEFAULT_QUADRATURE_1D: usize = 256;
/// Default Gauss-Legendre node count per axis for two-dimensional checks.
pub const DEFAULT_QUADRATURE_2D: usize = 64;

/// Hyperparameters of the Matérn covariance operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHyper")]
pub struct MaternHyper {
    sigma: f64,
    alpha: f64,
    s: f64,
    dim: usize,
}

#[derive(Deserialize)]
struct RawHyper {
    sigma: f64,
    alpha: f64,
    s: f64,
    dim: usize,
}

impl TryFrom<RawHyper> for MaternHyper {
    type Error = Error;
    fn try_from(raw: RawHyper) -> Result<Self> {
        MaternHyper::new(raw.sigma, raw.alpha, raw.s, raw.dim)
    }
}

impl MaternHyper {
    pub fn new(sigma: f64, alpha: f64, s: f64, dim: usize) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("alpha", alpha), ("s", s)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        Ok(Self {
            sigma,
            alpha,
            s,
            dim,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Multi-index of a basis element. In 1D only the first component is used
/// and the second is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex(pub [usize; 2]);

impl ModeIndex {
    pub fn one(i: usize) -> Self {
        ModeIndex([i, 0])
    }

    pub fn two(i1: usize, i2: usize) -> Self {
        ModeIndex([i1, i2])
    }

    pub fn squared_norm(&self) -> usize {
        self.0[0] * self.0[0] + self.0[1] * self.0[1]
    }

    pub fn is_constant(&self) -> bool {
        self.0 == [0, 0]
    }
}

/// Eigenvalue `lambda_i^2` of the Matérn operator for a mode.
pub fn eigenvalue(hyper: &MaternHyper, index: ModeIndex) -> f64 {
    let k2 = index.squared_norm() as f64;
    hyper.sigma * hyper.sigma * (hyper.alpha + PI * PI * k2).powf(-hyper.s)
}

/// `cos(pi t)` with range reduction, exact zeros at half-integers and exact
/// `+-1` at integers.
pub fn cos_pi(t: f64) -> f64 {
    let mut r = t.abs() % 2.0;
    if r > 1.0 {
        r = 2.0 - r;
    }
    let (sign, r) = if r > 0.5 { (-1.0, 1.0 - r) } else { (1.0, r) };
    let v = if r > 0.25 {
        (PI * (0.5 - r)).sin()
    } else {
        (PI * r).cos()
    };
    sign * v
}

#[inline]
fn axis_factor(i: usize, x: f64) -> f64 {
    if i == 0 {
        1.0
    } else {
        SQRT_2 * cos_pi(i as f64 * x)
    }
}

/// Largest absolute value any eigenfunction takes in the given dimension.
pub fn sup_bound(dim: usize) -> f64 {
    if dim == 1 {
        SQRT_2
    } else {
        2.0
    }
}

/// Checks that `x` lies in `[0, 1]^d` up to [`BOUNDARY_TOL`].
pub fn check_in_domain(x: &[f64]) -> Result<()> {
    for (axis, &v) in x.iter().enumerate() {
        if !(v >= -BOUNDARY_TOL && v <= 1.0 + BOUNDARY_TOL) {
            return Err(Error::Domain { axis, value: v });
        }
    }
    Ok(())
}

/// Evaluates the eigenfunction for `index` at `x`, where `x.len()` is the
/// dimension (1 or 2).
pub fn eigenfunction(index: ModeIndex, x: &[f64]) -> Result<f64> {
    check_in_domain(x)?;
    Ok(eigenfunction_unchecked(index, x))
}

#[inline]
pub(crate) fn eigenfunction_unchecked(index: ModeIndex, x: &[f64]) -> f64 {
    x.iter()
        .zip(index.0.iter())
        .map(|(&xi, &i)| axis_factor(i, xi))
        .product()
}

/// Serialized form of a [`BasisSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub sigma: f64,
    pub alpha: f64,
    pub s: f64,
    pub dim: usize,
    pub max_index: usize,
}

/// A truncated Matérn basis: modes `0..=max_index` in 1D, or the tensor grid
/// `0 <= i1, i2 <= max_index` in 2D (lexicographic order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BasisConfig", try_from = "BasisConfig")]
pub struct BasisSpec {
    hyper: MaternHyper,
    max_index: usize,
    indices: Vec<ModeIndex>,
    eigenvalues: Vec<f64>,
}

impl From<BasisSpec> for BasisConfig {
    fn from(b: BasisSpec) -> Self {
        b.config()
    }
}

impl TryFrom<BasisConfig> for BasisSpec {
    type Error = Error;
    fn try_from(c: BasisConfig) -> Result<Self> {
        BasisSpec::new(MaternHyper::new(c.sigma, c.alpha, c.s, c.dim)?, c.max_index)
    }
}

impl BasisSpec {
    pub fn new(hyper: MaternHyper, max_index: usize) -> Result<Self> {
        let indices: Vec<ModeIndex> = match hyper.dim {
            1 => (0..=max_index).map(ModeIndex::one).collect(),
            _ => (0..=max_index)
                .flat_map(|i1| (0..=max_index).map(move |i2| ModeIndex::two(i1, i2)))
                .collect(),
        };
        let eigenvalues: Vec<f64> = indices.iter().map(|&i| eigenvalue(&hyper, i)).collect();
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue {bad} underflows or overflows; reduce max_index or s"
            )));
        }
        Ok(Self {
            hyper,
            max_index,
            indices,
            eigenvalues,
        })
    }

    pub fn config(&self) -> BasisConfig {
        BasisConfig {
            sigma: self.hyper.sigma,
            alpha: self.hyper.alpha,
            s: self.hyper.s,
            dim: self.hyper.dim,
            max_index: self.max_index,
        }
    }

    pub fn hyper(&self) -> &MaternHyper {
        &self.hyper
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    /// Number of basis elements `B`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[ModeIndex] {
        &self.indices
    }

    /// Prior variances `lambda_b^2`, aligned with [`indices`](Self::indices).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Evaluates every basis element at `x` into `out`.
    pub fn eval_row(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        check_in_domain(x)?;
        self.eval_row_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn eval_row_unchecked(&self, x: &[f64], out: &mut [f64]) {
        // per-axis cosine tables, then products
        let m = self.max_index + 1;
        let mut table = vec![0.0; m * x.len()];
        for (axis, &xa) in x.iter().enumerate() {
            for i in 0..m {
                table[axis * m + i] = axis_factor(i, xa);
            }
        }
        for (o, idx) in out.iter_mut().zip(&self.indices) {
            *o = (0..x.len()).map(|a| table[a * m + idx.0[a]]).product();
        }
    }
}

/// Eigenfunction values at the observations, `N x B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn point_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn basis_count(&self) -> usize {
        self.values.ncols()
    }
}

/// Precomputes `Phi(n, b) = phi_b(x_n)` for every observation.
pub fn build_design_matrix(spec: &BasisSpec, data: &Dataset) -> Result<DesignMatrix> {
    if data.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: data.dim(),
        });
    }
    let n = data.len();
    let b = spec.len();
    let mut values = DMatrix::zeros(n, b);
    let mut row = vec![0.0; b];
    for (r, x) in data.points().enumerate() {
        spec.eval_row(x, &mut row).map_err(|e| Error::Row {
            row: r,
            source: Box::new(e),
        })?;
        for (c, &v) in row.iter().enumerate() {
            values[(r, c)] = v;
        }
    }
    Ok(DesignMatrix { values })
}

/// Gauss-Legendre rule on `[-1, 1]` with `n` nodes, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on `[0, 1]^dim`: flat node coordinates (stride `dim`) and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre grid mapped to `[0, 1]` (tensor product in 2D).
pub fn quadrature_grid(dim: usize, level: usize) -> Result<QuadratureGrid> {
    if level < 2 {
        return Err(Error::InvalidParameter(format!(
            "quadrature level must be at least 2, got {level}"
        )));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension must be 1 or 2, got {dim}"
        )));
    }
    let (x, w) = gauss_legendre(level);
    let x01: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let w01: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
    if dim == 1 {
        return Ok(QuadratureGrid {
            dim,
            nodes: x01,
            weights: w01,
        });
    }
    let mut nodes = Vec::with_capacity(2 * level * level);
    let mut weights = Vec::with_capacity(level * level);
    for i in 0..level {
        for j in 0..level {
            nodes.push(x01[i]);
            nodes.push(x01[j]);
            weights.push(w01[i] * w01[j]);
        }
    }
    Ok(QuadratureGrid {
        dim,
        nodes,
        weights,
    })
}

/// Gram matrix of the basis under quadrature, used for orthonormality scans.
pub fn gram_matrix(spec: &BasisSpec, grid: &QuadratureGrid) -> DMatrix<f64> {
    let b = spec.len();
    let mut gram = DMatrix::zeros(b, b);
    let mut row = vec![0.0; b];
    for (x, &w) in grid.nodes().zip(grid.weights()) {
        spec.eval_row_unchecked(x, &mut row);
        for i in 0..b {
            let wi = w * row[i];
            for j in i..b {
                gram[(i, j)] += wi * row[j];
            }
        }
    }
    for i in 0..b {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    gram
}

/// Largest deviation of the quadrature Gram matrix from the identity.
pub fn orthonormality_residual(spec: &BasisSpec, grid: &QuadratureGrid) -> f64 {
    let gram = gram_matrix(spec, grid);
    let b = spec.len();
    let mut worst: f64 = 0.0;
    for i in 0..b {
        for j in 0..b {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}
