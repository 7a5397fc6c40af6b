//! The chi-square process density model.
//!
//! The square-root density is `q(x) = sum_b q_b phi_b(x)` with `sum_b q_b^2 = 1`,
//! so `p = q^2` is non-negative and integrates to one by construction. The prior
//! on the coefficients is Gaussian with variances `lambda_b^2` restricted to the
//! sphere, and the likelihood is `prod_n q(x_n)^2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kl_basis::{BasisSpec, DesignMatrix};
use crate::sphere_geometry::{SphereObjective, SpherePoint};

/// Below this `|q(x_n)|` the log-density is reported as `-inf`.
pub const LOG_ZERO_GUARD: f64 = 1e-300;
/// Below this `|q(x_n)|` the gradient is reported as singular.
pub const GRADIENT_ZERO_GUARD: f64 = 1e-12;

/// A square-root density: unit-norm coefficients over a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtDensityState {
    coeffs: SpherePoint,
    basis: Arc<BasisSpec>,
}

impl SqrtDensityState {
    pub fn new(coeffs: SpherePoint, basis: Arc<BasisSpec>) -> Result<Self> {
        if coeffs.dim() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.dim(),
            });
        }
        Ok(Self { coeffs, basis })
    }

    pub fn coeffs(&self) -> &SpherePoint {
        &self.coeffs
    }

    pub fn basis(&self) -> &Arc<BasisSpec> {
        &self.basis
    }

    /// `q(x)`; the sign carries no meaning.
    pub fn eval_sqrt_density(&self, x: &[f64]) -> Result<f64> {
        let mut row = vec![0.0; self.basis.len()];
        self.basis.eval_row(x, &mut row)?;
        Ok(dot(self.coeffs.as_slice(), &row))
    }

    /// `p(x) = q(x)^2`.
    pub fn eval_density(&self, x: &[f64]) -> Result<f64> {
        self.eval_sqrt_density(x).map(|v| v * v)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(coeffs: &DVector<f64>, design: &DesignMatrix, eigenvalues: Option<&[f64]>) -> Result<()> {
    if coeffs.len() != design.basis_count() {
        return Err(Error::DimensionMismatch {
            expected: design.basis_count(),
            got: coeffs.len(),
        });
    }
    if let Some(ev) = eigenvalues {
        if ev.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: coeffs.len(),
                got: ev.len(),
            });
        }
    }
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficients"));
    }
    Ok(())
}

fn prior_term(coeffs: &DVector<f64>, eigenvalues: &[f64]) -> f64 {
    -0.5 * coeffs
        .iter()
        .zip(eigenvalues)
        .map(|(q, l)| q * q / l)
        .sum::<f64>()
}

/// `2 sum_n log|q(x_n)|`, or `-inf` when some `|q(x_n)|` is below [`LOG_ZERO_GUARD`].
pub fn log_likelihood_only(coeffs: &DVector<f64>, design: &DesignMatrix) -> Result<f64> {
    check_inputs(coeffs, design, None)?;
    let qx = design.values() * coeffs;
    let mut acc = 0.0;
    for v in qx.iter() {
        let a = v.abs();
        if a < LOG_ZERO_GUARD {
            return Ok(f64::NEG_INFINITY);
        }
        acc += a.ln();
    }
    Ok(2.0 * acc)
}

/// Unnormalized log-posterior `2 sum_n log|q(x_n)| - 1/2 sum_b q_b^2 / lambda_b^2`.
///
/// `eigenvalues` are the prior variances `lambda_b^2`. The coefficients are
/// used as given; the sampler is responsible for keeping them on the sphere.
pub fn log_posterior(coeffs: &DVector<f64>, design: &DesignMatrix, eigenvalues: &[f64]) -> Result<f64> {
    check_inputs(coeffs, design, Some(eigenvalues))?;
    let ll = log_likelihood_only(coeffs, design)?;
    Ok(ll + prior_term(coeffs, eigenvalues))
}

/// Ambient gradient `2 sum_n Phi(n, j) / q(x_n) - q_j / lambda_j^2`.
pub fn log_posterior_grad(coeffs: &DVector<f64>, design: &DesignMatrix, eigenvalues: &[f64]) -> Result<DVector<f64>> {
    check_inputs(coeffs, design, Some(eigenvalues))?;
    let qx = design.values() * coeffs;
    let mut inv = qx;
    for (n, v) in inv.iter_mut().enumerate() {
        if v.abs() < GRADIENT_ZERO_GUARD {
            return Err(Error::GradientSingularity { index: n });
        }
        *v = 2.0 / *v;
    }
    let mut grad = design.values().tr_mul(&inv);
    for ((g, q), l) in grad.iter_mut().zip(coeffs.iter()).zip(eigenvalues) {
        *g -= q / l;
    }
    Ok(grad)
}

/// Ambient Hessian `-2 sum_n Phi(n, j) Phi(n, k) / q(x_n)^2 - delta_jk / lambda_j^2`.
pub fn log_posterior_hessian(coeffs: &DVector<f64>, design: &DesignMatrix, eigenvalues: &[f64]) -> Result<DMatrix<f64>> {
    check_inputs(coeffs, design, Some(eigenvalues))?;
    let phi = design.values();
    let qx = phi * coeffs;
    let mut scaled = phi.clone();
    for (n, v) in qx.iter().enumerate() {
        if v.abs() < GRADIENT_ZERO_GUARD {
            return Err(Error::GradientSingularity { index: n });
        }
        let w = 2f64.sqrt() / v.abs();
        scaled.row_mut(n).scale_mut(w);
    }
    let mut hess = -(scaled.tr_mul(&scaled));
    for (j, l) in eigenvalues.iter().enumerate() {
        hess[(j, j)] -= 1.0 / l;
    }
    Ok(hess)
}

/// Log-posterior bundled with its design matrix and prior variances.
#[derive(Debug, Clone)]
pub struct Chi2Posterior {
    design: DesignMatrix,
    eigenvalues: Vec<f64>,
}

impl Chi2Posterior {
    pub fn new(design: DesignMatrix, eigenvalues: Vec<f64>) -> Result<Self> {
        if design.basis_count() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: design.basis_count(),
                got: eigenvalues.len(),
            });
        }
        if eigenvalues.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("prior variances must be positive".into()));
        }
        Ok(Self { design, eigenvalues })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn log_density(&self, q: &DVector<f64>) -> Result<f64> {
        log_posterior(q, &self.design, &self.eigenvalues)
    }

    pub fn grad(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        log_posterior_grad(q, &self.design, &self.eigenvalues)
    }
}

impl SphereObjective for Chi2Posterior {
    fn value(&self, q: &DVector<f64>) -> f64 {
        self.log_density(q).unwrap_or(f64::NAN)
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.grad(q)
    }

    fn hessian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        log_posterior_hessian(q, &self.design, &self.eigenvalues)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Dataset, Synthetic};
    use crate::kl_basis::{build_design_matrix, quadrature_grid, MaternHyper};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::SQRT_2;

    fn basis(max_index: usize) -> Arc<BasisSpec> {
        Arc::new(BasisSpec::new(MaternHyper::new(0.5, 0.5, 0.8, 1).unwrap(), max_index).unwrap())
    }

    fn random_unit(rng: &mut impl Rng, b: usize) -> DVector<f64> {
        let v = DVector::from_fn(b, |_, _| rng.sample::<f64, _>(StandardNormal));
        &v / v.norm()
    }

    #[test]
    fn sqrt_density_examples() {
        let b = basis(5);
        let uniform = SqrtDensityState::new(SpherePoint::basis_vector(6, 0), b.clone()).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(uniform.eval_sqrt_density(&[x]).unwrap(), 1.0);
            assert_eq!(uniform.eval_density(&[x]).unwrap(), 1.0);
        }
        let first = SqrtDensityState::new(SpherePoint::basis_vector(6, 1), b.clone()).unwrap();
        assert!(first.eval_sqrt_density(&[0.5]).unwrap().abs() < 1e-15);
        assert!((first.eval_sqrt_density(&[0.0]).unwrap() - SQRT_2).abs() < 1e-15);
        assert!(first.eval_density(&[1.5]).is_err());
    }

    #[test]
    fn sqrt_density_matches_basis_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = basis(7);
        let c = random_unit(&mut rng, 8);
        let state = SqrtDensityState::new(SpherePoint::new(c.clone()).unwrap(), b).unwrap();
        let direct: f64 = (0..8)
            .map(|i| {
                let norm = if i == 0 { 1.0 } else { SQRT_2 };
                c[i] * norm * (std::f64::consts::PI * i as f64 * 0.3).cos()
            })
            .sum();
        assert!((state.eval_sqrt_density(&[0.3]).unwrap() - direct).abs() < 1e-14);
        let neg = SqrtDensityState::new(-state.coeffs().clone(), state.basis().clone()).unwrap();
        assert_eq!(neg.eval_density(&[0.3]).unwrap(), state.eval_density(&[0.3]).unwrap());
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = basis(30);
        let grid = quadrature_grid(1, 256).unwrap();
        for _ in 0..20 {
            let state = SqrtDensityState::new(SpherePoint::new(random_unit(&mut rng, 31)).unwrap(), b.clone()).unwrap();
            let total = grid.integrate(|x| state.eval_density(x).unwrap());
            assert!((total - 1.0).abs() < 1e-8, "{total}");
        }
    }

    #[test]
    fn log_posterior_examples() {
        let b = basis(3);
        let empty = build_design_matrix(&b, &Dataset::from_unit_points(1, vec![]).unwrap()).unwrap();
        let e0 = SpherePoint::basis_vector(4, 0).into_inner();
        let lp = log_posterior(&e0, &empty, b.eigenvalues()).unwrap();
        assert_eq!(lp, -0.5 / b.eigenvalues()[0]);

        let mid = build_design_matrix(&b, &Dataset::from_unit_points(1, vec![0.5]).unwrap()).unwrap();
        let e1 = SpherePoint::basis_vector(4, 1).into_inner();
        assert_eq!(log_posterior(&e1, &mid, b.eigenvalues()).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_likelihood_only(&e1, &mid).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_posterior_matches_pointwise_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = basis(9);
        let data = generate_synthetic(&Synthetic::Beta { a: 2.0, b: 5.0 }, 20, 3).unwrap();
        let design = build_design_matrix(&b, &data).unwrap();
        let c = random_unit(&mut rng, 10);
        let state = SqrtDensityState::new(SpherePoint::new(c.clone()).unwrap(), b.clone()).unwrap();
        let mut expect = 0.0;
        for x in data.points() {
            expect += state.eval_density(x).unwrap().ln();
        }
        for (q, l) in c.iter().zip(b.eigenvalues()) {
            expect -= 0.5 * q * q / l;
        }
        let got = log_posterior(&c, &design, b.eigenvalues()).unwrap();
        assert!((got - expect).abs() < 1e-10 * expect.abs().max(1.0));
        let ll = log_likelihood_only(&c, &design).unwrap();
        let prior: f64 = c.iter().zip(b.eigenvalues()).map(|(q, l)| -0.5 * q * q / l).sum();
        assert!((got - prior - ll).abs() < 1e-12 * got.abs().max(1.0));
    }

    #[test]
    fn likelihood_examples() {
        let b = basis(2);
        let data = generate_synthetic(&Synthetic::Beta { a: 1.0, b: 1.0 }, 37, 1).unwrap();
        let design = build_design_matrix(&b, &data).unwrap();
        let e0 = SpherePoint::basis_vector(3, 0).into_inner();
        assert_eq!(log_likelihood_only(&e0, &design).unwrap(), 0.0);
        // q(x) = 2^(-1/2) at x = 1/3: c0 = 0, c1 phi_1(1/3) = sqrt(2) cos(pi/3) c1 = c1 / sqrt(2)
        let one = build_design_matrix(&b, &Dataset::from_unit_points(1, vec![1.0 / 3.0]).unwrap()).unwrap();
        let c = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let ll = log_likelihood_only(&c, &one).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn gradient_prior_only() {
        let b = basis(4);
        let empty = build_design_matrix(&b, &Dataset::from_unit_points(1, vec![]).unwrap()).unwrap();
        let c = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5, 0.0]);
        let g = log_posterior_grad(&c, &empty, b.eigenvalues()).unwrap();
        for j in 0..5 {
            assert_eq!(g[j], -c[j] / b.eigenvalues()[j]);
        }
    }

    fn central_difference<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
        DVector::from_fn(x.len(), |j, _| {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = basis(9);
        let data = generate_synthetic(&Synthetic::Beta { a: 2.0, b: 2.0 }, 50, 6).unwrap();
        let design = build_design_matrix(&b, &data).unwrap();
        for _ in 0..5 {
            let c = random_unit(&mut rng, 10);
            let g = log_posterior_grad(&c, &design, b.eigenvalues()).unwrap();
            let fd = central_difference(|x| log_posterior(x, &design, b.eigenvalues()).unwrap(), &c, 1e-6);
            let rel = (&g - &fd).norm() / g.norm();
            assert!(rel < 1e-5, "{rel}");
            let h = log_posterior_hessian(&c, &design, b.eigenvalues()).unwrap();
            for j in 0..10 {
                let col = central_difference(
                    |x| log_posterior_grad(x, &design, b.eigenvalues()).unwrap()[j],
                    &c,
                    1e-6,
                );
                let rel = (h.row(j).transpose() - col).norm() / h.row(j).norm();
                assert!(rel < 1e-5, "row {j}: {rel}");
            }
        }
    }

    #[test]
    fn symmetric_data_kills_odd_gradient_components() {
        let b = basis(7);
        let half: Vec<f64> = vec![0.05, 0.13, 0.22, 0.31, 0.4, 0.47];
        let mut pts = half.clone();
        pts.extend(half.iter().map(|x| 1.0 - x));
        let design = build_design_matrix(&b, &Dataset::from_unit_points(1, pts).unwrap()).unwrap();
        // even modes are symmetric about 1/2
        let c = DVector::from_vec(vec![0.9, 0.0, 0.3, 0.0, 0.2, 0.0, 0.1, 0.0]);
        let c = &c / c.norm();
        let g = log_posterior_grad(&c, &design, b.eigenvalues()).unwrap();
        for j in (1..8).step_by(2) {
            assert!(g[j].abs() < 1e-10, "component {j} = {}", g[j]);
        }
    }

    #[test]
    fn gradient_singularity_carries_index() {
        let b = basis(1);
        let design = build_design_matrix(&b, &Dataset::from_unit_points(1, vec![0.2, 0.5]).unwrap()).unwrap();
        let c = DVector::from_vec(vec![0.0, 1.0]);
        match log_posterior_grad(&c, &design, b.eigenvalues()) {
            Err(Error::GradientSingularity { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let nan = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert!(matches!(
            log_posterior(&nan, &design, b.eigenvalues()),
            Err(Error::NonFinite(_))
        ));
    }

    proptest! {
        #[test]
        fn sign_symmetry(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = basis(6);
            let data = generate_synthetic(&Synthetic::Beta { a: 2.0, b: 3.0 }, 15, seed).unwrap();
            let design = build_design_matrix(&b, &data).unwrap();
            let c = random_unit(&mut rng, 7);
            let a = log_posterior(&c, &design, b.eigenvalues()).unwrap();
            let n = log_posterior(&(-&c), &design, b.eigenvalues()).unwrap();
            prop_assert_eq!(a, n);
        }

        #[test]
        fn empty_data_is_exact_quadratic_form(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = basis(6);
            let empty = build_design_matrix(&b, &Dataset::from_unit_points(1, vec![]).unwrap()).unwrap();
            let c = random_unit(&mut rng, 7);
            let lp = log_posterior(&c, &empty, b.eigenvalues()).unwrap();
            let quad: f64 = c.iter().zip(b.eigenvalues()).map(|(q, l)| q * q / (2.0 * l)).sum();
            prop_assert!((lp + quad).abs() <= 1e-15 * quad);
        }
    }
}
