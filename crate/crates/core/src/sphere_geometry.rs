//! Geometry of the unit sphere `S^{B-1}` embedded in `R^B`.
//!
//! Geodesics are great circles with a closed-form flow. Newton's method on the
//! sphere uses the Riemannian Hessian `F_qq - (F_q . q) I` and moves along the
//! geodesic in the Newton direction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on `| ||q|| - 1 |` accepted by [`SpherePoint::new`].
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// A point on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(DVector<f64>);

impl SpherePoint {
    /// Wraps `coords`, which must already have unit norm.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sphere point"));
        }
        let norm = coords.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Constraint(format!(
                "sphere point has norm {norm}, expected 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Projects a nonzero vector radially onto the sphere.
    pub fn normalize(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("sphere point"));
        }
        if norm == 0.0 {
            return Err(Error::DegenerateTruncation);
        }
        Ok(Self(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// The `k`-th standard basis vector of `R^dim`.
    pub fn basis_vector(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        Self(v)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

impl std::ops::Neg for SpherePoint {
    type Output = SpherePoint;
    fn neg(self) -> SpherePoint {
        SpherePoint(-self.0)
    }
}

/// `w - q <q, w>`: the orthogonal projection onto `T_q S`.
pub fn project_to_tangent(q: &SpherePoint, w: &DVector<f64>) -> DVector<f64> {
    let qv = q.coords();
    w - qv * qv.dot(w)
}

/// Flows `(q, v)` along the great circle for time `t`.
///
/// With `a = ||v||` the position is `q cos(at) + (v/a) sin(at)` and the
/// velocity `-a q sin(at) + v cos(at)`. The position is renormalized to unit
/// length. A zero velocity leaves both inputs unchanged.
pub fn geodesic_flow(q: &SpherePoint, v: &DVector<f64>, t: f64) -> (SpherePoint, DVector<f64>) {
    let speed = v.norm();
    if speed == 0.0 {
        return (q.clone(), v.clone());
    }
    let (sin, cos) = (speed * t).sin_cos();
    let qv = q.coords();
    let mut pos = qv * cos + v * (sin / speed);
    let vel = qv * (-speed * sin) + v * cos;
    let n = pos.norm();
    pos /= n;
    (SpherePoint(pos), vel)
}

/// Riemannian Hessian of `F` on the sphere: `F_qq - (F_q . q) I`.
pub fn directional_hessian(grad: &DVector<f64>, hess: &DMatrix<f64>, q: &SpherePoint) -> DMatrix<f64> {
    let shift = grad.dot(q.coords());
    let mut out = hess.clone();
    for i in 0..out.nrows() {
        out[(i, i)] -= shift;
    }
    out
}

/// A smooth objective on the sphere, to be maximized.
///
/// `value` may return `-inf` for points outside the objective's support;
/// `gradient` and `hessian` may fail there.
pub trait SphereObjective {
    fn value(&self, q: &DVector<f64>) -> f64;
    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>>;
    fn hessian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Newton direction in `T_q S` for maximizing `F`.
///
/// Solves `(-P Hess P + q q^T + ridge I) V = P F_q`, where `Hess` is the
/// Riemannian Hessian and `P = I - q q^T`. The `q q^T` term acts on the normal
/// direction only, so the solution is tangent and equals `-(P Hess P)^+ P F_q`
/// when `ridge = 0`. Returns `None` when the Cholesky factorization fails,
/// i.e. when the regularized tangent Hessian is not negative definite.
pub fn newton_direction(
    q: &SpherePoint,
    grad: &DVector<f64>,
    hess: &DMatrix<f64>,
    ridge: f64,
) -> Option<DVector<f64>> {
    let b = q.dim();
    let qv = q.coords();
    let riem = directional_hessian(grad, hess, q);
    let proj = DMatrix::identity(b, b) - qv * qv.transpose();
    let mut system = -(&proj * riem * &proj) + qv * qv.transpose();
    // symmetrize against round-off before factoring
    system = (&system + system.transpose()) * 0.5;
    for i in 0..b {
        system[(i, i)] += ridge;
    }
    let chol = system.cholesky()?;
    let rhs = project_to_tangent(q, grad);
    let v = chol.solve(&rhs);
    if v.iter().all(|x| x.is_finite()) {
        Some(project_to_tangent(q, &v))
    } else {
        None
    }
}

/// Outcome of a single Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub point: SpherePoint,
    pub value: f64,
    pub kind: StepKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Undamped Newton step along the geodesic for time 1.
    Newton,
    /// Newton step with a ridge added to the tangent Hessian.
    Ridge,
    /// Projected-gradient geodesic step with backtracking.
    Gradient,
    /// No step improved the objective; the point is returned unchanged.
    Stalled,
}

const FIRST_RIDGE: f64 = 1e-8;
const RIDGE_GROWTH: f64 = 10.0;
const MAX_BACKTRACKS: usize = 60;

fn accepts(old: f64, new: f64) -> bool {
    // A step that changes the objective by less than its rounding error is
    // accepted too; otherwise convergence stalls at the last few digits.
    new.is_finite() && new >= old - 1e-10 * old.abs().max(1.0)
}

/// One iteration of Newton's method on the sphere, maximizing `obj` from `q`.
///
/// Tries the undamped Newton step first. If the tangent Hessian is not
/// negative definite or the step decreases the objective, a ridge starting at
/// `1e-8` (times the Hessian scale) is added and grown tenfold until a step is
/// accepted. As a last resort a projected-gradient step with backtracking is
/// taken. At a critical point the input is returned unchanged.
pub fn newton_step<O: SphereObjective + ?Sized>(obj: &O, q: &SpherePoint) -> Result<NewtonStep> {
    let f0 = obj.value(q.coords());
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective value"));
    }
    let grad = obj.gradient(q.coords())?;
    let hess = obj.hessian(q.coords())?;
    if grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective derivatives"));
    }
    let tangent_grad = project_to_tangent(q, &grad);
    let gnorm = tangent_grad.norm();
    if gnorm <= 1e-12 * grad.norm().max(1.0) {
        return Ok(NewtonStep {
            point: q.clone(),
            value: f0,
            kind: StepKind::Stalled,
        });
    }

    let scale = hess.amax().max(grad.amax()).max(1.0);
    let mut ridge = 0.0;
    while ridge <= 1e12 * scale {
        if let Some(v) = newton_direction(q, &grad, &hess, ridge) {
            // must be an ascent direction
            if v.dot(&tangent_grad) > 0.0 {
                let (next, _) = geodesic_flow(q, &v, 1.0);
                let f1 = obj.value(next.coords());
                if accepts(f0, f1) {
                    let kind = if ridge == 0.0 {
                        StepKind::Newton
                    } else {
                        StepKind::Ridge
                    };
                    return Ok(NewtonStep {
                        point: next,
                        value: f1,
                        kind,
                    });
                }
            }
        }
        ridge = if ridge == 0.0 {
            FIRST_RIDGE * scale
        } else {
            ridge * RIDGE_GROWTH
        };
    }

    let mut t = 1.0 / gnorm;
    for _ in 0..MAX_BACKTRACKS {
        let (next, _) = geodesic_flow(q, &tangent_grad, t);
        let f1 = obj.value(next.coords());
        if f1.is_finite() && f1 > f0 {
            return Ok(NewtonStep {
                point: next,
                value: f1,
                kind: StepKind::Gradient,
            });
        }
        t *= 0.5;
    }
    Ok(NewtonStep {
        point: q.clone(),
        value: f0,
        kind: StepKind::Stalled,
    })
}

/// Result of [`newton_optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub point: SpherePoint,
    pub value: f64,
    pub iterations: usize,
    pub tangent_grad_norm: f64,
    pub converged: bool,
}

/// Iterates [`newton_step`] until the tangent gradient norm is at most `tol`
/// or `max_iter` steps have been taken.
pub fn newton_optimize<O: SphereObjective + ?Sized>(
    obj: &O,
    q0: &SpherePoint,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let fail = |message: String, iterations: usize, q: &SpherePoint| Error::Optimization {
        message,
        iterations,
        last_iterate: q.as_slice().to_vec(),
    };
    let mut q = q0.clone();
    let mut value = obj.value(q.coords());
    if !value.is_finite() {
        return Err(fail("objective is not finite at the start".into(), 0, &q));
    }
    let mut iterations = 0;
    loop {
        let grad = obj
            .gradient(q.coords())
            .map_err(|e| fail(e.to_string(), iterations, &q))?;
        let gnorm = project_to_tangent(&q, &grad).norm();
        if !gnorm.is_finite() {
            return Err(fail("gradient is not finite".into(), iterations, &q));
        }
        if gnorm <= tol || iterations >= max_iter {
            return Ok(NewtonReport {
                point: q,
                value,
                iterations,
                tangent_grad_norm: gnorm,
                converged: gnorm <= tol,
            });
        }
        let step = newton_step(obj, &q).map_err(|e| fail(e.to_string(), iterations, &q))?;
        iterations += 1;
        if step.kind == StepKind::Stalled {
            return Ok(NewtonReport {
                point: q,
                value,
                iterations,
                tangent_grad_norm: gnorm,
                converged: false,
            });
        }
        q = step.point;
        value = step.value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn random_unit(rng: &mut impl Rng, b: usize) -> SpherePoint {
        let v = DVector::from_fn(b, |_, _| rng.sample::<f64, _>(StandardNormal));
        SpherePoint::normalize(v).unwrap()
    }

    fn random_tangent(rng: &mut impl Rng, q: &SpherePoint) -> DVector<f64> {
        let w = DVector::from_fn(q.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        project_to_tangent(q, &w)
    }

    /// `F(q) = sum a_i q_i^2`.
    struct Quadratic(DVector<f64>);

    impl SphereObjective for Quadratic {
        fn value(&self, q: &DVector<f64>) -> f64 {
            q.iter().zip(self.0.iter()).map(|(x, a)| a * x * x).sum()
        }
        fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(q.component_mul(&self.0) * 2.0)
        }
        fn hessian(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_diagonal(&(&self.0 * 2.0)))
        }
    }

    /// `F(q) = c . q`.
    struct Linear(DVector<f64>);

    impl SphereObjective for Linear {
        fn value(&self, q: &DVector<f64>) -> f64 {
            self.0.dot(q)
        }
        fn gradient(&self, _q: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(self.0.clone())
        }
        fn hessian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::zeros(q.len(), q.len()))
        }
    }

    fn e(b: usize, k: usize) -> DVector<f64> {
        SpherePoint::basis_vector(b, k).into_inner()
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_unit(&mut rng, 6);
        let t = random_tangent(&mut rng, &q);
        assert!((project_to_tangent(&q, &t) - &t).amax() < 1e-15);
        assert!(project_to_tangent(&q, q.coords()).amax() < 1e-15);
        let w = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(project_to_tangent(&q, &w).dot(q.coords()).abs() <= 1e-14);
    }

    #[test]
    fn geodesic_quarter_and_full_circle() {
        let q = SpherePoint::basis_vector(3, 0);
        let v = e(3, 1);
        let (p, w) = geodesic_flow(&q, &v, PI / 2.0);
        assert!((p.coords() - e(3, 1)).amax() < 1e-15);
        assert!((w + e(3, 0)).amax() < 1e-15);
        let (p, w) = geodesic_flow(&q, &v, 2.0 * PI);
        assert!((p.coords() - e(3, 0)).amax() < 1e-15);
        assert!((w - e(3, 1)).amax() < 1e-15);
    }

    #[test]
    fn zero_velocity_is_fixed_point() {
        let q = SpherePoint::basis_vector(4, 2);
        let v = DVector::zeros(4);
        let (p, w) = geodesic_flow(&q, &v, 3.0);
        assert_eq!(p, q);
        assert_eq!(w, v);
    }

    /// RK4 on `q'' = -||q'||^2 q`, the oracle for the closed form.
    fn rk4_geodesic(q: &DVector<f64>, v: &DVector<f64>, t: f64, h: f64) -> (DVector<f64>, DVector<f64>) {
        let accel = |q: &DVector<f64>, v: &DVector<f64>| -q * v.norm_squared();
        let steps = (t / h).round() as usize;
        let h = t / steps as f64;
        let (mut q, mut v) = (q.clone(), v.clone());
        for _ in 0..steps {
            let k1q = v.clone();
            let k1v = accel(&q, &v);
            let q2 = &q + &k1q * (h / 2.0);
            let v2 = &v + &k1v * (h / 2.0);
            let k2q = v2.clone();
            let k2v = accel(&q2, &v2);
            let q3 = &q + &k2q * (h / 2.0);
            let v3 = &v + &k2v * (h / 2.0);
            let k3q = v3.clone();
            let k3v = accel(&q3, &v3);
            let q4 = &q + &k3q * h;
            let v4 = &v + &k3v * h;
            let k4q = v4.clone();
            let k4v = accel(&q4, &v4);
            q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        }
        (q, v)
    }

    #[test]
    fn geodesic_matches_rk4() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_unit(&mut rng, 5);
        let mut v = random_tangent(&mut rng, &q);
        v /= v.norm();
        let (p, w) = geodesic_flow(&q, &v, 0.37);
        let (pr, wr) = rk4_geodesic(q.coords(), &v, 0.37, 1e-5);
        assert!((p.coords() - pr).amax() < 1e-9);
        assert!((w - wr).amax() < 1e-9);
    }

    #[test]
    fn closed_form_satisfies_geodesic_ode() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_unit(&mut rng, 7);
        let v = random_tangent(&mut rng, &q) * 1.7;
        let h = 1e-4;
        for t in [0.3, 1.1, 4.0] {
            let at = |s: f64| geodesic_flow(&q, &v, s).0.into_inner();
            let acc = (at(t + h) - at(t) * 2.0 + at(t - h)) / (h * h);
            let residual = acc + at(t) * v.norm_squared();
            assert!(residual.amax() < 1e-6, "{}", residual.amax());
        }
    }

    #[test]
    fn directional_hessian_examples() {
        let q = SpherePoint::basis_vector(3, 0);
        let hess = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 3.0, 0.5, 0.0, 0.5, 4.0]);
        let grad_perp = DVector::from_vec(vec![0.0, 1.0, -2.0]);
        assert_eq!(directional_hessian(&grad_perp, &hess, &q), hess);
        let zero = directional_hessian(&DVector::zeros(3), &DMatrix::zeros(3, 3), &q);
        assert_eq!(zero, DMatrix::zeros(3, 3));
    }

    #[test]
    fn directional_hessian_matches_second_derivative_along_geodesic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0]);
        let f = Quadratic(a);
        let q = random_unit(&mut rng, 4);
        let v = random_tangent(&mut rng, &q);
        let hess = directional_hessian(
            &f.gradient(q.coords()).unwrap(),
            &f.hessian(q.coords()).unwrap(),
            &q,
        );
        let bilinear = (v.transpose() * &hess * &v)[(0, 0)];
        let h = 1e-4;
        let g = |t: f64| f.value(geodesic_flow(&q, &v, t).0.coords());
        let fd = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
        assert!((bilinear - fd).abs() < 1e-6, "{bilinear} vs {fd}");
    }

    #[test]
    fn newton_linear_objective_converges_to_gradient_direction() {
        let c = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let start = SpherePoint::normalize(DVector::from_vec(vec![1.0, 0.2, -0.1, 0.05])).unwrap();
        let rep = newton_optimize(&Linear(c), &start, 1e-12, 50).unwrap();
        assert!(rep.converged);
        assert!((rep.point.coords() - e(4, 0)).amax() < 1e-10);
    }

    #[test]
    fn newton_rayleigh_quotient() {
        let a = DVector::from_vec(vec![1.0, 4.0, 2.0, -1.0, 3.0]);
        let start = SpherePoint::normalize(DVector::from_vec(vec![0.2, 1.0, 0.1, -0.3, 0.4])).unwrap();
        let rep = newton_optimize(&Quadratic(a), &start, 1e-10, 25).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.tangent_grad_norm <= 1e-10);
        assert!(rep.point.coords()[1].abs() > 1.0 - 1e-12);
    }

    #[test]
    fn newton_at_critical_point_is_identity() {
        let a = DVector::from_vec(vec![1.0, 4.0, 2.0]);
        let q = SpherePoint::basis_vector(3, 1);
        let step = newton_step(&Quadratic(a.clone()), &q).unwrap();
        assert_eq!(step.point, q);
        assert_eq!(step.kind, StepKind::Stalled);
        let rep = newton_optimize(&Quadratic(a), &q, 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn newton_from_far_start_is_monotone() {
        // start near the minimum: the Hessian is positive there, forcing the ridge path
        let a = DVector::from_vec(vec![1.0, 4.0, 2.0, -1.0, 3.0]);
        let f = Quadratic(a);
        let mut q = SpherePoint::normalize(DVector::from_vec(vec![0.01, 0.02, 0.01, 1.0, 0.03])).unwrap();
        let mut value = f.value(q.coords());
        let mut kinds = Vec::new();
        for _ in 0..60 {
            let step = newton_step(&f, &q).unwrap();
            assert!(step.value >= value - 1e-12, "{} < {}", step.value, value);
            kinds.push(step.kind);
            if step.kind == StepKind::Stalled {
                break;
            }
            q = step.point;
            value = step.value;
        }
        assert!(kinds.iter().any(|k| *k != StepKind::Newton));
        assert!((value - 4.0).abs() < 1e-10, "{value}");
    }

    #[test]
    fn newton_reports_non_finite_objective() {
        struct Bad;
        impl SphereObjective for Bad {
            fn value(&self, _q: &DVector<f64>) -> f64 {
                f64::NAN
            }
            fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
                Ok(q.clone())
            }
            fn hessian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
                Ok(DMatrix::identity(q.len(), q.len()))
            }
        }
        let q = SpherePoint::basis_vector(2, 0);
        match newton_optimize(&Bad, &q, 1e-8, 5) {
            Err(Error::Optimization { last_iterate, .. }) => assert_eq!(last_iterate, vec![1.0, 0.0]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(newton_optimize(&Bad, &q, 0.0, 5).is_err());
    }

    proptest! {
        #[test]
        fn flow_preserves_norm_and_speed(seed in 0u64..1000, t in 0.0f64..10.0, b in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_unit(&mut rng, b);
            let v = random_tangent(&mut rng, &q);
            let (p, w) = geodesic_flow(&q, &v, t);
            prop_assert!((p.coords().norm() - 1.0).abs() < 1e-10);
            prop_assert!((w.norm() - v.norm()).abs() < 1e-10 * v.norm().max(1.0));
            prop_assert!(p.coords().dot(&w).abs() < 1e-10 * v.norm().max(1.0));
        }

        #[test]
        fn flow_composes_and_reverses(seed in 0u64..1000, t in -3.0f64..3.0, s in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_unit(&mut rng, 6);
            let v = random_tangent(&mut rng, &q);
            let (p1, w1) = geodesic_flow(&q, &v, t);
            let (p2, w2) = geodesic_flow(&p1, &w1, s);
            let (p3, w3) = geodesic_flow(&q, &v, t + s);
            prop_assert!((p2.coords() - p3.coords()).amax() < 1e-9);
            prop_assert!((w2 - w3).amax() < 1e-9);
            let (back, wb) = geodesic_flow(&p1, &-w1, t);
            prop_assert!((back.coords() - q.coords()).amax() < 1e-9);
            prop_assert!((wb + &v).amax() < 1e-9);
        }

        #[test]
        fn projection_is_linear_and_idempotent(seed in 0u64..1000, a in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_unit(&mut rng, 5);
            let w1 = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w2 = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let lhs = project_to_tangent(&q, &(&w1 * a + &w2));
            let rhs = project_to_tangent(&q, &w1) * a + project_to_tangent(&q, &w2);
            prop_assert!((lhs - rhs).amax() < 1e-12);
            let p = project_to_tangent(&q, &w1);
            prop_assert!((project_to_tangent(&q, &p) - &p).amax() < 1e-14);
        }
    }

    #[test]
    fn sphere_point_validation() {
        assert!(SpherePoint::from_slice(&[0.6, 0.8]).is_ok());
        assert!(SpherePoint::from_slice(&[0.6, 0.9]).is_err());
        assert!(SpherePoint::normalize(DVector::zeros(3)).is_err());
        assert_abs_diff_eq!(
            SpherePoint::normalize(DVector::from_vec(vec![3.0, 4.0])).unwrap().coords()[1],
            0.8
        );
    }
}
