//! Hamiltonian Monte Carlo on the coefficient sphere.
//!
//! The Hamiltonian `H(q, v) = -log pi(q) + |v|^2 / 2` is split into a potential
//! part, simulated by kicking the velocity with the tangent gradient, and a
//! kinetic part, simulated exactly by the great-circle flow. Each leapfrog step
//! is half kick, geodesic for time `eps`, half kick. Targets are densities with
//! respect to the surface measure of the embedded sphere, so no volume
//! correction term enters the Hamiltonian.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chi2_model::{Chi2Posterior, SqrtDensityState};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kl_basis::{build_design_matrix, BasisSpec};
use crate::sphere_geometry::{geodesic_flow, newton_optimize, project_to_tangent, SpherePoint};

/// Tolerance on the tangent gradient norm for the Newton initializer.
pub const INIT_TOLERANCE: f64 = 1e-8;
/// Iteration cap for the Newton initializer.
pub const INIT_MAX_ITER: usize = 100;

/// Log-density and gradient on the sphere, as seen by the sampler.
pub trait SphereTarget {
    fn dim(&self) -> usize;
    fn log_density(&self, q: &DVector<f64>) -> Result<f64>;
    /// Ambient gradient; the sampler projects it.
    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>>;
}

impl SphereTarget for Chi2Posterior {
    fn dim(&self) -> usize {
        Chi2Posterior::dim(self)
    }

    fn log_density(&self, q: &DVector<f64>) -> Result<f64> {
        Chi2Posterior::log_density(self, q)
    }

    fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.grad(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChainConfig")]
pub struct ChainConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawChainConfig {
    step_size: f64,
    leapfrog_steps: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
}

impl Default for RawChainConfig {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            step_size: c.step_size,
            leapfrog_steps: c.leapfrog_steps,
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed,
        }
    }
}

impl TryFrom<RawChainConfig> for ChainConfig {
    type Error = Error;
    fn try_from(r: RawChainConfig) -> Result<Self> {
        let c = ChainConfig {
            step_size: r.step_size,
            leapfrog_steps: r.leapfrog_steps,
            iterations: r.iterations,
            burn_in: r.burn_in,
            thin: r.thin,
            seed: r.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            leapfrog_steps: 20,
            iterations: 12_000,
            burn_in: 2_000,
            thin: 1,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.step_size));
        }
        if self.leapfrog_steps == 0 {
            return bad("leapfrog_steps must be at least 1".into());
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        Ok(())
    }

    /// Number of draws a chain with this configuration stores.
    pub fn stored_draws(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in) % self.thin == 0
    }
}

/// Draws `v ~ N(0, I)` in the ambient space and projects it onto `T_q S`.
pub fn sample_tangent_velocity<R: Rng + ?Sized>(q: &SpherePoint, rng: &mut R) -> DVector<f64> {
    let w = DVector::from_fn(q.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    project_to_tangent(q, &w)
}

/// `L` leapfrog steps of size `eps`. Fails if the gradient becomes singular
/// along the way; the caller should treat that as a rejection.
pub fn integrate_trajectory<T: SphereTarget + ?Sized>(
    target: &T,
    q: &SpherePoint,
    v: &DVector<f64>,
    step_size: f64,
    steps: usize,
) -> Result<(SpherePoint, DVector<f64>)> {
    let half = 0.5 * step_size;
    let mut q = q.clone();
    let mut grad = project_to_tangent(&q, &target.gradient(q.coords())?);
    let mut v = v + &grad * half;
    for step in 0..steps {
        let (q_next, v_next) = geodesic_flow(&q, &v, step_size);
        q = q_next;
        v = project_to_tangent(&q, &v_next);
        grad = project_to_tangent(&q, &target.gradient(q.coords())?);
        let kick = if step + 1 == steps { half } else { step_size };
        v += &grad * kick;
    }
    Ok((q, v))
}

/// Result of one HMC transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub point: SpherePoint,
    pub log_density: f64,
    pub accepted: bool,
    /// `H(proposal) - H(current)`; `+inf` for aborted trajectories.
    pub energy_change: f64,
}

/// One Metropolis-corrected HMC transition from `q` (with cached log-density).
pub fn hmc_step<T: SphereTarget + ?Sized, R: Rng + ?Sized>(
    target: &T,
    q: &SpherePoint,
    log_density: f64,
    config: &ChainConfig,
    rng: &mut R,
) -> StepResult {
    let v = sample_tangent_velocity(q, rng);
    let h0 = -log_density + 0.5 * v.norm_squared();
    let proposal = integrate_trajectory(target, q, &v, config.step_size, config.leapfrog_steps)
        .and_then(|(q1, v1)| target.log_density(q1.coords()).map(|lp| (q1, v1, lp)));
    // always consume the uniform so the random stream does not depend on outcomes
    let u: f64 = rng.random();
    match proposal {
        Ok((q1, v1, lp1)) if lp1.is_finite() => {
            let h1 = -lp1 + 0.5 * v1.norm_squared();
            let delta = h1 - h0;
            if u.ln() < -delta {
                StepResult {
                    point: q1,
                    log_density: lp1,
                    accepted: true,
                    energy_change: delta,
                }
            } else {
                StepResult {
                    point: q.clone(),
                    log_density,
                    accepted: false,
                    energy_change: delta,
                }
            }
        }
        _ => StepResult {
            point: q.clone(),
            log_density,
            accepted: false,
            energy_change: f64::INFINITY,
        },
    }
}

/// How the chain was started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub method: InitMethod,
    pub iterations: usize,
    pub tangent_grad_norm: f64,
    pub converged: bool,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Newton,
    UserSupplied,
    ConstantModeFallback,
}

/// Stored draws of a finished chain.
#[derive(Debug, Clone)]
pub struct Chain {
    pub basis: Arc<BasisSpec>,
    pub draws: Vec<SqrtDensityState>,
    /// Iteration index of each stored draw.
    pub draw_iterations: Vec<usize>,
    /// Log-posterior of each stored draw.
    pub draw_log_posterior: Vec<f64>,
    /// Log-posterior after every iteration, burn-in included.
    pub log_post_trace: Vec<f64>,
    pub accept_rate: f64,
    pub init: InitReport,
    pub wall_time_secs: f64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Rebuilds a chain from stored coefficient rows (e.g. read back from CSV).
    pub fn from_coefficients(basis: Arc<BasisSpec>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut draws = Vec::with_capacity(rows.len());
        for (row, c) in rows.into_iter().enumerate() {
            let point = SpherePoint::normalize(DVector::from_vec(c)).map_err(|e| Error::Row {
                row,
                source: Box::new(e),
            })?;
            draws.push(SqrtDensityState::new(point, basis.clone())?);
        }
        let n = draws.len();
        Ok(Self {
            basis,
            draws,
            draw_iterations: (0..n).collect(),
            draw_log_posterior: vec![f64::NAN; n],
            log_post_trace: Vec::new(),
            accept_rate: f64::NAN,
            init: InitReport {
                method: InitMethod::UserSupplied,
                iterations: 0,
                tangent_grad_norm: f64::NAN,
                converged: false,
                warning: None,
            },
            wall_time_secs: 0.0,
        })
    }
}

/// Maximizes the posterior from the constant mode; falls back to the constant
/// mode itself when Newton's method fails.
pub fn initialize(posterior: &Chi2Posterior) -> (SpherePoint, InitReport) {
    let e0 = SpherePoint::basis_vector(posterior.dim(), 0);
    match newton_optimize(posterior, &e0, INIT_TOLERANCE, INIT_MAX_ITER) {
        Ok(rep) => {
            let warning = (!rep.converged).then(|| {
                format!(
                    "Newton stopped after {} iterations with tangent gradient norm {:e}",
                    rep.iterations, rep.tangent_grad_norm
                )
            });
            let report = InitReport {
                method: InitMethod::Newton,
                iterations: rep.iterations,
                tangent_grad_norm: rep.tangent_grad_norm,
                converged: rep.converged,
                warning,
            };
            (rep.point, report)
        }
        Err(e) => {
            log::warn!("Newton initialization failed, starting from the constant mode: {e}");
            let report = InitReport {
                method: InitMethod::ConstantModeFallback,
                iterations: 0,
                tangent_grad_norm: f64::NAN,
                converged: false,
                warning: Some(e.to_string()),
            };
            (e0, report)
        }
    }
}

/// Runs a chain on an already-built posterior.
pub fn run_chain_on<R: Rng + ?Sized>(
    posterior: &Chi2Posterior,
    basis: Arc<BasisSpec>,
    config: &ChainConfig,
    init: Option<SpherePoint>,
    rng: &mut R,
) -> Result<Chain> {
    config.validate()?;
    let start = Instant::now();
    let (mut q, init_report) = match init {
        Some(p) => {
            if p.dim() != basis.len() {
                return Err(Error::DimensionMismatch {
                    expected: basis.len(),
                    got: p.dim(),
                });
            }
            let report = InitReport {
                method: InitMethod::UserSupplied,
                iterations: 0,
                tangent_grad_norm: f64::NAN,
                converged: false,
                warning: None,
            };
            (p, report)
        }
        None => initialize(posterior),
    };
    let mut lp = posterior.log_density(q.coords())?;
    if !lp.is_finite() {
        return Err(Error::NonFinite("log-posterior at the initial point"));
    }

    let mut draws = Vec::with_capacity(config.stored_draws());
    let mut draw_iterations = Vec::with_capacity(config.stored_draws());
    let mut draw_log_posterior = Vec::with_capacity(config.stored_draws());
    let mut trace = Vec::with_capacity(config.iterations);
    let mut accepted = 0usize;
    for it in 0..config.iterations {
        let step = hmc_step(posterior, &q, lp, config, rng);
        accepted += step.accepted as usize;
        q = step.point;
        lp = step.log_density;
        trace.push(lp);
        if config.keeps(it) {
            draws.push(SqrtDensityState::new(q.clone(), basis.clone())?);
            draw_iterations.push(it);
            draw_log_posterior.push(lp);
        }
    }
    Ok(Chain {
        basis,
        draws,
        draw_iterations,
        draw_log_posterior,
        log_post_trace: trace,
        accept_rate: accepted as f64 / config.iterations as f64,
        init: init_report,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Random stream for chain `chain_id` under `seed`.
pub fn chain_rng(seed: u64, chain_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chain_id);
    rng
}

/// Builds the posterior for `data` under `basis`.
pub fn build_posterior(data: &Dataset, basis: &BasisSpec) -> Result<Chi2Posterior> {
    let design = build_design_matrix(basis, data)?;
    Chi2Posterior::new(design, basis.eigenvalues().to_vec())
}

/// Fits one chain: design matrix, Newton initialization (unless `init` is
/// given), then `config.iterations` HMC transitions. The chain is a pure
/// function of its inputs.
pub fn run_chain(data: &Dataset, basis: &BasisSpec, config: &ChainConfig, init: Option<SpherePoint>) -> Result<Chain> {
    let posterior = build_posterior(data, basis)?;
    let mut rng = chain_rng(config.seed, 0);
    run_chain_on(&posterior, Arc::new(basis.clone()), config, init, &mut rng)
}

/// Runs `count` independent chains in parallel, chain `k` on stream `k` of
/// `config.seed`. The design matrix is shared.
pub fn run_chains(data: &Dataset, basis: &BasisSpec, config: &ChainConfig, count: usize) -> Result<Vec<Chain>> {
    let posterior = build_posterior(data, basis)?;
    let basis = Arc::new(basis.clone());
    let (start, report) = initialize(&posterior);
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = chain_rng(config.seed, k);
            let mut chain = run_chain_on(&posterior, basis.clone(), config, Some(start.clone()), &mut rng)?;
            chain.init = report.clone();
            Ok(chain)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Synthetic};
    use crate::kl_basis::MaternHyper;

    /// Log-density that is constant on the sphere.
    struct Flat(usize);

    impl SphereTarget for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density(&self, q: &DVector<f64>) -> Result<f64> {
            Ok(-0.5 * q.norm_squared())
        }
        fn gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(-q)
        }
    }

    fn basis_1d(max_index: usize) -> BasisSpec {
        BasisSpec::new(MaternHyper::new(0.5, 0.5, 0.8, 1).unwrap(), max_index).unwrap()
    }

    #[test]
    fn velocity_is_tangent_and_deterministic() {
        let q = SpherePoint::normalize(DVector::from_vec(vec![1.0, 2.0, -0.5, 0.3])).unwrap();
        let mut a = chain_rng(5, 0);
        let mut b = chain_rng(5, 0);
        for _ in 0..100 {
            let v = sample_tangent_velocity(&q, &mut a);
            assert!(v.dot(q.coords()).abs() < 1e-12);
            assert_eq!(v, sample_tangent_velocity(&q, &mut b));
        }
    }

    #[test]
    fn velocity_has_unit_variance_in_tangent_directions() {
        let q = SpherePoint::normalize(DVector::from_vec(vec![1.0, 2.0, -0.5, 0.3, 0.0])).unwrap();
        let u = project_to_tangent(&q, &DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0, 1.0]));
        let u = &u / u.norm();
        let mut rng = chain_rng(17, 3);
        let n = 100_000;
        let mut s2 = 0.0;
        let mut s4 = 0.0;
        for _ in 0..n {
            let x = sample_tangent_velocity(&q, &mut rng).dot(&u);
            s2 += x * x;
            s4 += x * x * x * x;
        }
        let var = s2 / n as f64;
        let se = ((s4 / n as f64 - var * var) / n as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "var {var}, se {se}");
    }

    #[test]
    fn flat_target_is_pure_geodesic_flow() {
        let target = Flat(6);
        let mut rng = chain_rng(1, 0);
        let q = SpherePoint::normalize(DVector::from_fn(6, |i, _| (i as f64 + 1.0).sin())).unwrap();
        let v = sample_tangent_velocity(&q, &mut rng);
        let (q1, v1) = integrate_trajectory(&target, &q, &v, 0.05, 30).unwrap();
        let (qg, vg) = geodesic_flow(&q, &v, 1.5);
        assert!((q1.coords() - qg.coords()).amax() < 1e-10);
        assert!((v1.norm() - v.norm()).abs() < 1e-10);
        assert!((v1 - vg).amax() < 1e-10);
    }

    #[test]
    fn trajectory_is_reversible_on_chi2_posterior() {
        let basis = basis_1d(10);
        let data = generate_synthetic(&Synthetic::Beta { a: 2.0, b: 5.0 }, 200, 2).unwrap();
        let post = build_posterior(&data, &basis).unwrap();
        let (start, _) = initialize(&post);
        let mut rng = chain_rng(9, 0);
        for _ in 0..5 {
            let v = sample_tangent_velocity(&start, &mut rng) * 0.3;
            let (q1, v1) = integrate_trajectory(&post, &start, &v, 0.01, 20).unwrap();
            let (q2, v2) = integrate_trajectory(&post, &q1, &-v1, 0.01, 20).unwrap();
            assert!((q2.coords() - start.coords()).amax() < 1e-8);
            assert!((v2 + &v).amax() < 1e-8);
        }
    }

    #[test]
    fn tiny_steps_are_always_accepted() {
        let basis = basis_1d(8);
        let data = generate_synthetic(&Synthetic::Beta { a: 2.0, b: 2.0 }, 300, 4).unwrap();
        let post = build_posterior(&data, &basis).unwrap();
        let (start, _) = initialize(&post);
        let lp = post.log_density(start.coords()).unwrap();
        let config = ChainConfig {
            step_size: 1e-8,
            leapfrog_steps: 5,
            iterations: 10,
            burn_in: 0,
            thin: 1,
            seed: 0,
        };
        let mut rng = chain_rng(0, 0);
        for _ in 0..50 {
            let step = hmc_step(&post, &start, lp, &config, &mut rng);
            assert!(step.energy_change.abs() < 1e-6, "{}", step.energy_change);
            assert!(step.accepted);
        }
    }

    #[test]
    fn thinning_arithmetic() {
        let config = ChainConfig {
            step_size: 0.1,
            leapfrog_steps: 2,
            iterations: 1000,
            burn_in: 500,
            thin: 5,
            seed: 3,
        };
        assert_eq!(config.stored_draws(), 100);
        let basis = basis_1d(3);
        let data = Dataset::from_unit_points(1, vec![]).unwrap();
        let chain = run_chain(&data, &basis, &config, None).unwrap();
        assert_eq!(chain.len(), 100);
        assert_eq!(chain.draw_iterations[0], 500);
        assert_eq!(chain.draw_iterations[99], 995);
        assert_eq!(chain.log_post_trace.len(), 1000);
    }

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::default();
        assert!(c.validate().is_ok());
        c.burn_in = c.iterations;
        assert!(c.validate().is_err());
        let mut c = ChainConfig::default();
        c.step_size = 0.0;
        assert!(c.validate().is_err());
        let bad = r#"{"step_size":0.1,"leapfrog_steps":2,"iterations":10,"burn_in":10,"thin":1,"seed":0}"#;
        assert!(serde_json::from_str::<ChainConfig>(bad).is_err());
    }

    #[test]
    fn same_seed_same_chain_different_stream_different_chain() {
        let basis = basis_1d(6);
        let data = generate_synthetic(&Synthetic::Beta { a: 5.0, b: 2.0 }, 100, 1).unwrap();
        let config = ChainConfig {
            step_size: 0.02,
            leapfrog_steps: 10,
            iterations: 200,
            burn_in: 50,
            thin: 1,
            seed: 42,
        };
        let a = run_chain(&data, &basis, &config, None).unwrap();
        let b = run_chain(&data, &basis, &config, None).unwrap();
        for (x, y) in a.draws.iter().zip(&b.draws) {
            assert_eq!(x.coeffs(), y.coeffs());
        }
        assert_eq!(a.log_post_trace, b.log_post_trace);
        let many = run_chains(&data, &basis, &config, 3).unwrap();
        assert_eq!(many.len(), 3);
        assert_ne!(many[0].log_post_trace, many[1].log_post_trace);
        let again = run_chains(&data, &basis, &config, 3).unwrap();
        assert_eq!(many[2].log_post_trace, again[2].log_post_trace);
    }

    #[test]
    fn stored_draws_stay_on_the_sphere() {
        let basis = basis_1d(12);
        let data = generate_synthetic(&Synthetic::Beta { a: 0.5, b: 0.5 }, 300, 8).unwrap();
        let config = ChainConfig {
            step_size: 0.01,
            leapfrog_steps: 20,
            iterations: 500,
            burn_in: 100,
            thin: 2,
            seed: 1,
        };
        let chain = run_chain(&data, &basis, &config, None).unwrap();
        assert_eq!(chain.init.method, InitMethod::Newton);
        for d in &chain.draws {
            assert!((d.coeffs().coords().norm() - 1.0).abs() < 1e-8);
        }
        assert!(chain.accept_rate > 0.2 && chain.accept_rate <= 0.99 + 1e-12, "{}", chain.accept_rate);
    }
}
