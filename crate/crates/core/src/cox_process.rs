//! Intensity estimation for a Cox process on a unit-measure domain. The
//! intensity is `M p(x)`; given the event count `N`, the total mass `M` and
//! the density `p` are independent a posteriori, so `M` is drawn from its
//! conjugate Gamma update and paired with each stored density draw.
//!
//! The default prior `Gamma(1, 1)` is weak but not negligible for small `N`;
//! the mass posterior depends on the data only through `N`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior_analysis::{evaluate_draws, DensityGrid, UniformGrid};
use crate::spherical_hmc::Chain;

/// Gamma law in shape-rate form: density proportional to `m^(a-1) exp(-b m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior")]
pub struct GammaPrior {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
struct RawPrior {
    a: f64,
    b: f64,
}

impl TryFrom<RawPrior> for GammaPrior {
    type Error = Error;

    fn try_from(raw: RawPrior) -> Result<Self> {
        Self::new(raw.a, raw.b)
    }
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

impl GammaPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma shape must be positive, got {a}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma rate must be positive, got {b}")));
        }
        Ok(Self { a, b })
    }

    pub fn shape(&self) -> f64 {
        self.a
    }

    pub fn rate(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / self.b
    }

    pub fn variance(&self) -> f64 {
        self.a / (self.b * self.b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // rand_distr takes shape and scale
        Gamma::new(self.a, 1.0 / self.b)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// Conjugate update after observing `count` events on a unit-measure window.
pub fn mass_posterior(prior: &GammaPrior, count: usize) -> GammaPrior {
    GammaPrior {
        a: prior.a + count as f64,
        b: prior.b + 1.0,
    }
}

/// Intensity surfaces, one per stored density draw, with the sampled masses.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityDraws {
    pub masses: Vec<f64>,
    /// Draw-major intensity values in unit coordinates.
    pub values: DensityGrid,
}

impl IntensityDraws {
    /// Intensity per unit of raw coordinates: unit values divided by the
    /// Jacobian of the unit-to-raw map, so each surface integrates to its mass
    /// over the raw domain.
    pub fn raw_values(&self, jacobian: f64) -> Vec<f64> {
        self.values.values.iter().map(|v| v / jacobian).collect()
    }
}

/// Pairs each stored draw's density grid with an independent mass draw from
/// `mass_posterior(prior, count)`. Masses are drawn in draw order.
pub fn intensity_draws<R: Rng + ?Sized>(
    chain: &Chain,
    prior: &GammaPrior,
    count: usize,
    grid: &UniformGrid,
    rng: &mut R,
) -> Result<IntensityDraws> {
    let mut values = evaluate_draws(chain, grid)?;
    let post = mass_posterior(prior, count);
    let masses: Vec<f64> = (0..chain.len()).map(|_| post.sample(rng)).collect();
    let n = grid.len();
    for (chunk, m) in values.values.chunks_exact_mut(n).zip(&masses) {
        chunk.iter_mut().for_each(|v| *v *= m);
    }
    Ok(IntensityDraws { masses, values })
}
