//! Adversarial-volatility lattice.
//!
//! Each step moves the state by `+-sigma * sqrt(dt)` with equal weight, where
//! `sigma^2` is picked from a finite grid spanning the volatility band. Node
//! positions are integer multiples of a common `unit`; when every grid
//! volatility is a small rational multiple of `sigma_upper` the tree recombines
//! on that integer lattice, otherwise step sizes are quantised to
//! `sigma_lower * sqrt(dt) * 2^-20` and the state space is deduplicated on the
//! quantised keys.

mod augment;
mod cylinder;
mod paths;
pub(crate) mod policy;
mod space;

pub use augment::{Augmentation, Driver, Integrand, ObsId, Source, StateView, StepId, SumId};
pub(crate) use augment::state_key;
pub use cylinder::{
    conditional_expect, extract_worst_policy, lattice_expect, ConditionalValues, CylinderFunctional,
    CylinderSlots, CylinderSpace, IncrementMode,
};
pub use paths::{map_paths, sample_paths, simulate_path, PathEnsemble, SamplePath};
pub use policy::{StateFeedback, VolatilityPolicy, NAMED_POLICIES};
pub use space::{Reward, StateLevel, StateSpace, Valuation, DEFAULT_STATE_BUDGET};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::GParams;

/// Interior grid points used when no refinement is requested explicitly.
pub const DEFAULT_SIGMA_REFINEMENT: usize = 3;

const MAX_DENOMINATOR: i64 = 4096;
const MAX_REFINEMENT: usize = 62;
const SPARSE_BITS: i32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    horizon: f64,
    n_steps: usize,
    dt: f64,
    params: GParams,
    sigma_sq: Vec<f64>,
    steps: Vec<i64>,
    unit: f64,
    recombining: bool,
    refinement: usize,
}

/// Build a lattice over `[0, horizon]`.
///
/// `sigma_refinement` interior volatilities are placed evenly in `sigma` (not
/// `sigma^2`) between the band endpoints, which keeps the common band
/// `[0.25, 1]` on a recombining grid for every refinement.
pub fn build_lattice(horizon: f64, n_steps: usize, params: &GParams, sigma_refinement: usize) -> Result<Lattice> {
    Lattice::new(horizon, n_steps, params, sigma_refinement)
}

impl Lattice {
    pub fn new(horizon: f64, n_steps: usize, params: &GParams, sigma_refinement: usize) -> Result<Self> {
        params.validate()?;
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if sigma_refinement > MAX_REFINEMENT {
            return Err(Error::InvalidArgument(format!(
                "sigma_refinement must be <= {MAX_REFINEMENT}, got {sigma_refinement}"
            )));
        }
        let dt = horizon / n_steps as f64;
        let (lo, hi) = (params.sigma_lower(), params.sigma_upper());
        let k = sigma_refinement as f64 + 1.0;
        let ratios: Vec<f64> = (0..=sigma_refinement + 1)
            .map(|i| (lo + (hi - lo) * i as f64 / k) / hi)
            .collect();

        let denominator = (1..=MAX_DENOMINATOR).find(|&d| {
            ratios
                .iter()
                .all(|r| (r * d as f64 - (r * d as f64).round()).abs() < 1e-9)
        });

        let (unit, mut steps, recombining) = match denominator {
            Some(d) => {
                let steps: Vec<i64> = ratios.iter().map(|r| (r * d as f64).round() as i64).collect();
                (hi * dt.sqrt() / d as f64, steps, true)
            }
            None => {
                let unit = lo * dt.sqrt() * 2f64.powi(-SPARSE_BITS);
                let last = ratios.len() - 1;
                let steps = ratios
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let s = r * hi * dt.sqrt() / unit;
                        match i {
                            0 => 1i64 << SPARSE_BITS,
                            i if i == last => s.floor() as i64,
                            _ => s.round() as i64,
                        }
                    })
                    .collect();
                log::warn!(
                    "volatility grid is not commensurate; using quantised steps (unit {unit:e}), the tree will not recombine"
                );
                (unit, steps, false)
            }
        };
        steps.dedup();

        let last = steps.len() - 1;
        let sigma_sq: Vec<f64> = steps
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                if i == 0 {
                    params.sigma_lower_sq
                } else if i == last && recombining {
                    params.sigma_upper_sq
                } else {
                    let inc = m as f64 * unit;
                    (inc * inc / dt).clamp(params.sigma_lower_sq, params.sigma_upper_sq)
                }
            })
            .collect();

        Ok(Self {
            horizon,
            n_steps,
            dt,
            params: *params,
            sigma_sq,
            steps,
            unit,
            recombining,
            refinement: sigma_refinement,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sigma_refinement(&self) -> usize {
        self.refinement
    }

    /// Same horizon, band and refinement with a different step count.
    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        Self::new(self.horizon, n_steps, &self.params, self.refinement)
    }

    /// Same horizon, steps and band with a different refinement.
    pub fn with_refinement(&self, sigma_refinement: usize) -> Result<Self> {
        Self::new(self.horizon, self.n_steps, &self.params, sigma_refinement)
    }

    pub fn params(&self) -> &GParams {
        &self.params
    }

    /// Realised variance rates, ascending; first and last are the band ends.
    pub fn sigma_grid(&self) -> &[f64] {
        &self.sigma_sq
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma_sq.len()
    }

    /// Integer node offset of one step under volatility index `s`.
    pub fn step(&self, s: usize) -> i64 {
        self.steps[s]
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn is_recombining(&self) -> bool {
        self.recombining
    }

    pub fn position(&self, key: i64) -> f64 {
        key as f64 * self.unit
    }

    /// `|dB|` under volatility index `s`.
    pub fn increment(&self, s: usize) -> f64 {
        self.steps[s] as f64 * self.unit
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.n_steps {
            self.horizon
        } else {
            level as f64 * self.dt
        }
    }

    /// Lattice level of time `t`; errors unless `t` sits on a level.
    pub fn level_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let level = x.round();
        if !(t >= 0.0) || (x - level).abs() > 1e-9 * x.abs().max(1.0) || level as usize > self.n_steps {
            return Err(Error::Misaligned { time: t, dt: self.dt });
        }
        Ok(level as usize)
    }
}
