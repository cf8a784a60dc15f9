//! Cylinder functionals `phi(B_{t_1} - B_{t_0}, ..., B_{t_m} - B_{t_{m-1}})` on the lattice.

use std::collections::HashMap;
use std::sync::Arc;

use super::augment::{ObsId, Source, StateView};
use super::policy::{StateFeedback, VolatilityPolicy};
use super::space::{StateSpace, Valuation};
use super::{Augmentation, Lattice};
use crate::error::{Error, Result};
use crate::payoff::PayoffExpr;

/// Whether `phi` sees increments `B_{t_j} - B_{t_{j-1}}` or levels `B_{t_j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncrementMode {
    #[default]
    Increments,
    Levels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunctional {
    times: Vec<f64>,
    phi: PayoffExpr,
    mode: IncrementMode,
}

impl CylinderFunctional {
    /// `phi` may use fewer variables than there are times; its arity is widened.
    pub fn new(times: Vec<f64>, phi: PayoffExpr, mode: IncrementMode) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("cylinder functional needs at least one time".into()));
        }
        if !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::NotIncreasing("observation times".into()));
        }
        if phi.arity() > times.len() {
            return Err(Error::Arity {
                needed: phi.arity(),
                got: times.len(),
            });
        }
        let phi = phi.with_arity(times.len())?;
        Ok(Self { times, phi, mode })
    }

    /// `phi(B_t)`.
    pub fn terminal(t: f64, phi: PayoffExpr) -> Result<Self> {
        Self::new(vec![t], phi, IncrementMode::Increments)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn phi(&self) -> &PayoffExpr {
        &self.phi
    }

    pub fn mode(&self) -> IncrementMode {
        self.mode
    }

    pub fn negated(&self) -> Self {
        Self {
            times: self.times.clone(),
            phi: self.phi.negated(),
            mode: self.mode,
        }
    }

    /// Same times and mode, different payoff.
    pub fn with_phi(&self, phi: PayoffExpr) -> Result<Self> {
        Self::new(self.times.clone(), phi, self.mode)
    }

    /// Evaluate `phi` on the values `B_{t_1}, ..., B_{t_m}`.
    pub fn eval_levels(&self, observed: &[f64]) -> Result<f64> {
        match self.mode {
            IncrementMode::Levels => self.phi.eval(observed),
            IncrementMode::Increments => {
                let mut prev = 0.0;
                let x: Vec<f64> = observed
                    .iter()
                    .map(|&v| {
                        let d = v - prev;
                        prev = v;
                        d
                    })
                    .collect();
                self.phi.eval(&x)
            }
        }
    }

    /// Evaluate along a full path of `B` (one value per lattice level).
    pub fn eval_path(&self, lat: &Lattice, b: &[f64]) -> Result<f64> {
        let observed: Vec<f64> = self
            .times
            .iter()
            .map(|&t| lat.level_of(t).map(|l| b[l]))
            .collect::<Result<_>>()?;
        self.eval_levels(&observed)
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Zero,
    Current,
    Observed(ObsId),
}

/// Where each observation time of a functional is read from in a state.
#[derive(Debug, Clone)]
pub struct CylinderSlots {
    levels: Vec<usize>,
    slots: Vec<Slot>,
}

impl CylinderSlots {
    /// Register the observations `times` need in `aug`, for a space enumerated to `depth`.
    pub fn install(lat: &Lattice, aug: &mut Augmentation, times: &[f64], depth: usize) -> Result<Self> {
        let levels: Vec<usize> = times.iter().map(|&t| lat.level_of(t)).collect::<Result<_>>()?;
        if let Some(&last) = levels.last() {
            if depth < last {
                return Err(Error::InvalidArgument(format!("depth {depth} before last observation {last}")));
            }
        }
        let slots = levels
            .iter()
            .map(|&l| {
                if l == 0 {
                    Slot::Zero
                } else if l == depth {
                    Slot::Current
                } else {
                    Slot::Observed(aug.observe(l, Source::Position))
                }
            })
            .collect();
        Ok(Self { levels, slots })
    }

    /// `B_{t_j}` for every time with `t_j <= level` of the state.
    pub fn history(&self, view: &StateView) -> Vec<f64> {
        self.levels
            .iter()
            .zip(&self.slots)
            .take_while(|(&l, _)| l <= view.level)
            .map(|(_, slot)| match *slot {
                Slot::Zero => 0.0,
                Slot::Current => view.b,
                Slot::Observed(id) => view.observed(id),
            })
            .collect()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }
}

/// State space carrying the history a family of functionals on shared times needs.
#[derive(Debug, Clone)]
pub struct CylinderSpace {
    space: StateSpace,
    times: Vec<f64>,
    slots: CylinderSlots,
}

impl CylinderSpace {
    pub fn new(lat: &Lattice, times: &[f64]) -> Result<Self> {
        let depth = times.iter().map(|&t| lat.level_of(t)).collect::<Result<Vec<_>>>()?;
        let depth = depth.last().copied().unwrap_or(0);
        Self::with_depth(lat, times, depth)
    }

    /// Enumerate states down to `depth`, which may lie past the last time.
    pub fn with_depth(lat: &Lattice, times: &[f64], depth: usize) -> Result<Self> {
        let mut aug = Augmentation::new();
        let slots = CylinderSlots::install(lat, &mut aug, times, depth)?;
        let space = StateSpace::build(lat, &aug, depth)?;
        Ok(Self {
            space,
            times: times.to_vec(),
            slots,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn lattice(&self) -> &Lattice {
        self.space.lattice()
    }

    pub fn history(&self, view: &StateView) -> Vec<f64> {
        self.slots.history(view)
    }

    fn check(&self, x: &CylinderFunctional) -> Result<()> {
        if x.times != self.times {
            return Err(Error::InvalidArgument("functional times differ from the state space".into()));
        }
        Ok(())
    }

    /// Induction from the terminal level down to `stop`.
    pub fn evaluate(&self, x: &CylinderFunctional, stop: usize) -> Result<Valuation> {
        self.check(x)?;
        self.space.evaluate(|v| x.eval_levels(&self.history(v)), None, stop)
    }

    pub fn expect(&self, x: &CylinderFunctional) -> Result<f64> {
        Ok(self.evaluate(x, 0)?.root())
    }

    pub fn conditional(&self, x: &CylinderFunctional, level: usize) -> Result<ConditionalValues> {
        let v = self.evaluate(x, level)?;
        let n = self.space.n_states(level);
        let views = (0..n).map(|i| self.space.view(level, i));
        Ok(ConditionalValues {
            level,
            t: self.lattice().time(level),
            positions: views.clone().map(|s| s.b).collect(),
            history: views.map(|s| self.history(&s)).collect(),
            values: v.values(level).to_vec(),
        })
    }

    /// Argmax volatility at every state, as a node policy when the space is Markov.
    pub fn worst_policy(&self, x: &CylinderFunctional) -> Result<VolatilityPolicy> {
        let v = self.evaluate(x, 0)?;
        let depth = self.space.depth();
        let n = self.lattice().n_steps();
        if self.space.is_markov() {
            let mut table: Vec<HashMap<i64, u8>> = (0..depth)
                .map(|k| {
                    self.space
                        .level(k)
                        .keys()
                        .iter()
                        .zip(v.choices(k))
                        .map(|(&key, &c)| (key, c))
                        .collect()
                })
                .collect();
            table.resize(n, HashMap::new());
            Ok(VolatilityPolicy::Markov(Arc::new(table)))
        } else {
            let mut table: Vec<HashMap<Box<[i64]>, u8>> = (0..depth)
                .map(|k| {
                    (0..self.space.n_states(k))
                        .map(|i| (self.space.state_key(k, i), v.choices(k)[i]))
                        .collect()
                })
                .collect();
            table.resize(n, HashMap::new());
            Ok(VolatilityPolicy::StateFeedback(Arc::new(StateFeedback::new(
                self.space.augmentation().clone(),
                table,
            ))))
        }
    }
}

/// `E[X | H_{t_j}]` on every state of level `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalValues {
    pub level: usize,
    pub t: f64,
    pub positions: Vec<f64>,
    /// Observed `B_{t_i}` for `t_i <= t`, per state.
    pub history: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl ConditionalValues {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact discrete sublinear expectation of `x`.
pub fn lattice_expect(lat: &Lattice, x: &CylinderFunctional) -> Result<f64> {
    CylinderSpace::new(lat, x.times())?.expect(x)
}

/// `E[x | H_{t_level}]` as a function of the level-`level` state.
pub fn conditional_expect(lat: &Lattice, x: &CylinderFunctional, level: usize) -> Result<ConditionalValues> {
    if level > lat.n_steps() {
        return Err(Error::BeyondHorizon {
            level,
            horizon: lat.n_steps(),
        });
    }
    let last = lat.level_of(*x.times().last().unwrap())?;
    CylinderSpace::with_depth(lat, x.times(), last.max(level))?.conditional(x, level)
}

/// Per-state argmax of the induction; ties go to the smallest variance.
pub fn extract_worst_policy(lat: &Lattice, x: &CylinderFunctional) -> Result<VolatilityPolicy> {
    CylinderSpace::new(lat, x.times())?.worst_policy(x)
}
