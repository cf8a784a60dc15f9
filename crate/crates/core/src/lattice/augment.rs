//! Path-dependent state carried alongside the lattice node.
//!
//! An augmentation lists the extra coordinates a functional needs: values of
//! `B` (or of a running sum) recorded at fixed levels, frozen step-process
//! values, and running Stieltjes sums `sum f(frozen) dD` against a driver `D`.

use std::fmt;
use std::sync::Arc;

use super::Lattice;
use crate::calculus::AlignedStep;
use crate::error::{Error, Result};

/// Integrand of a running sum, evaluated on the frozen step values.
pub type Integrand = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

const MAX_SUMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObsId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SumId(usize);

impl StepId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Position,
    Sum(SumId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    /// `dt`
    Time,
    /// `dB`
    Brownian,
    /// `d<B> = sigma^2 dt`
    QuadVar,
    /// increment of an earlier running sum
    Sum(SumId),
}

#[derive(Clone, Default)]
pub struct Augmentation {
    observations: Vec<(usize, Source)>,
    steps: Vec<AlignedStep>,
    sums: Vec<(Integrand, Driver)>,
}

impl fmt::Debug for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Augmentation")
            .field("observations", &self.observations)
            .field("steps", &self.steps)
            .field("sums", &self.sums.iter().map(|(_, d)| *d).collect::<Vec<_>>())
            .finish()
    }
}

impl Augmentation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `source` at `level`.
    pub fn observe(&mut self, level: usize, source: Source) -> ObsId {
        self.observations.push((level, source));
        ObsId(self.observations.len() - 1)
    }

    pub fn add_step(&mut self, step: AlignedStep) -> StepId {
        self.steps.push(step);
        StepId(self.steps.len() - 1)
    }

    /// `S_k = sum_{j<k} integrand(frozen_j) * dD_j`.
    pub fn add_sum(&mut self, integrand: Integrand, driver: Driver) -> Result<SumId> {
        if let Driver::Sum(SumId(j)) = driver {
            if j >= self.sums.len() {
                return Err(Error::InvalidArgument("a running sum can only be driven by an earlier one".into()));
            }
        }
        if self.sums.len() == MAX_SUMS {
            return Err(Error::InvalidArgument(format!("at most {MAX_SUMS} running sums")));
        }
        self.sums.push((integrand, driver));
        Ok(SumId(self.sums.len() - 1))
    }

    pub fn width(&self) -> usize {
        self.observations.len() + self.steps.len() + self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0
    }

    fn step_offset(&self) -> usize {
        self.observations.len()
    }

    fn sum_offset(&self) -> usize {
        self.observations.len() + self.steps.len()
    }

    /// Auxiliary coordinates at the root.
    pub(crate) fn initial(&self, lat: &Lattice) -> Result<Vec<f64>> {
        let mut aux = vec![0.0; self.width()];
        let off = self.step_offset();
        for (i, step) in self.steps.iter().enumerate() {
            if let Some(j) = step.breakpoint_at(0) {
                aux[off + i] = step.value(j, 0.0, lat.time(0))?;
            }
        }
        Ok(aux)
    }

    /// Coordinates after moving from `level` with variance index `s` and sign `sign`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn advance(
        &self,
        lat: &Lattice,
        level: usize,
        aux: &[f64],
        s: usize,
        sign: f64,
        b_new: f64,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        out.clear();
        out.extend_from_slice(aux);
        if self.is_empty() {
            return Ok(());
        }
        let so = self.step_offset();
        let su = self.sum_offset();
        let frozen = &aux[so..su];
        let dt = lat.time(level + 1) - lat.time(level);
        let mut deltas = [0.0f64; MAX_SUMS];
        for (i, (f, driver)) in self.sums.iter().enumerate() {
            let dd = match *driver {
                Driver::Time => dt,
                Driver::Brownian => sign * lat.increment(s),
                Driver::QuadVar => lat.sigma_grid()[s] * lat.dt(),
                Driver::Sum(SumId(j)) => deltas[j],
            };
            deltas[i] = f(frozen) * dd;
            out[su + i] += deltas[i];
        }
        let next = level + 1;
        let t = lat.time(next);
        for (i, step) in self.steps.iter().enumerate() {
            if let Some(j) = step.breakpoint_at(next) {
                out[so + i] = step.value(j, b_new, t)?;
            }
        }
        for (i, &(lv, src)) in self.observations.iter().enumerate() {
            if lv == next {
                out[i] = match src {
                    Source::Position => b_new,
                    Source::Sum(SumId(j)) => out[su + j],
                };
            }
        }
        Ok(())
    }

    /// Step value on the interval opening at this state.
    pub fn frozen<'a>(&self, aux: &'a [f64]) -> &'a [f64] {
        &aux[self.step_offset()..self.sum_offset()]
    }
}

/// A lattice state as seen by terminal payoffs and running rewards.
#[derive(Clone, Copy)]
pub struct StateView<'a> {
    pub level: usize,
    pub t: f64,
    pub b: f64,
    pub key: i64,
    pub(crate) aux: &'a [f64],
    pub(crate) aug: &'a Augmentation,
}

impl<'a> StateView<'a> {
    pub fn observed(&self, id: ObsId) -> f64 {
        self.aux[id.0]
    }

    pub fn step(&self, id: StepId) -> f64 {
        self.aux[self.aug.step_offset() + id.0]
    }

    pub fn sum(&self, id: SumId) -> f64 {
        self.aux[self.aug.sum_offset() + id.0]
    }

    pub fn aux(&self) -> &'a [f64] {
        self.aux
    }
}

const QUANTUM: f64 = 4294967296.0;

/// Hash key of a state: node plus auxiliary coordinates on a `2^-32` grid.
pub(crate) fn state_key(key: i64, aux: &[f64], level: usize, buf: &mut Vec<i64>) -> Result<()> {
    buf.clear();
    buf.push(key);
    for &v in aux {
        let q = (v * QUANTUM).round();
        if !q.is_finite() || q.abs() >= 9.0e18 {
            return Err(Error::NonFinite { step: level });
        }
        buf.push(q as i64);
    }
    Ok(())
}
