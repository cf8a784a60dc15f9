//! Maximal, downcrossing and Burkholder-Davis-Gundy inequalities by Monte Carlo
//! over a scenario family, with lattice induction for the right-hand sides
//! where the functional allows it.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::process::{ladder, ProcessSpec};
use super::{Backend, VerificationReport};
use crate::calculus::{check_dominance, ito_integral, IncreasingSpec, StepProcess};
use crate::error::{Error, Result};
use crate::lattice::{
    map_paths, Augmentation, CylinderFunctional, CylinderSpace, Lattice, Reward, SamplePath, StateSpace, VolatilityPolicy,
};
use crate::payoff::PayoffExpr;
use crate::scenario::{McEstimate, ScenarioFamily};

/// Completed downcrossings of `[a, b]`: armed once the path reaches `b` or above,
/// counted when it next falls to `a` or below.
pub fn downcrossings(path: &[f64], a: f64, b: f64) -> Result<usize> {
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("need a < b, got a = {a}, b = {b}")));
    }
    let mut armed = false;
    let mut count = 0;
    for &x in path {
        if armed && x <= a {
            count += 1;
            armed = false;
        } else if !armed && x >= b {
            armed = true;
        }
    }
    Ok(count)
}

/// `(c_p, C_p)` with `c_p E[<M>_T^(p/2)] <= E[sup |M|^p] <= C_p E[<M>_T^(p/2)]`.
///
/// Burkholder's constant `p* - 1`, `p* = max(p, p/(p-1))`, combined with Doob's
/// `(p/(p-1))^p`. For `p = 2` this gives `c = 1/4` and `C = 4`.
pub fn bdg_constants(p: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("BDG exponent must be > 1, got {p}")));
    }
    let doob = (p / (p - 1.0)).powf(p);
    let burk = (p.max(p / (p - 1.0)) - 1.0).powf(p);
    Ok((1.0 / (doob * burk), doob * burk))
}

/// Largest mean over scenarios, with its standard error.
fn scenario_max<F>(lat: &Lattice, family: &ScenarioFamily, n_paths: usize, seed: u64, f: F) -> Result<(String, McEstimate)>
where
    F: Fn(&SamplePath) -> Result<f64> + Sync,
{
    let mut best: Option<(String, McEstimate)> = None;
    for sc in family.scenarios() {
        let samples = map_paths(lat, &sc.policy, n_paths, seed, &f)?.into_iter().collect::<Result<Vec<_>>>()?;
        let est = McEstimate::from_samples(&samples);
        if best.as_ref().is_none_or(|(_, b)| est.mean > b.mean || est.mean.is_nan()) {
            best = Some((sc.name.clone(), est));
        }
    }
    best.ok_or(Error::EmptyScenarioFamily)
}

/// Node policy following the argmax of a Markov induction.
fn markov_policy(space: &StateSpace, choices: impl Fn(usize) -> Vec<u8>) -> VolatilityPolicy {
    let table = (0..space.depth())
        .map(|k| space.level(k).keys().iter().copied().zip(choices(k)).collect::<HashMap<_, _>>())
        .collect();
    VolatilityPolicy::Markov(Arc::new(table))
}

/// `E[sup_t |X_t|^p] <= (p/(p-1))^p E[|X_T|^p]`.
///
/// The left side is the largest scenario mean, with the policy maximising the
/// right side added to the family when `X` is a function of `B`. The right side
/// is exact by induction in that case and a scenario maximum otherwise. Passes
/// when `lhs <= rhs (1 + tol_rel)`.
pub fn check_doob(
    lat: &Lattice,
    family: &ScenarioFamily,
    x: &ProcessSpec,
    p: f64,
    n_paths: usize,
    seed: u64,
    tol_rel: f64,
) -> Result<VerificationReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("Doob exponent must be > 1, got {p}")));
    }
    let constant = (p / (p - 1.0)).powf(p);
    let mut family = family.clone();
    let (terminal, backend) = if x.is_markov() {
        let space = StateSpace::build(lat, &Augmentation::new(), lat.n_steps())?;
        let mut aug = Augmentation::new();
        let h = x.install(lat, &mut aug)?;
        let val = space.evaluate(|v| Ok(h.value(v).abs().powf(p)), None, 0)?;
        family = family.with_scenario(lat, "worst", markov_policy(&space, |k| val.choices(k).to_vec()))?;
        (val.root(), Backend::Mixed)
    } else {
        let (_, est) = scenario_max(lat, &family, n_paths, seed, |path| {
            Ok(x.on_path(lat, path)?.last().unwrap().abs().powf(p))
        })?;
        (est.mean, Backend::MonteCarlo)
    };
    let (argmax, sup) = scenario_max(lat, &family, n_paths, seed, |path| {
        Ok(x.on_path(lat, path)?.iter().map(|v| v.abs().powf(p)).fold(0.0, f64::max))
    })?;
    let rhs = constant * terminal;
    Ok(VerificationReport::inequality(
        format!("doob:{x}:p={p}"),
        "Doob maximal inequality",
        sup.mean,
        rhs,
        rhs.abs() * tol_rel,
        backend,
        lat.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len())
    .with_part("constant", constant)
    .with_part("terminal_moment", terminal)
    .with_part("sup_std_err", sup.std_err)
    .with_note(format!("maximising scenario: {argmax}")))
}

/// Nonnegative G-supermartingales for the downcrossing inequality.
#[derive(Debug, Clone, PartialEq)]
pub enum Supermartingale {
    /// `X_t = c`, `c >= 0`.
    Constant(f64),
    /// `X_t = E[phi(B_T) | H_t]`, which must stay nonnegative.
    Envelope(PayoffExpr),
    /// `X_t = offset + B_t^2 - sigma_upper^2 t`, with `offset >= sigma_upper^2 T`.
    SquareCompensated(f64),
}

impl fmt::Display for Supermartingale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "const:{c}"),
            Self::Envelope(e) => write!(f, "envelope:{e}"),
            Self::SquareCompensated(c) => write!(f, "square-compensated:{c}"),
        }
    }
}

enum Prepared {
    Constant(f64),
    Table(Vec<HashMap<i64, f64>>),
    Square { offset: f64, rate: f64 },
}

impl Supermartingale {
    fn prepare(&self, lat: &Lattice) -> Result<Prepared> {
        let nonnegative = |v: f64| {
            if v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("`{self}` takes the negative value {v}")))
            }
        };
        match self {
            Self::Constant(c) => {
                nonnegative(*c)?;
                Ok(Prepared::Constant(*c))
            }
            Self::Envelope(phi) => {
                let x = CylinderFunctional::terminal(lat.horizon(), phi.clone())?;
                let cs = CylinderSpace::new(lat, x.times())?;
                let val = cs.evaluate(&x, 0)?;
                let space = cs.space();
                let mut table = Vec::with_capacity(space.depth() + 1);
                for k in 0..=space.depth() {
                    let level: HashMap<i64, f64> = space.level(k).keys().iter().copied().zip(val.values(k).iter().copied()).collect();
                    nonnegative(level.values().copied().fold(f64::INFINITY, f64::min))?;
                    table.push(level);
                }
                Ok(Prepared::Table(table))
            }
            Self::SquareCompensated(offset) => {
                let rate = lat.params().sigma_upper_sq;
                nonnegative(offset - rate * lat.horizon())?;
                Ok(Prepared::Square { offset: *offset, rate })
            }
        }
    }
}

impl Prepared {
    fn on_path(&self, lat: &Lattice, path: &SamplePath) -> Vec<f64> {
        match self {
            Prepared::Constant(c) => vec![*c; path.keys.len()],
            Prepared::Table(t) => path.keys.iter().enumerate().map(|(k, key)| t[k][key]).collect(),
            Prepared::Square { offset, rate } => path
                .keys
                .iter()
                .enumerate()
                .map(|(k, &key)| offset + lat.position(key).powi(2) - rate * lat.time(k))
                .collect(),
        }
    }
}

/// `E[D_a^b] <= E[X_0 ^ b] / (b - a)`, with three standard errors of slack.
#[allow(clippy::too_many_arguments)]
pub fn check_downcrossing(
    lat: &Lattice,
    family: &ScenarioFamily,
    x: &Supermartingale,
    a: f64,
    b: f64,
    n_paths: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if !(0.0 < a && a < b) {
        return Err(Error::InvalidArgument(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    let prepared = x.prepare(lat)?;
    let x0 = prepared.on_path(lat, &SamplePath { keys: vec![0], sigma: vec![] })[0];
    let (argmax, est) = scenario_max(lat, family, n_paths, seed, |path| {
        Ok(downcrossings(&prepared.on_path(lat, path), a, b)? as f64)
    })?;
    let rhs = x0.min(b) / (b - a);
    Ok(VerificationReport::inequality(
        format!("downcrossing:{x}:[{a},{b}]"),
        "downcrossing inequality",
        est.mean,
        rhs,
        3.0 * est.std_err,
        Backend::Mixed,
        lat.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len())
    .with_part("x0", x0)
    .with_part("std_err", est.std_err)
    .with_note(format!("maximising scenario: {argmax}")))
}

/// `E[int (eta g)^2 dA]` by induction, with `g = 1` when absent and `A = <B>`
/// given as `IncreasingSpec::QuadVar`.
fn weighted_qv(lat: &Lattice, eta: &StepProcess, g: Option<&StepProcess>, a: IncreasingSpec) -> Result<(f64, Lattice)> {
    ladder(lat, |l| {
        let mut aug = Augmentation::new();
        let se = aug.add_step(eta.align(l)?);
        let sg = g.map(|g| g.align(l).map(|g| aug.add_step(g))).transpose()?;
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        let grid = l.sigma_grid().to_vec();
        let reward: &Reward = &|v, s, _| {
            let h = v.step(se) * sg.map_or(1.0, |g| v.step(g));
            let da = match a {
                IncreasingSpec::Time => l.time(v.level + 1) - l.time(v.level),
                IncreasingSpec::QuadVar => grid[s] * l.dt(),
            };
            h * h * da
        };
        Ok(space.evaluate(|_| Ok(0.0), Some(reward), 0)?.root())
    })
}

/// `int eta dM` along a path.
fn integral_on_path(lat: &Lattice, eta: &StepProcess, g: &StepProcess, path: &SamplePath) -> Result<Vec<f64>> {
    let b = path.b(lat);
    let e = eta.values_on_path(lat, &b)?;
    let g = g.values_on_path(lat, &b)?;
    let h: Vec<f64> = e.iter().zip(&g).map(|(e, g)| e * g).collect();
    ito_integral(&h, &b)
}

fn sup_power(values: &[f64], p: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(p)).fold(0.0, f64::max)
}

/// `E[sup_t |int_0^t eta dM|^(2q)] <= C E[(int eta^2 dA)^q]` for `d<M> <= dA`.
///
/// The dominance is checked on every sampled path. With `q = 1` the right side
/// is exact by induction on `dp_lattice`.
#[allow(clippy::too_many_arguments)]
pub fn check_bdg_a(
    mc_lattice: &Lattice,
    dp_lattice: &Lattice,
    family: &ScenarioFamily,
    eta: &StepProcess,
    m: &ProcessSpec,
    a: IncreasingSpec,
    q: f64,
    n_paths: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("BDG exponent q must be positive, got {q}")));
    }
    let (_, big) = bdg_constants(2.0 * q)?;
    let lat = mc_lattice;
    let g = m.integrand()?;
    for sc in family.scenarios() {
        for r in map_paths(lat, &sc.policy, n_paths, seed, |path| {
            check_dominance(&m.qv_on_path(lat, path)?, &a.on_path(lat, &path.qv(lat)))
        })? {
            r?;
        }
    }
    let (argmax, sup) = scenario_max(lat, family, n_paths, seed, |path| {
        Ok(sup_power(&integral_on_path(lat, eta, &g, path)?, 2.0 * q))
    })?;
    let (base, backend) = if q == 1.0 {
        (weighted_qv(dp_lattice, eta, None, a)?.0, Backend::Mixed)
    } else {
        let (_, est) = scenario_max(lat, family, n_paths, seed, |path| {
            let b = path.b(lat);
            let e = eta.values_on_path(lat, &b)?;
            let da = a.on_path(lat, &path.qv(lat)).increments();
            Ok(e.iter().zip(&da).map(|(e, d)| e * e * d).sum::<f64>().powf(q))
        })?;
        (est.mean, Backend::MonteCarlo)
    };
    Ok(VerificationReport::inequality(
        format!("bdg-a:{eta}:{m}:{a:?}:q={q}"),
        "Burkholder-Davis-Gundy upper bound against a dominating process",
        sup.mean,
        big * base,
        0.0,
        backend,
        lat.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len())
    .with_part("constant", big)
    .with_part("ratio", sup.mean / base)
    .with_part("sup_moment", sup.mean)
    .with_part("dominating_moment", base)
    .with_note(format!("maximising scenario: {argmax}")))
}

/// `c E[(int eta^2 d<M>)^p] <= E[sup_t |int_0^t eta dM|^(2p)] <= C E[(int eta^2 d<M>)^p]`.
///
/// Measured as `max(c Q - S, S - C Q) <= 0`.
#[allow(clippy::too_many_arguments)]
pub fn check_bdg_two_sided(
    mc_lattice: &Lattice,
    dp_lattice: &Lattice,
    family: &ScenarioFamily,
    eta: &StepProcess,
    m: &ProcessSpec,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("BDG exponent p must be positive, got {p}")));
    }
    let (small, big) = bdg_constants(2.0 * p)?;
    let lat = mc_lattice;
    let g = m.integrand()?;
    let (_, sup) = scenario_max(lat, family, n_paths, seed, |path| {
        Ok(sup_power(&integral_on_path(lat, eta, &g, path)?, 2.0 * p))
    })?;
    let (qv, backend) = if p == 1.0 {
        (weighted_qv(dp_lattice, eta, Some(&g), IncreasingSpec::QuadVar)?.0, Backend::Mixed)
    } else {
        let (_, est) = scenario_max(lat, family, n_paths, seed, |path| {
            let b = path.b(lat);
            let e = eta.values_on_path(lat, &b)?;
            let dq = m.qv_on_path(lat, path)?.increments();
            Ok(e.iter().zip(&dq).map(|(e, d)| e * e * d).sum::<f64>().powf(p))
        })?;
        (est.mean, Backend::MonteCarlo)
    };
    let lower = small * qv - sup.mean;
    let upper = sup.mean - big * qv;
    let lhs = if lower.is_nan() || upper.is_nan() { f64::NAN } else { lower.max(upper) };
    Ok(VerificationReport::inequality(
        format!("bdg-two-sided:{eta}:{m}:p={p}"),
        "two-sided Burkholder-Davis-Gundy inequality",
        lhs,
        0.0,
        0.0,
        backend,
        lat.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len())
    .with_part("lower_constant", small)
    .with_part("upper_constant", big)
    .with_part("sup_moment", sup.mean)
    .with_part("qv_moment", qv)
    .with_part("ratio", sup.mean / qv))
}
