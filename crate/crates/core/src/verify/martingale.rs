//! Checks answered by backward induction on the (augmented) lattice.

use std::sync::Arc;

use rayon::prelude::*;

use super::process::{ladder, Handle, ProcessSpec};
use super::{Backend, VerificationReport};
use crate::calculus::{g_compensated, ito_integral, qv_identity_residual, IncreasingProcess, IncreasingSpec, StepProcess};
use crate::error::{Error, Result};
use crate::lattice::{
    map_paths, Augmentation, CylinderFunctional, CylinderSlots, Driver, Lattice, ObsId, Reward, Source, StateSpace,
    StateView, StepId, Valuation,
};
use crate::params::g_eval;
use crate::payoff::PayoffExpr;
use crate::scenario::{capacity_estimate, ScenarioFamily};

/// Upper (`E[.]`) or lower (`-E[-.]`) expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `max |value - target|` over every state on levels `from..=depth`.
fn deviation<T>(space: &StateSpace, val: &Valuation, from: usize, target: T) -> f64
where
    T: Fn(&StateView) -> f64 + Sync,
{
    (from..=space.depth())
        .map(|k| {
            let values = val.values(k);
            (0..space.n_states(k))
                .into_par_iter()
                .map(|i| (values[i] - target(&space.view(k, i))).abs())
                .reduce(|| 0.0, nan_max)
        })
        .fold(0.0, nan_max)
}

/// `max (|M_child - M| - bound)^+` over every transition.
fn continuity_excess<M, B>(space: &StateSpace, m: M, bound: B) -> f64
where
    M: Fn(&StateView) -> f64 + Sync,
    B: Fn(&StateView) -> f64 + Sync,
{
    let n_sigma = space.lattice().n_sigma();
    (0..space.depth())
        .map(|k| {
            (0..space.n_states(k))
                .into_par_iter()
                .map(|i| {
                    let v = space.view(k, i);
                    let here = m(&v);
                    let limit = bound(&v) * (1.0 + 1e-12);
                    let mut worst = 0.0f64;
                    for s in 0..n_sigma {
                        for up in [true, false] {
                            let c = space.view(k + 1, space.child(k, i, s, up));
                            worst = nan_max(worst, (m(&c) - here).abs() - limit);
                        }
                    }
                    worst.max(0.0)
                })
                .reduce(|| 0.0, nan_max)
        })
        .fold(0.0, nan_max)
}

fn level_pair(lat: &Lattice, s: f64, t: f64) -> Result<(usize, usize)> {
    let (a, b) = (lat.level_of(s)?, lat.level_of(t)?);
    if a >= b {
        return Err(Error::InvalidArgument(format!("need s < t, got s = {s}, t = {t}")));
    }
    Ok((a, b))
}

fn step_dt(lat: &Lattice, level: usize) -> f64 {
    lat.time(level + 1) - lat.time(level)
}

/// `E[M_t | H_k] = M_k` and `E[-M_t | H_k] = -M_k` on every state with `s <= t_k <= t`.
pub fn check_symmetric_martingale(lat: &Lattice, m: &ProcessSpec, s: f64, t: f64, tol: f64) -> Result<VerificationReport> {
    let ((up, down, gap), used) = ladder(lat, |l| {
        let (sl, tl) = level_pair(l, s, t)?;
        let mut aug = Augmentation::new();
        let h = m.install(l, &mut aug)?;
        let space = StateSpace::build(l, &aug, tl)?;
        let vu = space.evaluate(|v| Ok(h.value(v)), None, sl)?;
        let vd = space.evaluate(|v| Ok(-h.value(v)), None, sl)?;
        let up = deviation(&space, &vu, sl, |v| h.value(v));
        let down = deviation(&space, &vd, sl, |v| -h.value(v));
        let gap = vu
            .values(sl)
            .iter()
            .zip(vd.values(sl))
            .map(|(a, b)| a + b)
            .fold(0.0, nan_max);
        Ok((up, down, gap))
    })?;
    Ok(VerificationReport::equality(
        format!("symmetric-martingale:{m}"),
        "symmetric G-martingale",
        up.max(down),
        0.0,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    )
    .with_part("upper_deviation", up)
    .with_part("lower_deviation", down)
    .with_part("asymmetry_gap", gap)
    .with_part("s", s)
    .with_part("t", t))
}

type ValueFn<'a> = &'a (dyn Fn(&StateView) -> f64 + Sync);

/// Sub-checks shared by the characterisation lemma and the representation theorem.
struct Characterisation {
    sym_upper: f64,
    sym_lower: f64,
    qv_upper: f64,
    qv_lower: f64,
    lower_moment: f64,
    slope: f64,
    continuity: f64,
    f4_moment: f64,
}

/// `f = None` means `f = 1`.
fn characterise(space: &StateSpace, m: ValueFn, f: Option<ValueFn>) -> Result<Characterisation> {
    let lat = space.lattice();
    let p = *lat.params();
    let horizon = lat.horizon();
    let fval = |v: &StateView| f.map_or(1.0, |f| f(v));

    let up = space.evaluate(|v| Ok(m(v)), None, 0)?;
    let down = space.evaluate(|v| Ok(-m(v)), None, 0)?;
    let sym_upper = deviation(space, &up, 0, m);
    let sym_lower = deviation(space, &down, 0, |v| -m(v));

    let hi: &Reward = &|v: &StateView, _, _| -p.sigma_upper_sq * fval(v).powi(2) * step_dt(lat, v.level);
    let qv_up = space.evaluate(|v| Ok(m(v).powi(2)), Some(hi), 0)?;
    let qv_upper = deviation(space, &qv_up, 0, |v| m(v).powi(2));

    let lo: &Reward = &|v: &StateView, _, _| p.sigma_lower_sq * fval(v).powi(2) * step_dt(lat, v.level);
    let qv_down = space.evaluate(|v| Ok(-m(v).powi(2)), Some(lo), 0)?;
    let qv_lower = deviation(space, &qv_down, 0, |v| -m(v).powi(2));

    let sq = space.evaluate(|v| Ok(m(v).powi(2)), None, 0)?.root();
    let neg_sq = space.evaluate(|v| Ok(-m(v).powi(2)), None, 0)?.root();
    let lower_moment = (neg_sq + p.sigma_lower_sq * horizon).abs();

    let continuity = continuity_excess(space, m, |v| fval(v).abs() * p.sigma_upper() * step_dt(lat, v.level).sqrt());

    let r4: &Reward = &|v: &StateView, _, _| fval(v).powi(4) * step_dt(lat, v.level);
    let f4_moment = space.evaluate(|_| Ok(0.0), Some(r4), 0)?.root();

    Ok(Characterisation {
        sym_upper,
        sym_lower,
        qv_upper,
        qv_lower,
        lower_moment,
        slope: sq / horizon,
        continuity,
        f4_moment,
    })
}

const CONTINUITY_NOTE: &str = "continuity is checked as |dM| <= sup|f| * sigma_upper * sqrt(dt) on every lattice transition";

fn characterisation_report(id: String, c: &Characterisation, tol: f64, n_steps: usize, sigma_upper_sq: f64) -> VerificationReport {
    let lhs = [c.sym_upper, c.sym_lower, c.qv_upper, c.lower_moment, c.continuity]
        .into_iter()
        .fold(0.0, nan_max);
    VerificationReport::equality(id, "G-Brownian motion characterisation", lhs, 0.0, tol, Backend::LatticeDp, n_steps)
        .with_part("i_symmetric_upper", c.sym_upper)
        .with_part("i_symmetric_lower", c.sym_lower)
        .with_part("ii_square_minus_time", c.qv_upper)
        .with_part("iii_lower_second_moment", c.lower_moment)
        .with_part("iv_continuity_excess", c.continuity)
        .with_part("slope", c.slope)
        .with_part("slope_expected", sigma_upper_sq)
        .with_part("slope_gap", c.slope - sigma_upper_sq)
        .with_note(CONTINUITY_NOTE)
}

/// The four conditions characterising G-Brownian motion, with `M_t^2 - sigma_upper^2 t`
/// in the second.
pub fn check_gbm_characterization(lat: &Lattice, m: &ProcessSpec, tol: f64) -> Result<VerificationReport> {
    let (c, used) = ladder(lat, |l| {
        let mut aug = Augmentation::new();
        let h = m.install(l, &mut aug)?;
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        characterise(&space, &|v| h.value(v), None)
    })?;
    Ok(characterisation_report(
        format!("gbm-characterization:{m}"),
        &c,
        tol,
        used.n_steps(),
        lat.params().sigma_upper_sq,
    ))
}

/// Both directions of the representation `M = int f dB`, for `|f| >= c_lower > 0`.
///
/// Returns the forward conditions, the per-path recovery `int dM / f = B`, and the
/// characterisation of the recovered process.
#[allow(clippy::too_many_arguments)]
pub fn check_representation(
    lat: &Lattice,
    mc_lattice: &Lattice,
    family: &ScenarioFamily,
    f: &StepProcess,
    c_lower: f64,
    tol: f64,
    recovery_tol: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    if lat.params().sigma_lower_sq == 0.0 {
        return Err(Error::DegenerateLowerVolatility);
    }
    if !(c_lower > 0.0) {
        return Err(Error::InvalidArgument(format!("lower bound C must be positive, got {c_lower}")));
    }
    let ((fwd, rev), used) = ladder(lat, |l| {
        let mut aug = Augmentation::new();
        let sf = aug.add_step(f.align(l)?);
        let i = sf.index();
        check_integrand_bound(&StateSpace::build(l, &aug, l.n_steps())?, sf, c_lower)?;
        let m = aug.add_sum(Arc::new(move |fz: &[f64]| fz[i]), Driver::Brownian)?;
        let x = aug.add_sum(Arc::new(move |fz: &[f64]| 1.0 / fz[i]), Driver::Sum(m))?;
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        let fwd = characterise(&space, &|v| v.sum(m), Some(&|v| v.step(sf)))?;
        let rev = characterise(&space, &|v| v.sum(x), None)?;
        Ok((fwd, rev))
    })?;
    let n = used.n_steps();
    let forward_lhs = [fwd.sym_upper, fwd.sym_lower, fwd.qv_upper, fwd.qv_lower]
        .into_iter()
        .fold(0.0, nan_max);
    let forward = VerificationReport::equality(
        format!("representation:{f}:forward"),
        "representation as an integral against G-Brownian motion",
        forward_lhs,
        0.0,
        tol,
        Backend::LatticeDp,
        n,
    )
    .with_part("i_symmetric_upper", fwd.sym_upper)
    .with_part("i_symmetric_lower", fwd.sym_lower)
    .with_part("ii_square_minus_integral", fwd.qv_upper)
    .with_part("iii_neg_square_plus_lower_integral", fwd.qv_lower)
    .with_part("f_fourth_moment", fwd.f4_moment)
    .with_part("c_lower", c_lower);

    let aligned = f.align(mc_lattice)?;
    let mut worst = 0.0f64;
    for sc in family.scenarios() {
        let errs = map_paths(mc_lattice, &sc.policy, n_paths, seed, |p| -> Result<f64> {
            let b = p.b(mc_lattice);
            let fv = aligned.values_on_path(mc_lattice, &b)?;
            let m = ito_integral(&fv, &b)?;
            let inv: Vec<f64> = fv.iter().map(|x| 1.0 / x).collect();
            let x = ito_integral(&inv, &m)?;
            Ok(x.iter().zip(&b).map(|(x, b)| (x - b).abs()).fold(0.0, nan_max))
        })?;
        for e in errs {
            worst = nan_max(worst, e?);
        }
    }
    let recovery = VerificationReport::equality(
        format!("representation:{f}:recovery"),
        "recovery of B as int dM / f",
        worst,
        0.0,
        recovery_tol,
        Backend::MonteCarlo,
        mc_lattice.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len());

    let reverse = characterisation_report(
        format!("representation:{f}:reverse"),
        &rev,
        tol,
        n,
        lat.params().sigma_upper_sq,
    );
    Ok(vec![forward, recovery, reverse])
}

fn check_integrand_bound(space: &StateSpace, f: StepId, c_lower: f64) -> Result<()> {
    for k in 0..space.depth() {
        for i in 0..space.n_states(k) {
            let value = space.view(k, i).step(f);
            if !(value.abs() >= c_lower) {
                return Err(Error::IntegrandBound { level: k, value });
            }
        }
    }
    Ok(())
}

/// Where a process value recorded at a fixed level is read from.
#[derive(Debug, Clone, Copy)]
enum Observed {
    Now(Handle),
    Obs(ObsId, f64, f64),
    Fixed(f64),
}

impl Observed {
    fn install(aug: &mut Augmentation, h: Handle, lat: &Lattice, level: usize, depth: usize) -> Self {
        if level == depth {
            return Observed::Now(h);
        }
        match h {
            Handle::Constant(c) => Observed::Fixed(c),
            _ if level == 0 => Observed::Fixed(0.0),
            Handle::Scaled(c) => Observed::Obs(aug.observe(level, Source::Position), c, 0.0),
            Handle::Sum(id) => Observed::Obs(aug.observe(level, Source::Sum(id)), 1.0, 0.0),
            Handle::SumMinusTime(id) => Observed::Obs(aug.observe(level, Source::Sum(id)), 1.0, -lat.time(level)),
        }
    }

    fn value(&self, v: &StateView) -> f64 {
        match *self {
            Observed::Now(h) => h.value(v),
            Observed::Obs(id, c, shift) => c * v.observed(id) + shift,
            Observed::Fixed(c) => c,
        }
    }
}

/// `E[X + Y | H_s] = E[X | H_s] + E[Y | H_s]` for `Y = M_t - M_s` with `E[Y|H_s] = -E[-Y|H_s]`.
///
/// The measured discrepancy is the larger of the additivity gap and the
/// hypothesis gap, so a failed hypothesis fails the check.
pub fn check_additivity_lemma(
    lat: &Lattice,
    x: &CylinderFunctional,
    y: &ProcessSpec,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<VerificationReport> {
    let ((hyp, add), used) = ladder(lat, |l| {
        let (sl, tl) = level_pair(l, s, t)?;
        let last = l.level_of(*x.times().last().unwrap())?;
        let depth = last.max(tl);
        let mut aug = Augmentation::new();
        let slots = CylinderSlots::install(l, &mut aug, x.times(), depth)?;
        let h = y.install(l, &mut aug)?;
        let ms = Observed::install(&mut aug, h, l, sl, depth);
        let mt = Observed::install(&mut aug, h, l, tl, depth);
        let space = StateSpace::build(l, &aug, depth)?;
        let yv = |v: &StateView| mt.value(v) - ms.value(v);
        let xv = |v: &StateView| x.eval_levels(&slots.history(v));

        let ey = space.evaluate(|v| Ok(yv(v)), None, sl)?;
        let eny = space.evaluate(|v| Ok(-yv(v)), None, sl)?;
        let ex = space.evaluate(|v| xv(v), None, sl)?;
        let exy = space.evaluate(|v| Ok(xv(v)? + yv(v)), None, sl)?;
        let hyp = ey.values(sl).iter().zip(eny.values(sl)).map(|(a, b)| (a + b).abs()).fold(0.0, nan_max);
        let add = (0..space.n_states(sl))
            .map(|i| (exy.values(sl)[i] - ex.values(sl)[i] - ey.values(sl)[i]).abs())
            .fold(0.0, nan_max);
        Ok((hyp, add))
    })?;
    let mut r = VerificationReport::equality(
        format!("additivity:{}:{y}", x.phi()),
        "additivity with a symmetric martingale increment",
        hyp.max(add),
        0.0,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    )
    .with_part("hypothesis_gap", hyp)
    .with_part("additivity_gap", add)
    .with_part("s", s)
    .with_part("t", t);
    if hyp > tol {
        r = r.with_note("hypothesis fails: E[Y|H_s] != -E[-Y|H_s]; equality not asserted");
    }
    Ok(r)
}

/// The integrand `g` of `M = int g dB` and the step process `eta` as frozen slots.
fn integrand_slots(l: &Lattice, aug: &mut Augmentation, eta: &StepProcess, m: &ProcessSpec) -> Result<(StepId, StepId)> {
    let se = aug.add_step(eta.align(l)?);
    let sg = aug.add_step(m.integrand()?.align(l)?);
    Ok((se, sg))
}

/// `E[(int eta dM)^2] = E[int eta^2 d<M>]` (upper), or the same with lower expectations.
pub fn check_isometry(lat: &Lattice, eta: &StepProcess, m: &ProcessSpec, side: Side, tol: f64) -> Result<VerificationReport> {
    let sign = side.sign();
    let ((lhs, rhs), used) = ladder(lat, |l| {
        let mut aug = Augmentation::new();
        let (se, sg) = integrand_slots(l, &mut aug, eta, m)?;
        let (ie, ig) = (se.index(), sg.index());
        let plain = aug.clone();
        let int = aug.add_sum(Arc::new(move |fz: &[f64]| fz[ie] * fz[ig]), Driver::Brownian)?;
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        let lhs = sign * space.evaluate(|v| Ok(sign * v.sum(int).powi(2)), None, 0)?.root();

        let grid = l.sigma_grid().to_vec();
        let dt = l.dt();
        let reward: &Reward = &|v: &StateView, s, _| sign * (v.step(se) * v.step(sg)).powi(2) * grid[s] * dt;
        let rspace = StateSpace::build(l, &plain, l.n_steps())?;
        let rhs = sign * rspace.evaluate(|_| Ok(0.0), Some(reward), 0)?.root();
        Ok((lhs, rhs))
    })?;
    Ok(VerificationReport::equality(
        format!("isometry:{eta}:{m}:{}", side.label()),
        "isometry",
        lhs,
        rhs,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    ))
}

fn increasing_dt(a: IncreasingSpec, grid: &[f64], s: usize, dt: f64, dt_level: f64) -> f64 {
    match a {
        IncreasingSpec::Time => dt_level,
        IncreasingSpec::QuadVar => grid[s] * dt,
    }
}

/// `E[|int eta dM|^2] <= E[int |eta|^2 dA]`, after checking `d<M> <= dA` on every transition.
pub fn check_l2_bound(lat: &Lattice, eta: &StepProcess, m: &ProcessSpec, a: IncreasingSpec, tol: f64) -> Result<VerificationReport> {
    let ((lhs, rhs), used) = ladder(lat, |l| {
        let mut aug = Augmentation::new();
        let (se, sg) = integrand_slots(l, &mut aug, eta, m)?;
        let (ie, ig) = (se.index(), sg.index());
        let plain = aug.clone();
        let int = aug.add_sum(Arc::new(move |fz: &[f64]| fz[ie] * fz[ig]), Driver::Brownian)?;
        let rspace = StateSpace::build(l, &plain, l.n_steps())?;
        let grid = l.sigma_grid().to_vec();
        let dt = l.dt();
        for k in 0..rspace.depth() {
            for i in 0..rspace.n_states(k) {
                let g = rspace.view(k, i).step(sg);
                for (s, &rate) in grid.iter().enumerate() {
                    let (dq, da) = (g * g * rate * dt, increasing_dt(a, &grid, s, dt, step_dt(l, k)));
                    if dq > da * (1.0 + 1e-12) {
                        return Err(Error::Dominance { step: k, dqv: dq, da });
                    }
                }
            }
        }
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        let lhs = space.evaluate(|v| Ok(v.sum(int).powi(2)), None, 0)?.root();
        let reward: &Reward = &|v: &StateView, s, _| v.step(se).powi(2) * increasing_dt(a, &grid, s, dt, step_dt(l, v.level));
        let rhs = rspace.evaluate(|_| Ok(0.0), Some(reward), 0)?.root();
        Ok((lhs, rhs))
    })?;
    Ok(VerificationReport::inequality(
        format!("l2-bound:{eta}:{m}:{a:?}"),
        "L2 bound for the stochastic integral",
        lhs,
        rhs,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    ))
}

/// `E[|int eta d<B>|] <= E[int |eta| dA]`.
pub fn check_l1_bound(lat: &Lattice, eta: &StepProcess, a: IncreasingSpec, tol: f64) -> Result<VerificationReport> {
    let ((lhs, rhs), used) = ladder(lat, |l| {
        let mut aug = Augmentation::new();
        let se = aug.add_step(eta.align(l)?);
        let ie = se.index();
        let plain = aug.clone();
        let int = aug.add_sum(Arc::new(move |fz: &[f64]| fz[ie]), Driver::QuadVar)?;
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        let lhs = space.evaluate(|v| Ok(v.sum(int).abs()), None, 0)?.root();
        let grid = l.sigma_grid().to_vec();
        let dt = l.dt();
        let reward: &Reward = &|v: &StateView, s, _| v.step(se).abs() * increasing_dt(a, &grid, s, dt, step_dt(l, v.level));
        let rspace = StateSpace::build(l, &plain, l.n_steps())?;
        let rhs = rspace.evaluate(|_| Ok(0.0), Some(reward), 0)?.root();
        Ok((lhs, rhs))
    })?;
    Ok(VerificationReport::inequality(
        format!("l1-bound:{eta}:{a:?}"),
        "L1 bound for the integral against quadratic variation",
        lhs,
        rhs,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    ))
}

/// `E[X + xi (<B>_t - <B>_s)] = E[X + xi (B_t - B_s)^2] = E[X + xi (B_t^2 - B_s^2)]`, `xi = xi(B_s)`.
pub fn check_transfer(
    lat: &Lattice,
    x: &CylinderFunctional,
    xi: &PayoffExpr,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<VerificationReport> {
    let ((a, b, c), used) = ladder(lat, |l| {
        let (sl, tl) = level_pair(l, s, t)?;
        let last = l.level_of(*x.times().last().unwrap())?;
        let depth = last.max(tl);
        let mut aug = Augmentation::new();
        let slots = CylinderSlots::install(l, &mut aug, x.times(), depth)?;
        let window = aug.add_step(StepProcess::indicator(s, t)?.align(l)?);
        let iw = window.index();
        let qv = aug.add_sum(Arc::new(move |fz: &[f64]| fz[iw]), Driver::QuadVar)?;
        let bs = Observed::install(&mut aug, Handle::Scaled(1.0), l, sl, depth);
        let bt = Observed::install(&mut aug, Handle::Scaled(1.0), l, tl, depth);
        let space = StateSpace::build(l, &aug, depth)?;
        let base = |v: &StateView| -> Result<(f64, f64, f64, f64)> {
            let xv = x.eval_levels(&slots.history(v))?;
            let (s_, t_) = (bs.value(v), bt.value(v));
            Ok((xv, xi.eval(&[s_])?, s_, t_))
        };
        let a = space
            .evaluate(|v| base(v).map(|(xv, z, _, _)| xv + z * v.sum(qv)), None, 0)?
            .root();
        let b = space
            .evaluate(|v| base(v).map(|(xv, z, s_, t_)| xv + z * (t_ - s_).powi(2)), None, 0)?
            .root();
        let c = space
            .evaluate(|v| base(v).map(|(xv, z, s_, t_)| xv + z * (t_ * t_ - s_ * s_)), None, 0)?
            .root();
        Ok((a, b, c))
    })?;
    Ok(VerificationReport::equality(
        format!("transfer:{}:{xi}", x.phi()),
        "quadratic variation transfer identity",
        (a - b).abs().max((a - c).abs()),
        0.0,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    )
    .with_part("with_qv", a)
    .with_part("with_square_increment", b)
    .with_part("with_square_difference", c))
}

/// `<M> = M^2 - M_0^2 - 2 int M dM` on every sampled path of every scenario.
pub fn check_qv_identity(
    lat: &Lattice,
    family: &ScenarioFamily,
    m: &ProcessSpec,
    n_paths: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    let mut worst = 0.0f64;
    for sc in family.scenarios() {
        for r in map_paths(lat, &sc.policy, n_paths, seed, |p| m.on_path(lat, p).map(|v| qv_identity_residual(&v)))? {
            worst = nan_max(worst, r?);
        }
    }
    Ok(VerificationReport::equality(
        format!("qv-identity:{m}"),
        "quadratic variation identity",
        worst,
        0.0,
        tol,
        Backend::MonteCarlo,
        lat.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len()))
}

/// Capacity of `{some step has d<B> outside [sigma_lower^2 dt, sigma_upper^2 dt]}` is zero.
pub fn check_qv_band(lat: &Lattice, family: &ScenarioFamily, n_paths: usize, seed: u64) -> Result<VerificationReport> {
    let p = *lat.params();
    let (lo, hi) = (p.sigma_lower_sq * lat.dt(), p.sigma_upper_sq * lat.dt());
    let mut probs = Vec::new();
    let (mut min_rate, mut max_rate) = (f64::INFINITY, f64::NEG_INFINITY);
    for sc in family.scenarios() {
        let per_path = map_paths(lat, &sc.policy, n_paths, seed, |path| {
            let d = path.qv_increments(lat);
            let violated = d.iter().any(|&x| !(lo <= x && x <= hi));
            let mn = d.iter().copied().fold(f64::INFINITY, f64::min);
            let mx = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (violated, mn, mx)
        })?;
        let hits = per_path.iter().filter(|r| r.0).count();
        probs.push(hits as f64 / n_paths as f64);
        for (_, mn, mx) in per_path {
            min_rate = min_rate.min(mn / lat.dt());
            max_rate = max_rate.max(mx / lat.dt());
        }
    }
    let cap = capacity_estimate(&probs)?;
    Ok(VerificationReport::equality(
        "qv-band",
        "quasi-sure bounds on quadratic variation",
        cap,
        0.0,
        0.0,
        Backend::MonteCarlo,
        lat.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len())
    .with_part("min_rate", min_rate)
    .with_part("max_rate", max_rate))
}

/// `X = int f d<B> - 2 int G(f) dt` is nonincreasing on every path and
/// `E[X_T - X_t | H_t] = 0` on every state.
#[allow(clippy::too_many_arguments)]
pub fn check_compensator(
    dp_lattice: &Lattice,
    mc_lattice: &Lattice,
    family: &ScenarioFamily,
    f: &StepProcess,
    n_paths: usize,
    seed: u64,
    path_tol: f64,
    tol: f64,
) -> Result<Vec<VerificationReport>> {
    let params = *mc_lattice.params();
    let aligned = f.align(mc_lattice)?;
    let time = IncreasingProcess::time(mc_lattice);
    let mut worst = f64::NEG_INFINITY;
    for sc in family.scenarios() {
        for r in map_paths(mc_lattice, &sc.policy, n_paths, seed, |p| -> Result<f64> {
            let fv = aligned.values_on_path(mc_lattice, &p.b(mc_lattice))?;
            let x = g_compensated(&fv, &p.qv(mc_lattice), &time, &params)?;
            Ok(x.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, nan_max))
        })? {
            worst = nan_max(worst, r?);
        }
    }
    let monotone = VerificationReport::inequality(
        format!("compensator:{f}:monotone"),
        "decreasing G-compensated process",
        worst,
        0.0,
        path_tol,
        Backend::MonteCarlo,
        mc_lattice.n_steps(),
    )
    .with_sampling(seed, n_paths * family.len());

    let (dev, used) = ladder(dp_lattice, |l| {
        let mut aug = Augmentation::new();
        let sf = aug.add_step(f.align(l)?);
        let space = StateSpace::build(l, &aug, l.n_steps())?;
        let grid = l.sigma_grid().to_vec();
        let dt = l.dt();
        let p = *l.params();
        let reward: &Reward = &|v: &StateView, s, _| {
            let fv = v.step(sf);
            fv * grid[s] * dt - 2.0 * g_eval(fv, &p) * step_dt(l, v.level)
        };
        let val = space.evaluate(|_| Ok(0.0), Some(reward), 0)?;
        Ok(deviation(&space, &val, 0, |_| 0.0))
    })?;
    let martingale = VerificationReport::equality(
        format!("compensator:{f}:martingale"),
        "G-martingale property of the compensated process",
        dev,
        0.0,
        tol,
        Backend::LatticeDp,
        used.n_steps(),
    );
    Ok(vec![monotone, martingale])
}
