//! Discrete stochastic calculus on lattice paths.
//!
//! Processes are per-path arrays indexed by lattice level; integrands are step
//! processes frozen on `[t_j, t_{j+1})` and all integrals are left-endpoint sums.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{Augmentation, Driver, Lattice, StateSpace};
use crate::params::{g_eval, GParams};
use crate::payoff::PayoffExpr;
use crate::scenario::{scenario_mean, ScenarioFamily};

/// Where the value on each interval comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StepValues {
    /// One deterministic value per interval.
    Constants(Vec<f64>),
    /// `xi_j = f(B_{t_j}, t_j)` with `x1 = B`, `x2 = t`.
    Node(PayoffExpr),
}

/// `eta_t = sum_j xi_j 1[t_j, t_{j+1})(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProcess {
    /// `None` means a breakpoint at every lattice level.
    breakpoints: Option<Vec<f64>>,
    values: StepValues,
}

impl StepProcess {
    pub fn constant(c: f64) -> Self {
        Self {
            breakpoints: Some(vec![0.0]),
            values: StepValues::Constants(vec![c]),
        }
    }

    pub fn piecewise(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_breakpoints(&times)?;
        if times.len() != values.len() {
            return Err(Error::LengthMismatch(format!(
                "{} breakpoints but {} values",
                times.len(),
                values.len()
            )));
        }
        Ok(Self {
            breakpoints: Some(times),
            values: StepValues::Constants(values),
        })
    }

    /// `xi = f(B, t)` re-read at every lattice level.
    pub fn node_function(expr: PayoffExpr) -> Result<Self> {
        Ok(Self {
            breakpoints: None,
            values: StepValues::Node(expr.with_arity(2)?),
        })
    }

    /// `xi_j = f(B_{t_j}, t_j)` on the given breakpoints.
    pub fn node_function_at(times: Vec<f64>, expr: PayoffExpr) -> Result<Self> {
        check_breakpoints(&times)?;
        Ok(Self {
            breakpoints: Some(times),
            values: StepValues::Node(expr.with_arity(2)?),
        })
    }

    /// `1[a, b)`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b) {
            return Err(Error::InvalidArgument(format!("indicator needs 0 <= a < b, got [{a}, {b})")));
        }
        if a == 0.0 {
            Self::piecewise(vec![0.0, b], vec![1.0, 0.0])
        } else {
            Self::piecewise(vec![0.0, a, b], vec![0.0, 1.0, 0.0])
        }
    }

    pub fn values(&self) -> &StepValues {
        &self.values
    }

    /// True when the value never depends on the path.
    pub fn is_deterministic(&self) -> bool {
        matches!(self.values, StepValues::Constants(_))
    }

    /// Pin breakpoints to lattice levels. Breakpoints at or past the horizon
    /// open no interval and are dropped.
    pub fn align(&self, lat: &Lattice) -> Result<AlignedStep> {
        let n = lat.n_steps();
        let mut starts = Vec::new();
        let mut values = Vec::new();
        match &self.breakpoints {
            None => {
                starts.extend(0..n);
            }
            Some(times) => {
                for (j, &t) in times.iter().enumerate() {
                    let level = lat.level_of(t).or_else(|e| if t > lat.horizon() { Ok(n) } else { Err(e) })?;
                    if level >= n {
                        break;
                    }
                    if let Some(&prev) = starts.last() {
                        if level <= prev {
                            return Err(Error::NotIncreasing(format!("breakpoint {t} collapses onto level {prev}")));
                        }
                    }
                    starts.push(level);
                    if let StepValues::Constants(v) = &self.values {
                        values.push(v[j]);
                    }
                }
            }
        }
        let values = match &self.values {
            StepValues::Constants(_) => StepValues::Constants(values),
            StepValues::Node(e) => StepValues::Node(e.clone()),
        };
        Ok(AlignedStep { starts, values, n_steps: n })
    }

    /// `xi` at every level `0..n` along a path of `B`.
    pub fn values_on_path(&self, lat: &Lattice, b: &[f64]) -> Result<Vec<f64>> {
        self.align(lat)?.values_on_path(lat, b)
    }

    /// Rows `t_j,value`; node functions print their expression text.
    pub fn write_csv<W: Write>(&self, lat: &Lattice, mut out: W) -> Result<()> {
        let aligned = self.align(lat)?;
        let io = |e: std::io::Error| Error::InvalidArgument(e.to_string());
        writeln!(out, "t,value").map_err(io)?;
        for (j, &level) in aligned.starts.iter().enumerate() {
            match &aligned.values {
                StepValues::Constants(v) => writeln!(out, "{},{}", lat.time(level), v[j]),
                StepValues::Node(e) => writeln!(out, "{},\"{}\"", lat.time(level), e),
            }
            .map_err(io)?;
        }
        Ok(())
    }
}

impl std::fmt::Display for StepProcess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.breakpoints, &self.values) {
            (None, StepValues::Node(e)) => write!(f, "{e}"),
            (Some(t), StepValues::Constants(v)) if t.len() == 1 => write!(f, "{}", v[0]),
            (Some(t), StepValues::Constants(v)) => {
                let pieces: Vec<String> = t.iter().zip(v).map(|(t, v)| format!("{t}={v}")).collect();
                write!(f, "step:{}", pieces.join(";"))
            }
            (Some(t), StepValues::Node(e)) => {
                let times: Vec<String> = t.iter().map(|t| t.to_string()).collect();
                write!(f, "node@{}:{e}", times.join(","))
            }
            (None, StepValues::Constants(v)) => write!(f, "{v:?}"),
        }
    }
}

fn check_breakpoints(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("first breakpoint must be 0".into()));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::NotIncreasing("breakpoints".into()));
    }
    Ok(())
}

/// A step process with breakpoints resolved to lattice levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedStep {
    starts: Vec<usize>,
    values: StepValues,
    n_steps: usize,
}

impl AlignedStep {
    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Index of the interval opening at `level`, if any.
    pub fn breakpoint_at(&self, level: usize) -> Option<usize> {
        self.starts.binary_search(&level).ok()
    }

    /// `xi_j` given the state at its breakpoint.
    pub fn value(&self, j: usize, b: f64, t: f64) -> Result<f64> {
        match &self.values {
            StepValues::Constants(v) => Ok(v[j]),
            StepValues::Node(e) => e.eval(&[b, t]),
        }
    }

    pub fn values_on_path(&self, lat: &Lattice, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n_steps + 1 {
            return Err(Error::LengthMismatch(format!(
                "path has {} levels, step process expects {}",
                b.len(),
                self.n_steps + 1
            )));
        }
        let mut out = Vec::with_capacity(self.n_steps);
        let mut current = 0.0;
        let mut j = 0;
        for k in 0..self.n_steps {
            if j < self.starts.len() && self.starts[j] == k {
                current = self.value(j, b[k], lat.time(k))?;
                j += 1;
            }
            out.push(current);
        }
        Ok(out)
    }
}

/// A per-path nondecreasing process with `A_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncreasingProcess {
    values: Vec<f64>,
}

impl IncreasingProcess {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&0.0) {
            return Err(Error::NotIncreasing("A_0 must be 0".into()));
        }
        if let Some(k) = values.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(Error::NotIncreasing(format!("decreases at step {k}")));
        }
        Ok(Self { values })
    }

    pub fn from_increments(increments: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        values.push(acc);
        for &d in increments {
            acc += d;
            values.push(acc);
        }
        Self::new(values)
    }

    /// `A_t = t` on the lattice levels.
    pub fn time(lat: &Lattice) -> Self {
        Self {
            values: (0..=lat.n_steps()).map(|k| lat.time(k)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Partial sums `sum_{j<k} eta_j (M_{j+1} - M_j)` for `k = 0..=n`.
pub fn ito_integral(eta: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    stieltjes(eta, m)
}

/// `int_s^t eta dM` as a process: the integrand is cut to levels `[s, t)`.
pub fn ito_integral_between(eta: &[f64], m: &[f64], s: usize, t: usize) -> Result<Vec<f64>> {
    if s > t || t > eta.len() {
        return Err(Error::InvalidArgument(format!("bad integration window [{s}, {t}]")));
    }
    let cut: Vec<f64> = eta
        .iter()
        .enumerate()
        .map(|(k, &e)| if k >= s && k < t { e } else { 0.0 })
        .collect();
    stieltjes(&cut, m)
}

fn stieltjes(eta: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    if eta.len() + 1 != m.len() {
        return Err(Error::LengthMismatch(format!(
            "integrand has {} intervals, integrator {} levels",
            eta.len(),
            m.len()
        )));
    }
    let mut out = Vec::with_capacity(m.len());
    let mut acc = 0.0;
    out.push(acc);
    for (j, &e) in eta.iter().enumerate() {
        acc += e * (m[j + 1] - m[j]);
        out.push(acc);
    }
    Ok(out)
}

/// `<M>_k = sum_{j<k} (M_{j+1} - M_j)^2`.
pub fn quadratic_variation(m: &[f64]) -> IncreasingProcess {
    let incs: Vec<f64> = m.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    IncreasingProcess::from_increments(&incs).expect("squares are nonnegative")
}

/// `max_k |<M>_k - (M_k^2 - M_0^2 - 2 sum_{j<k} M_j dM_j)|`.
pub fn qv_identity_residual(m: &[f64]) -> f64 {
    let qv = quadratic_variation(m);
    let int = stieltjes(&m[..m.len().saturating_sub(1)], m).expect("lengths agree");
    m.iter()
        .zip(int)
        .zip(qv.values())
        .map(|((&mk, ik), &q)| (q - (mk * mk - m[0] * m[0] - 2.0 * ik)).abs())
        .fold(0.0, f64::max)
}

/// `sum_{j<k} eta_j (A_{j+1} - A_j)`.
pub fn integrate_qv(eta: &[f64], a: &IncreasingProcess) -> Result<Vec<f64>> {
    stieltjes(eta, a.values())
}

/// Errors unless `d<M> <= dA` on every step (relative slack `1e-12`).
pub fn check_dominance(qv: &IncreasingProcess, a: &IncreasingProcess) -> Result<()> {
    if qv.values.len() != a.values.len() {
        return Err(Error::LengthMismatch("<M> and A differ in length".into()));
    }
    for (step, (dq, da)) in qv.increments().into_iter().zip(a.increments()).enumerate() {
        if dq > da + 1e-12 * da.abs().max(1e-300) {
            return Err(Error::Dominance { step, dqv: dq, da });
        }
    }
    Ok(())
}

/// `X_k = sum_{j<k} f_j d<M>_j - 2 G(f_j) dA_j`.
pub fn g_compensated(f: &[f64], qv: &IncreasingProcess, a: &IncreasingProcess, params: &GParams) -> Result<Vec<f64>> {
    if f.len() + 1 != qv.values.len() || qv.values.len() != a.values.len() {
        return Err(Error::LengthMismatch("integrand, <M> and A must share one grid".into()));
    }
    let mut out = Vec::with_capacity(f.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for (j, &fj) in f.iter().enumerate() {
        let dq = qv.values[j + 1] - qv.values[j];
        let da = a.values[j + 1] - a.values[j];
        acc += fj * dq - 2.0 * g_eval(fj, params) * da;
        out.push(acc);
    }
    Ok(out)
}

/// Increasing processes the lattice DP can integrate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncreasingSpec {
    /// `A_t = t`
    Time,
    /// `A = <B>`
    QuadVar,
}

impl IncreasingSpec {
    fn driver(self) -> Driver {
        match self {
            IncreasingSpec::Time => Driver::Time,
            IncreasingSpec::QuadVar => Driver::QuadVar,
        }
    }

    pub fn on_path(self, lat: &Lattice, qv: &IncreasingProcess) -> IncreasingProcess {
        match self {
            IncreasingSpec::Time => IncreasingProcess::time(lat),
            IncreasingSpec::QuadVar => qv.clone(),
        }
    }
}

pub enum NormBackend<'a> {
    Lattice(&'a Lattice),
    MonteCarlo {
        lattice: &'a Lattice,
        family: &'a ScenarioFamily,
        n_paths: usize,
        seed: u64,
    },
}

/// `(E[int_0^T |eta|^p dA])^(1/p)`.
pub fn mg_norm(eta: &StepProcess, a: IncreasingSpec, p: f64, backend: &NormBackend) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm exponent must be >= 1, got {p}")));
    }
    let value = match backend {
        NormBackend::Lattice(lat) => {
            let mut aug = Augmentation::new();
            let step = aug.add_step(eta.align(lat)?);
            let sum = aug.add_sum(Arc::new(move |frozen: &[f64]| frozen[0].abs().powf(p)), a.driver())?;
            debug_assert_eq!(step.index(), 0);
            let space = StateSpace::build(lat, &aug, lat.n_steps())?;
            space.evaluate(|v| Ok(v.sum(sum)), None, 0)?.root()
        }
        NormBackend::MonteCarlo {
            lattice,
            family,
            n_paths,
            seed,
        } => {
            let aligned = eta.align(lattice)?;
            let est = scenario_mean(lattice, family, *n_paths, *seed, |path| {
                let b = path.b(lattice);
                let qv = path.qv(lattice);
                let da = a.on_path(lattice, &qv).increments();
                let xi = aligned.values_on_path(lattice, &b).unwrap_or_else(|_| vec![f64::NAN; da.len()]);
                xi.iter().zip(&da).map(|(x, d)| x.abs().powf(p) * d).sum()
            })?;
            est.sup().1.mean
        }
    };
    if value < 0.0 || !value.is_finite() {
        return Err(Error::Negative(value));
    }
    Ok(value.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, simulate_path, VolatilityPolicy};

    fn lat(n: usize) -> Lattice {
        build_lattice(1.0, n, &GParams::default(), 0).unwrap()
    }

    fn path(lat: &Lattice, seed: u64) -> (Vec<f64>, IncreasingProcess) {
        let p = simulate_path(lat, &VolatilityPolicy::alternate(lat), seed, 0).unwrap();
        (p.b(lat), p.qv(lat))
    }

    #[test]
    fn integral_of_one_telescopes() {
        let l = lat(20);
        let (b, _) = path(&l, 3);
        let int = ito_integral(&vec![1.0; 20], &b).unwrap();
        for (i, x) in int.iter().zip(&b) {
            assert!((i - (x - b[0])).abs() < 1e-14);
        }
        let zero = ito_integral(&vec![0.0; 20], &b).unwrap();
        assert!(zero.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn dividing_out_the_integrand_recovers_b() {
        let l = lat(30);
        let (b, _) = path(&l, 5);
        let f: Vec<f64> = b[..30].iter().map(|x| x.abs() + 1.0).collect();
        let m = ito_integral(&f, &b).unwrap();
        let inv: Vec<f64> = f.iter().map(|x| 1.0 / x).collect();
        let x = ito_integral(&inv, &m).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn qv_of_b_is_sum_of_rates() {
        let l = lat(40);
        let p = simulate_path(&l, &VolatilityPolicy::alternate(&l), 9, 2).unwrap();
        let qv = quadratic_variation(&p.b(&l));
        let recorded = p.qv(&l);
        for (a, b) in qv.values().iter().zip(recorded.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(quadratic_variation(&[2.0; 5]).values().iter().all(|&v| v == 0.0));
        assert!(qv_identity_residual(&p.b(&l)) < 1e-12);
    }

    #[test]
    fn integrate_against_time_and_qv() {
        let l = lat(50);
        let p = simulate_path(&l, &VolatilityPolicy::Constant(1), 1, 0).unwrap();
        let one = vec![1.0; 50];
        let int = integrate_qv(&one, &p.qv(&l)).unwrap();
        assert!((int[50] - 1.0).abs() < 1e-13);
        let int = integrate_qv(&one, &IncreasingProcess::time(&l)).unwrap();
        assert!((int[50] - 1.0).abs() < 1e-13);

        let b = p.b(&l);
        let qv = p.qv(&l);
        let eta: Vec<f64> = b[..50].iter().map(|x| x * x).collect();
        let int = integrate_qv(&eta, &qv).unwrap();
        let mut brute = 0.0;
        for k in 0..50 {
            brute += b[k] * b[k] * (qv.values()[k + 1] - qv.values()[k]);
        }
        assert!((int[50] - brute).abs() < 1e-12);
    }

    #[test]
    fn step_process_alignment() {
        let l = lat(4);
        let s = StepProcess::piecewise(vec![0.0, 0.5], vec![1.0, 1.5]).unwrap();
        assert_eq!(s.values_on_path(&l, &[0.0; 5]).unwrap(), vec![1.0, 1.0, 1.5, 1.5]);
        let s = StepProcess::piecewise(vec![0.0, 0.3], vec![1.0, 2.0]).unwrap();
        assert!(matches!(s.align(&l), Err(Error::Misaligned { .. })));
        assert!(StepProcess::piecewise(vec![0.1], vec![1.0]).is_err());
        assert!(StepProcess::piecewise(vec![0.0, 0.5], vec![1.0]).is_err());
        let ind = StepProcess::indicator(0.0, 0.5).unwrap();
        assert_eq!(ind.values_on_path(&l, &[0.0; 5]).unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
        let ind = StepProcess::indicator(0.5, 2.0).unwrap();
        assert_eq!(ind.values_on_path(&l, &[0.0; 5]).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        let node = StepProcess::node_function(PayoffExpr::parse("x1 + x2").unwrap()).unwrap();
        let b = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(node.values_on_path(&l, &b).unwrap(), vec![0.0, 1.25, 2.5, 3.75]);
        assert!(StepProcess::node_function(PayoffExpr::parse("x3").unwrap()).is_err());
    }

    #[test]
    fn compensator_of_plus_minus_one() {
        let l = lat(30);
        let params = GParams::default();
        let (_, qv) = path(&l, 11);
        let a = IncreasingProcess::time(&l);
        let x = g_compensated(&vec![1.0; 30], &qv, &a, &params).unwrap();
        assert!(x.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let y = g_compensated(&vec![-1.0; 30], &qv, &a, &params).unwrap();
        assert!(y.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        for (k, (xk, q)) in x.iter().zip(qv.values()).enumerate() {
            assert!((xk - (q - l.time(k))).abs() < 1e-13);
        }
        let z = g_compensated(&vec![0.0; 30], &qv, &a, &params).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dominance_contract() {
        let l = lat(10);
        let (_, qv) = path(&l, 1);
        assert!(check_dominance(&qv, &IncreasingProcess::time(&l)).is_ok());
        let tiny = IncreasingProcess::from_increments(&[0.01; 10]).unwrap();
        assert!(matches!(check_dominance(&qv, &tiny), Err(Error::Dominance { step: 0, .. })));
    }

    #[test]
    fn increasing_process_validation() {
        assert!(IncreasingProcess::new(vec![0.0, 1.0, 0.5]).is_err());
        assert!(IncreasingProcess::new(vec![1.0, 2.0]).is_err());
        assert!(IncreasingProcess::new(vec![0.0, 0.0, 0.5]).is_ok());
    }

    #[test]
    fn norms() {
        let l = build_lattice(2.0, 20, &GParams::default(), 0).unwrap();
        let v = mg_norm(&StepProcess::constant(-3.0), IncreasingSpec::Time, 2.0, &NormBackend::Lattice(&l)).unwrap();
        assert!((v - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        let l = lat(20);
        let v = mg_norm(&StepProcess::constant(1.0), IncreasingSpec::QuadVar, 1.0, &NormBackend::Lattice(&l)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let family = ScenarioFamily::standard(&l);
        let mc = NormBackend::MonteCarlo {
            lattice: &l,
            family: &family,
            n_paths: 200,
            seed: 1,
        };
        let v = mg_norm(&StepProcess::constant(1.0), IncreasingSpec::QuadVar, 1.0, &mc).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(mg_norm(&StepProcess::constant(1.0), IncreasingSpec::Time, 0.5, &NormBackend::Lattice(&l)).is_err());
    }

    #[test]
    fn chasles_and_linearity() {
        let l = lat(24);
        let (b, _) = path(&l, 21);
        let eta: Vec<f64> = b[..24].iter().map(|x| x.sin()).collect();
        let theta: Vec<f64> = b[..24].iter().map(|x| x * x).collect();
        let whole = ito_integral_between(&eta, &b, 4, 20).unwrap();
        let left = ito_integral_between(&eta, &b, 4, 11).unwrap();
        let right = ito_integral_between(&eta, &b, 11, 20).unwrap();
        assert!((whole[24] - left[24] - right[24]).abs() < 1e-14);

        let alpha = b[6];
        let mixed: Vec<f64> = (0..24).map(|k| eta[k] + if k >= 6 { alpha * theta[k] } else { 0.0 }).collect();
        let lhs = ito_integral_between(&mixed, &b, 6, 24).unwrap()[24];
        let rhs = ito_integral_between(&eta, &b, 6, 24).unwrap()[24] + alpha * ito_integral_between(&theta, &b, 6, 24).unwrap()[24];
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
