//! Processes the checks can be run on, and how to carry them through the lattice.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::calculus::{ito_integral, IncreasingProcess, StepProcess};
use crate::error::{Error, Result};
use crate::lattice::{Augmentation, Driver, Lattice, SamplePath, StateView, SumId};
use crate::payoff::PayoffExpr;

/// `B`, `2B`, `-B`, `qv`, `qv-t`, `int:<f(x1 = B, x2 = t)>` (the integral `int f dB`), `const:<c>`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    Scaled(f64),
    QuadVar,
    QuadVarMinusTime,
    Integral(PayoffExpr),
    Constant(f64),
}

impl FromStr for ProcessSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::InvalidArgument(format!("unknown process `{text}`"));
        if let Some(f) = t.strip_prefix("int:") {
            return Ok(Self::Integral(PayoffExpr::parse(f)?.with_arity(2)?));
        }
        if let Some(c) = t.strip_prefix("const:") {
            return c.trim().parse().map(Self::Constant).map_err(|_| bad());
        }
        match t {
            "qv" => return Ok(Self::QuadVar),
            "qv-t" => return Ok(Self::QuadVarMinusTime),
            _ => {}
        }
        let coef = t.strip_suffix('B').ok_or_else(bad)?.trim().trim_end_matches('*').trim();
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => s.parse().map_err(|_| bad())?,
        };
        Ok(Self::Scaled(c))
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scaled(c) if *c == 1.0 => write!(f, "B"),
            Self::Scaled(c) if *c == -1.0 => write!(f, "-B"),
            Self::Scaled(c) => write!(f, "{c}B"),
            Self::QuadVar => write!(f, "qv"),
            Self::QuadVarMinusTime => write!(f, "qv-t"),
            Self::Integral(e) => write!(f, "int:{e}"),
            Self::Constant(c) => write!(f, "const:{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Handle {
    Scaled(f64),
    Sum(SumId),
    SumMinusTime(SumId),
    Constant(f64),
}

impl Handle {
    pub(crate) fn value(&self, v: &StateView) -> f64 {
        match *self {
            Handle::Scaled(c) => c * v.b,
            Handle::Sum(id) => v.sum(id),
            Handle::SumMinusTime(id) => v.sum(id) - v.t,
            Handle::Constant(c) => c,
        }
    }
}

impl ProcessSpec {
    /// The process at level `k` is a function of `B_k` alone.
    pub fn is_markov(&self) -> bool {
        matches!(self, Self::Scaled(_) | Self::Constant(_))
    }

    /// `g` with `M = int g dB`, for processes that are stochastic integrals.
    pub fn integrand(&self) -> Result<StepProcess> {
        match self {
            Self::Scaled(c) => Ok(StepProcess::constant(*c)),
            Self::Constant(_) => Ok(StepProcess::constant(0.0)),
            Self::Integral(e) => StepProcess::node_function(e.clone()),
            _ => Err(Error::InvalidArgument(format!("`{self}` is not a stochastic integral against B"))),
        }
    }

    pub(crate) fn install(&self, lat: &Lattice, aug: &mut Augmentation) -> Result<Handle> {
        Ok(match self {
            Self::Scaled(c) => Handle::Scaled(*c),
            Self::Constant(c) => Handle::Constant(*c),
            Self::QuadVar => Handle::Sum(aug.add_sum(Arc::new(|_: &[f64]| 1.0), Driver::QuadVar)?),
            Self::QuadVarMinusTime => Handle::SumMinusTime(aug.add_sum(Arc::new(|_: &[f64]| 1.0), Driver::QuadVar)?),
            Self::Integral(e) => {
                let step = aug.add_step(StepProcess::node_function(e.clone())?.align(lat)?);
                let i = step.index();
                Handle::Sum(aug.add_sum(Arc::new(move |fz: &[f64]| fz[i]), Driver::Brownian)?)
            }
        })
    }

    /// Values at every level along a sampled path.
    pub fn on_path(&self, lat: &Lattice, path: &SamplePath) -> Result<Vec<f64>> {
        let b = path.b(lat);
        match self {
            Self::Scaled(c) => Ok(b.iter().map(|x| c * x).collect()),
            Self::Constant(c) => Ok(vec![*c; b.len()]),
            Self::QuadVar => Ok(path.qv(lat).values().to_vec()),
            Self::QuadVarMinusTime => Ok(path
                .qv(lat)
                .values()
                .iter()
                .enumerate()
                .map(|(k, q)| q - lat.time(k))
                .collect()),
            Self::Integral(_) => {
                let g = self.integrand()?.values_on_path(lat, &b)?;
                ito_integral(&g, &b)
            }
        }
    }

    /// `<M>` along a path for integrals `M = int g dB`: `sum g^2 sigma^2 dt`.
    pub fn qv_on_path(&self, lat: &Lattice, path: &SamplePath) -> Result<IncreasingProcess> {
        let g = self.integrand()?.values_on_path(lat, &path.b(lat))?;
        let dq: Vec<f64> = g.iter().zip(path.qv_increments(lat)).map(|(g, d)| g * g * d).collect();
        IncreasingProcess::from_increments(&dq)
    }
}

/// Step-process text: `step:t0=v0;t1=v1;...`, `ind:a,b` for `1[a, b)`, or an
/// expression in `x1 = B`, `x2 = t` read at every level.
pub fn parse_step(text: &str) -> Result<StepProcess> {
    let t = text.trim();
    let bad = || Error::InvalidArgument(format!("bad step process `{text}`"));
    if let Some(body) = t.strip_prefix("step:") {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for piece in body.split(';').filter(|p| !p.trim().is_empty()) {
            let (a, b) = piece.split_once('=').ok_or_else(bad)?;
            times.push(a.trim().parse().map_err(|_| bad())?);
            values.push(b.trim().parse().map_err(|_| bad())?);
        }
        return StepProcess::piecewise(times, values);
    }
    if let Some(body) = t.strip_prefix("ind:") {
        let (a, b) = body.split_once(',').ok_or_else(bad)?;
        return StepProcess::indicator(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    }
    let e = PayoffExpr::parse(t)?;
    if e.max_var() == 0 {
        Ok(StepProcess::constant(e.eval(&[])?))
    } else {
        StepProcess::node_function(e)
    }
}

/// Run `f` on `lat`, halving the step count while the state space is too large.
/// Step counts at which some time falls off the grid are skipped.
pub(crate) fn ladder<T>(lat: &Lattice, mut f: impl FnMut(&Lattice) -> Result<T>) -> Result<(T, Lattice)> {
    let mut current = lat.clone();
    let mut first = true;
    loop {
        match f(&current) {
            Ok(v) => return Ok((v, current)),
            Err(e @ Error::StateSpaceBlowup { .. }) | Err(e @ Error::Misaligned { .. }) => {
                if first && matches!(e, Error::Misaligned { .. }) {
                    return Err(e);
                }
                let n = current.n_steps() / 2;
                if n == 0 {
                    return Err(e);
                }
                log::info!("{e}; retrying with {n} steps");
                current = current.with_steps(n)?;
            }
            Err(e) => return Err(e),
        }
        first = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, simulate_path, VolatilityPolicy};
    use crate::params::GParams;

    #[test]
    fn parse_and_print() {
        for (text, canon) in [("B", "B"), ("2B", "2B"), ("2*B", "2B"), ("-B", "-B"), ("qv", "qv"), ("qv-t", "qv-t"), ("const:2", "const:2"), ("int:x1", "int:x1")] {
            let p: ProcessSpec = text.parse().unwrap();
            assert_eq!(p.to_string(), canon);
            assert_eq!(canon.parse::<ProcessSpec>().unwrap(), p);
        }
        assert!("C".parse::<ProcessSpec>().is_err());
        assert!("xB".parse::<ProcessSpec>().is_err());
    }

    #[test]
    fn path_values() {
        let lat = build_lattice(1.0, 10, &GParams::default(), 0).unwrap();
        let path = simulate_path(&lat, &VolatilityPolicy::alternate(&lat), 1, 0).unwrap();
        let b = path.b(&lat);
        let i: ProcessSpec = "int:x1".parse().unwrap();
        let m = i.on_path(&lat, &path).unwrap();
        let qv = path.qv(&lat);
        for k in 0..=10 {
            assert!((m[k] - 0.5 * (b[k] * b[k] - qv.values()[k])).abs() < 1e-12);
        }
        let qvt: ProcessSpec = "qv-t".parse().unwrap();
        assert!(qvt.on_path(&lat, &path).unwrap().windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let m2: ProcessSpec = "2B".parse().unwrap();
        let dq = m2.qv_on_path(&lat, &path).unwrap();
        assert!((dq.terminal() - 4.0 * qv.terminal()).abs() < 1e-12);
    }

    #[test]
    fn step_text() {
        let lat = build_lattice(1.0, 4, &GParams::default(), 0).unwrap();
        let zero = [0.0; 5];
        assert_eq!(parse_step("2").unwrap().values_on_path(&lat, &zero).unwrap(), vec![2.0; 4]);
        assert_eq!(parse_step("step:0=1;0.5=1.5").unwrap().values_on_path(&lat, &zero).unwrap(), vec![1.0, 1.0, 1.5, 1.5]);
        assert_eq!(parse_step("ind:0,0.5").unwrap().values_on_path(&lat, &zero).unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
        let b = [0.0, -1.0, 2.0, 0.0, 0.0];
        assert_eq!(parse_step("abs(x1)+1").unwrap().values_on_path(&lat, &b).unwrap(), vec![1.0, 2.0, 3.0, 1.0]);
        assert!(parse_step("step:0=a").is_err());
    }
}
