//! Finite scenario families and the sublinear reductions over them.

use crate::error::{Error, Result};
use crate::lattice::{map_paths, Lattice, SamplePath, VolatilityPolicy, NAMED_POLICIES};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub policy: VolatilityPolicy,
}

/// Finite stand-in for the family of volatility-controlled laws.
#[derive(Debug, Clone)]
pub struct ScenarioFamily {
    scenarios: Vec<Scenario>,
}

impl ScenarioFamily {
    /// Must be nonempty and contain both constant extreme policies.
    pub fn new(lat: &Lattice, scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::EmptyScenarioFamily);
        }
        for s in &scenarios {
            s.policy.validate(lat)?;
        }
        let top = lat.n_sigma() - 1;
        let has = |i: usize| scenarios.iter().any(|s| matches!(s.policy, VolatilityPolicy::Constant(j) if j == i));
        if !has(0) || !has(top) {
            return Err(Error::InvalidArgument("scenario family must contain both constant extreme policies".into()));
        }
        Ok(Self { scenarios })
    }

    /// The named deterministic policies.
    pub fn standard(lat: &Lattice) -> Self {
        let scenarios = NAMED_POLICIES
            .iter()
            .filter(|&&n| n != "mid" || lat.n_sigma() > 2)
            .map(|&n| Scenario {
                name: n.to_string(),
                policy: VolatilityPolicy::by_name(n, lat).expect("built-in policy"),
            })
            .collect();
        Self { scenarios }
    }

    pub fn with_scenario(mut self, lat: &Lattice, name: impl Into<String>, policy: VolatilityPolicy) -> Result<Self> {
        policy.validate(lat)?;
        self.scenarios.push(Scenario {
            name: name.into(),
            policy,
        });
        Ok(self)
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// `max_P E_P[X]` given one value per scenario.
pub fn sublinear_expect(values: &[f64]) -> Result<f64> {
    values.iter().copied().reduce(f64::max).ok_or(Error::EmptyScenarioFamily)
}

/// `max_P E_P[-X]`.
pub fn sublinear_expect_neg(values: &[f64]) -> Result<f64> {
    values.iter().map(|v| -v).reduce(f64::max).ok_or(Error::EmptyScenarioFamily)
}

/// `-E[-X] = min_P E_P[X]`.
pub fn lower_expect(values: &[f64]) -> Result<f64> {
    Ok(-sublinear_expect_neg(values)?)
}

/// `sup_P P(A)` from per-scenario probability estimates.
pub fn capacity_estimate(probabilities: &[f64]) -> Result<f64> {
    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    sublinear_expect(probabilities)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEstimate {
    pub per_scenario: Vec<(String, McEstimate)>,
}

impl ScenarioEstimate {
    /// Scenario with the largest mean; the first one wins ties.
    pub fn sup(&self) -> (&str, McEstimate) {
        let mut best = &self.per_scenario[0];
        for s in &self.per_scenario[1..] {
            if s.1.mean > best.1.mean || s.1.mean.is_nan() {
                best = s;
            }
        }
        (&best.0, best.1)
    }

    pub fn inf(&self) -> (&str, McEstimate) {
        let mut best = &self.per_scenario[0];
        for s in &self.per_scenario[1..] {
            if s.1.mean < best.1.mean || s.1.mean.is_nan() {
                best = s;
            }
        }
        (&best.0, best.1)
    }
}

/// Monte Carlo mean of `f` under one policy.
pub fn mc_mean<F>(lat: &Lattice, policy: &VolatilityPolicy, n_paths: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&SamplePath) -> f64 + Sync,
{
    Ok(McEstimate::from_samples(&map_paths(lat, policy, n_paths, seed, f)?))
}

/// Monte Carlo mean of `f` under every scenario, with common random numbers.
pub fn scenario_mean<F>(lat: &Lattice, family: &ScenarioFamily, n_paths: usize, seed: u64, f: F) -> Result<ScenarioEstimate>
where
    F: Fn(&SamplePath) -> f64 + Sync,
{
    if family.is_empty() {
        return Err(Error::EmptyScenarioFamily);
    }
    let per_scenario = family
        .scenarios()
        .iter()
        .map(|s| Ok((s.name.clone(), mc_mean(lat, &s.policy, n_paths, seed, &f)?)))
        .collect::<Result<_>>()?;
    Ok(ScenarioEstimate { per_scenario })
}

/// Capacity of `event` estimated as the largest empirical frequency over the family.
pub fn event_capacity<F>(lat: &Lattice, family: &ScenarioFamily, n_paths: usize, seed: u64, event: F) -> Result<f64>
where
    F: Fn(&SamplePath) -> bool + Sync,
{
    let est = scenario_mean(lat, family, n_paths, seed, |p| if event(p) { 1.0 } else { 0.0 })?;
    let probs: Vec<f64> = est.per_scenario.iter().map(|(_, e)| e.mean).collect();
    capacity_estimate(&probs)
}
