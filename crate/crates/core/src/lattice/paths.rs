//! Seeded path sampling under a volatility policy.
//!
//! Path `i` of a run with seed `s` draws its signs from ChaCha8 seeded with `s`
//! on stream `i`, so every path is reproducible on its own and the same signs
//! are reused across policies.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::augment::state_key;
use super::{Lattice, VolatilityPolicy};
use crate::calculus::IncreasingProcess;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    /// Node keys, `n_steps + 1` of them, starting at 0.
    pub keys: Vec<i64>,
    /// Variance index used on each step.
    pub sigma: Vec<u8>,
}

impl SamplePath {
    pub fn b(&self, lat: &Lattice) -> Vec<f64> {
        self.keys.iter().map(|&k| lat.position(k)).collect()
    }

    pub fn sigma_sq(&self, lat: &Lattice) -> Vec<f64> {
        self.sigma.iter().map(|&s| lat.sigma_grid()[s as usize]).collect()
    }

    /// `d<B> = sigma^2 dt` per step.
    pub fn qv_increments(&self, lat: &Lattice) -> Vec<f64> {
        self.sigma.iter().map(|&s| lat.sigma_grid()[s as usize] * lat.dt()).collect()
    }

    pub fn qv(&self, lat: &Lattice) -> IncreasingProcess {
        IncreasingProcess::from_increments(&self.qv_increments(lat)).expect("variance rates are nonnegative")
    }
}

pub fn simulate_path(lat: &Lattice, policy: &VolatilityPolicy, seed: u64, path_id: u64) -> Result<SamplePath> {
    let n = lat.n_steps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    let mut keys = Vec::with_capacity(n + 1);
    let mut sigma = Vec::with_capacity(n);
    let mut key = 0i64;
    keys.push(key);

    let feedback = match policy {
        VolatilityPolicy::StateFeedback(f) => Some(f),
        _ => None,
    };
    let mut aux = match feedback {
        Some(f) => f.aug.initial(lat)?,
        None => Vec::new(),
    };
    let mut scratch = Vec::new();
    let mut buf = Vec::new();

    for k in 0..n {
        let s = match feedback {
            Some(f) => {
                state_key(key, &aux, k, &mut buf)?;
                f.table[k].get(&buf[..]).copied().unwrap_or(0) as usize
            }
            None => policy.node_choice(k, key).unwrap_or(0),
        };
        let up: bool = rng.random();
        let sign = if up { 1 } else { -1 };
        let next = key + sign * lat.step(s);
        if let Some(f) = feedback {
            f.aug.advance(lat, k, &aux, s, sign as f64, lat.position(next), &mut scratch)?;
            std::mem::swap(&mut aux, &mut scratch);
        }
        key = next;
        keys.push(key);
        sigma.push(s as u8);
    }
    Ok(SamplePath { keys, sigma })
}

/// Simulate paths `0..n_paths` in parallel and map each through `f`; results keep path order.
pub fn map_paths<T, F>(lat: &Lattice, policy: &VolatilityPolicy, n_paths: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SamplePath) -> T + Sync,
{
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    policy.validate(lat)?;
    (0..n_paths)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| simulate_path(lat, policy, seed, i as u64).map(|p| f(&p)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub seed: u64,
    pub paths: Vec<SamplePath>,
    lattice: Lattice,
}

pub fn sample_paths(lat: &Lattice, policy: &VolatilityPolicy, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    Ok(PathEnsemble {
        seed,
        paths: map_paths(lat, policy, n_paths, seed, Clone::clone)?,
        lattice: lat.clone(),
    })
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Columns `path_id,step,t,B,sigma_sq,qv`. `sigma_sq` on row `k` is the rate
    /// of the step ending at `t_k`; row 0 repeats the rate of the first step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let lat = &self.lattice;
        writeln!(out, "path_id,step,t,B,sigma_sq,qv")?;
        for (id, p) in self.paths.iter().enumerate() {
            let b = p.b(lat);
            let rates = p.sigma_sq(lat);
            let qv = p.qv(lat);
            for k in 0..b.len() {
                let rate = rates[k.saturating_sub(1)];
                writeln!(out, "{id},{k},{},{},{},{}", lat.time(k), b[k], rate, qv.values()[k])?;
            }
        }
        Ok(())
    }
}
