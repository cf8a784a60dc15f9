//! Volatility policies: which variance rate the path uses at each state.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use super::{Augmentation, Lattice};
use crate::error::{Error, Result};

/// Per-state choice for path-dependent functionals, keyed like the DP states.
#[derive(Clone)]
pub struct StateFeedback {
    pub(crate) aug: Augmentation,
    pub(crate) table: Vec<HashMap<Box<[i64]>, u8>>,
}

impl StateFeedback {
    pub(crate) fn new(aug: Augmentation, table: Vec<HashMap<Box<[i64]>, u8>>) -> Self {
        Self { aug, table }
    }
}

impl fmt::Debug for StateFeedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateFeedback")
            .field("aug", &self.aug)
            .field("states", &self.table.iter().map(HashMap::len).sum::<usize>())
            .finish()
    }
}

/// Indices refer to `Lattice::sigma_grid`. States missing from a table use index 0.
#[derive(Debug, Clone)]
pub enum VolatilityPolicy {
    Constant(usize),
    /// One index per level.
    Schedule(Vec<usize>),
    /// Per level, node key to index.
    Markov(Arc<Vec<HashMap<i64, u8>>>),
    StateFeedback(Arc<StateFeedback>),
}

pub const NAMED_POLICIES: [&str; 6] = ["const-min", "const-max", "switch-up", "switch-down", "alternate", "mid"];

impl VolatilityPolicy {
    pub fn constant_min() -> Self {
        Self::Constant(0)
    }

    pub fn constant_max(lat: &Lattice) -> Self {
        Self::Constant(lat.n_sigma() - 1)
    }

    /// Lower rate on the first half of the levels, upper rate after.
    pub fn switch_up(lat: &Lattice) -> Self {
        let n = lat.n_steps();
        let top = lat.n_sigma() - 1;
        Self::Schedule((0..n).map(|k| if 2 * k < n { 0 } else { top }).collect())
    }

    pub fn switch_down(lat: &Lattice) -> Self {
        let n = lat.n_steps();
        let top = lat.n_sigma() - 1;
        Self::Schedule((0..n).map(|k| if 2 * k < n { top } else { 0 }).collect())
    }

    /// Upper rate on even levels, lower on odd.
    pub fn alternate(lat: &Lattice) -> Self {
        let top = lat.n_sigma() - 1;
        Self::Schedule((0..lat.n_steps()).map(|k| if k % 2 == 0 { top } else { 0 }).collect())
    }

    pub fn mid(lat: &Lattice) -> Self {
        Self::Constant(lat.n_sigma() / 2)
    }

    pub fn by_name(name: &str, lat: &Lattice) -> Result<Self> {
        Ok(match name {
            "const-min" => Self::constant_min(),
            "const-max" => Self::constant_max(lat),
            "switch-up" => Self::switch_up(lat),
            "switch-down" => Self::switch_down(lat),
            "alternate" => Self::alternate(lat),
            "mid" => Self::mid(lat),
            _ => return Err(Error::UnknownPolicy(name.to_string())),
        })
    }

    pub fn validate(&self, lat: &Lattice) -> Result<()> {
        let n_sigma = lat.n_sigma();
        let bad = |i: usize| i >= n_sigma;
        let ok = match self {
            Self::Constant(i) => !bad(*i),
            Self::Schedule(v) => {
                if v.len() != lat.n_steps() {
                    return Err(Error::LengthMismatch(format!(
                        "schedule has {} entries for {} steps",
                        v.len(),
                        lat.n_steps()
                    )));
                }
                !v.iter().any(|&i| bad(i))
            }
            Self::Markov(t) => t.iter().all(|m| m.values().all(|&i| !bad(i as usize))),
            Self::StateFeedback(f) => f.table.iter().all(|m| m.values().all(|&i| !bad(i as usize))),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("policy index outside the {n_sigma}-point grid")))
        }
    }

    /// True when every recorded choice equals `idx`.
    pub fn is_constant_index(&self, idx: usize) -> bool {
        match self {
            Self::Constant(i) => *i == idx,
            Self::Schedule(v) => v.iter().all(|&i| i == idx),
            Self::Markov(t) => t.iter().all(|m| m.values().all(|&i| i as usize == idx)),
            Self::StateFeedback(f) => f.table.iter().all(|m| m.values().all(|&i| i as usize == idx)),
        }
    }

    /// Choice at a node for policies that do not need path history.
    pub fn node_choice(&self, level: usize, key: i64) -> Option<usize> {
        match self {
            Self::Constant(i) => Some(*i),
            Self::Schedule(v) => v.get(level).copied(),
            Self::Markov(t) => Some(t.get(level).and_then(|m| m.get(&key)).copied().unwrap_or(0) as usize),
            Self::StateFeedback(_) => None,
        }
    }

    /// Rows `level,node_position,sigma_sq`; `*` stands for every node.
    /// State-feedback policies add a `state` column with the auxiliary coordinates.
    pub fn write_csv<W: Write>(&self, lat: &Lattice, mut out: W) -> std::io::Result<()> {
        let grid = lat.sigma_grid();
        match self {
            Self::Constant(_) | Self::Schedule(_) => {
                writeln!(out, "level,node_position,sigma_sq")?;
                for k in 0..lat.n_steps() {
                    let i = self.node_choice(k, 0).unwrap_or(0);
                    writeln!(out, "{k},*,{}", grid[i])?;
                }
            }
            Self::Markov(t) => {
                writeln!(out, "level,node_position,sigma_sq")?;
                for (k, m) in t.iter().enumerate() {
                    let mut rows: Vec<_> = m.iter().collect();
                    rows.sort();
                    for (&key, &i) in rows {
                        writeln!(out, "{k},{},{}", lat.position(key), grid[i as usize])?;
                    }
                }
            }
            Self::StateFeedback(f) => {
                writeln!(out, "level,node_position,sigma_sq,state")?;
                for (k, m) in f.table.iter().enumerate() {
                    let mut rows: Vec<_> = m.iter().collect();
                    rows.sort();
                    for (key, &i) in rows {
                        let state: Vec<String> = key[1..].iter().map(|&q| (q as f64 / 4294967296.0).to_string()).collect();
                        writeln!(out, "{k},{},{},{}", lat.position(key[0]), grid[i as usize], state.join(";"))?;
                    }
                }
            }
        }
        Ok(())
    }
}
