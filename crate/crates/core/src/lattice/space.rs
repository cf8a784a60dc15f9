//! Forward state enumeration and backward max-over-volatility induction.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::augment::{state_key, StateView};
use super::{Augmentation, Lattice};
use crate::error::{Error, Result};

pub const DEFAULT_STATE_BUDGET: usize = 4_000_000;

const TIE_TOLERANCE: f64 = 1e-12;
const PAR_MIN_LEN: usize = 2048;

/// Running reward collected on a transition: `(state, sigma index, sign)`.
pub type Reward<'r> = dyn Fn(&StateView, usize, f64) -> f64 + Sync + 'r;

#[derive(Debug, Clone)]
pub struct StateLevel {
    keys: Vec<i64>,
    aux: Vec<f64>,
    /// `children[(i * n_sigma + s) * 2 + {0: up, 1: down}]`
    children: Vec<u32>,
}

impl StateLevel {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[i64] {
        &self.keys
    }
}

/// All reachable `(node, aux)` states of an augmented lattice up to `depth`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    lattice: Lattice,
    aug: Augmentation,
    levels: Vec<StateLevel>,
}

impl StateSpace {
    pub fn build(lat: &Lattice, aug: &Augmentation, depth: usize) -> Result<Self> {
        Self::build_with_budget(lat, aug, depth, DEFAULT_STATE_BUDGET)
    }

    pub fn build_with_budget(lat: &Lattice, aug: &Augmentation, depth: usize, budget: usize) -> Result<Self> {
        if depth > lat.n_steps() {
            return Err(Error::BeyondHorizon {
                level: depth,
                horizon: lat.n_steps(),
            });
        }
        let w = aug.width();
        let n_sigma = lat.n_sigma();
        let mut levels = vec![StateLevel {
            keys: vec![0],
            aux: aug.initial(lat)?,
            children: Vec::new(),
        }];
        let mut total = 1usize;
        let mut scratch = Vec::with_capacity(w);
        let mut buf = Vec::with_capacity(w + 1);
        for k in 0..depth {
            let cur = &levels[k];
            let n = cur.keys.len();
            let mut map: HashMap<Box<[i64]>, u32> = HashMap::with_capacity(n * 2);
            let mut next = StateLevel {
                keys: Vec::with_capacity(n * 2),
                aux: Vec::with_capacity(n * 2 * w),
                children: Vec::new(),
            };
            let mut children = Vec::with_capacity(n * n_sigma * 2);
            for i in 0..n {
                let key = cur.keys[i];
                let aux = &cur.aux[i * w..(i + 1) * w];
                for s in 0..n_sigma {
                    for sign in [1i64, -1] {
                        let nk = key + sign * lat.step(s);
                        let b_new = lat.position(nk);
                        aug.advance(lat, k, aux, s, sign as f64, b_new, &mut scratch)?;
                        state_key(nk, &scratch, k + 1, &mut buf)?;
                        let id = match map.get(&buf[..]) {
                            Some(&id) => id,
                            None => {
                                let id = next.keys.len() as u32;
                                map.insert(buf.clone().into_boxed_slice(), id);
                                next.keys.push(nk);
                                next.aux.extend_from_slice(&scratch);
                                total += 1;
                                if total > budget {
                                    return Err(Error::StateSpaceBlowup { budget, level: k + 1 });
                                }
                                id
                            }
                        };
                        children.push(id);
                    }
                }
            }
            levels[k].children = children;
            levels.push(next);
        }
        log::debug!("state space: depth {depth}, {total} states");
        Ok(Self {
            lattice: lat.clone(),
            aug: aug.clone(),
            levels,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn augmentation(&self) -> &Augmentation {
        &self.aug
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &StateLevel {
        &self.levels[k]
    }

    pub fn n_states(&self, k: usize) -> usize {
        self.levels[k].len()
    }

    pub fn total_states(&self) -> usize {
        self.levels.iter().map(StateLevel::len).sum()
    }

    pub fn view(&self, k: usize, i: usize) -> StateView<'_> {
        let w = self.aug.width();
        let key = self.levels[k].keys[i];
        StateView {
            level: k,
            t: self.lattice.time(k),
            b: self.lattice.position(key),
            key,
            aux: &self.levels[k].aux[i * w..(i + 1) * w],
            aug: &self.aug,
        }
    }

    /// Child of state `i` at level `k` under variance index `s`; `up` picks `+`.
    pub fn child(&self, k: usize, i: usize, s: usize, up: bool) -> usize {
        let n_sigma = self.lattice.n_sigma();
        self.levels[k].children[(i * n_sigma + s) * 2 + usize::from(!up)] as usize
    }

    /// True when each level has at most one state per node.
    pub fn is_markov(&self) -> bool {
        self.aug.is_empty()
            || self.levels.iter().all(|lv| {
                let mut seen = HashSet::with_capacity(lv.len());
                lv.keys.iter().all(|k| seen.insert(*k))
            })
    }

    /// Hash key of state `i` at level `k`, as used by state-feedback policies.
    pub fn state_key(&self, k: usize, i: usize) -> Box<[i64]> {
        let view = self.view(k, i);
        let mut buf = Vec::new();
        state_key(view.key, view.aux, k, &mut buf).expect("states were keyed during build");
        buf.into_boxed_slice()
    }

    /// Backward induction from the terminal level down to `stop`:
    /// `v(x) = max_s 1/2 sum_{+-} [r(x, s, +-) + v(child)]`.
    pub fn evaluate<F>(&self, terminal: F, reward: Option<&Reward>, stop: usize) -> Result<Valuation>
    where
        F: Fn(&StateView) -> Result<f64> + Sync,
    {
        let depth = self.depth();
        if stop > depth {
            return Err(Error::BeyondHorizon { level: stop, horizon: depth });
        }
        let last: Vec<f64> = (0..self.n_states(depth))
            .into_par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(|i| {
                let v = terminal(&self.view(depth, i))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { step: depth })
                }
            })
            .collect::<Result<_>>()?;

        let n_sigma = self.lattice.n_sigma();
        let mut values = vec![last];
        let mut choices = Vec::new();
        for k in (stop..depth).rev() {
            let next = values.last().unwrap();
            let (v, c): (Vec<f64>, Vec<u8>) = (0..self.n_states(k))
                .into_par_iter()
                .with_min_len(PAR_MIN_LEN)
                .map(|i| {
                    let view = reward.map(|_| self.view(k, i));
                    let mut best = f64::NEG_INFINITY;
                    let mut cand = [0.0f64; 64];
                    for (s, slot) in cand.iter_mut().enumerate().take(n_sigma) {
                        let up = next[self.child(k, i, s, true)];
                        let down = next[self.child(k, i, s, false)];
                        let mut v = 0.5 * (up + down);
                        if let (Some(r), Some(view)) = (reward, view.as_ref()) {
                            v += 0.5 * (r(view, s, 1.0) + r(view, s, -1.0));
                        }
                        *slot = v;
                        best = best.max(v);
                    }
                    let tol = TIE_TOLERANCE * (1.0 + best.abs());
                    let pick = cand[..n_sigma].iter().position(|&v| v >= best - tol).unwrap_or(0);
                    (best, pick as u8)
                })
                .unzip();
            values.push(v);
            choices.push(c);
        }
        values.reverse();
        choices.reverse();
        Ok(Valuation {
            bottom: stop,
            values,
            choices,
        })
    }
}

/// Values (and argmax volatility indices) on levels `bottom..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    bottom: usize,
    values: Vec<Vec<f64>>,
    choices: Vec<Vec<u8>>,
}

impl Valuation {
    pub fn bottom(&self) -> usize {
        self.bottom
    }

    pub fn values(&self, level: usize) -> &[f64] {
        &self.values[level - self.bottom]
    }

    pub fn choices(&self, level: usize) -> &[u8] {
        &self.choices[level - self.bottom]
    }

    /// Value at the root; only meaningful when induction ran to level 0.
    pub fn root(&self) -> f64 {
        assert_eq!(self.bottom, 0, "valuation stopped above the root");
        self.values[0][0]
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::lattice::{build_lattice, Driver, Source};
    use crate::params::GParams;

    #[test]
    fn recombining_counts() {
        let lat = build_lattice(1.0, 10, &GParams::default(), 0).unwrap();
        let space = StateSpace::build(&lat, &Augmentation::new(), 10).unwrap();
        // steps {1, 2}: every key in [-2k, 2k] except 0 at level 1
        assert_eq!(space.n_states(1), 4);
        for k in (0..=10).filter(|&k| k != 1) {
            assert_eq!(space.n_states(k), 4 * k + 1);
        }
        assert!(space.is_markov());
    }

    #[test]
    fn terminal_square_picks_upper_rate() {
        let lat = build_lattice(1.0, 200, &GParams::default(), 0).unwrap();
        let space = StateSpace::build(&lat, &Augmentation::new(), 200).unwrap();
        let v = space.evaluate(|s| Ok(s.b * s.b), None, 0).unwrap();
        assert!((v.root() - 1.0).abs() < 1e-10);
        assert!(v.choices(0).iter().all(|&c| c == 1));
        let v = space.evaluate(|s| Ok(-s.b * s.b), None, 0).unwrap();
        assert!((v.root() + 0.25).abs() < 1e-10);
        assert!(v.choices(0).iter().all(|&c| c == 0));
    }

    #[test]
    fn running_reward_matches_augmented_sum() {
        let lat = build_lattice(1.0, 12, &GParams::default(), 1).unwrap();
        let mut aug = Augmentation::new();
        let qv = aug.add_sum(Arc::new(|_: &[f64]| 1.0), Driver::QuadVar).unwrap();
        let space = StateSpace::build(&lat, &aug, 12).unwrap();
        let via_state = space.evaluate(|s| Ok(-s.sum(qv)), None, 0).unwrap().root();
        let plain = StateSpace::build(&lat, &Augmentation::new(), 12).unwrap();
        let grid = lat.sigma_grid().to_vec();
        let dt = lat.dt();
        let reward = move |_: &StateView, s: usize, _: f64| -grid[s] * dt;
        let via_reward = plain.evaluate(|_| Ok(0.0), Some(&reward), 0).unwrap().root();
        assert!((via_state - via_reward).abs() < 1e-12);
        assert!((via_state + 0.25).abs() < 1e-12);
    }

    #[test]
    fn observations_split_states() {
        let lat = build_lattice(1.0, 4, &GParams::default(), 0).unwrap();
        let mut aug = Augmentation::new();
        let o = aug.observe(2, Source::Position);
        let space = StateSpace::build(&lat, &aug, 4).unwrap();
        assert!(!space.is_markov());
        assert_eq!(space.n_states(2), 9);
        let v = space.evaluate(|s| Ok(s.b - s.observed(o)), None, 0).unwrap();
        assert!(v.root().abs() < 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let lat = build_lattice(1.0, 30, &GParams::default(), 0).unwrap();
        let mut aug = Augmentation::new();
        aug.add_sum(Arc::new(|_: &[f64]| 1.0), Driver::QuadVar).unwrap();
        aug.add_sum(Arc::new(|_: &[f64]| 1.0), Driver::Brownian).unwrap();
        let err = StateSpace::build_with_budget(&lat, &aug, 30, 1000).unwrap_err();
        assert!(matches!(err, Error::StateSpaceBlowup { budget: 1000, .. }));
        assert!(StateSpace::build(&lat, &Augmentation::new(), 31).is_err());
    }

    #[test]
    fn non_finite_terminal_is_an_error() {
        let lat = build_lattice(1.0, 2, &GParams::default(), 0).unwrap();
        let space = StateSpace::build(&lat, &Augmentation::new(), 2).unwrap();
        assert!(matches!(space.evaluate(|_| Ok(f64::NAN), None, 0), Err(Error::NonFinite { step: 2 })));
    }
}
