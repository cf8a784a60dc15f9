//! Empirical polynomial-growth Lipschitz certificates:
//! `|phi(x) - phi(y)| <= C (1 + |x|^n + |y|^n) |x - y|`.
//!
//! `n = 0` is read as the plain Lipschitz bound `|phi(x) - phi(y)| <= C |x - y|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::PayoffExpr;
use crate::error::{Error, Result};

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DegenerateBox("bounds of different or zero length".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::DegenerateBox(format!("side {i} is [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn shrunk(&self, factor: f64) -> Self {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| {
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo) * factor);
                (mid - half, mid + half)
            })
            .unzip();
        Self { lower, upper }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| rng.random_range(*lo..=*hi))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LipschitzOptions {
    pub max_growth: u32,
    pub max_constant: f64,
    /// Largest tolerated ratio between the constant fitted on the full box and
    /// on the half-size box; a larger ratio means the growth exponent is too small.
    pub growth_ratio: f64,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        Self {
            max_growth: 8,
            max_constant: 1e6,
            growth_ratio: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzCertificate {
    pub constant: f64,
    pub growth: u32,
    pub sample_box: SampleBox,
    pub max_violation: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn weight(x: &[f64], y: &[f64], n: u32) -> f64 {
    if n == 0 {
        1.0
    } else {
        1.0 + norm(x).powi(n as i32) + norm(y).powi(n as i32)
    }
}

struct Pair {
    x: Vec<f64>,
    y: Vec<f64>,
    diff: f64,
    dist: f64,
}

fn sample_pairs(expr: &PayoffExpr, bx: &SampleBox, samples: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Pair>> {
    let mut pairs = Vec::with_capacity(samples);
    let width = bx
        .lower
        .iter()
        .zip(&bx.upper)
        .map(|(lo, hi)| hi - lo)
        .fold(f64::INFINITY, f64::min);
    for i in 0..samples {
        let x = bx.sample(rng);
        // Every other pair is local so the fit sees derivatives as well as chords.
        let y = if i % 2 == 0 {
            bx.sample(rng)
        } else {
            x.iter()
                .zip(bx.lower.iter().zip(&bx.upper))
                .map(|(v, (lo, hi))| (v + rng.random_range(-1e-3..=1e-3) * width).clamp(*lo, *hi))
                .collect()
        };
        let dist = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        if dist == 0.0 {
            continue;
        }
        let diff = (expr.eval(&x)? - expr.eval(&y)?).abs();
        pairs.push(Pair { x, y, diff, dist });
    }
    Ok(pairs)
}

fn fitted_constant(pairs: &[Pair], n: u32) -> f64 {
    pairs
        .iter()
        .map(|p| p.diff / (weight(&p.x, &p.y, n) * p.dist))
        .fold(0.0, f64::max)
}

/// Fit the smallest growth exponent `n` (and its constant) that explains the
/// sampled chords without the constant scaling with the box.
pub fn check_lip_poly(
    expr: &PayoffExpr,
    sample_box: &SampleBox,
    samples: usize,
    seed: u64,
) -> Result<LipschitzCertificate> {
    check_lip_poly_with(expr, sample_box, samples, seed, &LipschitzOptions::default())
}

pub fn check_lip_poly_with(
    expr: &PayoffExpr,
    sample_box: &SampleBox,
    samples: usize,
    seed: u64,
    options: &LipschitzOptions,
) -> Result<LipschitzCertificate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if sample_box.dim() < expr.arity() {
        return Err(Error::Arity {
            needed: expr.arity(),
            got: sample_box.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = sample_pairs(expr, sample_box, samples, &mut rng)?;
    let half = sample_pairs(expr, &sample_box.shrunk(0.5), samples, &mut rng)?;

    for n in 0..=options.max_growth {
        let c_full = fitted_constant(&full, n);
        let c_half = fitted_constant(&half, n);
        let stable = c_full <= options.growth_ratio * c_half || c_full == 0.0;
        if stable && c_full <= options.max_constant {
            return Ok(LipschitzCertificate {
                constant: c_full.max(f64::MIN_POSITIVE),
                growth: n,
                sample_box: sample_box.clone(),
                max_violation: 0.0,
            });
        }
    }

    let n = options.max_growth;
    let constant = fitted_constant(&full, n).min(options.max_constant);
    let max_violation = full
        .iter()
        .map(|p| (p.diff - constant * weight(&p.x, &p.y, n) * p.dist).max(0.0))
        .fold(0.0, f64::max);
    Ok(LipschitzCertificate {
        constant,
        growth: n,
        sample_box: sample_box.clone(),
        max_violation,
    })
}
