//! Algebraic properties of the lattice conditional expectation.

use std::collections::HashMap;

use super::{Backend, VerificationReport};
use crate::error::{Error, Result};
use crate::lattice::{state_key, CylinderFunctional, CylinderSpace, Lattice, Valuation};
use crate::payoff::PayoffExpr;

/// Two-time corpus in increments mode: `x1 = B_{T/2}`, `x2 = B_T - B_{T/2}`.
pub const ALGEBRA_CORPUS: [&str; 10] = [
    "x1",
    "x1^2",
    "-(x2^2)",
    "abs(x1 + x2)",
    "max(x1 + x2 - 0.5, 0)",
    "(x1 + x2)^3",
    "x1*x2",
    "max(x1, x2)",
    "x1^4 - 3*x2^2",
    "min(abs(x1), 1)*x2^2",
];

/// Multipliers measurable at `T/2`.
const MULTIPLIERS: [&str; 4] = ["x1", "x1^2 - 0.3", "-abs(x1)", "max(x1, 0)"];

fn parse(text: &str) -> Result<PayoffExpr> {
    PayoffExpr::parse(text)
}

/// The six conditional-expectation properties, nodewise on the levels near
/// `T/4`, `T/2` and `3T/4` (and `0`): monotonicity, measurable invariance,
/// self-domination, multiplication by a measurable factor, additivity of a
/// symmetric term, and the tower property.
///
/// `corpus` holds payoffs in `x1 = B_{T/2}`, `x2 = B_T - B_{T/2}`.
pub fn check_conditional_algebra(lat: &Lattice, corpus: &[&str], tol: f64) -> Result<VerificationReport> {
    let horizon = lat.horizon();
    let times = [horizon / 2.0, horizon];
    let mid = lat.level_of(times[0])?;
    let quarter = mid / 2;
    let three = mid + (lat.n_steps() - mid) / 2;
    let levels = [0, quarter, mid, three];
    let space = CylinderSpace::new(lat, &times)?;
    let fx = |text: &str| -> Result<CylinderFunctional> { CylinderFunctional::new(times.to_vec(), parse(text)?, Default::default()) };
    let eval = |x: &CylinderFunctional| space.evaluate(x, 0);
    let n_states = |k: usize| space.space().n_states(k);

    let mut worst = HashMap::<&str, f64>::new();
    let mut note = |name: &'static str, v: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = if v.is_nan() || w.is_nan() { f64::NAN } else { w.max(v) };
    };
    let over = |a: &Valuation, k: usize, f: &dyn Fn(usize, f64) -> f64| -> f64 {
        a.values(k).iter().enumerate().map(|(i, &v)| f(i, v)).fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x) })
    };

    let symmetric = fx("x1 + x2")?;
    let sym = eval(&symmetric)?;
    let sym_neg = eval(&symmetric.negated())?;
    for &k in &levels {
        note("v_hypothesis", over(&sym, k, &|i, v| (v + sym_neg.values(k)[i]).abs()));
    }

    let tower = CylinderSpace::with_depth(lat, &times[..1], three)?;
    for (j, text) in corpus.iter().enumerate() {
        let x = fx(text)?;
        let vx = eval(&x)?;
        let vneg = eval(&x.negated())?;

        // (i) X - B_T^2 - |x1| <= X
        let y = fx(&format!("({text}) - (x1 + x2)^2 - abs(x1)"))?;
        let vy = eval(&y)?;
        // (iii) against the next payoff in the corpus
        let other = corpus[(j + 1) % corpus.len()];
        let vo = eval(&fx(other)?)?;
        let vd = eval(&fx(&format!("({text}) - ({other})"))?)?;
        // (v)
        let vs = eval(&fx(&format!("({text}) + x1 + x2"))?)?;
        for &k in &levels {
            note("i_monotone", over(&vy, k, &|i, v| (v - vx.values(k)[i]).max(0.0)));
            note("iii_self_domination", over(&vx, k, &|i, v| (v - vo.values(k)[i] - vd.values(k)[i]).max(0.0)));
            note("v_additivity", over(&vs, k, &|i, v| (v - vx.values(k)[i] - sym.values(k)[i]).abs()));
        }

        for h in MULTIPLIERS {
            let hx = parse(h)?;
            let veta = eval(&fx(h)?)?;
            let vp = eval(&fx(&format!("({h})*({text})"))?)?;
            for &k in &[mid, three] {
                let mut measurable = 0.0f64;
                let mut product = 0.0f64;
                for i in 0..n_states(k) {
                    let view = space.space().view(k, i);
                    let e = hx.eval(&space.history(&view)[..1])?;
                    measurable = measurable.max((veta.values(k)[i] - e).abs());
                    let expect = e.max(0.0) * vx.values(k)[i] - e.min(0.0) * vneg.values(k)[i];
                    product = product.max((vp.values(k)[i] - expect).abs());
                }
                note("ii_measurable", measurable);
                note("iv_multiplier", product);
            }
        }

        // (vi) E[E[X | H_{3T/4}] | H_s] = E[X | H_s]; the truncated space carries the
        // same history, so states match by key.
        let at: HashMap<Box<[i64]>, f64> = (0..n_states(three))
            .map(|i| (space.space().state_key(three, i), vx.values(three)[i]))
            .collect();
        let inner = tower.space().evaluate(
            |v| {
                let mut buf = Vec::new();
                state_key(v.key, v.aux, v.level, &mut buf)?;
                at.get(&buf[..]).copied().ok_or_else(|| Error::InvalidArgument("tower state missing".into()))
            },
            None,
            0,
        )?;
        for &k in &levels[..3] {
            let index: HashMap<Box<[i64]>, usize> = (0..tower.space().n_states(k)).map(|t| (tower.space().state_key(k, t), t)).collect();
            let dev = (0..n_states(k))
                .map(|i| {
                    index
                        .get(&space.space().state_key(k, i))
                        .map_or(f64::INFINITY, |&t| (inner.values(k)[t] - vx.values(k)[i]).abs())
                })
                .fold(0.0, f64::max);
            note("vi_tower", dev);
        }
    }

    let names = ["i_monotone", "ii_measurable", "iii_self_domination", "iv_multiplier", "v_additivity", "v_hypothesis", "vi_tower"];
    let lhs = names.iter().map(|n| worst.get(n).copied().unwrap_or(0.0)).fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x) });
    let mut r = VerificationReport::equality(
        "conditional-algebra",
        "conditional expectation algebra",
        lhs,
        0.0,
        tol,
        Backend::LatticeDp,
        lat.n_steps(),
    );
    for n in names {
        r = r.with_part(n, worst.get(n).copied().unwrap_or(0.0));
    }
    Ok(r.with_part("corpus_size", corpus.len() as f64))
}
