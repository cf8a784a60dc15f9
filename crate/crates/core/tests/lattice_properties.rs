use gexp_core::lattice::NAMED_POLICIES;
use gexp_core::{
    build_lattice, conditional_expect, extract_worst_policy, gnormal_expect, lattice_expect, sample_paths, CylinderFunctional,
    GParams, Grid1D, PayoffExpr, VolatilityPolicy,
};
use proptest::prelude::*;

fn fx(t: f64, text: &str) -> CylinderFunctional {
    CylinderFunctional::terminal(t, PayoffExpr::parse(text).unwrap()).unwrap()
}

fn params() -> impl Strategy<Value = GParams> {
    (0.05..1.0f64, 0.5..2.0f64).prop_map(|(r, hi)| GParams::new(r * hi, hi).unwrap())
}

/// Volatility ratio `i / 4`, so the grid recombines at long horizons.
fn recombining_params() -> impl Strategy<Value = GParams> {
    (1u32..=4, 0.5..2.0f64).prop_map(|(i, hi)| GParams::new((i as f64 / 4.0).powi(2) * hi, hi).unwrap())
}

fn payoff() -> impl Strategy<Value = String> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -0.3..0.3f64)
        .prop_map(|(a, b, c, d, e)| format!("{a}*x1^2 + {b}*abs(x1 - {c}) + {d}*max(x1, 0) + {e}*x1^3"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nested_refinement_never_lowers_value(p in params(), phi in payoff(), n in 4usize..24) {
        let x = fx(1.0, &phi);
        // refinements 0, 1, 3, 7 give nested variance grids
        let mut prev = f64::NEG_INFINITY;
        for r in [0, 1, 3, 7] {
            let lat = build_lattice(1.0, n, &p, r).unwrap();
            let v = lattice_expect(&lat, &x).unwrap();
            prop_assert!(v >= prev - 1e-12, "refinement {r}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn brownian_motion_is_a_symmetric_martingale(p in recombining_params(), n in 2usize..60, frac in 0.0..1.0f64, r in 0usize..4) {
        let lat = build_lattice(1.0, n, &p, r).unwrap();
        let j = (frac * n as f64) as usize;
        let up = conditional_expect(&lat, &fx(1.0, "x1"), j).unwrap();
        let down = conditional_expect(&lat, &fx(1.0, "-x1"), j).unwrap();
        for i in 0..up.len() {
            prop_assert!((up.values[i] - up.positions[i]).abs() <= 1e-12);
            prop_assert!((down.values[i] + up.positions[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn squared_motion_minus_clock(p in recombining_params(), n in 2usize..60, frac in 0.0..1.0f64, r in 0usize..4) {
        let lat = build_lattice(1.0, n, &p, r).unwrap();
        let j = (frac * n as f64) as usize;
        let c = conditional_expect(&lat, &fx(1.0, "x1^2"), j).unwrap();
        let remaining = p.sigma_upper_sq * (1.0 - lat.time(j));
        for i in 0..c.len() {
            let x = c.positions[i];
            prop_assert!((c.values[i] - x * x - remaining).abs() <= 1e-10, "{} vs {}", c.values[i], x * x + remaining);
        }
        let neg = conditional_expect(&lat, &fx(1.0, "-(x1^2)"), j).unwrap();
        let lower = p.sigma_lower_sq * (1.0 - lat.time(j));
        for i in 0..neg.len() {
            let x = neg.positions[i];
            prop_assert!((neg.values[i] + x * x + lower).abs() <= 1e-10);
        }
    }

    #[test]
    fn tower_property(p in params(), phi in payoff(), n in 4usize..30) {
        let lat = build_lattice(1.0, n, &p, 1).unwrap();
        let x = fx(1.0, &phi);
        let (s, t) = (n / 4, n / 2);
        let inner = conditional_expect(&lat, &x, t).unwrap();
        // a terminal functional's conditional value depends only on the current node
        let table: Vec<(f64, f64)> = inner.positions.iter().copied().zip(inner.values.iter().copied()).collect();
        let outer = CylinderFunctional::terminal(lat.time(t), interpolant(&table)).unwrap();
        let lhs = conditional_expect(&lat, &outer, s).unwrap();
        let rhs = conditional_expect(&lat, &x, s).unwrap();
        for i in 0..lhs.len() {
            prop_assert!((lhs.values[i] - rhs.values[i]).abs() <= 1e-12, "{} vs {}", lhs.values[i], rhs.values[i]);
        }
    }
}

/// Piecewise-linear interpolant through the points as a payoff.
fn interpolant(points: &[(f64, f64)]) -> PayoffExpr {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let mut text = format!("{}", pts[0].1);
    let mut slope = 0.0;
    for w in pts.windows(2) {
        let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        text.push_str(&format!(" + {}*max(x1 - ({}), 0)", s - slope, w[0].0));
        slope = s;
    }
    PayoffExpr::parse(&text).unwrap()
}

#[test]
fn backends_agree_on_fine_lattice() {
    let p = GParams::default();
    let lat = build_lattice(1.0, 400, &p, 3).unwrap();
    let grid = Grid1D::centered(1.0, 401, &p).unwrap();
    for text in ["x1", "x1^2", "-(x1^2)", "abs(x1)", "max(x1 - 0.5, 0)", "x1^3"] {
        let x = fx(1.0, text);
        let a = lattice_expect(&lat, &x).unwrap();
        let b = gnormal_expect(x.phi(), 1.0, &p, &grid).unwrap();
        assert!((a - b).abs() <= 1e-2, "{text}: lattice {a}, pde {b}");
    }
}

#[test]
fn sampled_paths_respect_variance_band() {
    let p = GParams::default();
    let lat = build_lattice(1.0, 50, &p, 3).unwrap();
    let dt = lat.dt();
    for name in NAMED_POLICIES {
        let policy = VolatilityPolicy::by_name(name, &lat).unwrap();
        let ens = sample_paths(&lat, &policy, 200, 7).unwrap();
        for path in &ens.paths {
            assert_eq!(path.b(&lat)[0], 0.0);
            for d in path.qv_increments(&lat) {
                assert!(p.sigma_lower_sq * dt <= d && d <= p.sigma_upper_sq * dt, "{name}: {d}");
            }
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let lat = build_lattice(1.0, 30, &GParams::default(), 3).unwrap();
    let policy = VolatilityPolicy::by_name("alternate", &lat).unwrap();
    let csv = |seed| {
        let mut out = Vec::new();
        sample_paths(&lat, &policy, 5, seed).unwrap().write_csv(&mut out).unwrap();
        out
    };
    assert_eq!(csv(42), csv(42));
    assert_ne!(csv(42), csv(43));
}

#[test]
fn classical_variance_under_maximal_volatility() {
    let lat = build_lattice(1.0, 20, &GParams::default(), 0).unwrap();
    let ens = sample_paths(&lat, &VolatilityPolicy::constant_max(&lat), 100_000, 3).unwrap();
    let xs: Vec<f64> = ens.paths.iter().map(|p| p.b(&lat).last().unwrap().powi(2)).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * se, "{mean} +- {se}");
}

#[test]
fn worst_policy_reproduces_the_value() {
    let lat = build_lattice(1.0, 20, &GParams::default(), 3).unwrap();
    for text in ["max(x1 - 0.5, 0) - 0.3*x1^2", "abs(x1) - x1^2"] {
        let x = fx(1.0, text);
        let value = lattice_expect(&lat, &x).unwrap();
        let policy = extract_worst_policy(&lat, &x).unwrap();
        let ens = sample_paths(&lat, &policy, 40_000, 11).unwrap();
        let xs: Vec<f64> = ens.paths.iter().map(|p| x.eval_path(&lat, &p.b(&lat)).unwrap()).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - value).abs() <= 4.0 * se, "{text}: {mean} +- {se} vs {value}");
    }
}
