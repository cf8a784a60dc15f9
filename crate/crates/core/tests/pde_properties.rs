use gexp_core::pde::solve_linear_heat;
use gexp_core::{gnormal_expect, solve_gheat, GParams, Grid1D, PayoffExpr};
use proptest::prelude::*;

const T: f64 = 0.5;

fn grid(params: &GParams) -> Grid1D {
    Grid1D::new(-4.0, 4.0, 81, T, params, 2.0).unwrap()
}

fn solve(text: &str, params: &GParams) -> Vec<f64> {
    solve_gheat(&PayoffExpr::parse(text).unwrap(), T, &grid(params), params).unwrap().values
}

fn params() -> impl Strategy<Value = GParams> {
    (0.0..1.0f64, 0.5..2.0f64).prop_map(|(r, hi)| GParams::new(r * hi, hi).unwrap())
}

/// Mixtures of convex, concave and kinked pieces.
fn payoff() -> impl Strategy<Value = String> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(a, b, c, d, e, f)| format!("{a}*x1^2 + {b}*abs(x1 - {c}) + {e}*max(x1 - {d}, 0) + {f}*x1"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn comparison(p in params(), phi in payoff(), k in 0.0..1.0f64, c in -2.0..2.0f64, m in 0.0..0.5f64) {
        let lo = solve(&phi, &p);
        let hi = solve(&format!("{phi} + {k}*abs(x1 - {c}) + {m}"), &p);
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a <= &(b + 1e-12), "{a} > {b}");
        }
    }

    #[test]
    fn constants_preserved(p in params(), c in -10.0..10.0f64) {
        let u = solve(&format!("{c}"), &p);
        prop_assert!(u.iter().all(|&v| v == c));
    }

    #[test]
    fn self_domination(p in params(), f in payoff(), g in payoff()) {
        let uf = solve(&f, &p);
        let ug = solve(&g, &p);
        let ud = solve(&format!("({f}) - ({g})"), &p);
        for i in 0..uf.len() {
            prop_assert!(uf[i] - ug[i] <= ud[i] + 1e-8, "node {i}: {} > {}", uf[i] - ug[i], ud[i]);
        }
    }

    #[test]
    fn positive_homogeneity(p in params(), phi in payoff(), k in -4i32..5, lambda in 0.0..5.0f64) {
        let u = solve(&phi, &p);
        let scale = 2f64.powi(k);
        let scaled = solve(&format!("{scale}*({phi})"), &p);
        prop_assert!(u.iter().zip(&scaled).all(|(a, b)| scale * a == *b));
        let scaled = solve(&format!("{lambda}*({phi})"), &p);
        for (a, b) in u.iter().zip(&scaled) {
            prop_assert!((lambda * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn dominates_constant_volatility_flows(p in params(), phi in payoff()) {
        let g = grid(&p);
        let expr = PayoffExpr::parse(&phi).unwrap();
        let u = solve_gheat(&expr, T, &g, &p).unwrap().values;
        for s in [p.sigma_lower_sq, p.sigma_upper_sq] {
            let v = solve_linear_heat(&expr, T, &g, s).unwrap().values;
            for (a, b) in u.iter().zip(&v) {
                prop_assert!(a >= &(b - 1e-12), "sigma^2 = {s}: {a} < {b}");
            }
        }
    }
}

fn error_at_zero(text: &str, nx: usize, oracle: f64) -> f64 {
    let p = GParams::default();
    let g = Grid1D::new(-6.0, 6.0, nx, 1.0, &p, 2.0).unwrap();
    (gnormal_expect(&PayoffExpr::parse(text).unwrap(), 1.0, &p, &g).unwrap() - oracle).abs()
}

#[test]
fn kinked_payoff_converges_under_refinement() {
    let oracle = (2.0 / std::f64::consts::PI).sqrt();
    let errs: Vec<f64> = [51, 101, 201].iter().map(|&nx| error_at_zero("abs(x1)", nx, oracle)).collect();
    for w in errs.windows(2) {
        assert!(w[0] >= 3.0 * w[1], "{errs:?}");
    }
}

#[test]
fn square_payoff_is_exact_up_to_rounding() {
    // the central difference is exact on quadratics, so only roundoff remains
    for nx in [51, 101, 201] {
        assert!(error_at_zero("x1^2", nx, 1.0) < 1e-9);
    }
}

/// `E[f(Z)]`, `Z ~ N(0, 1)`, by composite Simpson on `[-12, 12]`.
fn normal_quadrature(f: impl Fn(f64) -> f64) -> f64 {
    let n = 240_000;
    let h = 24.0 / n as f64;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let sum: f64 = (0..=n)
        .map(|i| {
            let x = -12.0 + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(x) * density(x)
        })
        .sum();
    sum * h / 3.0
}

#[test]
fn convex_payoffs_match_quadrature_oracle() {
    let p = GParams::default();
    let g = Grid1D::centered(1.0, 401, &p).unwrap();
    let expect = |t: &str| gnormal_expect(&PayoffExpr::parse(t).unwrap(), 1.0, &p, &g).unwrap();
    let abs = normal_quadrature(f64::abs);
    assert!((abs - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9);
    assert!((expect("abs(x1)") - abs).abs() < 5e-3);
    let call = normal_quadrature(|z| (z - 0.5).max(0.0));
    assert!((expect("max(x1 - 0.5, 0)") - call).abs() < 5e-3);
    let quartic = normal_quadrature(|z| z.powi(4));
    assert!((quartic - 3.0).abs() < 1e-9);
    assert!((expect("x1^4") - quartic).abs() < 2e-2);
}
