//! Explicit monotone finite differences for `du/dt = G(d2u/dx2)`, `u(0, .) = phi`.
//!
//! Boundary nodes use a one-sided linear extension (second difference zero), so
//! affine data is preserved exactly and the boundary value stays at `phi`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::params::{g_eval, GParams};
use crate::payoff::PayoffExpr;

pub const DEFAULT_CFL_SAFETY: f64 = 2.0;
pub const DEFAULT_SPAN_FACTOR: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub nt: usize,
}

impl Grid1D {
    /// Grid on `[x_min, x_max]` marching to time `t` with the largest step
    /// allowed by `dt <= dx^2 / (sigma_upper_sq * safety)`.
    pub fn new(x_min: f64, x_max: f64, nx: usize, t: f64, params: &GParams, safety: f64) -> Result<Self> {
        if !(x_min < x_max) || nx < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs x_min < x_max and nx >= 3, got [{x_min}, {x_max}] with {nx} nodes"
            )));
        }
        if !(safety >= 1.0) {
            return Err(Error::InvalidArgument(format!("CFL safety must be >= 1, got {safety}")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
        }
        let dx = (x_max - x_min) / (nx - 1) as f64;
        let limit = dx * dx / (params.sigma_upper_sq * safety);
        let nt = if t == 0.0 { 0 } else { (t / limit).ceil() as usize };
        let dt = if nt == 0 { 0.0 } else { t / nt as f64 };
        Ok(Self {
            x_min,
            x_max,
            nx,
            dx,
            dt,
            nt,
        })
    }

    /// Grid centred on zero spanning `span_factor * sqrt(sigma_upper_sq * t)` each way.
    pub fn centered(t: f64, nx: usize, params: &GParams) -> Result<Self> {
        let half = DEFAULT_SPAN_FACTOR * (params.sigma_upper_sq * t.max(1e-12)).sqrt();
        Self::new(-half, half, nx, t, params, DEFAULT_CFL_SAFETY)
    }

    /// Explicit step count; rejects steps that break the stability bound.
    pub fn with_steps(x_min: f64, x_max: f64, nx: usize, t: f64, nt: usize, params: &GParams, safety: f64) -> Result<Self> {
        let mut grid = Self::new(x_min, x_max, nx, t, params, safety)?;
        let dt = if nt == 0 { 0.0 } else { t / nt as f64 };
        let limit = grid.dx * grid.dx / (params.sigma_upper_sq * safety);
        if (nt == 0 && t > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        grid.nt = nt;
        grid.dt = dt;
        Ok(grid)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    fn check_cfl(&self, params: &GParams) -> Result<()> {
        let limit = self.dx * self.dx / params.sigma_upper_sq;
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt: self.dt, limit });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridFunction {
    /// Linear interpolation; clamps outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        let g = &self.grid;
        let s = ((x - g.x_min) / g.dx).clamp(0.0, (g.nx - 1) as f64);
        let i = (s.floor() as usize).min(g.nx - 2);
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,u")?;
        for (i, u) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.x(i), u)?;
        }
        Ok(())
    }
}

/// March `u_t = generator(u_xx)` from arbitrary initial data.
pub(crate) fn march(
    grid: &Grid1D,
    mut u: Vec<f64>,
    generator: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let n = grid.nx;
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let mut next = vec![0.0; n];
    for step in 0..grid.nt {
        next[0] = u[0];
        next[n - 1] = u[n - 1];
        for i in 1..n - 1 {
            let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
            next[i] = u[i] + grid.dt * generator(d2);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
        std::mem::swap(&mut u, &mut next);
    }
    Ok(u)
}

fn initial_data(phi: &PayoffExpr, grid: &Grid1D) -> Result<Vec<f64>> {
    if phi.arity() != 1 {
        return Err(Error::Arity {
            needed: phi.arity(),
            got: 1,
        });
    }
    let u0 = (0..grid.nx)
        .map(|i| phi.eval(&[grid.x(i)]))
        .collect::<Result<Vec<_>>>()?;
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(u0)
}

/// `u(t, .)` for the G-heat equation with initial data `phi`.
pub fn solve_gheat(phi: &PayoffExpr, t: f64, grid: &Grid1D, params: &GParams) -> Result<GridFunction> {
    params.validate()?;
    grid.check_cfl(params)?;
    if (grid.nt as f64 * grid.dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid marches to {} but t = {t}",
            grid.nt as f64 * grid.dt
        )));
    }
    let values = march(grid, initial_data(phi, grid)?, |d2| g_eval(d2, params))?;
    Ok(GridFunction {
        grid: grid.clone(),
        values,
        time: t,
    })
}

/// Classical heat flow with a fixed variance rate on the same grid; the
/// linear counterpart of [`solve_gheat`].
pub fn solve_linear_heat(phi: &PayoffExpr, t: f64, grid: &Grid1D, sigma_sq: f64) -> Result<GridFunction> {
    let values = march(grid, initial_data(phi, grid)?, |d2| 0.5 * sigma_sq * d2)?;
    Ok(GridFunction {
        grid: grid.clone(),
        values,
        time: t,
    })
}

/// `E[phi(B_t)]` under the G-normal law, read at `x = 0`.
pub fn gnormal_expect(phi: &PayoffExpr, t: f64, params: &GParams, grid: &Grid1D) -> Result<f64> {
    Ok(solve_gheat(phi, t, grid, params)?.at(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::parse;

    fn band() -> GParams {
        GParams::new(0.25, 1.0).unwrap()
    }

    fn grid401(t: f64) -> Grid1D {
        Grid1D::new(-6.0, 6.0, 401, t, &band(), DEFAULT_CFL_SAFETY).unwrap()
    }

    #[test]
    fn grid_respects_cfl() {
        let g = grid401(1.0);
        assert!((g.dx - 0.03).abs() < 1e-15);
        assert!(g.dt <= g.dx * g.dx / 2.0);
        assert!((g.dt * g.nt as f64 - 1.0).abs() < 1e-12);
        assert_eq!(g.x(200), 0.0);
    }

    #[test]
    fn explicit_steps_beyond_cfl_rejected() {
        let r = Grid1D::with_steps(-6.0, 6.0, 401, 1.0, 100, &band(), 1.0);
        assert!(matches!(r, Err(Error::Cfl { .. })));
        assert!(Grid1D::with_steps(-6.0, 6.0, 401, 1.0, 1200, &band(), 1.0).is_ok());
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(Grid1D::new(1.0, 1.0, 10, 1.0, &band(), 2.0).is_err());
        assert!(Grid1D::new(-1.0, 1.0, 2, 1.0, &band(), 2.0).is_err());
        assert!(Grid1D::new(-1.0, 1.0, 11, 1.0, &band(), 0.5).is_err());
    }

    #[test]
    fn linear_payoff_is_stationary() {
        let u = solve_gheat(&parse("x1").unwrap(), 1.0, &grid401(1.0), &band()).unwrap();
        for (i, v) in u.values.iter().enumerate() {
            assert!((v - u.grid.x(i)).abs() < 1e-10);
        }
    }

    #[test]
    fn convex_and_concave_squares() {
        let g = grid401(1.0);
        let up = gnormal_expect(&parse("x1^2").unwrap(), 1.0, &band(), &g).unwrap();
        let down = gnormal_expect(&parse("-(x1^2)").unwrap(), 1.0, &band(), &g).unwrap();
        assert!((up - 1.0).abs() < 2e-3, "{up}");
        assert!((down + 0.25).abs() < 2e-3, "{down}");
    }

    #[test]
    fn gnormal_examples() {
        let p = band();
        let g1 = Grid1D::centered(1.0, 401, &p).unwrap();
        assert!(gnormal_expect(&parse("x1").unwrap(), 1.0, &p, &g1).unwrap().abs() < 1e-10);
        let g2 = Grid1D::centered(2.0, 401, &p).unwrap();
        let v = gnormal_expect(&parse("x1^2").unwrap(), 2.0, &p, &g2).unwrap();
        assert!((v - 2.0).abs() < 5e-3, "{v}");
    }

    #[test]
    fn constants_preserved_exactly() {
        let u = solve_gheat(&parse("3.5").unwrap(), 1.0, &grid401(1.0), &band()).unwrap();
        assert!(u.values.iter().all(|&v| v == 3.5));
    }

    #[test]
    fn zero_time_returns_initial_data() {
        let g = Grid1D::centered(0.0, 11, &band()).unwrap();
        assert_eq!(g.nt, 0);
        let u = solve_gheat(&parse("x1^2").unwrap(), 0.0, &g, &band()).unwrap();
        assert_eq!(u.values[5], 0.0);
    }

    #[test]
    fn rejects_multivariate_payoff() {
        let r = solve_gheat(&parse("x1*x2").unwrap(), 1.0, &grid401(1.0), &band());
        assert!(matches!(r, Err(Error::Arity { .. })));
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let g = Grid1D::new(-6.0, 6.0, 41, 1.0, &band(), 2.0).unwrap();
        let r = solve_gheat(&parse("4e306 * x1^2").unwrap(), 1.0, &g, &band());
        assert!(matches!(r, Err(Error::NonFinite { .. })), "{r:?}");
    }

    #[test]
    fn csv_dump() {
        let g = Grid1D::new(-1.0, 1.0, 3, 0.0, &band(), 2.0).unwrap();
        let u = solve_gheat(&parse("x1").unwrap(), 0.0, &g, &band()).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,u\n-1,-1\n0,0\n1,1\n");
    }
}
