//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gexp_core::verify::Tolerances;
use gexp_core::GParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: GParams,
    pub horizon: f64,
    pub n_steps: usize,
    pub nx: usize,
    pub x_span: f64,
    pub cfl_safety: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub sigma_refinement: usize,
    pub precision: usize,
    pub tolerances: Tolerances,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: GParams::default(),
            horizon: 1.0,
            n_steps: 100,
            nx: 401,
            x_span: 6.0,
            cfl_safety: 2.0,
            n_paths: 10_000,
            seed: 1,
            sigma_refinement: 3,
            precision: 12,
            tolerances: Tolerances::default(),
            out: PathBuf::from("gexp-out"),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

impl RunConfig {
    /// Set one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tolerances;
        match key {
            "sigma0_sq" => self.params.sigma_lower_sq = num(key, value)?,
            "sigma_upper_sq" => self.params.sigma_upper_sq = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "n_steps" => self.n_steps = num(key, value)?,
            "nx" => self.nx = num(key, value)?,
            "x_span" => self.x_span = num(key, value)?,
            "cfl_safety" => self.cfl_safety = num(key, value)?,
            "n_paths" => self.n_paths = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "sigma_refinement" => self.sigma_refinement = num(key, value)?,
            "precision" => self.precision = num(key, value)?,
            "tol_dp" => t.dp = num(key, value)?,
            "tol_exact" => t.exact = num(key, value)?,
            "tol_path" => t.path = num(key, value)?,
            "tol_pde" => t.pde = num(key, value)?,
            "tol_cross" => t.cross = num(key, value)?,
            "tol_doob_rel" => t.doob_rel = num(key, value)?,
            "tol_monotone" => t.monotone = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            cfg.set(key.trim(), value.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Every key, in the order [`RunConfig::set`] accepts them. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let t = &self.tolerances;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("sigma0_sq", self.params.sigma_lower_sq.to_string());
        kv("sigma_upper_sq", self.params.sigma_upper_sq.to_string());
        kv("horizon", self.horizon.to_string());
        kv("n_steps", self.n_steps.to_string());
        kv("nx", self.nx.to_string());
        kv("x_span", self.x_span.to_string());
        kv("cfl_safety", self.cfl_safety.to_string());
        kv("n_paths", self.n_paths.to_string());
        kv("seed", self.seed.to_string());
        kv("sigma_refinement", self.sigma_refinement.to_string());
        kv("precision", self.precision.to_string());
        kv("tol_dp", t.dp.to_string());
        kv("tol_exact", t.exact.to_string());
        kv("tol_path", t.path.to_string());
        kv("tol_pde", t.pde.to_string());
        kv("tol_cross", t.cross.to_string());
        kv("tol_doob_rel", t.doob_rel.to_string());
        kv("tol_monotone", t.monotone.to_string());
        kv("out", self.out.display().to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let positive = [
            ("horizon", self.horizon),
            ("x_span", self.x_span),
            ("n_steps", self.n_steps as f64),
            ("n_paths", self.n_paths as f64),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                bail!("`{k}` must be positive, got {v}");
            }
        }
        if self.nx < 3 {
            bail!("`nx` must be at least 3, got {}", self.nx);
        }
        if !(self.cfl_safety >= 1.0) {
            bail!("`cfl_safety` must be >= 1, got {}", self.cfl_safety);
        }
        if !(1..=17).contains(&self.precision) {
            bail!("`precision` must be between 1 and 17, got {}", self.precision);
        }
        let t = &self.tolerances;
        for (k, v) in [("tol_dp", t.dp), ("tol_exact", t.exact), ("tol_path", t.path), ("tol_pde", t.pde), ("tol_cross", t.cross), ("tol_doob_rel", t.doob_rel), ("tol_monotone", t.monotone)] {
            if !(v >= 0.0) || !v.is_finite() {
                bail!("`{k}` must be a nonnegative number, got {v}");
            }
        }
        Ok(())
    }
}

/// `x` rounded to `digits` significant digits, printed in shortest form.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return x.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("formatted float parses");
    let exp = rounded.abs().log10().floor();
    if exp < -4.0 || exp >= digits as f64 {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}
