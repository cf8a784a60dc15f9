//! The volatility band and the generator `G` it induces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance-rate band `[sigma_lower_sq, sigma_upper_sq]` defining `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GParams {
    pub sigma_lower_sq: f64,
    pub sigma_upper_sq: f64,
}

impl Default for GParams {
    fn default() -> Self {
        Self {
            sigma_lower_sq: 0.25,
            sigma_upper_sq: 1.0,
        }
    }
}

impl GParams {
    pub fn new(sigma_lower_sq: f64, sigma_upper_sq: f64) -> Result<Self> {
        let params = Self {
            sigma_lower_sq,
            sigma_upper_sq,
        };
        params.validate()?;
        Ok(params)
    }

    /// Band with the upper rate normalised to one.
    pub fn normalized(sigma_lower_sq: f64) -> Result<Self> {
        Self::new(sigma_lower_sq, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.sigma_lower_sq, self.sigma_upper_sq);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParams("non-finite volatility bound".into()));
        }
        if hi <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma_upper_sq must be positive, got {hi}"
            )));
        }
        if lo < 0.0 || lo > hi {
            return Err(Error::InvalidParams(format!(
                "need 0 <= sigma_lower_sq <= sigma_upper_sq, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn sigma_lower(&self) -> f64 {
        self.sigma_lower_sq.sqrt()
    }

    pub fn sigma_upper(&self) -> f64 {
        self.sigma_upper_sq.sqrt()
    }

    /// `G(alpha) = (sigma_upper_sq * alpha^+ - sigma_lower_sq * alpha^-) / 2`.
    pub fn g(&self, alpha: f64) -> f64 {
        g_eval(alpha, self)
    }
}

/// The sublinear generator; equals `max_{s in band} s * alpha / 2`.
pub fn g_eval(alpha: f64, params: &GParams) -> f64 {
    if alpha >= 0.0 {
        0.5 * params.sigma_upper_sq * alpha
    } else {
        0.5 * params.sigma_lower_sq * alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band() -> GParams {
        GParams::new(0.25, 1.0).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let p = band();
        assert_eq!(g_eval(2.0, &p), 1.0);
        assert_eq!(g_eval(-2.0, &p), -0.25);
        assert_eq!(g_eval(0.0, &p), 0.0);
        assert_eq!(g_eval(0.0, &GParams::new(0.0, 3.0).unwrap()), 0.0);
    }

    #[test]
    fn rejects_bad_bands() {
        assert!(GParams::new(-0.1, 1.0).is_err());
        assert!(GParams::new(0.5, 0.25).is_err());
        assert!(GParams::new(0.0, 0.0).is_err());
        assert!(GParams::new(f64::NAN, 1.0).is_err());
        assert!(GParams::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn json_shape() {
        let p = band();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"sigma_lower_sq":0.25,"sigma_upper_sq":1.0}"#);
        let back: GParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn positively_homogeneous(alpha in -50.0f64..50.0, lambda in 0.0f64..20.0) {
            let p = band();
            let lhs = g_eval(lambda * alpha, &p);
            let rhs = lambda * g_eval(alpha, &p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn subadditive(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let p = band();
            prop_assert!(g_eval(a + b, &p) <= g_eval(a, &p) + g_eval(b, &p) + 1e-12);
        }

        #[test]
        fn matches_sup_over_band(alpha in -10.0f64..10.0, lo in 0.0f64..1.0) {
            let p = GParams::new(lo, 1.0).unwrap();
            let grid_max = (0..=1000)
                .map(|i| lo + (1.0 - lo) * i as f64 / 1000.0)
                .map(|s| 0.5 * s * alpha)
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((g_eval(alpha, &p) - grid_max).abs() <= 1e-12);
        }
    }
}
