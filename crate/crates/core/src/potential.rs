//! Soft-core binding potentials.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Anything that can act as a static 1D binding potential.
pub trait BindingPotential: Sync {
    fn value(&self, x: f64) -> f64;
    fn gradient(&self, x: f64) -> f64;
}

/// `V(x) = -f(x) / sqrt(x^2 + 1)`, with `f = 1` for the long-range variant
/// and a `cos^7` taper between `a0` and `l` for the truncated one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    SoftcoreLong,
    SoftcoreTruncated { a0: f64, l: f64 },
}

pub const DEFAULT_A0: f64 = 5.0;
pub const DEFAULT_L: f64 = 50.0;

impl PotentialSpec {
    pub fn truncated(a0: f64, l: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0 < l && l.is_finite()) {
            return Err(Error::Config(format!(
                "truncated potential needs 0 < a0 < L (got a0 = {a0}, L = {l})"
            )));
        }
        Ok(PotentialSpec::SoftcoreTruncated { a0, l })
    }

    pub fn default_truncated() -> Self {
        PotentialSpec::SoftcoreTruncated {
            a0: DEFAULT_A0,
            l: DEFAULT_L,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PotentialSpec::SoftcoreLong => "softcore",
            PotentialSpec::SoftcoreTruncated { .. } => "truncated",
        }
    }

    /// Range function `f(x)` and its derivative.
    pub fn taper(&self, x: f64) -> (f64, f64) {
        match *self {
            PotentialSpec::SoftcoreLong => (1.0, 0.0),
            PotentialSpec::SoftcoreTruncated { a0, l } => {
                let r = x.abs();
                if r < a0 {
                    (1.0, 0.0)
                } else if r <= l {
                    let u = FRAC_PI_2 * (r - a0) / (l - a0);
                    let (s, c) = u.sin_cos();
                    let c6 = c.powi(6);
                    let df = -7.0 * c6 * s * FRAC_PI_2 / (l - a0) * x.signum();
                    (c6 * c, df)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}

impl BindingPotential for PotentialSpec {
    fn value(&self, x: f64) -> f64 {
        let (f, _) = self.taper(x);
        if f == 0.0 {
            return 0.0;
        }
        -f / (x * x + 1.0).sqrt()
    }

    fn gradient(&self, x: f64) -> f64 {
        let (f, df) = self.taper(x);
        let s2 = x * x + 1.0;
        let s = s2.sqrt();
        // d/dx [-f / s] = -f'/s + f x / s^3
        -df / s + f * x / (s2 * s)
    }
}
