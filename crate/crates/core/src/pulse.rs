//! Flat-top laser pulse and derived strong-field parameters.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `E(t) = E0 g(t) sin(omega t)` with a trapezoidal envelope `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub e0: f64,
    pub omega: f64,
    /// Ramp length in cycles (both ramps).
    pub n_ramp: f64,
    /// Flat-top length in cycles.
    pub n_flat: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            e0: 0.075,
            omega: 0.057,
            n_ramp: 2.25,
            n_flat: 10.0,
        }
    }
}

impl PulseSpec {
    pub fn new(e0: f64, omega: f64, n_ramp: f64, n_flat: f64) -> Result<Self> {
        let p = Self {
            e0,
            omega,
            n_ramp,
            n_flat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > 0.0 && self.e0.is_finite()) {
            return Err(Error::Config(format!("pulse.E0 must be > 0 (got {})", self.e0)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!(
                "pulse.omega must be > 0 (got {})",
                self.omega
            )));
        }
        if !(self.n_ramp >= 0.0 && self.n_ramp.is_finite()) {
            return Err(Error::Config(format!(
                "pulse.n_ramp must be >= 0 (got {})",
                self.n_ramp
            )));
        }
        if !(self.n_flat >= 0.0 && self.n_flat.is_finite()) {
            return Err(Error::Config(format!(
                "pulse.n_flat must be >= 0 (got {})",
                self.n_flat
            )));
        }
        Ok(())
    }

    /// One optical cycle, `2 pi / omega`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn tau_on(&self) -> f64 {
        self.n_ramp * self.period()
    }

    pub fn tau_off(&self) -> f64 {
        (self.n_ramp + self.n_flat) * self.period()
    }

    pub fn tau_final(&self) -> f64 {
        self.tau_off() + self.tau_on()
    }

    /// Trapezoidal envelope; zero outside `[0, tau_final]`.
    pub fn envelope(&self, t: f64) -> f64 {
        let (on, off, end) = (self.tau_on(), self.tau_off(), self.tau_final());
        if !(0.0..=end).contains(&t) {
            0.0
        } else if t < on {
            t / on
        } else if t < off {
            1.0
        } else if on > 0.0 {
            (1.0 - (t - off) / on).max(0.0)
        } else {
            // zero-length ramps: rectangular pulse closed at tau_off
            if t < end {
                1.0
            } else {
                0.0
            }
        }
    }

    pub fn field(&self, t: f64) -> f64 {
        self.e0 * self.envelope(t) * (self.omega * t).sin()
    }

    /// Field of the monochromatic carrier (`g = 1`), used for classical scans.
    pub fn monochromatic_field(&self, t: f64) -> f64 {
        self.e0 * (self.omega * t).sin()
    }

    /// `U_p = E0^2 / (4 omega^2)`.
    pub fn ponderomotive_energy(&self) -> f64 {
        ponderomotive_energy(self.e0, self.omega)
    }

    /// `gamma = omega sqrt(2 |eps0|) / E0`; `eps0` must be a bound energy.
    pub fn keldysh_gamma(&self, epsilon0: f64) -> Result<f64> {
        if !(epsilon0 < 0.0) {
            return Err(Error::Contract(format!(
                "Keldysh parameter needs a bound energy < 0 (got {epsilon0})"
            )));
        }
        Ok(self.omega * (2.0 * epsilon0.abs()).sqrt() / self.e0)
    }

    /// Three-step-model cutoff `|eps0| + 3.17 U_p` in harmonic orders.
    pub fn cutoff_harmonic(&self, epsilon0: f64) -> f64 {
        (epsilon0.abs() + 3.17 * self.ponderomotive_energy()) / self.omega
    }
}

/// Free-standing form so `E0 = 0` can be evaluated without a valid pulse.
pub fn ponderomotive_energy(e0: f64, omega: f64) -> f64 {
    e0 * e0 / (4.0 * omega * omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS0: f64 = -0.66995;

    #[test]
    fn field_examples() {
        let p = PulseSpec::default();
        assert_eq!(p.field(0.0), 0.0);
        // omega * tau_on = 4.5 pi: the flat top opens on a crest
        assert!((p.field(p.tau_on()).abs() - p.e0).abs() < 1e-12);
        assert!(p.field(p.tau_on() + p.period() / 4.0).abs() < 1e-12);
        assert!(p.field(p.tau_final()).abs() < 1e-15);
        assert_eq!(p.field(-1.0), 0.0);
        assert_eq!(p.field(p.tau_final() + 1.0), 0.0);
    }

    #[test]
    fn envelope_shape() {
        let p = PulseSpec::default();
        assert_eq!(p.envelope(0.0), 0.0);
        assert_eq!(p.envelope(p.tau_on()), 1.0);
        assert_eq!(p.envelope(p.tau_off() - 1e-9), 1.0);
        assert!((p.envelope(p.tau_on() / 2.0) - 0.5).abs() < 1e-15);
        assert!((p.envelope(p.tau_off() + p.tau_on() / 2.0) - 0.5).abs() < 1e-12);
        assert!(p.envelope(p.tau_final()).abs() < 1e-12);
        assert!((p.tau_final() / p.period() - 14.5).abs() < 1e-12);
    }

    #[test]
    fn field_is_bounded_and_continuous() {
        let p = PulseSpec::default();
        let n = 200_000;
        let h = p.tau_final() / n as f64;
        let mut prev = p.field(0.0);
        for i in 1..=n {
            let e = p.field(i as f64 * h);
            assert!(e.abs() <= p.e0 + 1e-15);
            // slope is bounded by E0 (omega + 1/tau_on)
            assert!((e - prev).abs() <= p.e0 * (p.omega + 1.0 / p.tau_on()) * h * 1.0001);
            prev = e;
        }
    }

    #[test]
    fn ponderomotive_examples() {
        let up = ponderomotive_energy(0.075, 0.057);
        assert!((up - 0.43283).abs() < 1e-5, "{up}");
        assert_eq!(ponderomotive_energy(0.0, 0.057), 0.0);
        assert!((ponderomotive_energy(2.0 * 0.3, 0.3) - 1.0).abs() < 1e-15);
        let p = PulseSpec::default();
        assert!((p.cutoff_harmonic(EPS0) - 35.8).abs() < 0.05);
    }

    #[test]
    fn keldysh_examples() {
        let p = PulseSpec::default();
        assert!((p.keldysh_gamma(EPS0).unwrap() - 0.880).abs() < 0.001);
        let slow = PulseSpec::new(0.075, 1e-9, 2.25, 10.0).unwrap();
        assert!(slow.keldysh_gamma(EPS0).unwrap() < 1e-7);
        let unit = PulseSpec::new(0.057 * (2.0 * 0.5f64).sqrt(), 0.057, 2.25, 10.0).unwrap();
        assert!((unit.keldysh_gamma(-0.5).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(p.keldysh_gamma(0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn validation() {
        assert!(PulseSpec::new(-1.0, 0.057, 2.25, 10.0).is_err());
        assert!(PulseSpec::new(0.075, 0.0, 2.25, 10.0).is_err());
        assert!(PulseSpec::new(0.075, 0.057, -1.0, 10.0).is_err());
        let rect = PulseSpec::new(0.075, 0.057, 0.0, 1.0).unwrap();
        assert_eq!(rect.envelope(0.0), 1.0);
    }
}
