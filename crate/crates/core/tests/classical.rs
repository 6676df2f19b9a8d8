use bohmian_hhg::classical::{
    free_motion, potential_trajectory, return_events, Carrier, ReleaseSpec, ReturnDetector,
};
use bohmian_hhg::{BindingPotential, PotentialSpec, PulseSpec};
use proptest::prelude::*;

const EPS0: f64 = -0.66995;

fn carrier() -> Carrier {
    Carrier::from(&PulseSpec::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rk4_tracks_closed_form(phase in 0.0f64..1.0, x0 in -5.0f64..5.0, v0 in -1.0f64..1.0) {
        let c = carrier();
        let p = c.period();
        let t0 = phase * p;
        let release = ReleaseSpec { t0, x0, v0, with_potential: false };
        let tr = potential_trajectory::<PotentialSpec>(&release, &c, None, p / 4096.0, t0 + 2.0 * p).unwrap();
        for ((t, &x), &v) in tr.positions.iter().zip(tr.velocities.values()) {
            let (xe, ve) = free_motion(t0, x0, v0, &c, t).unwrap();
            prop_assert!((x - xe).abs() < 1e-8, "t = {}: x {} vs {}", t, x, xe);
            prop_assert!((v - ve).abs() < 1e-8);
        }
    }

    #[test]
    fn field_free_energy_is_conserved(x0 in -3.0f64..3.0, v0 in -0.8f64..0.8, truncated in any::<bool>()) {
        let pot = if truncated { PotentialSpec::default_truncated() } else { PotentialSpec::SoftcoreLong };
        let still = Carrier { e0: 0.0, omega: 0.057 };
        let p = still.period();
        let release = ReleaseSpec { t0: 0.0, x0, v0, with_potential: true };
        let tr = potential_trajectory(&release, &still, Some(&pot), p / 8192.0, 2.0 * p).unwrap();
        let e_start = 0.5 * v0 * v0 + pot.value(x0);
        for (&x, &v) in tr.positions.values().iter().zip(tr.velocities.values()) {
            let e = 0.5 * v * v + pot.value(x);
            prop_assert!((e - e_start).abs() < 1e-8, "{} vs {}", e, e_start);
        }
    }

    #[test]
    fn returns_are_half_cycle_antisymmetric(phase in 0.02f64..0.48) {
        let c = carrier();
        let p = c.period();
        let det = ReturnDetector::new(ReturnDetector::DEFAULT_X_EXIT, p);
        let dt = p / 4096.0;
        let run = |t0: f64| {
            let r = ReleaseSpec::field_only(t0);
            let tr = potential_trajectory::<PotentialSpec>(&r, &c, None, dt, t0 + 1.6 * p).unwrap();
            let events = return_events(&tr, EPS0, &det);
            (tr, events)
        };
        let t0 = phase * p;
        let (a, ea) = run(t0);
        let (b, eb) = run(t0 + 0.5 * p);
        for (&xa, &xb) in a.positions.values().iter().zip(b.positions.values()) {
            prop_assert!((xa + xb).abs() < 1e-9 * (1.0 + xa.abs()));
        }
        prop_assert_eq!(ea.len(), eb.len());
        for (u, w) in ea.iter().zip(&eb) {
            prop_assert!((w.t_return - u.t_return - 0.5 * p).abs() < 1e-6 * p);
            prop_assert!((w.kinetic_energy - u.kinetic_energy).abs() < 1e-9);
            prop_assert_eq!(u.branch, w.branch);
        }
    }
}
