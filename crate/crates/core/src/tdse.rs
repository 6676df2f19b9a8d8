//! Split-operator propagation of the length-gauge TDSE, imaginary-time
//! relaxation, and dipole-acceleration recording.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::Spectral;
use crate::grid::{SpatialGrid, TimeSeries, Wavefunction};
use crate::potential::BindingPotential;
use crate::pulse::PulseSpec;

/// Boundary mask `cos^exponent` rising from 0 at the box edge to 1 at `width`
/// inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorber {
    pub width: f64,
    pub exponent: f64,
}

impl Default for Absorber {
    fn default() -> Self {
        Self {
            width: 100.0,
            exponent: 0.125,
        }
    }
}

impl Absorber {
    pub fn mask(&self, grid: &SpatialGrid) -> Vec<f64> {
        let lo = grid.x_min();
        let hi = grid.x_max();
        grid.sample(|x| {
            let d = (x - lo).min(hi - x);
            if d >= self.width {
                1.0
            } else {
                let u = std::f64::consts::FRAC_PI_2 * (self.width - d.max(0.0)) / self.width;
                u.cos().max(0.0).powf(self.exponent)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationSchedule {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    /// Steps between samples of a(t).
    pub record_stride: usize,
    pub absorber: Option<Absorber>,
}

impl PropagationSchedule {
    /// Default schedule for a pulse: `dt = tau0 / 4096` up to the pulse end.
    pub fn for_pulse(pulse: &PulseSpec) -> Self {
        Self {
            dt: pulse.period() / 4096.0,
            t_end: pulse.tau_final(),
            snapshot_stride: 8,
            record_stride: 1,
            absorber: None,
        }
    }

    /// Steps needed to reach `t_end` from `t0`; zero when `t0 >= t_end`.
    pub fn n_steps(&self, t0: f64) -> usize {
        ((self.t_end - t0) / self.dt).round().max(0.0) as usize
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("schedule.dt must be > 0 (got {})", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "schedule.t_end must be >= 0 (got {})",
                self.t_end
            )));
        }
        if self.snapshot_stride == 0 || self.record_stride == 0 {
            return Err(Error::Config("schedule strides must be >= 1".into()));
        }
        if let Some(a) = self.absorber {
            if !(a.width > 0.0 && a.width < grid.length() / 2.0) {
                return Err(Error::Config(format!(
                    "absorber width {} must lie in (0, {})",
                    a.width,
                    grid.length() / 2.0
                )));
            }
            if !(a.exponent > 0.0) {
                return Err(Error::Config("absorber exponent must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Strang-split real-time propagator owning its FFT plans and work buffers.
///
/// One step applies `exp(-i U dt/2) exp(-i k^2 dt/2) exp(-i U dt/2)` with
/// `U = V(x) - x E(t + dt/2)`.
pub struct SplitOperator {
    grid: SpatialGrid,
    spectral: Spectral,
    dt: f64,
    pulse: Option<PulseSpec>,
    x: Vec<f64>,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    gradient: Vec<f64>,
    mask: Option<Vec<f64>>,
}

impl SplitOperator {
    pub fn new<P: BindingPotential + ?Sized>(
        grid: &SpatialGrid,
        potential: &P,
        pulse: Option<&PulseSpec>,
        dt: f64,
        absorber: Option<&Absorber>,
    ) -> Self {
        let spectral = Spectral::new(grid);
        let kinetic = spectral
            .momenta()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -0.5 * k * k * dt))
            .collect();
        let half_potential = grid
            .sample(|x| potential.value(x))
            .into_iter()
            .map(|v| Complex64::from_polar(1.0, -0.5 * v * dt))
            .collect();
        Self {
            grid: *grid,
            spectral,
            dt,
            pulse: pulse.copied(),
            x: grid.points(),
            half_potential,
            kinetic,
            gradient: grid.sample(|x| potential.gradient(x)),
            mask: absorber.map(|a| a.mask(grid)),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn field_at(&self, t: f64) -> f64 {
        self.pulse.map_or(0.0, |p| p.field(t))
    }

    /// Applies `exp(-i (V - x E) dt/2)`. The dipole phase `exp(i x E dt/2)` is
    /// built by complex recurrence and re-seeded every 256 nodes.
    fn apply_half_potential(&self, psi: &mut [Complex64], e: f64) {
        if e == 0.0 {
            psi.iter_mut()
                .zip(&self.half_potential)
                .for_each(|(z, p)| *z *= p);
            return;
        }
        let c = 0.5 * e * self.dt;
        let step = Complex64::from_polar(1.0, c * self.grid.dx());
        for (block, chunk) in psi.chunks_mut(256).enumerate() {
            let j0 = block * 256;
            let mut phase = Complex64::from_polar(1.0, c * self.x[j0]);
            for (i, z) in chunk.iter_mut().enumerate() {
                *z *= self.half_potential[j0 + i] * phase;
                phase *= step;
            }
        }
    }

    /// Advances `psi` (in place) from `t` to `t + dt`.
    pub fn step(&mut self, psi: &mut [Complex64], t: f64) {
        let e = self.field_at(t + 0.5 * self.dt);
        self.apply_half_potential(psi, e);
        self.spectral.forward(psi);
        psi.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        self.spectral.inverse(psi);
        self.apply_half_potential(psi, e);
        if let Some(mask) = &self.mask {
            psi.iter_mut().zip(mask).for_each(|(z, m)| *z *= m);
        }
    }

    /// `a(t) = -<psi| dV/dx |psi>` together with the norm.
    pub fn acceleration_and_norm(&self, psi: &[Complex64]) -> (f64, f64) {
        let (mut a, mut n) = (0.0, 0.0);
        for (z, g) in psi.iter().zip(&self.gradient) {
            let r = z.norm_sqr();
            a += g * r;
            n += r;
        }
        let dx = self.grid.dx();
        (-a * dx, n * dx)
    }
}

/// One split step on an immutable wavefunction.
pub fn split_step<P: BindingPotential + ?Sized>(
    psi: &Wavefunction,
    potential: &P,
    pulse: Option<&PulseSpec>,
    dt: f64,
    absorber: Option<&Absorber>,
) -> Result<Wavefunction> {
    let mut op = SplitOperator::new(psi.grid(), potential, pulse, dt, absorber);
    let mut amps = psi.amplitudes().to_vec();
    op.step(&mut amps, psi.t());
    if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::PropagationDiverged {
            t: psi.t() + dt,
            reason: "non-finite amplitude".into(),
        });
    }
    Wavefunction::new(*psi.grid(), amps, psi.t() + dt)
}

/// Observable histories of a propagation run.
#[derive(Debug, Clone)]
pub struct PropagationRecord {
    /// Dipole acceleration `-<dV/dx>` sampled every `record_stride` steps from t = 0.
    pub accel: TimeSeries,
    /// Laser field at the same instants.
    pub field: TimeSeries,
    /// Norm at the same instants.
    pub norm: TimeSeries,
    pub final_state: Wavefunction,
}

#[derive(Debug, Clone)]
pub struct PropagationOutput {
    pub snapshots: Vec<Wavefunction>,
    pub record: PropagationRecord,
}

/// Propagates from `psi0.t()` to `schedule.t_end`, handing every
/// `snapshot_stride`-th state (including the initial one) to `on_snapshot`.
pub fn propagate_with<P, F>(
    psi0: &Wavefunction,
    schedule: &PropagationSchedule,
    potential: &P,
    pulse: Option<&PulseSpec>,
    mut on_snapshot: F,
) -> Result<PropagationRecord>
where
    P: BindingPotential + ?Sized,
    F: FnMut(&Wavefunction) -> Result<()>,
{
    let grid = *psi0.grid();
    schedule.validate(&grid)?;
    let mut op = SplitOperator::new(&grid, potential, pulse, schedule.dt, schedule.absorber.as_ref());
    let t0 = psi0.t();
    let n_steps = schedule.n_steps(t0);
    let mut amps = psi0.amplitudes().to_vec();

    let capacity = n_steps / schedule.record_stride + 1;
    let mut accel = Vec::with_capacity(capacity);
    let mut field = Vec::with_capacity(capacity);
    let mut norm = Vec::with_capacity(capacity);

    let mut record = |amps: &[Complex64], t: f64, op: &SplitOperator| -> Result<()> {
        let (a, n) = op.acceleration_and_norm(amps);
        if !(a.is_finite() && n.is_finite()) {
            return Err(Error::PropagationDiverged {
                t,
                reason: "non-finite norm or acceleration".into(),
            });
        }
        accel.push(a);
        field.push(op.field_at(t));
        norm.push(n);
        Ok(())
    };

    record(&amps, t0, &op)?;
    on_snapshot(psi0)?;
    for step in 0..n_steps {
        let t = t0 + step as f64 * schedule.dt;
        op.step(&mut amps, t);
        let done = step + 1;
        let t_next = t0 + done as f64 * schedule.dt;
        if done % schedule.record_stride == 0 {
            record(&amps, t_next, &op)?;
        }
        if done % schedule.snapshot_stride == 0 {
            let snap = Wavefunction::new(grid, amps.clone(), t_next)?;
            on_snapshot(&snap)?;
        }
    }
    let sample_dt = schedule.dt * schedule.record_stride as f64;
    // a zero-length run still yields a two-sample series
    if accel.len() < 2 {
        let (a, f, n) = (accel[0], field[0], norm[0]);
        accel.push(a);
        field.push(f);
        norm.push(n);
    }
    let t_final = t0 + n_steps as f64 * schedule.dt;
    Ok(PropagationRecord {
        accel: TimeSeries::new(t0, sample_dt, accel)?,
        field: TimeSeries::new(t0, sample_dt, field)?,
        norm: TimeSeries::new(t0, sample_dt, norm)?,
        final_state: Wavefunction::new(grid, amps, t_final)?,
    })
}

/// Propagates and keeps every snapshot in memory. For long runs on large
/// grids prefer [`propagate_with`] and consume snapshots as they arrive.
pub fn propagate<P: BindingPotential + ?Sized>(
    psi0: &Wavefunction,
    schedule: &PropagationSchedule,
    potential: &P,
    pulse: Option<&PulseSpec>,
) -> Result<PropagationOutput> {
    let mut snapshots = Vec::new();
    let record = propagate_with(psi0, schedule, potential, pulse, |s| {
        snapshots.push(s.clone());
        Ok(())
    })?;
    Ok(PropagationOutput { snapshots, record })
}

/// Field-free energy `<psi|H|psi> / <psi|psi>` with the spectral kinetic term.
pub fn energy<P: BindingPotential + ?Sized>(
    psi: &Wavefunction,
    potential: &P,
    spectral: &mut Spectral,
) -> f64 {
    let amps = psi.amplitudes();
    let mut hat = amps.to_vec();
    spectral.forward(&mut hat);
    let kin: f64 = hat
        .iter()
        .zip(spectral.momenta())
        .map(|(z, k)| 0.5 * k * k * z.norm_sqr())
        .sum::<f64>()
        / amps.len() as f64;
    let grid = psi.grid();
    let pot: f64 = amps
        .iter()
        .enumerate()
        .map(|(j, z)| potential.value(grid.x(j)) * z.norm_sqr())
        .sum();
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    (kin + pot) / norm
}

/// Settings for imaginary-time relaxation.
#[derive(Debug, Clone)]
pub struct RelaxationOptions {
    /// Imaginary time steps, used in order; the last one sets the final accuracy.
    pub steps: Vec<f64>,
    /// Stop when the estimated distance to the converged energy drops below
    /// this on the last stage. The estimate extrapolates the geometric decay
    /// of successive energy changes.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            steps: vec![0.1, 0.02, 0.004],
            tolerance: 1e-13,
            max_iterations: 1_000_000,
        }
    }
}

/// Relaxes `seed` in imaginary time, projecting out `lower` states after every
/// step. Returns the normalized state and its energy.
pub fn relax<P: BindingPotential + ?Sized>(
    seed: &Wavefunction,
    potential: &P,
    lower: &[Wavefunction],
    options: &RelaxationOptions,
) -> Result<(Wavefunction, f64)> {
    let grid = *seed.grid();
    let mut spectral = Spectral::new(&grid);
    let v = grid.sample(|x| potential.value(x));
    let mut psi = seed.clone().normalized()?;
    let mut eps = energy(&psi, potential, &mut spectral);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    for (stage, &tau) in options.steps.iter().enumerate() {
        let half: Vec<f64> = v.iter().map(|v| (-0.5 * v * tau).exp()).collect();
        let kin: Vec<f64> = spectral
            .momenta()
            .iter()
            .map(|k| (-0.5 * k * k * tau).exp())
            .collect();
        let final_stage = stage + 1 == options.steps.len();
        let tol = if final_stage {
            options.tolerance
        } else {
            options.tolerance * 100.0
        };
        loop {
            iterations += 1;
            if iterations > options.max_iterations {
                return Err(Error::Convergence {
                    iterations: options.max_iterations,
                    last_change,
                });
            }
            let mut amps = psi.into_amplitudes();
            amps.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
            spectral.forward(&mut amps);
            amps.iter_mut().zip(&kin).for_each(|(z, k)| *z *= k);
            spectral.inverse(&mut amps);
            amps.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
            psi = Wavefunction::new(grid, amps, 0.0)?;
            for low in lower {
                let c = low.overlap(&psi)?;
                let projected: Vec<Complex64> = psi
                    .amplitudes()
                    .iter()
                    .zip(low.amplitudes())
                    .map(|(p, l)| p - c * l)
                    .collect();
                psi = Wavefunction::new(grid, projected, 0.0)?;
            }
            psi = psi.normalized()?;
            let next = energy(&psi, potential, &mut spectral);
            let prev_change = last_change;
            last_change = (next - eps).abs();
            eps = next;
            if !eps.is_finite() {
                return Err(Error::Convergence {
                    iterations,
                    last_change,
                });
            }
            let ratio = last_change / prev_change;
            let remaining = if prev_change.is_finite() && ratio < 1.0 {
                last_change * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
            // changes at the roundoff level no longer carry a usable ratio
            if remaining < tol || last_change < 1e-15 {
                break;
            }
        }
    }
    Ok((psi.with_time(seed.t()), eps))
}

/// Ground state by imaginary-time relaxation from a unit-width Gaussian at the
/// origin.
pub fn ground_state<P: BindingPotential + ?Sized>(
    grid: &SpatialGrid,
    potential: &P,
) -> Result<(Wavefunction, f64)> {
    ground_state_with(grid, potential, &RelaxationOptions::default())
}

pub fn ground_state_with<P: BindingPotential + ?Sized>(
    grid: &SpatialGrid,
    potential: &P,
    options: &RelaxationOptions,
) -> Result<(Wavefunction, f64)> {
    let seed = Wavefunction::from_fn(*grid, 0.0, |x| Complex64::new((-0.5 * x * x).exp(), 0.0));
    relax(&seed, potential, &[], options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    struct Harmonic;

    impl BindingPotential for Harmonic {
        fn value(&self, x: f64) -> f64 {
            0.5 * x * x
        }
        fn gradient(&self, x: f64) -> f64 {
            x
        }
    }

    struct Free;

    impl BindingPotential for Free {
        fn value(&self, _: f64) -> f64 {
            0.0
        }
        fn gradient(&self, _: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn harmonic_ground_state() {
        let grid = SpatialGrid::new(-20.0, 20.0, 512).unwrap();
        let (psi, eps) = ground_state(&grid, &Harmonic).unwrap();
        assert!((eps - 0.5).abs() < 1e-6, "{eps}");
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_first_excited_state_by_projection() {
        let grid = SpatialGrid::new(-20.0, 20.0, 512).unwrap();
        let (g, _) = ground_state(&grid, &Harmonic).unwrap();
        let seed = Wavefunction::from_fn(grid, 0.0, |x| Complex64::new(x * (-x * x / 2.0).exp() + 0.1 * (-x * x).exp(), 0.0));
        let (_, e1) = relax(&seed, &Harmonic, &[g], &RelaxationOptions::default()).unwrap();
        assert!((e1 - 1.5).abs() < 1e-6, "{e1}");
    }

    #[test]
    fn free_gaussian_spreads_analytically() {
        // |psi|^2 width s(t) = s0 sqrt(1 + (t / (2 s0^2))^2) for psi ~ exp(-x^2/(4 s0^2))
        let grid = SpatialGrid::new(-60.0, 60.0, 1024).unwrap();
        let s0 = 1.0;
        let psi0 = Wavefunction::from_fn(grid, 0.0, |x| {
            Complex64::new((-x * x / (4.0 * s0 * s0)).exp(), 0.0)
        })
        .normalized()
        .unwrap();
        let dt = 0.05;
        let mut psi = psi0;
        for _ in 0..100 {
            psi = split_step(&psi, &Free, None, dt, None).unwrap();
        }
        let t = psi.t();
        let x = grid.points();
        let x2: Vec<f64> = x.iter().map(|x| x * x).collect();
        let width = psi.expectation(&x2).unwrap().sqrt();
        let exact = s0 * (1.0 + (t / (2.0 * s0 * s0)).powi(2)).sqrt();
        assert!((width - exact).abs() < 1e-6, "{width} vs {exact}");
    }

    #[test]
    fn stationary_state_only_gains_phase() {
        let grid = SpatialGrid::new(-100.0, 100.0, 2048).unwrap();
        let (psi0, eps) = ground_state(&grid, &PotentialSpec::SoftcoreLong).unwrap();
        let dt = 0.02;
        let psi1 = split_step(&psi0, &PotentialSpec::SoftcoreLong, None, dt, None).unwrap();
        let ov = psi0.overlap(&psi1).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-10);
        // phase matches exp(-i eps dt) to splitting accuracy
        assert!((ov.arg() + eps * dt).abs() < 1e-6);
    }

    #[test]
    fn zero_length_schedule_yields_two_samples() {
        let grid = SpatialGrid::new(-10.0, 10.0, 64).unwrap();
        let psi = Wavefunction::from_fn(grid, 0.0, |x| Complex64::new((-x * x).exp(), 0.0));
        let sched = PropagationSchedule {
            dt: 0.1,
            t_end: 0.0,
            snapshot_stride: 1,
            record_stride: 1,
            absorber: None,
        };
        let out = propagate(&psi, &sched, &Free, None).unwrap();
        assert_eq!(out.record.accel.len(), 2);
        assert_eq!(out.snapshots.len(), 1);
    }

    #[test]
    fn schedule_validation() {
        let grid = SpatialGrid::new(-10.0, 10.0, 64).unwrap();
        let mut s = PropagationSchedule::for_pulse(&PulseSpec::default());
        assert!(s.validate(&grid).is_ok());
        s.absorber = Some(Absorber {
            width: 10.0,
            exponent: 0.125,
        });
        assert!(s.validate(&grid).is_err());
        s.absorber = None;
        s.record_stride = 0;
        assert!(s.validate(&grid).is_err());
    }

    #[test]
    fn absorber_mask_profile() {
        let grid = SpatialGrid::new(-100.0, 100.0, 256).unwrap();
        let m = Absorber {
            width: 20.0,
            exponent: 0.125,
        }
        .mask(&grid);
        assert!(m[0] < 0.01);
        assert_eq!(m[128], 1.0);
        assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn diverged_state_is_reported() {
        let grid = SpatialGrid::new(-10.0, 10.0, 64).unwrap();
        let mut amps = vec![Complex64::new(1.0, 0.0); 64];
        amps[3] = Complex64::new(f64::NAN, 0.0);
        let psi = Wavefunction::new(grid, amps, 0.0).unwrap();
        assert!(matches!(
            split_step(&psi, &Free, None, 0.1, None),
            Err(Error::PropagationDiverged { .. })
        ));
    }
}
