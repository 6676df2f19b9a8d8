//! Classical electron ensembles in a monochromatic field: closed-form
//! field-only motion, RK4 motion with the binding potential, return-event
//! detection and arch curves (return time versus harmonic order).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{TimeSeries, Trajectory, TrajectoryKind};
use crate::potential::BindingPotential;
use crate::pulse::PulseSpec;

/// `E(t) = e0 sin(omega t)` without envelope. `e0 = 0` is allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub e0: f64,
    pub omega: f64,
}

impl Carrier {
    pub fn field(&self, t: f64) -> f64 {
        self.e0 * (self.omega * t).sin()
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

impl From<&PulseSpec> for Carrier {
    fn from(p: &PulseSpec) -> Self {
        Self {
            e0: p.e0,
            omega: p.omega,
        }
    }
}

/// Closed-form field-only motion from rest at the origin: returns `(x, v)`.
pub fn free_trajectory(t0: f64, carrier: &Carrier, t: f64) -> Result<(f64, f64)> {
    free_motion(t0, 0.0, 0.0, carrier, t)
}

/// Closed-form field-only motion from `(x0, v0)` at `t0`.
pub fn free_motion(t0: f64, x0: f64, v0: f64, carrier: &Carrier, t: f64) -> Result<(f64, f64)> {
    if t < t0 {
        return Err(Error::Contract(format!("t = {t} precedes release t0 = {t0}")));
    }
    let Carrier { e0, omega: w } = *carrier;
    let (s0, c0) = (w * t0).sin_cos();
    let (s, c) = (w * t).sin_cos();
    let v = e0 / w * (c0 - c) + v0;
    let x = e0 / (w * w) * (w * (t - t0) * c0 - s + s0) + v0 * (t - t0) + x0;
    Ok((x, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initialization {
    /// `x0 = 0`, `v0 = sign * sqrt(-2 V(0))`.
    EscapeVelocity { sign: f64 },
    /// `v0 = 0` at the outer point where the field balances the binding force.
    TurningPoint,
}

/// Initial condition of one classical electron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseSpec {
    pub t0: f64,
    pub x0: f64,
    pub v0: f64,
    pub with_potential: bool,
}

impl ReleaseSpec {
    pub fn field_only(t0: f64) -> Self {
        Self {
            t0,
            x0: 0.0,
            v0: 0.0,
            with_potential: false,
        }
    }

    pub fn escape<P: BindingPotential + ?Sized>(t0: f64, potential: &P, sign: f64) -> Self {
        let v = (-2.0 * potential.value(0.0)).max(0.0).sqrt();
        Self {
            t0,
            x0: 0.0,
            v0: sign.signum() * v,
            with_potential: true,
        }
    }

    /// Release at rest on the outer side of the barrier where
    /// `E(t0) = dV/dx`; `None` when the field vanishes or no balance point
    /// is found inside `|x| < 200`.
    pub fn turning_point<P: BindingPotential + ?Sized>(
        t0: f64,
        carrier: &Carrier,
        potential: &P,
    ) -> Option<Self> {
        let e = carrier.field(t0);
        if e == 0.0 {
            return None;
        }
        let side = e.signum();
        // the binding force peaks at |x| = 1/sqrt(2) for the soft core; march
        // outwards from there to the first sign change of dV/dx - E
        let g = |r: f64| potential.gradient(side * r) * side - e.abs();
        let mut a = std::f64::consts::FRAC_1_SQRT_2;
        if g(a) <= 0.0 {
            return None;
        }
        let mut b = a;
        while g(b) > 0.0 {
            a = b;
            b *= 1.25;
            if b > 200.0 {
                return None;
            }
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if g(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Some(Self {
            t0,
            x0: side * 0.5 * (a + b),
            v0: 0.0,
            with_potential: true,
        })
    }

    pub fn initialize<P: BindingPotential + ?Sized>(
        t0: f64,
        carrier: &Carrier,
        potential: &P,
        init: Initialization,
    ) -> Option<Self> {
        match init {
            Initialization::EscapeVelocity { sign } => Some(Self::escape(t0, potential, sign)),
            Initialization::TurningPoint => Self::turning_point(t0, carrier, potential),
        }
    }
}

/// Classical RK4 for `x' = v`, `v' = E(t) - dV/dx`, calling `observe(t, x, v)`
/// after every step; stops early when `observe` returns false.
fn integrate<P, F>(
    release: &ReleaseSpec,
    carrier: &Carrier,
    potential: Option<&P>,
    dt: f64,
    n_steps: usize,
    mut observe: F,
) -> Result<()>
where
    P: BindingPotential + ?Sized,
    F: FnMut(f64, f64, f64) -> bool,
{
    let force = |t: f64, x: f64| -> f64 {
        carrier.field(t) - potential.map_or(0.0, |p| p.gradient(x))
    };
    let (mut x, mut v) = (release.x0, release.v0);
    for n in 0..n_steps {
        let t = release.t0 + n as f64 * dt;
        let k1x = v;
        let k1v = force(t, x);
        let k2x = v + 0.5 * dt * k1v;
        let k2v = force(t + 0.5 * dt, x + 0.5 * dt * k1x);
        let k3x = v + 0.5 * dt * k2v;
        let k3v = force(t + 0.5 * dt, x + 0.5 * dt * k2x);
        let k4x = v + dt * k3v;
        let k4v = force(t + dt, x + dt * k3x);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let t_next = release.t0 + (n + 1) as f64 * dt;
        if !(x.is_finite() && v.is_finite()) {
            return Err(Error::IntegrationDiverged { t: t_next });
        }
        if !observe(t_next, x, v) {
            break;
        }
    }
    Ok(())
}

/// RK4 trajectory from `release` to `t_end`, sampled every step. With
/// `potential = None` the electron feels only the carrier.
pub fn potential_trajectory<P: BindingPotential + ?Sized>(
    release: &ReleaseSpec,
    carrier: &Carrier,
    potential: Option<&P>,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt must be > 0 (got {dt})")));
    }
    let n_steps = ((t_end - release.t0) / dt).round().max(1.0) as usize;
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut vs = Vec::with_capacity(n_steps + 1);
    xs.push(release.x0);
    vs.push(release.v0);
    integrate(release, carrier, potential, dt, n_steps, |_, x, v| {
        xs.push(x);
        vs.push(v);
        true
    })?;
    let kind = if potential.is_some() {
        TrajectoryKind::ClassicalPotential
    } else {
        TrajectoryKind::ClassicalFree
    };
    Trajectory::new(
        kind,
        release.x0,
        release.v0,
        Some(release.t0),
        TimeSeries::new(release.t0, dt, xs)?,
        TimeSeries::new(release.t0, dt, vs)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// First return before the second field zero after release.
    Short,
    /// First return at or after that zero.
    Long,
    /// Any subsequent return.
    Later,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::Short => "short",
            Branch::Long => "long",
            Branch::Later => "later",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnEvent {
    pub t_return: f64,
    pub kinetic_energy: f64,
    /// `kinetic_energy + |eps0|`.
    pub harmonic_energy: f64,
    pub branch: Branch,
}

/// Return detection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnDetector {
    /// The electron must first reach `|x| > x_exit` before crossings count.
    pub x_exit: f64,
    /// Carrier period; field zeros sit at multiples of half of it.
    pub period: f64,
}

impl ReturnDetector {
    pub const DEFAULT_X_EXIT: f64 = 5.0;

    pub fn new(x_exit: f64, period: f64) -> Self {
        Self { x_exit, period }
    }

    /// Second field zero after `t0` for `E ~ sin(omega t)`.
    fn branch_boundary(&self, t0: f64) -> f64 {
        let half = 0.5 * self.period;
        ((t0 / half).floor() + 2.0) * half
    }
}

/// Incremental zero-crossing detector shared by stored and on-the-fly
/// trajectories.
struct CrossingTracker {
    detector: ReturnDetector,
    epsilon0: f64,
    boundary: f64,
    left_core: bool,
    prev: Option<(f64, f64, f64)>,
    events: Vec<ReturnEvent>,
}

impl CrossingTracker {
    fn new(detector: ReturnDetector, epsilon0: f64, t0: f64) -> Self {
        Self {
            detector,
            epsilon0,
            boundary: detector.branch_boundary(t0),
            left_core: false,
            prev: None,
            events: Vec::new(),
        }
    }

    fn observe(&mut self, t: f64, x: f64, v: f64) {
        if let Some((tp, xp, vp)) = self.prev {
            if self.left_core && (xp < 0.0) != (x < 0.0) {
                let s = xp / (xp - x);
                let t_return = tp + s * (t - tp);
                let v_return = vp + s * (v - vp);
                let kinetic_energy = 0.5 * v_return * v_return;
                let branch = if !self.events.is_empty() {
                    Branch::Later
                } else if t_return < self.boundary {
                    Branch::Short
                } else {
                    Branch::Long
                };
                self.events.push(ReturnEvent {
                    t_return,
                    kinetic_energy,
                    harmonic_energy: kinetic_energy + self.epsilon0.abs(),
                    branch,
                });
                // the next return needs a fresh excursion beyond x_exit
                self.left_core = false;
            }
        }
        if x.abs() > self.detector.x_exit {
            self.left_core = true;
        }
        self.prev = Some((t, x, v));
    }
}

/// Zero crossings of `x(t)`, each preceded by an excursion beyond `x_exit`.
pub fn return_events(
    traj: &Trajectory,
    epsilon0: f64,
    detector: &ReturnDetector,
) -> Vec<ReturnEvent> {
    let t0 = traj.t_release.unwrap_or(traj.positions.t0());
    let mut tracker = CrossingTracker::new(*detector, epsilon0, t0);
    for ((t, &x), &v) in traj.positions.iter().zip(traj.velocities.values()) {
        tracker.observe(t, x, v);
    }
    tracker.events
}

/// One row of an arch table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchPoint {
    pub t0: f64,
    pub t_return: f64,
    pub harmonic_order: f64,
    pub branch: Branch,
    /// +1 or -1 for escape-velocity releases, 0 otherwise.
    pub v0_sign: i8,
    pub with_potential: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchScan {
    /// Release times; the scan covers `[start, start + span)` uniformly.
    pub start: f64,
    pub span: f64,
    pub n_points: usize,
    /// Integration step for RK4 and sampling step for the closed form.
    pub dt: f64,
    /// Excursion cap in units of the carrier period.
    pub max_excursion_cycles: f64,
    pub x_exit: f64,
    pub initialization: Initialization,
}

impl ArchScan {
    /// One full cycle at 2000 releases per half-cycle, 1.6-cycle excursions,
    /// `dt = tau0 / 8192`. Escape-velocity releases cross the core at full
    /// speed, where a coarser step loses energy conservation at the 1e-8 level.
    pub fn for_carrier(carrier: &Carrier) -> Self {
        let period = carrier.period();
        Self {
            start: 0.0,
            span: period,
            n_points: 4000,
            dt: period / 8192.0,
            max_excursion_cycles: 1.6,
            x_exit: ReturnDetector::DEFAULT_X_EXIT,
            initialization: Initialization::EscapeVelocity { sign: 1.0 },
        }
    }

    pub fn release_times(&self) -> Vec<f64> {
        (0..self.n_points)
            .map(|i| self.start + self.span * i as f64 / self.n_points as f64)
            .collect()
    }
}

/// Arch curves: harmonic order `(v^2/2 + |eps0|) / omega` against return time
/// (not reduced modulo the period) for every release in the scan. With a
/// potential and escape-velocity initialization both `v0` signs are emitted.
pub fn arch_curves<P: BindingPotential + ?Sized>(
    carrier: &Carrier,
    potential: Option<&P>,
    epsilon0: f64,
    scan: &ArchScan,
) -> Result<Vec<ArchPoint>> {
    let period = carrier.period();
    let detector = ReturnDetector::new(scan.x_exit, period);
    let n_steps = (scan.max_excursion_cycles * period / scan.dt).ceil() as usize;
    let t0s = scan.release_times();

    let families: Vec<(i8, Initialization)> = match (potential.is_some(), scan.initialization) {
        (false, _) => vec![(0, Initialization::EscapeVelocity { sign: 0.0 })],
        (true, Initialization::EscapeVelocity { .. }) => vec![
            (1, Initialization::EscapeVelocity { sign: 1.0 }),
            (-1, Initialization::EscapeVelocity { sign: -1.0 }),
        ],
        (true, Initialization::TurningPoint) => vec![(0, Initialization::TurningPoint)],
    };

    let mut table = Vec::new();
    for (sign, init) in families {
        let rows: Vec<Result<Vec<ArchPoint>>> = t0s
            .par_iter()
            .map(|&t0| {
                let release = match potential {
                    None => Some(ReleaseSpec::field_only(t0)),
                    Some(p) => ReleaseSpec::initialize(t0, carrier, p, init),
                };
                let Some(release) = release else {
                    return Ok(Vec::new());
                };
                let mut tracker = CrossingTracker::new(detector, epsilon0, t0);
                tracker.observe(t0, release.x0, release.v0);
                match potential {
                    None => {
                        for n in 1..=n_steps {
                            let t = t0 + n as f64 * scan.dt;
                            let (x, v) = free_motion(t0, release.x0, release.v0, carrier, t)?;
                            tracker.observe(t, x, v);
                        }
                        // refine crossings on the closed form
                        for ev in &mut tracker.events {
                            let t_r = refine_free_root(t0, carrier, ev.t_return, scan.dt);
                            let (_, v) = free_motion(t0, 0.0, 0.0, carrier, t_r)?;
                            ev.t_return = t_r;
                            ev.kinetic_energy = 0.5 * v * v;
                            ev.harmonic_energy = ev.kinetic_energy + epsilon0.abs();
                        }
                    }
                    Some(p) => {
                        integrate(&release, carrier, Some(p), scan.dt, n_steps, |t, x, v| {
                            tracker.observe(t, x, v);
                            true
                        })?;
                    }
                }
                Ok(tracker
                    .events
                    .into_iter()
                    .map(|ev| ArchPoint {
                        t0,
                        t_return: ev.t_return,
                        harmonic_order: ev.harmonic_energy / carrier.omega,
                        branch: ev.branch,
                        v0_sign: sign,
                        with_potential: potential.is_some(),
                    })
                    .collect())
            })
            .collect();
        for r in rows {
            table.extend(r?);
        }
    }
    Ok(table)
}

/// Bisection on the closed-form position around a bracketed crossing.
fn refine_free_root(t0: f64, carrier: &Carrier, guess: f64, dt: f64) -> f64 {
    let x = |t: f64| free_motion(t0, 0.0, 0.0, carrier, t).map(|p| p.0).unwrap_or(0.0);
    let (mut a, mut b) = ((guess - dt).max(t0), guess + dt);
    let (mut fa, fb) = (x(a), x(b));
    if fa == 0.0 {
        return a;
    }
    if fa.signum() == fb.signum() {
        return guess;
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = x(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// CSV with header `t0,t_return,harmonic_order,branch,v0_sign,with_potential`.
pub fn arch_table_csv(table: &[ArchPoint]) -> String {
    let mut s = String::from("t0,t_return,harmonic_order,branch,v0_sign,with_potential\n");
    for p in table {
        s.push_str(&format!(
            "{:.10e},{:.10e},{:.8},{},{},{}\n",
            p.t0,
            p.t_return,
            p.harmonic_order,
            p.branch.label(),
            p.v0_sign,
            p.with_potential
        ));
    }
    s
}
