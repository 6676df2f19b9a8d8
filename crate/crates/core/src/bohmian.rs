//! Bohmian velocity fields, trajectory integration and the quantum potential.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::Spectral;
use crate::grid::{SpatialGrid, TimeSeries, Trajectory, TrajectoryKind, Wavefunction};

pub const DEFAULT_RHO_FLOOR: f64 = 1e-12;

/// Guidance velocity `J / rho` on the grid nodes at one instant.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: SpatialGrid,
    t: f64,
    v: Vec<f64>,
    rho: Vec<f64>,
    rho_floor: f64,
}

impl VelocityField {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_floor(&self) -> f64 {
        self.rho_floor
    }

    /// Four-point cubic Lagrange interpolation in `x`; `None` outside the
    /// span where the stencil fits.
    pub fn at(&self, x: f64) -> Option<f64> {
        cubic_interpolate(&self.grid, &self.v, x)
    }
}

fn cubic_interpolate(grid: &SpatialGrid, f: &[f64], x: f64) -> Option<f64> {
    let s = (x - grid.x_min()) / grid.dx();
    let j = s.floor();
    if !(j >= 1.0 && (j as usize) + 2 < f.len()) {
        return None;
    }
    let j = j as usize;
    let u = s - j as f64;
    let (fm, f0, f1, f2) = (f[j - 1], f[j], f[j + 1], f[j + 2]);
    // Lagrange basis on nodes -1, 0, 1, 2
    let wm = -u * (u - 1.0) * (u - 2.0) / 6.0;
    let w0 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    let w1 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    let w2 = (u + 1.0) * u * (u - 1.0) / 6.0;
    Some(wm * fm + w0 * f0 + w1 * f1 + w2 * f2)
}

/// Replaces values on nodes with `rho < floor` by linear interpolation between
/// the nearest valid neighbours. Returns the number of replaced nodes.
fn regularize(values: &mut [f64], rho: &[f64], floor: f64) -> usize {
    let valid: Vec<usize> = (0..rho.len()).filter(|&j| rho[j] >= floor).collect();
    let replaced = rho.len() - valid.len();
    if valid.is_empty() || replaced == 0 {
        return replaced;
    }
    let first = valid[0];
    let last = *valid.last().unwrap();
    for j in 0..first {
        values[j] = values[first];
    }
    for j in last + 1..values.len() {
        values[j] = values[last];
    }
    for w in valid.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a + 1 {
            let (va, vb) = (values[a], values[b]);
            for (j, slot) in values.iter_mut().enumerate().take(b).skip(a + 1) {
                let u = (j - a) as f64 / (b - a) as f64;
                *slot = va + u * (vb - va);
            }
        }
    }
    replaced
}

/// Fails when nodes under the floor carry more than half of the probability.
/// A localized state on a large box leaves most nodes under the floor while
/// the flow stays well defined, so the test weighs nodes by density.
fn check_degenerate(rho: &[f64], floor: f64) -> Result<()> {
    let total: f64 = rho.iter().sum();
    let below: f64 = rho.iter().filter(|&&r| r < floor).sum();
    if !(total > 0.0) || 2.0 * below > total || rho.iter().all(|&r| r < floor) {
        let frac = if total > 0.0 { below / total } else { 1.0 };
        return Err(Error::DegenerateState {
            fraction: 100.0 * frac,
        });
    }
    Ok(())
}

/// `v = Im(psi* dpsi/dx) / |psi|^2` with a spectral derivative.
pub fn velocity_field(
    psi: &Wavefunction,
    rho_floor: f64,
    spectral: &mut Spectral,
) -> Result<VelocityField> {
    let amps = psi.amplitudes();
    // real and imaginary parts differentiated separately keep v exactly zero
    // for a real state
    let re: Vec<f64> = amps.iter().map(|z| z.re).collect();
    let im: Vec<f64> = amps.iter().map(|z| z.im).collect();
    let d_re = spectral.derivative_real(&re, 1);
    let d_im = spectral.derivative_real(&im, 1);
    let rho: Vec<f64> = amps.iter().map(|z| z.norm_sqr()).collect();
    let mut v: Vec<f64> = (0..amps.len())
        .map(|j| {
            if rho[j] >= rho_floor {
                (re[j] * d_im[j] - im[j] * d_re[j]) / rho[j]
            } else {
                0.0
            }
        })
        .collect();
    check_degenerate(&rho, rho_floor)?;
    regularize(&mut v, &rho, rho_floor);
    Ok(VelocityField {
        grid: *psi.grid(),
        t: psi.t(),
        v,
        rho,
        rho_floor,
    })
}

/// `Q = -1/2 (d^2 sqrt(rho)/dx^2) / sqrt(rho)`.
pub fn quantum_potential(
    psi: &Wavefunction,
    rho_floor: f64,
    spectral: &mut Spectral,
) -> Result<Vec<f64>> {
    let rho = psi.density();
    let amp: Vec<f64> = rho.iter().map(|r| r.sqrt()).collect();
    let d2 = spectral.derivative_real(&amp, 2);
    let mut q: Vec<f64> = amp
        .iter()
        .zip(&d2)
        .zip(&rho)
        .map(|((a, d2), r)| if *r >= rho_floor { -0.5 * d2 / a } else { 0.0 })
        .collect();
    check_degenerate(&rho, rho_floor)?;
    regularize(&mut q, &rho, rho_floor);
    Ok(q)
}

#[derive(Debug, Clone)]
struct Walker {
    x0: f64,
    x: f64,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    exited: bool,
}

/// Integrates Bohmian trajectories while snapshots stream in.
///
/// Between two consecutive snapshots the velocity is cubic in `x` and linear
/// in `t`; each interval is one classical RK4 step.
pub struct BohmianEnsemble {
    rho_floor: f64,
    spectral: Option<Spectral>,
    walkers: Vec<Walker>,
    previous: Option<VelocityField>,
    t0: Option<f64>,
    dt: Option<f64>,
}

impl BohmianEnsemble {
    pub fn new(x0s: &[f64], rho_floor: f64) -> Self {
        let walkers = x0s
            .iter()
            .map(|&x0| Walker {
                x0,
                x: x0,
                positions: Vec::new(),
                velocities: Vec::new(),
                exited: false,
            })
            .collect();
        Self {
            rho_floor,
            spectral: None,
            walkers,
            previous: None,
            t0: None,
            dt: None,
        }
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    /// Current positions (the last recorded sample of each trajectory).
    pub fn positions(&self) -> Vec<f64> {
        self.walkers.iter().map(|w| w.x).collect()
    }

    pub fn push(&mut self, psi: &Wavefunction) -> Result<()> {
        let spectral = match &mut self.spectral {
            Some(s) if s.grid() == psi.grid() => s,
            Some(_) => {
                return Err(Error::Contract("snapshots must share one grid".into()));
            }
            None => self.spectral.insert(Spectral::new(psi.grid())),
        };
        let field = velocity_field(psi, self.rho_floor, spectral)?;
        match self.previous.take() {
            None => {
                for w in &mut self.walkers {
                    let v = field.at(w.x).ok_or_else(|| {
                        Error::Contract(format!("initial position {} outside the grid", w.x0))
                    })?;
                    w.positions.push(w.x);
                    w.velocities.push(v);
                }
                self.t0 = Some(field.t());
            }
            Some(prev) => {
                let h = field.t() - prev.t();
                match self.dt {
                    None => self.dt = Some(h),
                    Some(dt) if (h - dt).abs() > 1e-9 * dt.abs().max(1.0) => {
                        return Err(Error::Contract(format!(
                            "snapshots must be uniformly spaced (got {h} after {dt})"
                        )));
                    }
                    _ => {}
                }
                if !(h > 0.0) {
                    return Err(Error::Contract("snapshots must advance in time".into()));
                }
                let (a, b) = (&prev, &field);
                self.walkers
                    .par_iter_mut()
                    .filter(|w| !w.exited)
                    .for_each(|w| match rk4_step(a, b, w.x, h) {
                        Some(x) => match b.at(x) {
                            Some(v) => {
                                w.x = x;
                                w.positions.push(x);
                                w.velocities.push(v);
                            }
                            None => w.exited = true,
                        },
                        None => w.exited = true,
                    });
            }
        }
        self.previous = Some(field);
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<Trajectory>> {
        let t0 = self
            .t0
            .ok_or_else(|| Error::Contract("no snapshots were supplied".into()))?;
        let dt = self
            .dt
            .ok_or_else(|| Error::Contract("at least two snapshots are required".into()))?;
        self.walkers
            .into_iter()
            .map(|w| {
                let (mut p, mut v) = (w.positions, w.velocities);
                if p.len() < 2 {
                    // left the grid during the first interval
                    p.push(p[0]);
                    v.push(v[0]);
                }
                let mut traj = Trajectory::new(
                    TrajectoryKind::Bohmian,
                    w.x0,
                    v[0],
                    None,
                    TimeSeries::new(t0, dt, p)?,
                    TimeSeries::new(t0, dt, v)?,
                )?;
                traj.exited = w.exited;
                Ok(traj)
            })
            .collect()
    }
}

fn velocity_between(a: &VelocityField, b: &VelocityField, x: f64, s: f64) -> Option<f64> {
    let va = a.at(x)?;
    let vb = b.at(x)?;
    Some(va + s * (vb - va))
}

fn rk4_step(a: &VelocityField, b: &VelocityField, x: f64, h: f64) -> Option<f64> {
    let k1 = velocity_between(a, b, x, 0.0)?;
    let k2 = velocity_between(a, b, x + 0.5 * h * k1, 0.5)?;
    let k3 = velocity_between(a, b, x + 0.5 * h * k2, 0.5)?;
    let k4 = velocity_between(a, b, x + h * k3, 1.0)?;
    let x_new = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x_new.is_finite().then_some(x_new)
}

/// Integrates one trajectory per `x0` through an in-memory snapshot sequence.
pub fn integrate_trajectories(
    snapshots: &[Wavefunction],
    x0s: &[f64],
    rho_floor: f64,
) -> Result<Vec<Trajectory>> {
    let mut ensemble = BohmianEnsemble::new(x0s, rho_floor);
    for s in snapshots {
        ensemble.push(s)?;
    }
    ensemble.finish()
}

/// Phase-gradient velocity: eighth-order central difference of the phase of
/// `psi`. An independent route to [`velocity_field`], valid where `psi` has
/// no nodes and the phase changes by less than `pi` per grid step; elsewhere
/// the value is not meaningful.
///
/// Phase differences are taken between neighbours as `arg(psi_{j+1} psi_j*)`,
/// so no global unwrapping is needed and the stencil wraps periodically.
pub fn phase_gradient_velocity(psi: &Wavefunction) -> Vec<f64> {
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let amps = psi.amplitudes();
    let n = amps.len();
    let dx = psi.grid().dx();
    // step[j] = S(j+1) - S(j)
    let step: Vec<f64> = (0..n).map(|j| (amps[(j + 1) % n] * amps[j].conj()).arg()).collect();
    (0..n)
        .map(|j| {
            let mut span = 0.0;
            let mut acc = 0.0;
            for (m, c) in C.iter().enumerate() {
                // S(j+m+1) - S(j-m-1)
                span += step[(j + m) % n] + step[(j + n - m - 1) % n];
                acc += c * span;
            }
            acc / dx
        })
        .collect()
}

/// Cumulative probability at the cell edges `x_min + (j - 1/2) dx`, each node
/// carrying `rho_j dx` spread uniformly over its cell.
fn cell_cdf(psi: &Wavefunction) -> (f64, Vec<f64>) {
    let dx = psi.grid().dx();
    let mut cdf = Vec::with_capacity(psi.grid().len() + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for z in psi.amplitudes() {
        acc += z.norm_sqr() * dx;
        cdf.push(acc);
    }
    (acc, cdf)
}

fn invert_cdf(grid: &SpatialGrid, cdf: &[f64], target: f64) -> f64 {
    let j = cdf.partition_point(|&c| c < target).clamp(1, cdf.len() - 1);
    let (lo, hi) = (cdf[j - 1], cdf[j]);
    let u = if hi > lo { (target - lo) / (hi - lo) } else { 0.5 };
    grid.x(j - 1) - 0.5 * grid.dx() + u * grid.dx()
}

/// `n` positions distributed as `|psi|^2`: one draw per probability stratum
/// `[i/n, (i+1)/n)`, jittered inside the stratum by a seeded generator.
/// Returned in increasing order.
pub fn sample_density(psi: &Wavefunction, n: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let (total, cdf) = cell_cdf(psi);
    if !(total > 0.0) {
        return Err(Error::DegenerateState { fraction: 100.0 });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let u = (i as f64 + rng.gen::<f64>()) / n as f64;
            invert_cdf(psi.grid(), &cdf, u * total)
        })
        .collect())
}

/// L1 distance between the histogram of `positions` and the probability of
/// `|psi|^2` in `bins` equal bins spanning the 0.5 % to 99.5 % quantiles of
/// the density. Both tails outside the span count as one extra bin each.
pub fn histogram_l1(psi: &Wavefunction, positions: &[f64], bins: usize) -> Result<f64> {
    let (total, cdf) = cell_cdf(psi);
    if !(total > 0.0) || bins == 0 || positions.is_empty() {
        return Err(Error::Contract("histogram needs a non-empty density, bins and samples".into()));
    }
    let grid = psi.grid();
    let lo = invert_cdf(grid, &cdf, 0.005 * total);
    let hi = invert_cdf(grid, &cdf, 0.995 * total);
    let width = (hi - lo) / bins as f64;
    // probability below an arbitrary x from the piecewise-linear cdf
    let below = |x: f64| -> f64 {
        let s = (x - (grid.x_min() - 0.5 * grid.dx())) / grid.dx();
        if s <= 0.0 {
            return 0.0;
        }
        let j = s.floor() as usize;
        if j >= cdf.len() - 1 {
            return total;
        }
        cdf[j] + (s - j as f64) * (cdf[j + 1] - cdf[j])
    };
    let mut expected = Vec::with_capacity(bins + 2);
    expected.push(below(lo) / total);
    for b in 0..bins {
        let a = lo + b as f64 * width;
        expected.push((below(a + width) - below(a)) / total);
    }
    expected.push((total - below(hi)) / total);

    let mut counts = vec![0usize; bins + 2];
    for &x in positions {
        let slot = if x < lo {
            0
        } else if x >= hi {
            bins + 1
        } else {
            1 + (((x - lo) / width) as usize).min(bins - 1)
        };
        counts[slot] += 1;
    }
    let n = positions.len() as f64;
    Ok(counts
        .iter()
        .zip(&expected)
        .map(|(&c, &p)| (c as f64 / n - p).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(-40.0, 40.0, 1024).unwrap()
    }

    #[test]
    fn plane_wave_velocity() {
        let g = SpatialGrid::new(0.0, 2.0 * std::f64::consts::PI * 8.0, 256).unwrap();
        let psi = Wavefunction::from_fn(g, 0.0, |x| Complex64::from_polar(1.0, 0.5 * x));
        let mut sp = Spectral::new(&g);
        let f = velocity_field(&psi, DEFAULT_RHO_FLOOR, &mut sp).unwrap();
        assert!(f.velocities().iter().all(|v| (v - 0.5).abs() < 1e-10));
        let q = quantum_potential(&psi, DEFAULT_RHO_FLOOR, &mut sp).unwrap();
        assert!(q.iter().all(|q| q.abs() < 1e-10));
    }

    #[test]
    fn real_state_has_zero_velocity() {
        let g = grid();
        let psi = Wavefunction::from_fn(g, 0.0, |x| Complex64::new((-x * x / 50.0).exp(), 0.0));
        let mut sp = Spectral::new(&g);
        let f = velocity_field(&psi, DEFAULT_RHO_FLOOR, &mut sp).unwrap();
        assert!(f.velocities().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn boosted_gaussian_velocity() {
        let g = grid();
        let psi = Wavefunction::from_fn(g, 0.0, |x| {
            Complex64::from_polar((-x * x / 4.0).exp(), 1.3 * x)
        });
        let mut sp = Spectral::new(&g);
        let f = velocity_field(&psi, DEFAULT_RHO_FLOOR, &mut sp).unwrap();
        for (v, r) in f.velocities().iter().zip(f.density()) {
            if *r > 1e-8 {
                assert!((v - 1.3).abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn gaussian_quantum_potential() {
        // rho ~ exp(-x^2 / (2 s^2)) => Q = 1/(4 s^2) - x^2 / (8 s^4)
        let g = grid();
        let s: f64 = 1.0;
        let psi = Wavefunction::from_fn(g, 0.0, |x| Complex64::new((-x * x / (4.0 * s * s)).exp(), 0.0));
        let mut sp = Spectral::new(&g);
        let q = quantum_potential(&psi, DEFAULT_RHO_FLOOR, &mut sp).unwrap();
        let centre = g.len() / 2;
        assert_eq!(g.x(centre), 0.0);
        assert!((q[centre] - 0.25).abs() < 1e-10);
        let x_root = s * 2f64.sqrt();
        let exact = |x: f64| 0.25 / (s * s) - x * x / (8.0 * s.powi(4));
        assert!(exact(x_root).abs() < 1e-15);
        let j = ((x_root - g.x_min()) / g.dx()).round() as usize;
        assert!((q[j] - exact(g.x(j))).abs() < 1e-8);
    }

    #[test]
    fn floor_regularization_fills_gaps() {
        let mut v = vec![0.0, 1.0, 99.0, 99.0, 4.0, 99.0];
        let rho = vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(regularize(&mut v, &rho, 0.5), 3);
        assert_eq!(v, vec![0.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn vanishing_state_is_degenerate() {
        let g = grid();
        let mut sp = Spectral::new(&g);
        let faint = Wavefunction::from_fn(g, 0.0, |x| Complex64::new(1e-7 * (-0.01 * x * x).exp(), 0.0));
        assert!(matches!(
            velocity_field(&faint, DEFAULT_RHO_FLOOR, &mut sp),
            Err(Error::DegenerateState { .. })
        ));
        let zero = Wavefunction::from_fn(g, 0.0, |_| Complex64::default());
        assert!(matches!(
            velocity_field(&zero, DEFAULT_RHO_FLOOR, &mut sp),
            Err(Error::DegenerateState { .. })
        ));
        // localized but healthy: most nodes under the floor, almost no probability there
        let local = Wavefunction::from_fn(g, 0.0, |x| Complex64::new((-x * x).exp(), 0.0));
        assert!(velocity_field(&local, DEFAULT_RHO_FLOOR, &mut sp).is_ok());
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let g = SpatialGrid::new(-2.0, 2.0, 16).unwrap();
        let f = g.sample(|x| x * x * x - 2.0 * x + 1.0);
        let x = 0.37;
        let v = cubic_interpolate(&g, &f, x).unwrap();
        assert!((v - (x * x * x - 2.0 * x + 1.0)).abs() < 1e-12);
        assert!(cubic_interpolate(&g, &f, -1.99).is_none());
        assert!(cubic_interpolate(&g, &f, 1.9).is_none());
    }

    #[test]
    fn uniform_drift_trajectories() {
        // a plane-wave packet wide enough that v = k everywhere near the walkers
        let g = grid();
        let k = 5.0 * g.dk();
        let snaps: Vec<Wavefunction> = (0..6)
            .map(|i| {
                let t = 0.5 * i as f64;
                Wavefunction::from_fn(g, t, move |x| Complex64::from_polar(1.0, k * x - 0.5 * k * k * t))
            })
            .collect();
        let trajs = integrate_trajectories(&snaps, &[-1.0, 0.0, 2.0], DEFAULT_RHO_FLOOR).unwrap();
        for tr in &trajs {
            assert_eq!(tr.len(), 6);
            let last = *tr.positions.values().last().unwrap();
            assert!((last - (tr.x0 + k * 2.5)).abs() < 1e-9);
            assert!(!tr.exited);
        }
    }

    #[test]
    fn nonuniform_snapshots_rejected() {
        let g = grid();
        let mk = |t: f64| Wavefunction::from_fn(g, t, |x| Complex64::new((-x * x).exp(), 0.0));
        let snaps = vec![mk(0.0), mk(1.0), mk(2.5)];
        assert!(matches!(
            integrate_trajectories(&snaps, &[0.0], DEFAULT_RHO_FLOOR),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn exit_flag_set_when_leaving_grid() {
        let g = SpatialGrid::new(-10.0, 10.0, 256).unwrap();
        let k = 10.0 * g.dk();
        let snaps: Vec<Wavefunction> = (0..20)
            .map(|i| Wavefunction::from_fn(g, i as f64 * 0.5, move |x| Complex64::from_polar(1.0, k * x)))
            .collect();
        let trajs = integrate_trajectories(&snaps, &[5.0], DEFAULT_RHO_FLOOR).unwrap();
        assert!(trajs[0].exited);
        assert!(trajs[0].len() < 20);
    }

    #[test]
    fn stratified_samples_follow_density() {
        let g = grid();
        let psi = Wavefunction::from_fn(g, 0.0, |x| Complex64::new((-(x - 2.0) * (x - 2.0) / 8.0).exp(), 0.0));
        let xs = sample_density(&psi, 2000, 7).unwrap();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 2.0).abs() < 0.01, "{mean}");
        assert!(histogram_l1(&psi, &xs, 50).unwrap() < 0.03);
        assert_eq!(xs, sample_density(&psi, 2000, 7).unwrap());
        // samples of a different density are far off
        let shifted: Vec<f64> = xs.iter().map(|x| x + 2.0).collect();
        assert!(histogram_l1(&psi, &shifted, 50).unwrap() > 0.5);
    }
}
