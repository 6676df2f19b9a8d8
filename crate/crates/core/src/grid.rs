//! Grid, wavefunction and time-series value types.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform periodic 1D grid. Nodes are `x_min + j * dx` for `j = 0..n_points`,
/// so `x_max` itself is the periodic image of `x_min` and is not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::Config(format!(
                "grid requires x_min < x_max (got {x_min}, {x_max})"
            )));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid n_points must be a power of two >= 2 (got {n_points})"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx: (x_max - x_min) / n_points as f64,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.n_points as f64 * self.dx)
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Conjugate momenta in standard FFT ordering: 0, dk, ..., -dk.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = self.dk();
        (0..n)
            .map(|j| {
                if j <= n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect()
    }

    /// True when `x` lies in `[x_min, x_max - dx]`, the span covered by nodes.
    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_min + (self.n_points - 1) as f64 * self.dx
    }

    /// Samples `f` on every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_points).map(|j| f(self.x(j))).collect()
    }
}

/// Complex amplitudes on a grid at a time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: SpatialGrid,
    amplitudes: Vec<Complex64>,
    t: f64,
}

impl Wavefunction {
    pub fn new(grid: SpatialGrid, amplitudes: Vec<Complex64>, t: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::Contract(format!(
                "wavefunction has {} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            amplitudes,
            t,
        })
    }

    pub fn from_fn(grid: SpatialGrid, t: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self {
            grid,
            amplitudes,
            t,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// `sum |psi_j|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Contract(format!(
                "cannot normalize a wavefunction with norm {n}"
            )));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(self)
    }

    /// `sum f(x_j) |psi_j|^2 dx`.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.amplitudes.len() {
            return Err(Error::Contract(format!(
                "grid function has {} samples, wavefunction has {}",
                f.len(),
                self.amplitudes.len()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(f)
            .map(|(a, f)| a.norm_sqr() * f)
            .sum::<f64>()
            * self.grid.dx)
    }

    /// `<self|other>` with the rectangle rule.
    pub fn overlap(&self, other: &Wavefunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::Contract("overlap of wavefunctions on different grids".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx)
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Writes one `BHH1` snapshot record.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.grid.len())
            .map_err(|_| Error::Snapshot("grid too large for u32 length".into()))?;
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&self.grid.x_min.to_le_bytes())?;
        w.write_all(&self.grid.dx.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.amplitudes.len());
        for a in &self.amplitudes {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads one `BHH1` record; `Ok(None)` on clean end of stream.
    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Option<Self>> {
        let mut magic = [0u8; 4];
        match read_exact_or_eof(&mut r, &mut magic)? {
            false => return Ok(None),
            true if &magic != SNAPSHOT_MAGIC => {
                return Err(Error::Snapshot(format!("bad magic {magic:?}")))
            }
            true => {}
        }
        let mut u = [0u8; 4];
        r.read_exact(&mut u)?;
        let n = u32::from_le_bytes(u) as usize;
        let x_min = read_f64(&mut r)?;
        let dx = read_f64(&mut r)?;
        let t = read_f64(&mut r)?;
        if !(dx > 0.0) {
            return Err(Error::Snapshot(format!("non-positive spacing {dx}")));
        }
        let grid = SpatialGrid::new(x_min, x_min + dx * n as f64, n)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        let mut raw = vec![0u8; 16 * n];
        r.read_exact(&mut raw)?;
        let amplitudes = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        // spacing from the header is authoritative
        let grid = SpatialGrid { dx, ..grid };
        Ok(Some(Self {
            grid,
            amplitudes,
            t,
        }))
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"BHH1";

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::Snapshot("truncated record header".into())),
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

/// Uniformly sampled series starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T = f64> {
    t0: f64,
    dt: f64,
    values: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new(t0: f64, dt: f64, values: Vec<T>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Contract(format!("time series needs dt > 0 (got {dt})")));
        }
        if values.len() < 2 {
            return Err(Error::Contract(format!(
                "time series needs at least 2 samples (got {})",
                values.len()
            )));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.time(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (self.time(i), v))
    }
}

impl<T: Clone> TimeSeries<T> {
    /// Samples with `t_from <= t <= t_to`; `None` if fewer than two remain.
    pub fn window(&self, t_from: f64, t_to: f64) -> Option<Self> {
        let first = ((t_from - self.t0) / self.dt).ceil().max(0.0) as usize;
        let last = (((t_to - self.t0) / self.dt).floor() as isize).min(self.values.len() as isize - 1);
        if last < first as isize + 1 {
            return None;
        }
        let last = last as usize;
        Some(Self {
            t0: self.time(first),
            dt: self.dt,
            values: self.values[first..=last].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrajectoryKind {
    Bohmian,
    ClassicalFree,
    ClassicalPotential,
}

impl TrajectoryKind {
    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryKind::Bohmian => "bohmian",
            TrajectoryKind::ClassicalFree => "classical-free",
            TrajectoryKind::ClassicalPotential => "classical-potential",
        }
    }
}

/// Position and velocity history of one electron.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub x0: f64,
    pub v0: f64,
    /// Release time for classical kinds.
    pub t_release: Option<f64>,
    pub positions: TimeSeries,
    pub velocities: TimeSeries,
    /// Set when the trajectory left the grid and was truncated.
    pub exited: bool,
}

impl Trajectory {
    pub fn new(
        kind: TrajectoryKind,
        x0: f64,
        v0: f64,
        t_release: Option<f64>,
        positions: TimeSeries,
        velocities: TimeSeries,
    ) -> Result<Self> {
        if positions.t0 != velocities.t0
            || positions.dt != velocities.dt
            || positions.len() != velocities.len()
        {
            return Err(Error::Contract(
                "trajectory positions and velocities must share sampling".into(),
            ));
        }
        Ok(Self {
            kind,
            x0,
            v0,
            t_release,
            positions,
            velocities,
            exited: false,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// CSV with header `t,x,v`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,v\n");
        for ((t, x), v) in self.positions.iter().zip(self.velocities.values()) {
            s.push_str(&format!("{t:.10e},{x:.12e},{v:.12e}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_nodes() {
        let g = SpatialGrid::new(-1.0, 1.0, 4).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5]);
        assert_eq!(g.momenta().len(), 4);
        assert!((g.dk() - PI).abs() < 1e-15);
        assert!((g.k_max() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn default_grid_spacing() {
        let g = SpatialGrid::new(-800.0, 800.0, 16384).unwrap();
        assert!((g.dx() - 0.09765625).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(SpatialGrid::new(0.0, 1.0, 3), Err(Error::Config(_))));
        assert!(matches!(SpatialGrid::new(1.0, 1.0, 4), Err(Error::Config(_))));
        assert!(matches!(SpatialGrid::new(2.0, 1.0, 4), Err(Error::Config(_))));
        assert!(SpatialGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn momenta_are_fft_ordered() {
        let g = SpatialGrid::new(0.0, 8.0, 8).unwrap();
        let k = g.momenta();
        let dk = g.dk();
        assert_eq!(k[0], 0.0);
        assert!((k[1] - dk).abs() < 1e-15);
        assert!((k[4] - 4.0 * dk).abs() < 1e-15);
        assert!((k[7] + dk).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        let g = SpatialGrid::new(-4.0, 4.0, 64).unwrap();
        let c = 1.0 / (g.len() as f64 * g.dx()).sqrt();
        let psi = Wavefunction::from_fn(g, 0.0, |_| Complex64::new(c, 0.0));
        assert!((psi.norm() - 1.0).abs() < 1e-14);
        let zero = Wavefunction::from_fn(g, 0.0, |_| Complex64::new(0.0, 0.0));
        assert_eq!(zero.norm(), 0.0);
        assert!(zero.normalized().is_err());
    }

    #[test]
    fn expectation_basics() {
        let g = SpatialGrid::new(-20.0, 20.0, 512).unwrap();
        let psi = Wavefunction::from_fn(g, 0.0, |x| Complex64::new((-x * x / 2.0).exp(), 0.0))
            .normalized()
            .unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let one = vec![1.0; g.len()];
        assert!((psi.expectation(&one).unwrap() - 1.0).abs() < 1e-12);
        let x = g.points();
        assert!(psi.expectation(&x).unwrap().abs() < 1e-10);
        assert!(matches!(psi.expectation(&x[1..]), Err(Error::Contract(_))));
    }

    #[test]
    fn wavefunction_length_checked() {
        let g = SpatialGrid::new(-1.0, 1.0, 4).unwrap();
        assert!(Wavefunction::new(g, vec![Complex64::default(); 3], 0.0).is_err());
    }

    #[test]
    fn snapshot_layout_is_bit_exact() {
        let g = SpatialGrid::new(-1.0, 1.0, 2).unwrap();
        let psi = Wavefunction::new(
            g,
            vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)],
            3.5,
        )
        .unwrap();
        let mut buf = Vec::new();
        psi.write_snapshot(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 24 + 32);
        assert_eq!(&buf[..4], b"BHH1");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..16], &(-1.0f64).to_le_bytes());
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&buf[24..32], &3.5f64.to_le_bytes());
        assert_eq!(&buf[32..40], &1.0f64.to_le_bytes());
        assert_eq!(&buf[40..48], &(-2.0f64).to_le_bytes());
        let mut cursor = &buf[..];
        let back = Wavefunction::read_snapshot(&mut cursor).unwrap().unwrap();
        assert_eq!(back, psi);
        assert!(Wavefunction::read_snapshot(&mut cursor).unwrap().is_none());
    }

    #[test]
    fn snapshot_rejects_bad_magic() {
        let buf = b"XXXX0000".to_vec();
        assert!(matches!(
            Wavefunction::read_snapshot(&buf[..]),
            Err(Error::Snapshot(_))
        ));
    }

    #[test]
    fn time_series_window() {
        let ts = TimeSeries::new(0.0, 0.5, (0..11).map(|i| i as f64).collect()).unwrap();
        let w = ts.window(1.2, 3.0).unwrap();
        assert_eq!(w.t0(), 1.5);
        assert_eq!(w.values(), &[3.0, 4.0, 5.0, 6.0]);
        assert!(ts.window(10.0, 20.0).is_none());
        assert!(TimeSeries::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(TimeSeries::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn trajectory_requires_shared_sampling() {
        let p = TimeSeries::new(0.0, 1.0, vec![0.0, 1.0]).unwrap();
        let v = TimeSeries::new(0.0, 2.0, vec![0.0, 1.0]).unwrap();
        assert!(Trajectory::new(TrajectoryKind::Bohmian, 0.0, 0.0, None, p, v).is_err());
    }
}
