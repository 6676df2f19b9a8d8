//! Power spectra, Gabor time-frequency maps, plateau/cutoff read-off and
//! ridge comparison against classical return times.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::classical::{ArchPoint, Branch};
use crate::error::{Error, Result};
use crate::grid::TimeSeries;
use crate::pulse::PulseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    None,
    Hann,
}

/// One-sided `I(Omega) = |dt sum h_n exp(i Omega t_n)|^2` on the FFT bins
/// `0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Number of samples of the transformed series.
    pub n_samples: usize,
    pub dt: f64,
}

impl PowerSpectrum {
    pub fn harmonic_orders(&self, fundamental: f64) -> Vec<f64> {
        self.omega.iter().map(|w| w / fundamental).collect()
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * PI / (self.n_samples as f64 * self.dt)
    }

    /// `sum_k I_k / (N dt)` over the two-sided spectrum of a real series; equals
    /// `dt sum |h_n|^2` of the transformed samples.
    pub fn total_power(&self) -> f64 {
        let n = self.n_samples;
        let mut s = 0.0;
        for (k, i) in self.intensity.iter().enumerate() {
            let both_sides = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            s += if both_sides { 2.0 * i } else { *i };
        }
        s / (n as f64 * self.dt)
    }

    /// CSV with header `harmonic_order,intensity`.
    pub fn to_csv(&self, fundamental: f64) -> String {
        let mut s = String::from("harmonic_order,intensity\n");
        for (w, i) in self.omega.iter().zip(&self.intensity) {
            s.push_str(&format!("{:.8},{:.10e}\n", w / fundamental, i));
        }
        s
    }
}

fn prepared(h: &TimeSeries, window: Window) -> Vec<f64> {
    let vals = h.values();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let n = vals.len();
    vals.iter()
        .enumerate()
        .map(|(i, v)| {
            let w = match window {
                Window::None => 1.0,
                Window::Hann => 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()),
            };
            (v - mean) * w
        })
        .collect()
}

/// Power spectrum of the mean-subtracted, optionally windowed series.
pub fn power_spectrum(h: &TimeSeries, window: Window) -> PowerSpectrum {
    let data = prepared(h, window);
    let n = data.len();
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // exp(+i Omega t) convention; |.|^2 is the same for either sign on real data
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let dt = h.dt();
    let d_omega = 2.0 * PI / (n as f64 * dt);
    let (omega, intensity) = buf[..=n / 2]
        .iter()
        .enumerate()
        .map(|(k, z)| (k as f64 * d_omega, z.norm_sqr() * dt * dt))
        .unzip();
    PowerSpectrum {
        omega,
        intensity,
        n_samples: n,
        dt,
    }
}

/// `|a_G(Omega, t')|` on a rectangular lattice; rows follow `t_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyMap {
    pub t_axis: Vec<f64>,
    pub omega_axis: Vec<f64>,
    /// `magnitude[i][j]` at `(t_axis[i], omega_axis[j])`.
    pub magnitude: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl TimeFrequencyMap {
    /// Index of the frequency closest to `omega`.
    pub fn omega_index(&self, omega: f64) -> usize {
        nearest(&self.omega_axis, omega)
    }

    /// Magnitude along `t'` at the frequency closest to `omega`.
    pub fn row_at(&self, omega: f64) -> Vec<f64> {
        let j = self.omega_index(omega);
        self.magnitude.iter().map(|r| r[j]).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0, |a, &b| a.max(b))
    }

    /// CSV matrix: first row harmonic orders, first column `t' / tau0`.
    pub fn to_csv(&self, fundamental: f64) -> String {
        let period = 2.0 * PI / fundamental;
        let mut s = String::from("t_over_tau0");
        for w in &self.omega_axis {
            s.push_str(&format!(",{:.4}", w / fundamental));
        }
        s.push('\n');
        for (t, row) in self.t_axis.iter().zip(&self.magnitude) {
            s.push_str(&format!("{:.6}", t / period));
            for m in row {
                s.push_str(&format!(",{m:.6e}"));
            }
            s.push('\n');
        }
        s
    }
}

fn nearest(axis: &[f64], value: f64) -> usize {
    let mut best = 0;
    let mut d = f64::INFINITY;
    for (i, a) in axis.iter().enumerate() {
        let e = (a - value).abs();
        if e < d {
            d = e;
            best = i;
        }
    }
    best
}

/// Default Gabor window width `1 / (3 omega)`.
pub fn default_sigma(omega: f64) -> f64 {
    1.0 / (3.0 * omega)
}

/// Default lattice: 40 `t'` points per cycle across the series, harmonics
/// 0..=80 in steps of 0.1.
pub fn default_lattice(h: &TimeSeries, omega: f64) -> (Vec<f64>, Vec<f64>) {
    let period = 2.0 * PI / omega;
    let step = period / 40.0;
    let n_t = ((h.t_end() - h.t0()) / step).floor() as usize + 1;
    let t_axis = (0..n_t).map(|i| h.t0() + i as f64 * step).collect();
    let omega_axis = (0..=800).map(|i| i as f64 * 0.1 * omega).collect();
    (t_axis, omega_axis)
}

/// Gabor transform by direct quadrature, window truncated at `|t - t'| > 6 sigma`.
pub fn gabor_map(
    h: &TimeSeries,
    sigma: f64,
    t_axis: &[f64],
    omega_axis: &[f64],
) -> Result<TimeFrequencyMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("Gabor sigma must be > 0 (got {sigma})")));
    }
    let data = prepared(h, Window::None);
    let dt = h.dt();
    let n = data.len();
    let magnitude = t_axis
        .par_iter()
        .map(|&tp| {
            let lo = ((tp - 6.0 * sigma - h.t0()) / dt).ceil().max(0.0) as usize;
            let hi = (((tp + 6.0 * sigma - h.t0()) / dt).floor() as isize).min(n as isize - 1);
            if hi < lo as isize {
                return vec![0.0; omega_axis.len()];
            }
            let hi = hi as usize;
            let windowed: Vec<f64> = (lo..=hi)
                .map(|i| {
                    let d = h.time(i) - tp;
                    data[i] * (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let t_lo = h.time(lo);
            omega_axis
                .iter()
                .map(|&w| {
                    let step = Complex64::from_polar(1.0, w * dt);
                    let mut phase = Complex64::from_polar(1.0, w * t_lo);
                    let mut acc = Complex64::default();
                    for (k, v) in windowed.iter().enumerate() {
                        if k % 64 == 0 {
                            phase = Complex64::from_polar(1.0, w * (t_lo + k as f64 * dt));
                        }
                        acc += phase * v;
                        phase *= step;
                    }
                    (acc * dt).norm()
                })
                .collect()
        })
        .collect();
    Ok(TimeFrequencyMap {
        t_axis: t_axis.to_vec(),
        omega_axis: omega_axis.to_vec(),
        magnitude,
        sigma,
    })
}

fn median(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Bands and thresholds of the plateau/cutoff read-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffOptions {
    /// Moving-median width in harmonic orders.
    pub smoothing_width: f64,
    pub plateau_band: (f64, f64),
    /// Drop below the plateau median that marks the cutoff.
    pub drop_db: f64,
    /// Minimum plateau contrast against the band around twice the predicted
    /// cutoff.
    pub min_contrast_db: f64,
    /// Half-width of that reference band in harmonic orders.
    pub reference_half_width: f64,
    /// A cutoff is an edge: the fall from `edge_db` to `drop_db` below the
    /// plateau must span at most `max_edge_width` harmonic orders.
    pub edge_db: f64,
    pub max_edge_width: f64,
}

impl Default for CutoffOptions {
    fn default() -> Self {
        Self {
            smoothing_width: 5.0,
            plateau_band: (15.0, 30.0),
            drop_db: 20.0,
            min_contrast_db: 10.0,
            reference_half_width: 5.0,
            edge_db: 10.0,
            max_edge_width: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffEstimate {
    Cutoff {
        harmonic: f64,
        plateau_db: f64,
        contrast_db: f64,
    },
    NoPlateau {
        contrast_db: f64,
    },
}

impl CutoffEstimate {
    pub fn harmonic(&self) -> Option<f64> {
        match self {
            CutoffEstimate::Cutoff { harmonic, .. } => Some(*harmonic),
            CutoffEstimate::NoPlateau { .. } => None,
        }
    }

    pub fn contrast_db(&self) -> f64 {
        match self {
            CutoffEstimate::Cutoff { contrast_db, .. } | CutoffEstimate::NoPlateau { contrast_db } => {
                *contrast_db
            }
        }
    }
}

/// Log-intensity (dB) smoothed by a moving median in harmonic order; returns
/// `(harmonic_orders, smoothed_db)`.
pub fn smoothed_log_spectrum(ps: &PowerSpectrum, fundamental: f64, width: f64) -> (Vec<f64>, Vec<f64>) {
    let h = ps.harmonic_orders(fundamental);
    let peak = ps.intensity.iter().fold(0.0f64, |a, &b| a.max(b)).max(f64::MIN_POSITIVE);
    let db: Vec<f64> = ps
        .intensity
        .iter()
        .map(|i| 10.0 * (i.max(peak * 1e-30) / peak).log10())
        .collect();
    let half = 0.5 * width;
    let per_harmonic = fundamental / ps.d_omega();
    let k = (half * per_harmonic).round() as usize;
    let smoothed = (0..db.len())
        .map(|i| {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(db.len() - 1);
            median(&mut db[lo..=hi].to_vec())
        })
        .collect();
    (h, smoothed)
}

fn band_median(h: &[f64], s: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let mut v: Vec<f64> = h
        .iter()
        .zip(s)
        .filter(|(h, _)| **h >= lo && **h <= hi)
        .map(|(_, s)| *s)
        .collect();
    (!v.is_empty()).then(|| median(&mut v))
}

/// Harmonic order where the smoothed spectrum first falls `drop_db` below the
/// plateau median, searching upward from the top of the plateau band. Weak
/// contrast or a slow roll-off yields [`CutoffEstimate::NoPlateau`].
pub fn cutoff_estimate(
    ps: &PowerSpectrum,
    epsilon0: f64,
    pulse: &PulseSpec,
    options: &CutoffOptions,
) -> Result<CutoffEstimate> {
    let fundamental = pulse.omega;
    let predicted = pulse.cutoff_harmonic(epsilon0);
    let (h, s) = smoothed_log_spectrum(ps, fundamental, options.smoothing_width);
    let reference = 2.0 * predicted;
    let h_max = *h.last().unwrap();
    if h_max < reference + options.reference_half_width {
        return Err(Error::Contract(format!(
            "spectrum reaches harmonic {h_max:.1}, needs {:.1}",
            reference + options.reference_half_width
        )));
    }
    let (p_lo, p_hi) = options.plateau_band;
    let plateau = band_median(&h, &s, p_lo, p_hi)
        .ok_or_else(|| Error::Contract("no bins in the plateau band".into()))?;
    let tail = band_median(
        &h,
        &s,
        reference - options.reference_half_width,
        reference + options.reference_half_width,
    )
    .ok_or_else(|| Error::Contract("no bins in the reference band".into()))?;
    let contrast_db = plateau - tail;
    if contrast_db < options.min_contrast_db {
        return Ok(CutoffEstimate::NoPlateau { contrast_db });
    }
    let Some(harmonic) = first_crossing(&h, &s, p_hi, plateau - options.drop_db) else {
        return Ok(CutoffEstimate::NoPlateau { contrast_db });
    };
    let shoulder = first_crossing(&h, &s, p_hi, plateau - options.edge_db).unwrap_or(harmonic);
    if harmonic - shoulder > options.max_edge_width {
        // gradual roll-off rather than a cutoff
        return Ok(CutoffEstimate::NoPlateau { contrast_db });
    }
    Ok(CutoffEstimate::Cutoff {
        harmonic,
        plateau_db: plateau,
        contrast_db,
    })
}

/// First harmonic order at or above `from` where `s` falls below `threshold`,
/// refined by linear interpolation.
fn first_crossing(h: &[f64], s: &[f64], from: f64, threshold: f64) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (&hk, &sk) in h.iter().zip(s) {
        if hk < from {
            continue;
        }
        if sk < threshold {
            return Some(match prev {
                Some((hp, sp)) if sp > sk => hp + (sp - threshold) / (sp - sk) * (hk - hp),
                _ => hk,
            });
        }
        prev = Some((hk, sk));
    }
    None
}

/// Map maxima matched to classical return times for one harmonic.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeOffset {
    pub harmonic: f64,
    /// `(t_peak, t_peak - t_classical)` for each local maximum above the floor.
    pub peaks: Vec<(f64, f64)>,
    /// Set when no local maximum cleared the floor (or no classical time exists).
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeOptions {
    /// `t'` interval analysed, normally one flat-top cycle.
    pub window: (f64, f64),
    /// Carrier period, used to fold classical return times into the window.
    pub period: f64,
    /// Local maxima below `floor_fraction * reference` are ignored.
    pub floor_fraction: f64,
    /// Magnitude the floor is relative to; `None` uses the largest magnitude
    /// of the band's rows inside the window.
    pub reference: Option<f64>,
    /// Arch points within this many harmonic orders count as crossing a row.
    pub harmonic_tolerance: f64,
}

fn classical_times(arches: &[ArchPoint], harmonic: f64, tol: f64, period: f64, window: (f64, f64)) -> Vec<f64> {
    let mut times = Vec::new();
    for p in arches {
        if (p.harmonic_order - harmonic).abs() <= tol {
            // fold into and around the window
            let base = p.t_return - ((p.t_return - window.0) / period).floor() * period;
            for shift in [-1.0, 0.0, 1.0] {
                times.push(base + shift * period);
            }
        }
    }
    times
}

/// Signed offsets between local maxima of each map row in `band` (integer
/// harmonic orders) and the nearest classical return time.
pub fn ridge_compare(
    map: &TimeFrequencyMap,
    fundamental: f64,
    arches: &[ArchPoint],
    band: (f64, f64),
    options: &RidgeOptions,
) -> Vec<RidgeOffset> {
    let (t_from, t_to) = options.window;
    let cols: Vec<usize> = (0..map.t_axis.len())
        .filter(|&i| map.t_axis[i] >= t_from && map.t_axis[i] <= t_to)
        .collect();
    let first = band.0.ceil() as i64;
    let last = band.1.floor() as i64;
    let rows: Vec<Vec<f64>> = (first..=last)
        .map(|hh| map.row_at(hh as f64 * fundamental))
        .collect();
    let reference = options.reference.unwrap_or_else(|| {
        rows.iter()
            .flat_map(|r| cols.iter().map(move |&i| r[i]))
            .fold(0.0, |a, b| a.max(b))
    });
    let floor = options.floor_fraction * reference;
    (first..=last)
        .zip(rows)
        .map(|(hh, row)| {
            let harmonic = hh as f64;
            let classical = classical_times(arches, harmonic, options.harmonic_tolerance, options.period, options.window);
            let mut peaks = Vec::new();
            if !classical.is_empty() {
                for w in cols.windows(3) {
                    let (a, b, c) = (row[w[0]], row[w[1]], row[w[2]]);
                    if b > a && b >= c && b > floor {
                        let tp = map.t_axis[w[1]];
                        let nearest = classical
                            .iter()
                            .copied()
                            .min_by(|x, y| (x - tp).abs().total_cmp(&(y - tp).abs()))
                            .unwrap();
                        peaks.push((tp, tp - nearest));
                    }
                }
            }
            RidgeOffset {
                harmonic,
                skipped: peaks.is_empty(),
                peaks,
            }
        })
        .collect()
}

/// Mean map magnitude along the short and long arch branches, summed over the
/// integer harmonic orders of `band`. Each arch point is evaluated at every
/// copy of its return time (shifted by whole periods) inside `window`, by
/// linear interpolation along `t'`.
pub fn branch_magnitudes(
    map: &TimeFrequencyMap,
    fundamental: f64,
    arches: &[ArchPoint],
    band: (f64, f64),
    window: (f64, f64),
    harmonic_tolerance: f64,
) -> (f64, f64) {
    let period = 2.0 * PI / fundamental;
    let (mut short, mut long) = (0.0, 0.0);
    for hh in band.0.ceil() as i64..=band.1.floor() as i64 {
        let harmonic = hh as f64;
        let row = map.row_at(harmonic * fundamental);
        let mut acc = [(0.0, 0usize); 2];
        for p in arches {
            let slot = match p.branch {
                Branch::Short => 0,
                Branch::Long => 1,
                Branch::Later => continue,
            };
            if (p.harmonic_order - harmonic).abs() > harmonic_tolerance {
                continue;
            }
            let mut t = p.t_return - ((p.t_return - window.0) / period).floor() * period;
            while t <= window.1 {
                if let Some(m) = interpolate(&map.t_axis, &row, t) {
                    acc[slot].0 += m;
                    acc[slot].1 += 1;
                }
                t += period;
            }
        }
        if acc[0].1 > 0 {
            short += acc[0].0 / acc[0].1 as f64;
        }
        if acc[1].1 > 0 {
            long += acc[1].0 / acc[1].1 as f64;
        }
    }
    (short, long)
}

fn interpolate(axis: &[f64], values: &[f64], t: f64) -> Option<f64> {
    if axis.len() < 2 || t < axis[0] || t > *axis.last()? {
        return None;
    }
    let i = axis.partition_point(|&a| a <= t).clamp(1, axis.len() - 1);
    let (a, b) = (axis[i - 1], axis[i]);
    let u = if b > a { (t - a) / (b - a) } else { 0.0 };
    Some(values[i - 1] + u * (values[i] - values[i - 1]))
}

/// Median of `|offset|` over every matched peak; `None` if nothing matched.
pub fn median_abs_offset(offsets: &[RidgeOffset]) -> Option<f64> {
    let mut v: Vec<f64> = offsets
        .iter()
        .flat_map(|o| o.peaks.iter().map(|p| p.1.abs()))
        .collect();
    (!v.is_empty()).then(|| median(&mut v))
}

/// Keeps the Fourier components of `h` with `|Omega| / fundamental` in
/// `[band.0, band.1)` (harmonic orders). The mean is always removed.
pub fn band_pass(h: &TimeSeries, fundamental: f64, band: (f64, f64)) -> TimeSeries {
    let data = prepared(h, Window::None);
    let n = data.len();
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let d_omega = 2.0 * PI / (n as f64 * h.dt());
    for (k, z) in buf.iter_mut().enumerate() {
        let order = k.min(n - k) as f64 * d_omega / fundamental;
        if k == 0 || order < band.0 || order >= band.1 {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let values = buf.iter().map(|z| z.re / n as f64).collect();
    TimeSeries::new(h.t0(), h.dt(), values).expect("same sampling as the input")
}

/// Median spacing between consecutive local maxima of `h` inside
/// `window`; `None` with fewer than two maxima.
pub fn median_peak_spacing(h: &TimeSeries, window: (f64, f64)) -> Option<f64> {
    let v = h.values();
    let peaks: Vec<f64> = (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
        .map(|i| h.time(i))
        .filter(|t| *t >= window.0 && *t <= window.1)
        .collect();
    let mut gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    (!gaps.is_empty()).then(|| median(&mut gaps))
}

/// Pearson correlation of two equally long slices.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
