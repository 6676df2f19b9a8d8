//! FFT plans and spectral derivatives on a [`SpatialGrid`].

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::SpatialGrid;

/// Forward/inverse transforms sized for one grid. The inverse is normalized
/// so that `inverse(forward(f)) == f`.
#[derive(Clone)]
pub struct Spectral {
    grid: SpatialGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    momenta: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid: *grid,
            forward,
            inverse,
            momenta: grid.momenta(),
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Spectral derivative of order `order` (Nyquist mode dropped for odd orders).
    pub fn derivative(&mut self, f: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut data = f.to_vec();
        self.forward(&mut data);
        let n = data.len();
        for (j, (z, &k)) in data.iter_mut().zip(&self.momenta).enumerate() {
            if order % 2 == 1 && j == n / 2 {
                *z = Complex64::default();
                continue;
            }
            *z *= Complex64::new(0.0, k).powu(order);
        }
        self.inverse(&mut data);
        data
    }

    pub fn derivative_real(&mut self, f: &[f64], order: u32) -> Vec<f64> {
        let data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivative(&data, order).into_iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derivative_of_sine() {
        let g = SpatialGrid::new(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        let mut sp = Spectral::new(&g);
        let f = g.sample(|x| (3.0 * x).sin());
        let d = sp.derivative_real(&f, 1);
        let d2 = sp.derivative_real(&f, 2);
        for j in 0..g.len() {
            let x = g.x(j);
            assert!((d[j] - 3.0 * (3.0 * x).cos()).abs() < 1e-11);
            assert!((d2[j] + 9.0 * (3.0 * x).sin()).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 64)) {
            let g = SpatialGrid::new(-5.0, 5.0, 64).unwrap();
            let mut sp = Spectral::new(&g);
            let orig: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let mut data = orig.clone();
            sp.forward(&mut data);
            sp.inverse(&mut data);
            let scale = orig.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            let err = orig.iter().zip(&data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(err / scale < 1e-12);
        }
    }
}
