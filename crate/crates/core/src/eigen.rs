//! Bound spectrum of `-1/2 d^2/dx^2 + V` from the three-point finite-difference
//! Hamiltonian.

use crate::grid::SpatialGrid;
use crate::potential::BindingPotential;

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal bands.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    /// Three-point discretization with Dirichlet ends.
    pub fn hamiltonian<P: BindingPotential + ?Sized>(grid: &SpatialGrid, potential: &P) -> Self {
        let h2 = grid.dx() * grid.dx();
        let diag = grid.sample(|x| 1.0 / h2 + potential.value(x));
        let off = vec![-0.5 / h2; grid.len() - 1];
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm sequence count).
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - lambda;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let denom = if q == 0.0 { f64::EPSILON * self.off[i - 1].abs().max(1.0) } else { q };
            q = self.diag[i] - lambda - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, index: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        while hi - lo > tol * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Lowest bound eigenvalues of one potential.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpectrum {
    pub energies: Vec<f64>,
    pub potential: String,
    pub requested: usize,
}

impl BoundSpectrum {
    /// False when fewer than `requested` negative eigenvalues exist on the grid.
    pub fn is_complete(&self) -> bool {
        self.energies.len() == self.requested
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,energy\n");
        for (n, e) in self.energies.iter().enumerate() {
            s.push_str(&format!("{n},{e:.10}\n"));
        }
        s
    }
}

/// Lowest `n_states` negative eigenvalues of the finite-difference Hamiltonian.
pub fn bound_spectrum<P: BindingPotential + ?Sized>(
    grid: &SpatialGrid,
    potential: &P,
    label: &str,
    n_states: usize,
) -> BoundSpectrum {
    let h = SymTridiagonal::hamiltonian(grid, potential);
    let n_bound = h.count_below(0.0).min(n_states);
    let energies = (0..n_bound).map(|i| h.eigenvalue(i, 1e-14)).collect();
    BoundSpectrum {
        energies,
        potential: label.to_string(),
        requested: n_states,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    #[test]
    fn small_matrix_against_closed_form() {
        // tridiag(-1, 2, -1) of size n: 2 - 2 cos(k pi / (n + 1))
        let n = 10;
        let m = SymTridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        };
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((m.eigenvalue(k, 1e-15) - exact).abs() < 1e-12);
        }
        assert_eq!(m.count_below(0.0), 0);
        assert_eq!(m.count_below(4.0), n);
    }

    struct Harmonic;

    impl BindingPotential for Harmonic {
        fn value(&self, x: f64) -> f64 {
            0.5 * x * x - 10.0
        }
        fn gradient(&self, x: f64) -> f64 {
            x
        }
    }

    #[test]
    fn shifted_oscillator_levels() {
        let grid = SpatialGrid::new(-10.0, 10.0, 4096).unwrap();
        let s = bound_spectrum(&grid, &Harmonic, "harmonic", 4);
        for (n, e) in s.energies.iter().enumerate() {
            assert!((e - (n as f64 + 0.5 - 10.0)).abs() < 1e-4, "{n}: {e}");
        }
        assert!(s.is_complete());
    }

    #[test]
    fn reports_incomplete_spectrum() {
        let grid = SpatialGrid::new(-200.0, 200.0, 4096).unwrap();
        let s = bound_spectrum(&grid, &PotentialSpec::default_truncated(), "truncated", 50);
        assert!(!s.is_complete());
        assert!(s.energies.len() >= 7);
        assert!(s.energies.windows(2).all(|w| w[0] < w[1]));
        assert!(s.energies.iter().all(|&e| e < 0.0));
    }
}
