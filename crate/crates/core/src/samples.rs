//! Seeded streams of smooth, well-localized random fields.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::Field;
use crate::grid::Grid;

/// Sums of a few Gaussian bumps with random centers, widths, complex
/// amplitudes and a gentle transverse phase tilt.
#[derive(Debug, Clone)]
pub struct SmoothFieldStream {
    rng: ChaCha8Rng,
    seed: u64,
}

impl SmoothFieldStream {
    pub fn new(seed: u64) -> Self {
        SmoothFieldStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A random field on `grid`. Bumps stay within a third of the smallest
    /// half-length so their tails are negligible at the box edge.
    pub fn next_field(&mut self, grid: &Arc<Grid>) -> Field {
        let dims = grid.n_dims();
        let reach = grid
            .axes()
            .iter()
            .map(|a| a.half_length)
            .fold(f64::INFINITY, f64::min)
            / 3.0;
        let center_spread = (0.25 * reach).min(1.5);
        let n_bumps = self.rng.random_range(1..=3);
        let bumps: Vec<Bump> = (0..n_bumps)
            .map(|_| Bump {
                center: (0..dims)
                    .map(|_| self.rng.random_range(-center_spread..=center_spread))
                    .collect(),
                width: (0..dims)
                    .map(|_| self.rng.random_range(0.7..=1.3))
                    .collect(),
                amplitude: Complex64::from_polar(
                    self.rng.random_range(0.3..=1.2),
                    self.rng.random_range(0.0..2.0 * PI),
                ),
            })
            .collect();
        let tilt: Vec<f64> = (0..dims - 1)
            .map(|_| self.rng.random_range(-0.5..=0.5))
            .collect();
        Field::from_fn(grid, |x| {
            let phase: f64 = tilt.iter().zip(x).map(|(k, xj)| k * xj).sum();
            let sum: Complex64 = bumps.iter().map(|b| b.eval(x)).sum();
            sum * Complex64::from_polar(1.0, phase)
        })
    }

    /// Real-valued variant, used where the minimization runs on real fields.
    pub fn next_real_field(&mut self, grid: &Arc<Grid>) -> Field {
        let f = self.next_field(grid);
        let re = f.real_part();
        if re.l2_norm() > 0.2 * f.l2_norm() {
            re
        } else {
            f.phase_rotated(0.5 * PI).real_part()
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }
}

#[derive(Debug, Clone)]
struct Bump {
    center: Vec<f64>,
    width: Vec<f64>,
    amplitude: Complex64,
}

impl Bump {
    fn eval(&self, x: &[f64]) -> Complex64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .zip(&self.width)
            .map(|((xj, cj), wj)| ((xj - cj) / wj).powi(2))
            .sum();
        self.amplitude * (-0.5 * r2).exp()
    }
}
