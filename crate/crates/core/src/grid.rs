//! Tensor-product periodic grid approximating ℝ^N.
//!
//! Every axis is a uniform periodic lattice `x_m = -L + m·Δx`, `Δx = 2L/n`.
//! The last axis carries the harmonic confinement; the others are free
//! (transverse). FFT plans for every axis are built once and shared by all
//! fields living on the grid.

use std::fmt;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use rustfft::{Fft, FftPlannerScalar as FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of points on an axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisRole {
    Transverse,
    Confined,
}

/// One periodic axis with its coordinates, wavenumbers and FFT plans.
#[derive(Clone)]
pub struct GridAxis {
    pub points: usize,
    pub half_length: f64,
    pub spacing: f64,
    pub role: AxisRole,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridAxis {
    /// Physical coordinates in storage order, starting at `-L`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumbers in FFT order: `0, κ, …, (n/2-1)κ, -(n/2)κ, …, -κ` with `κ = π/L`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the unpaired Nyquist mode in FFT order.
    pub fn nyquist_index(&self) -> usize {
        self.points / 2
    }

    pub(crate) fn forward(&self) -> &Arc<dyn Fft<f64>> {
        &self.forward
    }

    pub(crate) fn inverse(&self) -> &Arc<dyn Fft<f64>> {
        &self.inverse
    }
}

impl fmt::Debug for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridAxis")
            .field("points", &self.points)
            .field("half_length", &self.half_length)
            .field("spacing", &self.spacing)
            .field("role", &self.role)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    axes: Vec<GridAxis>,
    shape: Vec<usize>,
    cell_volume: f64,
    k_squared: ArrayD<f64>,
    potential: ArrayD<f64>,
}

impl Grid {
    /// Builds an `n_dims`-dimensional grid. The last axis is the confined one.
    pub fn new(n_dims: usize, points: &[usize], half_lengths: &[f64]) -> Result<Arc<Grid>> {
        if !(2..=3).contains(&n_dims) {
            return Err(Error::InvalidGrid(format!(
                "n_dims must be 2 or 3, got {n_dims}"
            )));
        }
        if points.len() != n_dims || half_lengths.len() != n_dims {
            return Err(Error::InvalidGrid(format!(
                "expected {n_dims} point counts and half-lengths, got {} and {}",
                points.len(),
                half_lengths.len()
            )));
        }
        let mut planner = FftPlanner::<f64>::new();
        let mut axes = Vec::with_capacity(n_dims);
        for (j, (&n, &half)) in points.iter().zip(half_lengths).enumerate() {
            if n < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: {n} points is below the minimum of {MIN_POINTS}"
                )));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: point count {n} must be even"
                )));
            }
            if !(half.is_finite() && half > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: half-length {half} must be positive"
                )));
            }
            let spacing = 2.0 * half / n as f64;
            let coords = (0..n).map(|m| -half + m as f64 * spacing).collect();
            let kappa = std::f64::consts::PI / half;
            let wavenumbers = (0..n)
                .map(|m| {
                    let signed = if m < n / 2 {
                        m as i64
                    } else {
                        m as i64 - n as i64
                    };
                    kappa * signed as f64
                })
                .collect();
            let role = if j + 1 == n_dims {
                AxisRole::Confined
            } else {
                AxisRole::Transverse
            };
            axes.push(GridAxis {
                points: n,
                half_length: half,
                spacing,
                role,
                coords,
                wavenumbers,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            });
        }
        let cell_volume = axes.iter().map(|a| a.spacing).product();
        let k_squared = ArrayD::from_shape_fn(IxDyn(points), |idx| {
            (0..n_dims)
                .map(|j| axes[j].wavenumbers[idx[j]].powi(2))
                .sum()
        });
        let confined = &axes[n_dims - 1];
        let potential = ArrayD::from_shape_fn(IxDyn(points), |idx| {
            confined.coords[idx[n_dims - 1]].powi(2)
        });
        Ok(Arc::new(Grid {
            shape: points.to_vec(),
            axes,
            cell_volume,
            k_squared,
            potential,
        }))
    }

    pub fn n_dims(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &GridAxis {
        &self.axes[j]
    }

    /// Index of the confined axis (always the last one).
    pub fn confined_axis(&self) -> usize {
        self.axes.len() - 1
    }

    pub fn transverse_axes(&self) -> std::ops::Range<usize> {
        0..self.axes.len() - 1
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// `|k|²` for every mode, in FFT storage order.
    pub fn k_squared(&self) -> &ArrayD<f64> {
        &self.k_squared
    }

    /// The confining potential `x_N²` at every grid point. Coordinates are
    /// taken relative to the box center, so it is capped at `L_N²`.
    pub fn potential(&self) -> &ArrayD<f64> {
        &self.potential
    }

    pub fn points(&self) -> Vec<usize> {
        self.shape.clone()
    }

    pub fn half_lengths(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.half_length).collect()
    }

    /// True when both grids discretize the same box with the same resolution.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.shape == other.shape
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.half_length == b.half_length)
    }
}
