//! Ground states as minimizers of the action on the Nehari manifold.
//!
//! Each iterate is moved along the (optionally preconditioned) action
//! gradient and then pulled back onto `{K_ω = 0}` along its ray, where the
//! intersection is available in closed form. On the manifold the action equals
//! the positive quadratic form `J_ω`, so a decreasing action sequence is a
//! decreasing `J_ω` sequence.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Axis;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SnapshotMeta};
use crate::functionals::{self, FieldTerms, ModelParams};
use crate::grid::Grid;
use crate::spectral;

/// Relative slack allowed in the descent test; action values carry roundoff
/// of this order once the iteration has converged.
pub const DESCENT_SLACK: f64 = 1e-12;

const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Plain `L²` gradient.
    None,
    /// Inverse of the discrete `-Δ + x_N² + ω`, diagonalized by transverse
    /// FFTs and the eigenbasis of the 1-D oscillator on the confined axis.
    Oscillator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundStateOptions {
    pub step_size: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub recenter_every: usize,
    /// Per-axis Gaussian seed widths; empty means 1.0 on every axis.
    pub seed_width: Vec<f64>,
    pub preconditioner: Preconditioner,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            step_size: 1.0,
            max_iters: 2000,
            residual_tol: 1e-9,
            recenter_every: 10,
            seed_width: Vec::new(),
            preconditioner: Preconditioner::Oscillator,
        }
    }
}

impl GroundStateOptions {
    /// Unpreconditioned flow with a small explicit step.
    pub fn plain_gradient() -> Self {
        GroundStateOptions {
            step_size: 0.01,
            max_iters: 200_000,
            preconditioner: Preconditioner::None,
            ..Default::default()
        }
    }

    pub fn validate(&self, n_dims: usize) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size {} must be positive",
                self.step_size
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "residual_tol must be positive".into(),
            ));
        }
        if self.recenter_every == 0 {
            return Err(Error::InvalidArgument(
                "recenter_every must be at least 1".into(),
            ));
        }
        if !self.seed_width.is_empty() && self.seed_width.len() != n_dims {
            return Err(Error::InvalidArgument(format!(
                "seed_width needs {n_dims} entries, got {}",
                self.seed_width.len()
            )));
        }
        if self.seed_width.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(
                "seed widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    /// Real, nonnegative profile φ_ω.
    pub profile: Field,
    pub params: ModelParams,
    /// `d(ω) = S_ω(φ_ω)`.
    pub level: f64,
    /// `‖S_ω'(φ)‖ / ‖φ‖`.
    pub residual: f64,
    pub nehari_value: f64,
    pub iterations: usize,
    /// Action of every accepted projected iterate, seed included.
    pub level_history: Vec<f64>,
}

impl GroundState {
    pub fn omega(&self) -> f64 {
        self.params.omega()
    }

    pub fn certificate(&self) -> GroundStateCertificate {
        let terms = FieldTerms::compute(&self.profile, self.params.p());
        GroundStateCertificate {
            omega: self.params.omega(),
            p: self.params.p(),
            n_dims: self.params.n_dims(),
            level: self.level,
            residual: self.residual,
            nehari_value: self.nehari_value,
            quadratic: terms.quadratic(self.params.omega()),
            virial_p: terms.virial_p(&self.params),
            iterations: self.iterations,
            grid: GridSpec {
                points: self.profile.grid().points(),
                half_lengths: self.profile.grid().half_lengths(),
            },
        }
    }

    /// Writes `<stem>.fld`, its sidecar and `<stem>.cert.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let meta = SnapshotMeta {
            time: 0.0,
            omega: self.params.omega(),
            p: self.params.p(),
        };
        self.profile
            .write_snapshot(&dir.join(format!("{stem}.fld")), meta)?;
        fs::write(
            dir.join(format!("{stem}.cert.json")),
            serde_json::to_string_pretty(&self.certificate())?,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub half_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateCertificate {
    pub omega: f64,
    pub p: f64,
    pub n_dims: usize,
    pub level: f64,
    pub residual: f64,
    pub nehari_value: f64,
    pub quadratic: f64,
    pub virial_p: f64,
    pub iterations: usize,
    pub grid: GridSpec,
}

/// `λ₀(v)·v`, the intersection of the ray through `v` with `{K_ω = 0}`.
pub fn nehari_project(f: &Field, params: &ModelParams) -> Result<Field> {
    let lambda = functionals::nehari_scale(f, params)?;
    Ok(f.scaled(lambda))
}

/// Translates `f` on the transverse axes so that the `|f|²` centroid sits at
/// the origin. The zero field is returned unchanged.
pub fn center_transverse(f: &Field) -> Field {
    let grid = f.grid();
    let mass = spectral::lp_norm_pp(f, 2.0).expect("q = 2");
    if !(mass > 0.0) {
        return f.clone();
    }
    let offsets: Vec<f64> = grid
        .transverse_axes()
        .map(|j| -spectral::first_moment(f, j) / mass)
        .collect();
    spectral::translate(f, &offsets).expect("offsets cover the transverse axes")
}

/// Centroid offsets below this fraction of the grid spacing are left alone by
/// the solver. Aliasing pins the discrete ground state to the lattice, so a
/// sub-roundoff shift of a converged iterate only raises its residual.
const CENTER_DEADBAND: f64 = 1e-6;

fn recenter(f: &Field) -> Field {
    let grid = f.grid();
    let off_lattice = transverse_centroid(f)
        .iter()
        .zip(grid.transverse_axes())
        .any(|(c, j)| c.abs() > CENTER_DEADBAND * grid.axis(j).spacing);
    if off_lattice {
        center_transverse(f)
    } else {
        f.clone()
    }
}

/// `|f|²` centroid on each transverse axis.
pub fn transverse_centroid(f: &Field) -> Vec<f64> {
    let mass = spectral::lp_norm_pp(f, 2.0).expect("q = 2");
    f.grid()
        .transverse_axes()
        .map(|j| spectral::first_moment(f, j) / mass)
        .collect()
}

/// Inverse of the discrete linear operator `-Δ + x_N² + shift`.
#[derive(Debug, Clone)]
pub struct OscillatorPreconditioner {
    grid: Arc<Grid>,
    /// Row-major `n×n`; column `j` is the `j`-th oscillator eigenvector.
    basis: Vec<f64>,
    eigenvalues: Vec<f64>,
    shift: f64,
}

impl OscillatorPreconditioner {
    pub fn new(grid: &Arc<Grid>, shift: f64) -> Result<Self> {
        let axis = grid.axis(grid.confined_axis());
        let n = axis.points;
        let kappa = std::f64::consts::PI / axis.half_length;
        // circulant row of the spectral second derivative
        let row: Vec<f64> = (0..n)
            .map(|d| {
                let mut acc = 0.0;
                for q in 1..n / 2 {
                    let qf = q as f64;
                    acc += 2.0
                        * qf
                        * qf
                        * (2.0 * std::f64::consts::PI * qf * d as f64 / n as f64).cos();
                }
                let nyq = (n / 2) as f64;
                acc += nyq * nyq * if d % 2 == 0 { 1.0 } else { -1.0 };
                -kappa * kappa * acc / n as f64
            })
            .collect();
        let x = axis.coords();
        let h = DMatrix::from_fn(n, n, |m, j| {
            let d = (m as i64 - j as i64).rem_euclid(n as i64) as usize;
            let diag = if m == j { x[m] * x[m] } else { 0.0 };
            diag - row[d]
        });
        let eig = SymmetricEigen::new(h);
        let lowest = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(lowest + shift > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "preconditioner shift {shift} does not make the operator positive (lowest level {lowest})"
            )));
        }
        let mut basis = vec![0.0; n * n];
        for m in 0..n {
            for j in 0..n {
                basis[m * n + j] = eig.eigenvectors[(m, j)];
            }
        }
        Ok(OscillatorPreconditioner {
            grid: grid.clone(),
            basis,
            eigenvalues: eig.eigenvalues.iter().cloned().collect(),
            shift,
        })
    }

    /// Oscillator levels of the confined axis, unsorted.
    pub fn levels(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn apply(&self, r: &Field) -> Field {
        let grid = &self.grid;
        let c = grid.confined_axis();
        let n = grid.axis(c).points;
        let mut data = r.values().clone();
        spectral::forward_axes(grid, &mut data, grid.transverse_axes());
        let mut coeff = vec![Complex64::new(0.0, 0.0); n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (mut lane, k2) in data
            .lanes_mut(Axis(c))
            .into_iter()
            .zip(grid.k_squared().lanes(Axis(c)))
        {
            // k_N = 0 at index 0, so this is |k_⊥|²
            let kperp = k2[0];
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            for z in coeff.iter_mut() {
                *z = Complex64::new(0.0, 0.0);
            }
            for (m, b) in buf.iter().enumerate() {
                let row = &self.basis[m * n..(m + 1) * n];
                for (z, w) in coeff.iter_mut().zip(row) {
                    *z += b * w;
                }
            }
            for (z, mu) in coeff.iter_mut().zip(&self.eigenvalues) {
                *z /= kperp + mu + self.shift;
            }
            for (m, out) in lane.iter_mut().enumerate() {
                let row = &self.basis[m * n..(m + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (z, w) in coeff.iter().zip(row) {
                    acc += z * w;
                }
                *out = acc;
            }
        }
        spectral::inverse_axes(grid, &mut data, grid.transverse_axes());
        r.with_values(data)
    }
}

/// Solves from the default real Gaussian seed.
pub fn solve_ground_state(
    params: &ModelParams,
    grid: &Arc<Grid>,
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    if grid.n_dims() != params.n_dims() {
        return Err(Error::InvalidParams(format!(
            "grid has {} dimensions, model has {}",
            grid.n_dims(),
            params.n_dims()
        )));
    }
    opts.validate(grid.n_dims())?;
    let widths = if opts.seed_width.is_empty() {
        vec![1.0; grid.n_dims()]
    } else {
        opts.seed_width.clone()
    };
    solve_from(&Field::gaussian(grid, &widths), params, opts)
}

/// Runs the projected gradient flow from an arbitrary nonzero seed.
pub fn solve_from(
    seed: &Field,
    params: &ModelParams,
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    opts.validate(seed.grid().n_dims())?;
    let precond = match opts.preconditioner {
        Preconditioner::Oscillator => {
            Some(OscillatorPreconditioner::new(seed.grid(), params.omega())?)
        }
        Preconditioner::None => None,
    };
    let mut v = recenter(&nehari_project(&seed.real_part(), params)?);
    let mut level = functionals::action(&v, params);
    let mut history = vec![level];
    let mut tau = opts.step_size;
    let mut best: Option<(f64, Field)> = None;

    for iter in 0..=opts.max_iters {
        let grad = functionals::action_gradient(&v, params);
        let residual = grad.l2_norm() / v.l2_norm();
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, v.clone()));
        }
        if residual <= opts.residual_tol {
            return Ok(finish(v, params, residual, iter, history));
        }
        if iter == opts.max_iters {
            break;
        }
        let direction = match &precond {
            Some(pc) => pc.apply(&grad),
            None => grad,
        };
        loop {
            let mut trial = v.clone();
            trial.axpy(-tau, &direction);
            let trial = trial.real_part();
            let projected = match nehari_project(&trial, params) {
                Ok(f) => f,
                Err(_) => {
                    tau *= 0.5;
                    if tau < MIN_STEP {
                        return Err(nonconvergence(best, params, iter, history));
                    }
                    continue;
                }
            };
            let projected = if (iter + 1) % opts.recenter_every == 0 {
                recenter(&projected)
            } else {
                projected
            };
            let trial_level = functionals::action(&projected, params);
            if trial_level <= level + DESCENT_SLACK * level.abs() {
                v = projected;
                level = trial_level;
                history.push(level);
                tau = (2.0 * tau).min(opts.step_size);
                break;
            }
            tau *= 0.5;
            if tau < MIN_STEP {
                return Err(nonconvergence(best, params, iter, history));
            }
        }
    }
    Err(nonconvergence(best, params, opts.max_iters, history))
}

fn nonconvergence(
    best: Option<(f64, Field)>,
    params: &ModelParams,
    iterations: usize,
    history: Vec<f64>,
) -> Error {
    let (residual, v) = best.expect("at least one iterate was evaluated");
    Error::NonConvergence {
        iterations,
        residual,
        best: Box::new(finish(v, params, residual, iterations, history)),
    }
}

fn finish(
    v: Field,
    params: &ModelParams,
    residual: f64,
    iterations: usize,
    level_history: Vec<f64>,
) -> GroundState {
    let sum: f64 = v.values().iter().map(|z| z.re).sum();
    let profile = if sum < 0.0 { v.scaled(-1.0) } else { v }.real_part();
    let terms = FieldTerms::compute(&profile, params.p());
    GroundState {
        level: terms.action(params),
        nehari_value: terms.nehari(params),
        profile,
        params: *params,
        residual,
        iterations,
        level_history,
    }
}
