//! Strang-split time integration with adaptive steps and blow-up monitors.
//!
//! One step is `B(dt/2) ∘ A(dt) ∘ B(dt/2)` where `A` is the free flow
//! `i∂_t u = -Δu`, solved exactly in Fourier space, and `B` is the pointwise
//! phase rotation `i∂_t u = (x_N² - |u|^{p-1}) u`, exact because `|u|` is
//! constant along it. Both substeps are unitary on the grid.

use std::fmt;
use std::io::Write;
use std::path::Path;

use ndarray::Zip;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::{FieldTerms, ModelParams};
use crate::spectral;

/// Step-size constant of [`adaptive_dt`].
pub const ADAPT_CONSTANT: f64 = 0.1;

/// Margin used by the boundary-mass monitor.
pub const BOUNDARY_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    pub dt0: f64,
    pub t_end: f64,
    /// Monitor cadence in time units.
    pub sample_every: f64,
    /// Halt once `grad_sq` exceeds this multiple of its initial value.
    pub grad_blowup_factor: f64,
    pub dt_floor: f64,
    pub boundary_mass_cap: f64,
    /// Drops the nonlinearity (test mode).
    pub linear_only: bool,
    /// Applies the 2/3-rule filter after every step.
    pub dealias: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt0: 1e-3,
            t_end: 1.0,
            sample_every: 1e-2,
            grad_blowup_factor: 10.0,
            dt_floor: 1e-9,
            boundary_mass_cap: 1e-6,
            linear_only: false,
            dealias: false,
        }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt0", self.dt0),
            ("sample_every", self.sample_every),
            ("grad_blowup_factor", self.grad_blowup_factor),
            ("dt_floor", self.dt_floor),
            ("boundary_mass_cap", self.boundary_mass_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name}={v} must be positive"
                )));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end={} must be nonnegative",
                self.t_end
            )));
        }
        if self.dt_floor >= self.dt0 {
            return Err(Error::InvalidArgument("dt_floor must be below dt0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    BlowupDetected,
    BoundaryViolation,
    DtUnderflow,
}

impl Status {
    /// Halts that indicate a singularity forming.
    pub fn is_blowup(self) -> bool {
        matches!(self, Status::BlowupDetected | Status::DtUnderflow)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Completed => "completed",
            Status::BlowupDetected => "blowup_detected",
            Status::BoundaryViolation => "boundary_violation",
            Status::DtUnderflow => "dt_underflow",
        };
        f.write_str(s)
    }
}

/// Monitor values at every sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub action_value: Vec<f64>,
    pub nehari_value: Vec<f64>,
    pub virial_p_value: Vec<f64>,
    pub moment_f: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub boundary: Vec<f64>,
    pub status: Status,
    /// Cadence of the uniform samples; a halt may add one off-cadence sample.
    pub sample_every: f64,
    pub steps: usize,
}

/// Scalar monitors of a single state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub mass: f64,
    pub energy: f64,
    pub action: f64,
    pub nehari: f64,
    pub virial_p: f64,
    pub moment_f: f64,
    pub grad_sq: f64,
    pub boundary: f64,
}

impl Sample {
    pub fn measure(u: &Field, params: &ModelParams) -> Sample {
        let t = FieldTerms::compute(u, params.p());
        let moment_f = u
            .grid()
            .transverse_axes()
            .map(|j| spectral::weighted_moment(u, j))
            .sum();
        Sample {
            mass: t.mass,
            energy: t.energy(params.p()),
            action: t.action(params),
            nehari: t.nehari(params),
            virial_p: t.virial_p(params),
            moment_f,
            grad_sq: t.grad_total(),
            boundary: spectral::boundary_mass(u, BOUNDARY_MARGIN).expect("valid margin"),
        }
    }
}

impl TrajectoryRecord {
    fn new(sample_every: f64) -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            mass: Vec::new(),
            energy: Vec::new(),
            action_value: Vec::new(),
            nehari_value: Vec::new(),
            virial_p_value: Vec::new(),
            moment_f: Vec::new(),
            grad_sq: Vec::new(),
            boundary: Vec::new(),
            status: Status::Completed,
            sample_every,
            steps: 0,
        }
    }

    fn push(&mut self, t: f64, s: &Sample) {
        self.times.push(t);
        self.mass.push(s.mass);
        self.energy.push(s.energy);
        self.action_value.push(s.action);
        self.nehari_value.push(s.nehari);
        self.virial_p_value.push(s.virial_p);
        self.moment_f.push(s.moment_f);
        self.grad_sq.push(s.grad_sq);
        self.boundary.push(s.boundary);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("records always hold the initial sample")
    }

    /// Number of leading samples on the uniform cadence `k·sample_every`.
    pub fn uniform_len(&self) -> usize {
        self.times
            .iter()
            .enumerate()
            .take_while(|(k, t)| **t == *k as f64 * self.sample_every)
            .count()
    }

    /// `max_t |m(t) - m(0)| / |m(0)|` for a monitored series.
    pub fn relative_drift(series: &[f64]) -> f64 {
        let first = series[0];
        series.iter().map(|v| (v - first).abs()).fold(0.0, f64::max) / first.abs()
    }

    pub fn mass_drift(&self) -> f64 {
        Self::relative_drift(&self.mass)
    }

    pub fn energy_drift(&self) -> f64 {
        Self::relative_drift(&self.energy)
    }

    /// CSV with header `t,mass,energy,action,nehari,virial_p,moment_f,grad_sq,boundary,status`
    /// plus any extra columns; extra columns must have one value per row.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        extra: &[(&str, Vec<Option<f64>>)],
    ) -> Result<()> {
        write!(
            out,
            "t,mass,energy,action,nehari,virial_p,moment_f,grad_sq,boundary,status"
        )?;
        for (name, _) in extra {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                self.times[i],
                self.mass[i],
                self.energy[i],
                self.action_value[i],
                self.nehari_value[i],
                self.virial_p_value[i],
                self.moment_f[i],
                self.grad_sq[i],
                self.boundary[i],
                self.status
            )?;
            for (_, col) in extra {
                match col.get(i).copied().flatten() {
                    Some(v) => write!(out, ",{v:e}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, extra: &[(&str, Vec<Option<f64>>)]) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file, extra)
    }
}

fn potential_phase(u: &mut Field, tau: f64, params: &ModelParams, linear_only: bool) {
    let e = 0.5 * (params.p() - 1.0);
    let grid = u.grid().clone();
    Zip::from(u.values_mut())
        .and(grid.potential())
        .for_each(|z, &pot| {
            let v = if linear_only {
                pot
            } else {
                pot - z.norm_sqr().powf(e)
            };
            *z *= Complex64::from_polar(1.0, -tau * v);
        });
}

/// One Strang step `B(dt/2) A(dt) B(dt/2)`. Negative `dt` runs backwards.
pub fn strang_step(u: &Field, dt: f64, params: &ModelParams, linear_only: bool) -> Result<Field> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} must be nonzero"
        )));
    }
    let mut v = u.clone();
    potential_phase(&mut v, 0.5 * dt, params, linear_only);
    let mut spec = spectral::spectrum(&v);
    Zip::from(&mut spec)
        .and(u.grid().k_squared())
        .for_each(|z, &k2| *z *= Complex64::from_polar(1.0, -dt * k2));
    let mut v = spectral::from_spectrum(&v, spec);
    potential_phase(&mut v, 0.5 * dt, params, linear_only);
    if !v.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(v)
}

/// `min(dt0, c/(1 + max|u|^{p-1}))` with `c = 0.1`.
pub fn adaptive_dt(u: &Field, params: &ModelParams, opts: &EvolveOptions) -> f64 {
    let peak = u.max_abs();
    opts.dt0
        .min(ADAPT_CONSTANT / (1.0 + peak.powf(params.p() - 1.0)))
}

/// Integrates from `u0` until `t_end` or until a monitor halts the run.
///
/// Samples are taken at the exact times `k·sample_every`; step sizes inside a
/// sample interval are equalized so that the last step lands on the sample.
pub fn evolve(u0: &Field, params: &ModelParams, opts: &EvolveOptions) -> Result<TrajectoryRecord> {
    evolve_with_state(u0, params, opts).map(|(record, _)| record)
}

/// Like [`evolve`] but also returns the last state reached.
pub fn evolve_with_state(
    u0: &Field,
    params: &ModelParams,
    opts: &EvolveOptions,
) -> Result<(TrajectoryRecord, Field)> {
    opts.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut record = TrajectoryRecord::new(opts.sample_every);
    let first = Sample::measure(u0, params);
    record.push(0.0, &first);
    if first.boundary > opts.boundary_mass_cap {
        record.status = Status::BoundaryViolation;
        return Ok((record, u0.clone()));
    }
    let grad_limit = opts.grad_blowup_factor * first.grad_sq;
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut k = 1usize;
    while t < opts.t_end {
        let t_next = (k as f64 * opts.sample_every).min(opts.t_end);
        while t < t_next {
            let dt_adapt = adaptive_dt(&u, params, opts);
            if dt_adapt < opts.dt_floor {
                record.status = Status::DtUnderflow;
                push_halt(&mut record, t, &u, params);
                return Ok((record, u));
            }
            let remaining = t_next - t;
            let n = (remaining / dt_adapt).ceil().max(1.0);
            let dt = remaining / n;
            let next = match strang_step(&u, dt, params, opts.linear_only) {
                Ok(v) => v,
                Err(Error::NonFinite) => {
                    record.status = Status::BlowupDetected;
                    push_halt(&mut record, t, &u, params);
                    return Ok((record, u));
                }
                Err(e) => return Err(e),
            };
            u = if opts.dealias {
                spectral::dealias(&next)
            } else {
                next
            };
            record.steps += 1;
            t = if n == 1.0 { t_next } else { t + dt };
            let grad_sq = spectral::gradient_norms_sq(&u).iter().sum::<f64>();
            if grad_sq > grad_limit {
                record.status = Status::BlowupDetected;
                push_halt(&mut record, t, &u, params);
                return Ok((record, u));
            }
            let edge = spectral::boundary_mass(&u, BOUNDARY_MARGIN)?;
            if edge > opts.boundary_mass_cap {
                record.status = Status::BoundaryViolation;
                push_halt(&mut record, t, &u, params);
                return Ok((record, u));
            }
        }
        record.push(t_next, &Sample::measure(&u, params));
        k += 1;
    }
    record.status = Status::Completed;
    Ok((record, u))
}

fn push_halt(record: &mut TrajectoryRecord, t: f64, u: &Field, params: &ModelParams) {
    if t > record.final_time() {
        record.push(t, &Sample::measure(u, params));
    }
}
