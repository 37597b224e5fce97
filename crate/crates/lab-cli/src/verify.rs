//! The property suite behind the `verify` command.
//!
//! Each check reports the worst value seen against its tolerance. Checks on
//! random fields draw from one seeded stream, so a report is reproducible
//! from the config alone.

use std::f64::consts::PI;

use nls_core::diagnostics;
use nls_core::evolve;
use nls_core::functionals::{self, FieldTerms};
use nls_core::ground_state;
use nls_core::samples::SmoothFieldStream;
use nls_core::{Field, Grid, ModelParams};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::run::initial_field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `worst ≤ tolerance`.
    fn at_most(name: &str, worst: f64, tolerance: f64, detail: String) -> Check {
        Check {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn run_suite(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let grid = cfg.build_grid()?;
    let params = cfg.params()?;
    let mut checks = closed_forms()?;
    checks.extend(identities(cfg, &grid, &params)?);
    checks.push(virial_run(cfg, &params)?);
    checks.push(gap_sweep(cfg, &grid, &params)?);
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// The Gaussian `e^{-|x|²/2}` in 2D with `p = 5`, `ω = 1`, whose integrals are
/// elementary: `‖g‖² = π`, `‖∇g‖² = π`, `‖x_2 g‖² = π/2`, `‖g‖_6^6 = π/3`.
fn closed_forms() -> Result<Vec<Check>> {
    let grid = Grid::new(2, &[256, 256], &[16.0, 16.0])?;
    let params = ModelParams::new(2, 5.0, 1.0)?;
    let g = Field::gaussian(&grid, &[1.0, 1.0]);
    let expected = [
        ("energy", 25.0 * PI / 36.0, functionals::energy(&g, &params)),
        ("action", 43.0 * PI / 36.0, functionals::action(&g, &params)),
        ("nehari", 13.0 * PI / 6.0, functionals::nehari(&g, &params)),
        (
            "j_functional",
            5.0 * PI / 6.0,
            functionals::j_functional(&g, &params),
        ),
        (
            "virial_p",
            7.0 * PI / 36.0,
            functionals::virial_p(&g, &params),
        ),
        (
            "nehari_scale",
            7.5f64.powf(0.25),
            functionals::nehari_scale(&g, &params)?,
        ),
        ("moment_f", PI / 2.0, diagnostics::moment_f(&g)),
    ];
    let worst = expected
        .iter()
        .map(|(_, e, got)| ((got - e) / e).abs())
        .fold(0.0, f64::max);
    let detail = expected
        .iter()
        .map(|(n, _, got)| format!("{n}={got:.12}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(vec![Check::at_most(
        "gaussian_closed_forms",
        worst,
        1e-8,
        detail,
    )])
}

fn identities(
    cfg: &ExperimentConfig,
    grid: &std::sync::Arc<Grid>,
    params: &ModelParams,
) -> Result<Vec<Check>> {
    let mut stream = SmoothFieldStream::new(cfg.seed);
    let (mut j1, mut euler, mut nehari, mut virial, mut heis) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..cfg.verify.fields {
        let v = stream.next_field(grid);
        let t = FieldTerms::compute(&v, params.p());
        let q = t.quadratic(params.omega());
        let lhs = t.j_functional(params);
        let rhs = t.action(params) - t.nehari(params) / (params.p() + 1.0);
        j1 = j1.max((lhs - rhs).abs() / q);

        let pairing = functionals::action_gradient(&v, params).inner_real(&v);
        euler = euler.max((pairing - t.nehari(params)).abs() / q);

        let on = v.scaled(functionals::nehari_scale_terms(&t, params)?);
        let s = FieldTerms::compute(&on, params.p());
        nehari = nehari.max(s.nehari(params).abs() / s.quadratic(params.omega()));

        let p = t.virial_p(params);
        let slope = half_dilation_slope(&v, params)?;
        virial = virial.max((p - slope).abs() / p.abs().max(t.grad_transverse()));

        heis = heis.min(functionals::heisenberg_gap(&v));
    }
    let n = cfg.verify.fields;
    Ok(vec![
        Check::at_most(
            "j_identity",
            j1,
            1e-12,
            format!("{n} fields, relative to Q"),
        ),
        Check::at_most(
            "euler_identity",
            euler,
            1e-10,
            format!("{n} fields, relative to Q"),
        ),
        Check::at_most(
            "nehari_projection",
            nehari,
            1e-10,
            format!("{n} fields, relative to Q"),
        ),
        Check::at_most(
            "virial_dilation_slope",
            virial,
            1e-6,
            format!("{n} fields, Richardson difference at h=1e-4"),
        ),
        Check {
            name: "heisenberg_gap".to_string(),
            passed: heis >= -1e-8,
            worst: heis,
            tolerance: -1e-8,
            detail: format!("{n} fields, minimum gap"),
        },
    ])
}

/// `½ d/dλ E(v^λ)` at `λ = 1`: centered differences with one Richardson step.
fn half_dilation_slope(v: &Field, params: &ModelParams) -> Result<f64> {
    let e = |lambda: f64| -> Result<f64> {
        let r = functionals::transverse_rescale(v, lambda)?;
        Ok(functionals::energy(&r.field, params))
    };
    let d = |h: f64| -> Result<f64> { Ok((e(1.0 + h)? - e(1.0 - h)?) / (2.0 * h)) };
    let h = 1e-4;
    Ok(0.5 * (4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

fn virial_run(cfg: &ExperimentConfig, params: &ModelParams) -> Result<Check> {
    let u0 = initial_field(cfg, params)?;
    let opts = evolve::EvolveOptions {
        t_end: cfg.verify.virial_t_end,
        sample_every: cfg.verify.virial_sample_every,
        ..cfg.evolve.clone()
    };
    let record = evolve::evolve(&u0, params, &opts)?;
    let report = diagnostics::virial_check(&record)?;
    Ok(Check::at_most(
        "virial_identity",
        report.rel_residual,
        1e-2,
        format!(
            "{} samples at h={}, status {}, mass drift {:.2e}",
            record.len(),
            opts.sample_every,
            record.status,
            record.mass_drift()
        ),
    ))
}

/// Fields with `P ≤ 0` satisfy the gap inequality against the ground level.
/// Amplitude scaling past the root of `P(cv) = 0` reaches them for every `α`.
fn gap_sweep(
    cfg: &ExperimentConfig,
    grid: &std::sync::Arc<Grid>,
    params: &ModelParams,
) -> Result<Check> {
    if !params.instability_regime() {
        return Ok(Check {
            name: "gap_inequality".to_string(),
            passed: true,
            worst: 0.0,
            tolerance: 0.0,
            detail: "skipped: model outside the instability regime".to_string(),
        });
    }
    let gs = ground_state::solve_ground_state(params, grid, &cfg.ground)?;
    let tol = 1e-6 * gs.level.max(1.0);
    let mut stream = SmoothFieldStream::new(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut worst = f64::INFINITY;
    for _ in 0..cfg.verify.gap_fields {
        let v = stream.next_field(grid);
        let t = FieldTerms::compute(&v, params.p());
        let root = (t.grad_transverse() * (params.p() + 1.0) / (params.alpha() * t.nonlinear))
            .powf(1.0 / (params.p() - 1.0));
        let w = v.scaled(root * stream.uniform(1.0, 2.0));
        worst = worst.min(diagnostics::lemma1_gap(&w, params, gs.level)?);
    }
    Ok(Check {
        name: "gap_inequality".to_string(),
        passed: worst >= -tol,
        worst,
        tolerance: -tol,
        detail: format!("{} fields, d={:.10}", cfg.verify.gap_fields, gs.level),
    })
}
