//! Command execution and artifacts.
//!
//! Every command writes into `cfg.output`: the resolved `config.toml`, JSON
//! reports of the form `{"config": …, "result": …}`, and where relevant `.fld`
//! snapshots and a trajectory CSV.

use std::fs;
use std::path::{Path, PathBuf};

use nls_core::diagnostics::{self, BlowupCertificate, VirialReport};
use nls_core::evolve::{self, Status, TrajectoryRecord};
use nls_core::field::SnapshotMeta;
use nls_core::ground_state::{self, GroundState, GroundStateCertificate};
use nls_core::{Error as CoreError, Field, ModelParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Command, ExperimentConfig, InitialCondition};
use crate::error::Result;
use crate::verify::{self, VerifyReport};

/// What a command produced; `passed` decides the exit status.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub passed: bool,
    pub dir: PathBuf,
    /// One-line human summary.
    pub headline: String,
}

#[derive(Serialize)]
struct Artifact<'a, T> {
    config: &'a ExperimentConfig,
    result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundReport {
    pub converged: bool,
    pub certificate: GroundStateCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub status: Status,
    pub steps: usize,
    pub final_time: f64,
    pub samples: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// Absent when the run has fewer than five uniform samples.
    pub virial_rel_residual: Option<f64>,
    pub virial_max_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub lambda: f64,
    pub in_blowup_set: bool,
    pub ground: GroundStateCertificate,
    pub certificate: BlowupCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub passed: bool,
    pub dir: PathBuf,
    pub headline: String,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    prepare_dir(cfg)?;
    match cfg.command {
        Command::Ground => run_ground(cfg),
        Command::Evolve => run_evolve(cfg),
        Command::Instability => run_instability(cfg),
        Command::Verify => run_verify(cfg),
        Command::Sweep => run_sweep(cfg),
    }
}

fn prepare_dir(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(())
}

fn write_artifact<T: Serialize>(cfg: &ExperimentConfig, name: &str, result: T) -> Result<PathBuf> {
    let path = cfg.output.join(name);
    let body = serde_json::to_string_pretty(&Artifact {
        config: cfg,
        result,
    })?;
    fs::write(&path, body + "\n")?;
    Ok(path)
}

/// Solves for the ground state, keeping the best iterate when the solver
/// runs out of iterations.
fn solve(cfg: &ExperimentConfig, params: &ModelParams) -> Result<(GroundState, bool)> {
    let grid = cfg.build_grid()?;
    match ground_state::solve_ground_state(params, &grid, &cfg.ground) {
        Ok(gs) => Ok((gs, true)),
        Err(CoreError::NonConvergence { best, .. }) => Ok((*best, false)),
        Err(e) => Err(e.into()),
    }
}

fn save_ground(cfg: &ExperimentConfig, gs: &GroundState) -> Result<()> {
    let meta = SnapshotMeta {
        time: 0.0,
        omega: gs.params.omega(),
        p: gs.params.p(),
    };
    gs.profile
        .write_snapshot(&cfg.output.join("ground.fld"), meta)?;
    Ok(())
}

fn run_ground(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let (gs, converged) = solve(cfg, &params)?;
    save_ground(cfg, &gs)?;
    let certificate = gs.certificate();
    write_artifact(
        cfg,
        "ground.json",
        GroundReport {
            converged,
            certificate,
        },
    )?;
    Ok(Outcome {
        command: Command::Ground,
        passed: converged,
        dir: cfg.output.clone(),
        headline: format!(
            "ground: d={:.12} residual={:.3e} iterations={}{}",
            gs.level,
            gs.residual,
            gs.iterations,
            if converged { "" } else { " (not converged)" }
        ),
    })
}

/// Builds the configured initial datum.
pub fn initial_field(cfg: &ExperimentConfig, params: &ModelParams) -> Result<Field> {
    match &cfg.initial {
        InitialCondition::Gaussian { amplitude, widths } => {
            let grid = cfg.build_grid()?;
            let w = if widths.is_empty() {
                vec![1.0; grid.n_dims()]
            } else {
                widths.clone()
            };
            Ok(Field::gaussian(&grid, &w).scaled(*amplitude))
        }
        InitialCondition::Snapshot { path } => Ok(Field::read_snapshot(path)?.0),
        InitialCondition::Ground { scale } => {
            let grid = cfg.build_grid()?;
            let gs = ground_state::solve_ground_state(params, &grid, &cfg.ground)?;
            Ok(gs.profile.scaled(*scale))
        }
    }
}

/// The trajectory CSV with two extra columns: the three-point second
/// difference of `F` on the uniform samples and `16 P`.
pub fn save_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut f_second_diff = vec![None; record.len()];
    for (i, (_, d2)) in diagnostics::second_differences(record)
        .into_iter()
        .enumerate()
    {
        f_second_diff[i + 1] = Some(d2);
    }
    let sixteen_p = record
        .virial_p_value
        .iter()
        .map(|p| Some(16.0 * p))
        .collect();
    record.save_csv(
        path,
        &[("f_second_diff", f_second_diff), ("sixteen_p", sixteen_p)],
    )?;
    Ok(())
}

fn run_evolve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let u0 = initial_field(cfg, &params)?;
    let (record, u) = evolve::evolve_with_state(&u0, &params, &cfg.evolve)?;
    save_trajectory(&cfg.output.join("trajectory.csv"), &record)?;
    u.write_snapshot(
        &cfg.output.join("final.fld"),
        SnapshotMeta {
            time: record.final_time(),
            omega: params.omega(),
            p: params.p(),
        },
    )?;
    let virial: Option<VirialReport> = diagnostics::virial_check(&record).ok();
    let report = EvolveReport {
        status: record.status,
        steps: record.steps,
        final_time: record.final_time(),
        samples: record.len(),
        mass_drift: record.mass_drift(),
        energy_drift: record.energy_drift(),
        virial_rel_residual: virial.as_ref().map(|v| v.rel_residual),
        virial_max_residual: virial.as_ref().map(|v| v.max_residual),
    };
    write_artifact(cfg, "evolve.json", &report)?;
    Ok(Outcome {
        command: Command::Evolve,
        // a run that leaves the box has no trustworthy monitors
        passed: record.status != Status::BoundaryViolation,
        dir: cfg.output.clone(),
        headline: format!(
            "evolve: {} at t={} after {} steps, mass drift {:.2e}, energy drift {:.2e}",
            record.status, report.final_time, record.steps, report.mass_drift, report.energy_drift
        ),
    })
}

fn run_instability(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let (gs, converged) = solve(cfg, &params)?;
    save_ground(cfg, &gs)?;
    if !converged {
        write_artifact(
            cfg,
            "ground.json",
            GroundReport {
                converged,
                certificate: gs.certificate(),
            },
        )?;
        return Ok(Outcome {
            command: Command::Instability,
            passed: false,
            dir: cfg.output.clone(),
            headline: format!(
                "instability: ground state did not converge (residual {:.3e})",
                gs.residual
            ),
        });
    }
    let lambda = cfg.instability.lambda;
    let u0 = gs.profile.scaled(lambda);
    let in_set = diagnostics::in_blowup_set(&u0, &params, gs.level);
    let record = evolve::evolve(&u0, &params, &cfg.evolve)?;
    save_trajectory(&cfg.output.join("trajectory.csv"), &record)?;
    let certificate = diagnostics::certify_blowup(&u0, &params, &gs, &record)?;
    let passed = in_set && certificate.is_valid();
    let headline = format!(
        "instability: λ={lambda} certificate {:?}, {} at t={} (t_upper {}), grad growth {:.1}×",
        certificate.verdict,
        certificate.status,
        certificate.halted_at,
        certificate
            .t_upper
            .map_or("none".to_string(), |t| format!("{t:.6}")),
        certificate.grad_growth
    );
    write_artifact(
        cfg,
        "certificate.json",
        InstabilityReport {
            lambda,
            in_blowup_set: in_set,
            ground: gs.certificate(),
            certificate,
        },
    )?;
    Ok(Outcome {
        command: Command::Instability,
        passed,
        dir: cfg.output.clone(),
        headline,
    })
}

fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let report: VerifyReport = verify::run_suite(cfg)?;
    write_artifact(cfg, "verify_report.json", &report)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    Ok(Outcome {
        command: Command::Verify,
        passed: report.passed,
        dir: cfg.output.clone(),
        headline: if failed.is_empty() {
            format!("verify: all {} checks passed", report.checks.len())
        } else {
            format!("verify: failed {}", failed.join(", "))
        },
    })
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let points = cfg
        .sweep
        .values
        .iter()
        .map(|&v| Ok((v, cfg.sweep_point(v)?)))
        .collect::<Result<Vec<_>>>()?;
    let entries: Vec<SweepEntry> = points
        .par_iter()
        .map(|(value, point)| match run(point) {
            Ok(o) => SweepEntry {
                value: *value,
                passed: o.passed,
                dir: o.dir,
                headline: o.headline,
            },
            Err(e) => SweepEntry {
                value: *value,
                passed: false,
                dir: point.output.clone(),
                headline: format!("error: {e}"),
            },
        })
        .collect();
    write_artifact(cfg, "sweep.json", &entries)?;
    let n_passed = entries.iter().filter(|e| e.passed).count();
    Ok(Outcome {
        command: Command::Sweep,
        passed: n_passed == entries.len(),
        dir: cfg.output.clone(),
        headline: format!(
            "sweep over {:?}: {n_passed}/{} passed",
            cfg.sweep.parameter,
            entries.len()
        ),
    })
}
