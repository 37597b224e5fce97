//! Post-processing of trajectories: the transverse virial identity
//! `F'' = 16 P(u)`, membership in the invariant set
//! `B_ω = {S_ω < d(ω), P < 0}`, the gap inequality `d(ω) ≤ S_ω(v) - P(v)`
//! and the concavity bound that caps the blow-up time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Status, TrajectoryRecord};
use crate::field::Field;
use crate::functionals::{FieldTerms, ModelParams};
use crate::ground_state::GroundState;
use crate::spectral;

/// Default slack on the predicted blow-up time.
pub const T_UPPER_SLACK: f64 = 1.1;

/// Relative margin for the strict inequalities defining `B_ω`.
pub const SET_MARGIN: f64 = 1e-12;

/// `F(v) = Σ_{j<N} ∫ x_j² |v|²`.
pub fn moment_f(f: &Field) -> f64 {
    f.grid()
        .transverse_axes()
        .map(|j| spectral::weighted_moment(f, j))
        .sum()
}

/// `F'(t) = 4 Σ_{j<N} Im ∫ conj(u) x_j ∂_j u`, the analytic time derivative of
/// the transverse moment along the flow.
pub fn moment_f_prime(f: &Field) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for j in grid.transverse_axes() {
        let d = spectral::derivative(f, j);
        let x = grid.axis(j).coords();
        for ((idx, u), du) in f.values().indexed_iter().zip(d.values().iter()) {
            acc += x[idx[j]] * (u.conj() * du).im;
        }
    }
    4.0 * acc * grid.cell_volume()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    /// Uniform sample times used.
    pub times: Vec<f64>,
    pub f_series: Vec<f64>,
    /// Times where the five-point stencil fits.
    pub interior_times: Vec<f64>,
    /// Fourth-order centered `F''` at the interior times.
    pub f_second_diff: Vec<f64>,
    /// `16 P(u(t))` at the interior times.
    pub sixteen_p_series: Vec<f64>,
    pub max_residual: f64,
    /// `max_residual / max(1, max|16P|)`.
    pub rel_residual: f64,
}

/// Compares the five-point `F''` with `16 P` on the uniform prefix of `record`.
pub fn virial_check(record: &TrajectoryRecord) -> Result<VirialReport> {
    let n = record.uniform_len();
    if n < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: n });
    }
    let h = record.sample_every;
    let f = &record.moment_f[..n];
    let mut interior_times = Vec::with_capacity(n - 4);
    let mut f_second_diff = Vec::with_capacity(n - 4);
    let mut sixteen_p_series = Vec::with_capacity(n - 4);
    for i in 2..n - 2 {
        let d2 = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2])
            / (12.0 * h * h);
        interior_times.push(record.times[i]);
        f_second_diff.push(d2);
        sixteen_p_series.push(16.0 * record.virial_p_value[i]);
    }
    let max_residual = f_second_diff
        .iter()
        .zip(&sixteen_p_series)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = sixteen_p_series.iter().map(|v| v.abs()).fold(1.0, f64::max);
    Ok(VirialReport {
        times: record.times[..n].to_vec(),
        f_series: f.to_vec(),
        interior_times,
        f_second_diff,
        sixteen_p_series,
        max_residual,
        rel_residual: max_residual / scale,
    })
}

/// Three-point second differences of `F` on the uniform prefix, as
/// `(time, value)` pairs. Each equals a weighted average of `F''` over its
/// window, so it inherits any pointwise upper bound on `F''`.
pub fn second_differences(record: &TrajectoryRecord) -> Vec<(f64, f64)> {
    let n = record.uniform_len();
    let h = record.sample_every;
    let f = &record.moment_f;
    (1..n.saturating_sub(1))
        .map(|i| {
            (
                record.times[i],
                (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h),
            )
        })
        .collect()
}

fn in_set(action: f64, virial: f64, d_level: f64) -> bool {
    let scale = d_level.abs().max(1.0);
    action < d_level - SET_MARGIN * scale && virial < -SET_MARGIN * scale
}

/// `S_ω(f) < d(ω)` and `P(f) < 0`, both with a strict relative margin.
pub fn in_blowup_set(f: &Field, params: &ModelParams, d_level: f64) -> bool {
    let t = FieldTerms::compute(f, params.p());
    in_set(t.action(params), t.virial_p(params), d_level)
}

/// `S_ω(f) - P(f) - d(ω)`, nonnegative whenever `P(f) ≤ 0` in the regime `α ≥ 2`.
pub fn lemma1_gap(f: &Field, params: &ModelParams, d_level: f64) -> Result<f64> {
    if !params.instability_regime() {
        return Err(Error::Precondition(format!(
            "alpha={} < 2: the gap inequality is only claimed for p >= 1 + 4/(N-1)",
            params.alpha()
        )));
    }
    let t = FieldTerms::compute(f, params.p());
    if !(t.mass > 0.0) {
        return Err(Error::Precondition("field is zero".into()));
    }
    let virial = t.virial_p(params);
    if virial > 0.0 {
        return Err(Error::Precondition(format!(
            "P(v)={virial:.3e} is positive"
        )));
    }
    Ok(t.action(params) - virial - d_level)
}

/// Positive root of `f0 + f0'·t + 8·gap·t² = 0`. `F ≥ 0` together with
/// `F'' ≤ 16·gap < 0` forces the solution to stop existing before it.
pub fn tmax_upper_bound(f0: f64, f0_prime: f64, gap: f64) -> Result<f64> {
    if !(gap < 0.0) {
        return Err(Error::Precondition(format!(
            "gap {gap:.3e} is not negative; no blow-up time bound"
        )));
    }
    if !(f0 > 0.0) {
        return Err(Error::Precondition(format!(
            "F(0)={f0:.3e} must be positive"
        )));
    }
    let a = 8.0 * gap;
    let b = f0_prime;
    let c = f0;
    let disc = (b * b - 4.0 * a * c).sqrt();
    Ok(if b >= 0.0 {
        (b + disc) / (-2.0 * a)
    } else {
        2.0 * c / (disc - b)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Valid,
    Invalid,
    /// The run left the box; nothing is claimed.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupCertificate {
    pub s_omega_u0: f64,
    pub d_level: f64,
    pub p_u0: f64,
    pub gap: f64,
    pub f0: f64,
    /// One-sided second-order difference from the first three samples.
    pub f0_prime: f64,
    /// `4 Σ Im ∫ conj(u0) x_j ∂_j u0`, reported as a cross-check.
    pub f0_prime_momentum: f64,
    pub t_upper: Option<f64>,
    pub slack: f64,
    pub halted_at: f64,
    pub status: Status,
    pub in_set_along_flow: bool,
    /// `max_t (ΔF²/h² - 16·gap)` over the uniform interior samples.
    pub max_concavity_excess: f64,
    /// `max grad_sq / grad_sq(0)`.
    pub grad_growth: f64,
    pub verdict: Verdict,
}

impl BlowupCertificate {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }
}

/// Assembles the blow-up certificate for a run started from `u0`.
pub fn certify_blowup(
    u0: &Field,
    params: &ModelParams,
    ground: &GroundState,
    record: &TrajectoryRecord,
) -> Result<BlowupCertificate> {
    certify_blowup_with_slack(u0, params, ground.level, record, T_UPPER_SLACK)
}

pub fn certify_blowup_with_slack(
    u0: &Field,
    params: &ModelParams,
    d_level: f64,
    record: &TrajectoryRecord,
    slack: f64,
) -> Result<BlowupCertificate> {
    let n = record.uniform_len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let terms = FieldTerms::compute(u0, params.p());
    let s0 = terms.action(params);
    let p0 = terms.virial_p(params);
    let gap = s0 - d_level;
    let h = record.sample_every;
    let f = &record.moment_f;
    let f0 = f[0];
    let f0_prime = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    let t_upper = tmax_upper_bound(f0, f0_prime, gap).ok();
    let halted_at = record.final_time();
    let in_set_along_flow = record
        .action_value
        .iter()
        .zip(&record.virial_p_value)
        .all(|(&s, &p)| in_set(s, p, d_level));
    let max_concavity_excess = second_differences(record)
        .iter()
        .map(|(_, d2)| d2 - 16.0 * gap)
        .fold(f64::NEG_INFINITY, f64::max);
    let grad_growth = record.grad_sq.iter().cloned().fold(0.0, f64::max) / record.grad_sq[0];

    let verdict = if record.status == Status::BoundaryViolation {
        Verdict::Inconclusive
    } else {
        let halted_in_time = t_upper.is_some_and(|tu| halted_at <= tu * slack);
        if gap < 0.0 && p0 < 0.0 && record.status.is_blowup() && in_set_along_flow && halted_in_time
        {
            Verdict::Valid
        } else {
            Verdict::Invalid
        }
    };
    Ok(BlowupCertificate {
        s_omega_u0: s0,
        d_level,
        p_u0: p0,
        gap,
        f0,
        f0_prime,
        f0_prime_momentum: moment_f_prime(u0),
        t_upper,
        slack,
        halted_at,
        status: record.status,
        in_set_along_flow,
        max_concavity_excess,
        grad_growth,
        verdict,
    })
}

/// Pointwise `Im(conj(a)·b)` integrated, exposed for tests of the momentum form.
pub fn im_pairing(a: &Field, b: &Field) -> f64 {
    let s: Complex64 = a
        .values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    s.im * a.grid().cell_volume()
}
