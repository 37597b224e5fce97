//! Energy, action, Nehari and virial functionals of the partially confined NLS
//!
//! ```text
//! i∂_t u = -Δu + x_N² u - |u|^{p-1} u
//! ```
//!
//! All of them are assembled from the same handful of quadratures collected
//! in [`FieldTerms`]: per-axis `‖∂_j v‖²`, `‖v‖²`, `‖x_N v‖²` and
//! `‖v‖_{p+1}^{p+1}`.

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::spectral;

/// Model exponent, frequency and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    n_dims: usize,
    p: f64,
    omega: f64,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n_dims: usize,
    p: f64,
    omega: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.n_dims, r.p, r.omega)
    }
}

impl From<ModelParams> for RawParams {
    fn from(m: ModelParams) -> Self {
        RawParams {
            n_dims: m.n_dims,
            p: m.p,
            omega: m.omega,
        }
    }
}

impl ModelParams {
    /// Validates `N ≥ 2`, `1 < p < 1 + 4/(N-2)` (no upper bound for `N = 2`)
    /// and `ω > -1`.
    pub fn new(n_dims: usize, p: f64, omega: f64) -> Result<ModelParams> {
        if n_dims < 2 {
            return Err(Error::InvalidParams(format!(
                "dimension N={n_dims} must be at least 2"
            )));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParams(format!(
                "exponent p={p} must exceed 1"
            )));
        }
        if n_dims >= 3 {
            let upper = 1.0 + 4.0 / (n_dims as f64 - 2.0);
            if p >= upper {
                return Err(Error::InvalidParams(format!(
                    "exponent p={p} must be below the energy-critical bound {upper} for N={n_dims}"
                )));
            }
        }
        if !(omega.is_finite() && omega > -1.0) {
            return Err(Error::InvalidParams(format!(
                "frequency omega={omega} must exceed -1"
            )));
        }
        Ok(ModelParams {
            n_dims,
            p,
            omega,
            alpha: (n_dims as f64 - 1.0) * (p - 1.0) / 2.0,
        })
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `α = (N-1)(p-1)/2`, the homogeneity of `‖v^λ‖_{p+1}^{p+1}` in λ.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `p ≥ 1 + 4/(N-1)`, equivalently `α ≥ 2`.
    pub fn instability_regime(&self) -> bool {
        self.p >= 1.0 + 4.0 / (self.n_dims as f64 - 1.0)
    }

    pub fn with_omega(&self, omega: f64) -> Result<ModelParams> {
        ModelParams::new(self.n_dims, self.p, omega)
    }

    fn check(&self, f: &Field) {
        assert_eq!(
            f.grid().n_dims(),
            self.n_dims,
            "field dimension does not match model dimension"
        );
    }
}

/// The quadratures every functional is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTerms {
    /// `‖∂_j v‖²` per axis.
    pub grad_sq: Vec<f64>,
    /// `‖v‖²`.
    pub mass: f64,
    /// `‖x_N v‖²`.
    pub confined_moment: f64,
    /// `‖v‖_{p+1}^{p+1}`.
    pub nonlinear: f64,
}

impl FieldTerms {
    pub fn compute(f: &Field, p: f64) -> FieldTerms {
        let grid = f.grid();
        FieldTerms {
            grad_sq: spectral::gradient_norms_sq(f),
            mass: spectral::lp_norm_pp(f, 2.0).expect("q = 2"),
            confined_moment: spectral::weighted_moment(f, grid.confined_axis()),
            nonlinear: spectral::lp_norm_pp(f, p + 1.0).expect("p > 1"),
        }
    }

    pub fn grad_total(&self) -> f64 {
        self.grad_sq.iter().sum()
    }

    /// `Σ_{j<N} ‖∂_j v‖²`.
    pub fn grad_transverse(&self) -> f64 {
        self.grad_sq[..self.grad_sq.len() - 1].iter().sum()
    }

    pub fn grad_confined(&self) -> f64 {
        *self.grad_sq.last().unwrap()
    }

    /// `‖∇v‖² + ‖x_N v‖² + ω‖v‖²`.
    pub fn quadratic(&self, omega: f64) -> f64 {
        self.grad_total() + self.confined_moment + omega * self.mass
    }

    pub fn x_norm_sq(&self) -> f64 {
        self.grad_total() + self.mass + self.confined_moment
    }

    pub fn energy(&self, p: f64) -> f64 {
        0.5 * self.grad_total() + 0.5 * self.confined_moment - self.nonlinear / (p + 1.0)
    }

    pub fn action(&self, params: &ModelParams) -> f64 {
        self.energy(params.p) + 0.5 * params.omega * self.mass
    }

    pub fn nehari(&self, params: &ModelParams) -> f64 {
        self.quadratic(params.omega) - self.nonlinear
    }

    pub fn j_functional(&self, params: &ModelParams) -> f64 {
        let p = params.p;
        (p - 1.0) / (2.0 * (p + 1.0)) * self.quadratic(params.omega)
    }

    pub fn virial_p(&self, params: &ModelParams) -> f64 {
        0.5 * self.grad_transverse() - params.alpha / (2.0 * (params.p + 1.0)) * self.nonlinear
    }
}

/// `‖v‖_X² = ‖∇v‖² + ‖v‖² + ‖x_N v‖²`.
pub fn x_norm_sq(f: &Field) -> f64 {
    FieldTerms::compute(f, 2.0).x_norm_sq()
}

pub fn energy(f: &Field, params: &ModelParams) -> f64 {
    params.check(f);
    FieldTerms::compute(f, params.p).energy(params.p)
}

/// `S_ω(v) = E(v) + (ω/2)‖v‖²`.
pub fn action(f: &Field, params: &ModelParams) -> f64 {
    params.check(f);
    FieldTerms::compute(f, params.p).action(params)
}

/// `K_ω(v) = ∂_λ S_ω(λv)|_{λ=1}`.
pub fn nehari(f: &Field, params: &ModelParams) -> f64 {
    params.check(f);
    FieldTerms::compute(f, params.p).nehari(params)
}

/// `J_ω(v) = S_ω(v) - K_ω(v)/(p+1)`, evaluated through its quadratic closed form.
pub fn j_functional(f: &Field, params: &ModelParams) -> f64 {
    params.check(f);
    FieldTerms::compute(f, params.p).j_functional(params)
}

/// `P(v) = ½ Σ_{j<N} ‖∂_j v‖² - α/(2(p+1)) ‖v‖_{p+1}^{p+1}`.
pub fn virial_p(f: &Field, params: &ModelParams) -> f64 {
    params.check(f);
    FieldTerms::compute(f, params.p).virial_p(params)
}

/// `|v|^{p-1} v` pointwise.
pub fn nonlinearity(f: &Field, p: f64) -> Field {
    let e = 0.5 * (p - 1.0);
    f.with_values(f.values().mapv(|z| z * z.norm_sqr().powf(e)))
}

/// `S_ω'(v) = -Δv + x_N² v + ωv - |v|^{p-1} v`.
pub fn action_gradient(f: &Field, params: &ModelParams) -> Field {
    params.check(f);
    let mut out = spectral::laplacian(f);
    let e = 0.5 * (params.p - 1.0);
    let omega = params.omega;
    Zip::from(out.values_mut())
        .and(f.values())
        .and(f.grid().potential())
        .for_each(|g, &v, &pot| {
            *g = -*g + v * (pot + omega - v.norm_sqr().powf(e));
        });
    out
}

/// λ₀ > 0 with `K_ω(λ₀ v) = 0`: `λ₀ = (Q/‖v‖_{p+1}^{p+1})^{1/(p-1)}`.
pub fn nehari_scale(f: &Field, params: &ModelParams) -> Result<f64> {
    params.check(f);
    nehari_scale_terms(&FieldTerms::compute(f, params.p), params)
}

pub fn nehari_scale_terms(t: &FieldTerms, params: &ModelParams) -> Result<f64> {
    if !(t.nonlinear > 0.0) {
        return Err(Error::NoNehariIntersection(
            "field has zero L^{p+1} norm".into(),
        ));
    }
    let q = t.quadratic(params.omega);
    if !(q > 0.0) {
        return Err(Error::NoNehariIntersection(format!(
            "quadratic part {q:.3e} is not positive"
        )));
    }
    Ok((q / t.nonlinear).powf(1.0 / (params.p - 1.0)))
}

/// Boundary mass (relative to total mass) above which a rescaled field is flagged.
pub const RESCALE_BOUNDARY_TOL: f64 = 1e-10;

/// Result of a transverse dilation.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub field: Field,
    /// Set when the dilated field reaches the edge of the box.
    pub boundary_warning: bool,
}

/// `v^λ(x) = λ^{(N-1)/2} v(λx_1, …, λx_{N-1}, x_N)` by Fourier interpolation.
pub fn transverse_rescale(f: &Field, lambda: f64) -> Result<Rescaled> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scaling factor {lambda} must be positive"
        )));
    }
    if lambda == 1.0 {
        return Ok(Rescaled {
            field: f.clone(),
            boundary_warning: false,
        });
    }
    let n_transverse = (f.grid().n_dims() - 1) as f64;
    let mut field = spectral::resample_transverse(f, lambda);
    field.scale_mut(lambda.powf(0.5 * n_transverse));
    let edge = spectral::boundary_mass(&field, 0.05)?;
    let mass = spectral::lp_norm_pp(&field, 2.0)?;
    Ok(Rescaled {
        boundary_warning: edge > RESCALE_BOUNDARY_TOL * mass.max(f64::MIN_POSITIVE),
        field,
    })
}

/// `2‖∂_N v‖·‖x_N v‖ - ‖v‖²`, nonnegative by Heisenberg's inequality.
pub fn heisenberg_gap(f: &Field) -> f64 {
    let t = FieldTerms::compute(f, 2.0);
    2.0 * t.grad_confined().sqrt() * t.confined_moment.sqrt() - t.mass
}

/// `λ ↦ S_ω(λv)` from the terms of `v`.
pub fn action_on_ray(t: &FieldTerms, params: &ModelParams, lambda: f64) -> f64 {
    0.5 * lambda * lambda * t.quadratic(params.omega)
        - lambda.powf(params.p + 1.0) * t.nonlinear / (params.p + 1.0)
}

/// Multiplies by a constant phase.
pub fn gauge(f: &Field, theta: f64) -> Field {
    f.phase_rotated(theta)
}
