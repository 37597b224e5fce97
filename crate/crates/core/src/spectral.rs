//! Spectral differentiation, quadrature and shifts on periodic fields.
//!
//! Quadrature is the uniform-weight rectangle rule, which is exact for the
//! trigonometric polynomials the FFT represents. The kinetic quadratic form
//! keeps the Nyquist mode (`k² > 0` there) so that `⟨-Δf, f⟩ = Σ k²|f̂|²`
//! holds exactly; odd derivatives drop it.

use ndarray::{ArrayD, Axis, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, GridAxis};

fn fft_along(data: &mut ArrayD<Complex64>, axis: usize, meta: &GridAxis, inverse: bool) {
    let plan = if inverse {
        meta.inverse()
    } else {
        meta.forward()
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); meta.points];
    for mut lane in data.lanes_mut(Axis(axis)) {
        if let Some(slice) = lane.as_slice_mut() {
            plan.process_with_scratch(slice, &mut scratch);
        } else {
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for (v, b) in lane.iter_mut().zip(&buf) {
                *v = *b;
            }
        }
    }
    if inverse {
        let s = 1.0 / meta.points as f64;
        data.mapv_inplace(|z| z * s);
    }
}

/// Forward DFT over the listed axes, in place.
pub fn forward_axes(
    grid: &Grid,
    data: &mut ArrayD<Complex64>,
    axes: impl IntoIterator<Item = usize>,
) {
    for j in axes {
        fft_along(data, j, grid.axis(j), false);
    }
}

/// Normalized inverse DFT over the listed axes, in place.
pub fn inverse_axes(
    grid: &Grid,
    data: &mut ArrayD<Complex64>,
    axes: impl IntoIterator<Item = usize>,
) {
    for j in axes {
        fft_along(data, j, grid.axis(j), true);
    }
}

/// Unnormalized DFT coefficients of `f` over all axes.
pub fn spectrum(f: &Field) -> ArrayD<Complex64> {
    let mut data = f.values().clone();
    forward_axes(f.grid(), &mut data, 0..f.grid().n_dims());
    data
}

/// Field with the given DFT coefficients.
pub fn from_spectrum(template: &Field, mut data: ArrayD<Complex64>) -> Field {
    inverse_axes(template.grid(), &mut data, 0..template.grid().n_dims());
    template.with_values(data)
}

/// `Σ |f|^q · ΔV`.
pub fn lp_norm_pp(f: &Field, q: f64) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent q={q} must be >= 1"
        )));
    }
    let sum: f64 = if q == 2.0 {
        f.values().iter().map(|z| z.norm_sqr()).sum()
    } else {
        let half = 0.5 * q;
        f.values().iter().map(|z| z.norm_sqr().powf(half)).sum()
    };
    Ok(sum * f.grid().cell_volume())
}

/// `Σ_k |f̂_k|²` scaled so that it equals `‖f‖²` by Parseval.
pub fn spectral_mass(grid: &Grid, spec: &ArrayD<Complex64>) -> f64 {
    let sum: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    sum * grid.cell_volume() / grid.len() as f64
}

/// Per-axis `‖∂_j f‖²` from precomputed coefficients.
pub fn gradient_norms_sq_spec(grid: &Grid, spec: &ArrayD<Complex64>) -> Vec<f64> {
    let norm = grid.cell_volume() / grid.len() as f64;
    (0..grid.n_dims())
        .map(|j| {
            let k = grid.axis(j).wavenumbers();
            let mut acc = 0.0;
            for lane in spec.lanes(Axis(j)) {
                for (z, kj) in lane.iter().zip(k) {
                    acc += kj * kj * z.norm_sqr();
                }
            }
            acc * norm
        })
        .collect()
}

/// Per-axis `‖∂_j f‖²` by spectral differentiation.
pub fn gradient_norms_sq(f: &Field) -> Vec<f64> {
    gradient_norms_sq_spec(f.grid(), &spectrum(f))
}

/// `Σ x_axis² |f|² ΔV` with coordinates relative to the box center.
pub fn weighted_moment(f: &Field, axis: usize) -> f64 {
    let grid = f.grid();
    assert!(axis < grid.n_dims(), "axis {axis} out of range");
    let x = grid.axis(axis).coords();
    let mut acc = 0.0;
    for lane in f.values().lanes(Axis(axis)) {
        for (z, xm) in lane.iter().zip(x) {
            acc += xm * xm * z.norm_sqr();
        }
    }
    acc * grid.cell_volume()
}

/// `Σ x_axis |f|² ΔV`.
pub fn first_moment(f: &Field, axis: usize) -> f64 {
    let grid = f.grid();
    let x = grid.axis(axis).coords();
    let mut acc = 0.0;
    for lane in f.values().lanes(Axis(axis)) {
        for (z, xm) in lane.iter().zip(x) {
            acc += xm * z.norm_sqr();
        }
    }
    acc * grid.cell_volume()
}

/// Spectral Laplacian `F⁻¹[-|k|² f̂]`.
pub fn laplacian(f: &Field) -> Field {
    let mut spec = spectrum(f);
    Zip::from(&mut spec)
        .and(f.grid().k_squared())
        .for_each(|z, &k2| *z *= -k2);
    from_spectrum(f, spec)
}

/// First derivative along `axis`; the Nyquist coefficient is dropped.
pub fn derivative(f: &Field, axis: usize) -> Field {
    let grid = f.grid();
    let meta = grid.axis(axis);
    let mut data = f.values().clone();
    fft_along(&mut data, axis, meta, false);
    let nyq = meta.nyquist_index();
    for mut lane in data.lanes_mut(Axis(axis)) {
        for (m, (z, k)) in lane.iter_mut().zip(meta.wavenumbers()).enumerate() {
            *z = if m == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                *z * Complex64::new(0.0, *k)
            };
        }
    }
    fft_along(&mut data, axis, meta, true);
    f.with_values(data)
}

/// Periodic shift `f(x - y)` on the transverse axes, applied as a Fourier
/// phase. `offsets` has one entry per transverse axis.
pub fn translate(f: &Field, offsets: &[f64]) -> Result<Field> {
    let grid = f.grid();
    let n_transverse = grid.n_dims() - 1;
    if offsets.len() != n_transverse {
        return Err(Error::ConfinedAxisOffset {
            transverse: n_transverse,
            given: offsets.len(),
        });
    }
    let mut data = f.values().clone();
    for (j, &y) in offsets.iter().enumerate() {
        if y == 0.0 {
            continue;
        }
        let meta = grid.axis(j);
        let nyq = meta.nyquist_index();
        // the Nyquist mode is shifted as a cosine so real fields stay real
        let phase: Vec<Complex64> = meta
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(m, &k)| {
                if m == nyq {
                    Complex64::new((k * y).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, -k * y)
                }
            })
            .collect();
        fft_along(&mut data, j, meta, false);
        for mut lane in data.lanes_mut(Axis(j)) {
            for (z, e) in lane.iter_mut().zip(&phase) {
                *z *= e;
            }
        }
        fft_along(&mut data, j, meta, true);
    }
    Ok(f.with_values(data))
}

/// Largest per-axis L² mass in the outer shell of the box. The shell covers
/// `round(margin_fraction·n)` points at each end of the axis.
pub fn boundary_mass(f: &Field, margin_fraction: f64) -> Result<f64> {
    if !(margin_fraction > 0.0 && margin_fraction < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "margin fraction {margin_fraction} must lie in (0, 0.5)"
        )));
    }
    let grid = f.grid();
    let mut worst: f64 = 0.0;
    for j in 0..grid.n_dims() {
        let n = grid.axis(j).points;
        let c = ((margin_fraction * n as f64).round() as usize).max(1);
        let mut acc = 0.0;
        for lane in f.values().lanes(Axis(j)) {
            for (m, z) in lane.iter().enumerate() {
                if m < c || m >= n - c {
                    acc += z.norm_sqr();
                }
            }
        }
        worst = worst.max(acc * grid.cell_volume());
    }
    Ok(worst)
}

/// 2/3-rule filter: zeroes every mode with `|m| > n/3` on any axis.
pub fn dealias(f: &Field) -> Field {
    let grid = f.grid();
    let mut spec = spectrum(f);
    for j in 0..grid.n_dims() {
        let n = grid.axis(j).points as i64;
        for mut lane in spec.lanes_mut(Axis(j)) {
            for (m, z) in lane.iter_mut().enumerate() {
                let signed = if (m as i64) < n / 2 {
                    m as i64
                } else {
                    m as i64 - n
                };
                if 3 * signed.abs() > n {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    from_spectrum(f, spec)
}

/// Trigonometric interpolation kernel: the value at `x` of the band-limited
/// interpolant of a unit sample at `0` on an `n`-point lattice of period `2L`.
/// The Nyquist mode enters as a cosine.
fn dirichlet_kernel(n: usize, half_length: f64, d: f64) -> f64 {
    let theta = std::f64::consts::PI * d / half_length;
    let half = n / 2;
    let s = (0.5 * theta).sin();
    let core = if s.abs() > 1e-6 {
        // Σ_{|q|<n/2} e^{iqθ}
        ((n as f64 - 1.0) * 0.5 * theta).sin() / s
    } else {
        let mut acc = 1.0;
        for q in 1..half {
            acc += 2.0 * (q as f64 * theta).cos();
        }
        acc
    };
    (core + (half as f64 * theta).cos()) / n as f64
}

/// Resamples `f` at `(λ x_1, …, λ x_{N-1}, x_N)` by Fourier interpolation on
/// the transverse axes. Fields are taken to vanish outside the box, so points
/// with `|λx| > L` are set to zero rather than read from the periodic image.
pub fn resample_transverse(f: &Field, lambda: f64) -> Field {
    let grid = f.grid();
    let mut data = f.values().clone();
    for j in grid.transverse_axes() {
        let meta = grid.axis(j);
        let n = meta.points;
        let x = meta.coords();
        let mut matrix = vec![0.0; n * n];
        for m in 0..n {
            let target = lambda * x[m];
            if target.abs() > meta.half_length {
                continue;
            }
            for i in 0..n {
                matrix[m * n + i] = dirichlet_kernel(n, meta.half_length, target - x[i]);
            }
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for mut lane in data.lanes_mut(Axis(j)) {
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            for (m, out) in lane.iter_mut().enumerate() {
                let row = &matrix[m * n..(m + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for (w, b) in row.iter().zip(&buf) {
                    acc += b * w;
                }
                *out = acc;
            }
        }
    }
    f.with_values(data)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;

    fn grid2(n: usize, l: f64) -> Arc<Grid> {
        Grid::new(2, &[n, n], &[l, l]).unwrap()
    }

    fn gauss(g: &Arc<Grid>) -> Field {
        Field::gaussian(g, &[1.0, 1.0])
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gaussian_quadrature_closed_forms() {
        let g = grid2(256, 16.0);
        let f = gauss(&g);
        assert!(rel(lp_norm_pp(&f, 2.0).unwrap(), PI) < 1e-10);
        assert!(rel(lp_norm_pp(&f, 6.0).unwrap(), PI / 3.0) < 1e-10);
        let grad = gradient_norms_sq(&f);
        assert!(rel(grad[0], PI / 2.0) < 1e-10);
        assert!(rel(grad[1], PI / 2.0) < 1e-10);
        assert!(rel(weighted_moment(&f, 0), PI / 2.0) < 1e-10);
        assert!(rel(weighted_moment(&f, 1), PI / 2.0) < 1e-10);
    }

    #[test]
    fn smaller_box_is_tail_limited() {
        let g = grid2(256, 8.0);
        let f = gauss(&g);
        assert!(rel(lp_norm_pp(&f, 2.0).unwrap(), PI) < 1e-8);
        assert!(rel(gradient_norms_sq(&f)[0], PI / 2.0) < 1e-8);
        assert!(rel(weighted_moment(&f, 1), PI / 2.0) < 1e-8);
    }

    #[test]
    fn zero_field_and_bad_exponent() {
        let g = grid2(16, 4.0);
        let z = Field::zeros(&g);
        assert_eq!(lp_norm_pp(&z, 2.0).unwrap(), 0.0);
        assert_eq!(weighted_moment(&z, 0), 0.0);
        assert!(laplacian(&z).is_zero());
        assert!(lp_norm_pp(&z, 0.5).is_err());
        assert!(lp_norm_pp(&z, f64::NAN).is_err());
    }

    #[test]
    fn constant_has_no_gradient() {
        let g = grid2(32, 4.0);
        let c = Field::from_real_fn(&g, |_| 1.0);
        let grad = gradient_norms_sq(&c);
        assert!(grad[0].abs() < 1e-24);
        assert!(grad[1].abs() < 1e-24);
    }

    #[test]
    fn plane_wave_gradient_shift() {
        let g = grid2(256, 16.0);
        let k = 5.0 * PI / 16.0;
        let f = Field::from_fn(&g, |x| {
            Complex64::from_polar((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), k * x[0])
        });
        let grad = gradient_norms_sq(&f);
        assert!(rel(grad[0], PI / 2.0 + k * k * PI) < 1e-10);
        assert!(rel(grad[1], PI / 2.0) < 1e-10);
    }

    #[test]
    fn laplacian_of_plane_wave_and_gaussian() {
        let g = grid2(64, 8.0);
        let k = 3.0 * PI / 8.0;
        let f = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let lap = laplacian(&f);
        assert!(lap.max_abs_diff(&f.scaled(-k * k)) < 1e-12);

        let g = grid2(256, 16.0);
        let f = gauss(&g);
        let expect = Field::from_real_fn(&g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (r2 - 2.0) * (-r2 / 2.0).exp()
        });
        assert!(laplacian(&f).max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn parseval() {
        let g = grid2(64, 6.0);
        let f = Field::from_fn(&g, |x| {
            Complex64::new((x[0] - 0.3).cos() * (-x[1] * x[1]).exp(), 0.2 * x[1].sin())
        });
        let direct = lp_norm_pp(&f, 2.0).unwrap();
        let via = spectral_mass(&g, &spectrum(&f));
        assert!(rel(via, direct) < 1e-12);
    }

    #[test]
    fn translate_identity_inverse_and_isometry() {
        let g = grid2(128, 14.0);
        let f = Field::gaussian(&g, &[1.3, 0.9]).phase_rotated(0.4);
        assert_eq!(translate(&f, &[0.0]).unwrap().values(), f.values());
        let y = 1.37;
        let there = translate(&f, &[y]).unwrap();
        let back = translate(&there, &[-y]).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-13);
        let m0 = lp_norm_pp(&f, 2.0).unwrap();
        assert!(rel(lp_norm_pp(&there, 2.0).unwrap(), m0) < 1e-12);
        // shifted Gaussian sampled directly
        let direct = Field::from_real_fn(&g, |x| {
            (-((x[0] - y) / 1.3).powi(2) / 2.0 - (x[1] / 0.9).powi(2) / 2.0).exp()
        })
        .phase_rotated(0.4);
        assert!(there.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn translate_rejects_confined_offsets() {
        let g = grid2(16, 4.0);
        let f = Field::zeros(&g);
        assert!(matches!(
            translate(&f, &[1.0, 1.0]),
            Err(Error::ConfinedAxisOffset { .. })
        ));
    }

    #[test]
    fn boundary_mass_examples() {
        let g = grid2(256, 16.0);
        assert!(boundary_mass(&gauss(&g), 0.1).unwrap() < 1e-30);
        // 80 points: an 8-point shell on each side is exactly 20%
        let g = grid2(80, 5.0);
        let one = Field::from_real_fn(&g, |_| 1.0);
        let total = lp_norm_pp(&one, 2.0).unwrap();
        assert!(rel(boundary_mass(&one, 0.1).unwrap(), 0.2 * total) < 1e-12);
        assert_eq!(boundary_mass(&Field::zeros(&g), 0.1).unwrap(), 0.0);
        assert!(boundary_mass(&one, 0.5).is_err());
        assert!(boundary_mass(&one, 0.0).is_err());
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid2(64, PI);
        let f = Field::from_real_fn(&g, |x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let d = derivative(&f, 0);
        let expect = Field::from_real_fn(&g, |x| 3.0 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos());
        assert!(d.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn dealias_keeps_low_modes() {
        let g = grid2(48, PI);
        let low = Field::from_real_fn(&g, |x| (5.0 * x[0]).cos() + (3.0 * x[1]).sin());
        assert!(dealias(&low).max_abs_diff(&low) < 1e-12);
        let high = Field::from_real_fn(&g, |x| (20.0 * x[0]).cos());
        assert!(dealias(&high).max_abs() < 1e-12);
    }

    #[test]
    fn resample_matches_analytic_dilation() {
        let g = grid2(128, 12.0);
        let f = Field::gaussian(&g, &[1.0, 1.0]);
        for lambda in [1.0, 0.7, 1.9] {
            let r = resample_transverse(&f, lambda);
            let expect = Field::from_real_fn(&g, |x| {
                (-(lambda * x[0]).powi(2) / 2.0 - x[1] * x[1] / 2.0).exp()
            });
            assert!(r.max_abs_diff(&expect) < 1e-12, "lambda={lambda}");
        }
    }
}
