//! Complex fields on a [`Grid`] and the `.fld` snapshot format.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A complex amplitude per grid point.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: ArrayD<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: grid.clone(),
            values: ArrayD::zeros(IxDyn(grid.shape())),
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: ArrayD<Complex64>) -> Result<Field> {
        if values.shape() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape().to_vec(),
                found: values.shape().to_vec(),
            });
        }
        Ok(Field {
            grid: grid.clone(),
            values: values.as_standard_layout().into_owned(),
        })
    }

    /// Samples `f(x)` at every grid point; `x` holds one coordinate per axis.
    pub fn from_fn<F>(grid: &Arc<Grid>, mut f: F) -> Field
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        let mut x = vec![0.0; grid.n_dims()];
        let values = ArrayD::from_shape_fn(IxDyn(grid.shape()), |idx| {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj = grid.axis(j).coords()[idx[j]];
            }
            f(&x)
        });
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real_fn<F>(grid: &Arc<Grid>, mut f: F) -> Field
    where
        F: FnMut(&[f64]) -> f64,
    {
        Field::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Product Gaussian `exp(-Σ x_j²/(2 w_j²))`.
    pub fn gaussian(grid: &Arc<Grid>, widths: &[f64]) -> Field {
        assert_eq!(widths.len(), grid.n_dims(), "one width per axis");
        Field::from_real_fn(grid, |x| {
            let r2: f64 = x
                .iter()
                .zip(widths)
                .map(|(xj, w)| (xj / w) * (xj / w))
                .sum();
            (-0.5 * r2).exp()
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> ArrayD<Complex64> {
        self.values
    }

    pub fn with_values(&self, values: ArrayD<Complex64>) -> Field {
        debug_assert_eq!(values.shape(), self.grid.shape());
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.with_values(self.values.mapv(|z| z * c))
    }

    pub fn scale_mut(&mut self, c: f64) {
        self.values.mapv_inplace(|z| z * c);
    }

    pub fn phase_rotated(&self, theta: f64) -> Field {
        let e = Complex64::from_polar(1.0, theta);
        self.with_values(self.values.mapv(|z| z * e))
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        Zip::from(&mut self.values)
            .and(&other.values)
            .for_each(|u, &v| *u += v * a);
    }

    pub fn add(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Pointwise product with a real weight depending on the coordinates.
    pub fn weighted<F>(&self, mut w: F) -> Field
    where
        F: FnMut(&[f64]) -> f64,
    {
        let weights = Field::from_real_fn(&self.grid, &mut w);
        let mut out = self.clone();
        Zip::from(&mut out.values)
            .and(&weights.values)
            .for_each(|u, &c| *u *= c.re);
        out
    }

    /// Real duality pairing `Re ∫ f·conj(h)`.
    pub fn inner_real(&self, other: &Field) -> f64 {
        let mut acc = 0.0;
        Zip::from(&self.values)
            .and(&other.values)
            .for_each(|a, b| acc += a.re * b.re + a.im * b.im);
        acc * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn l2_distance(&self, other: &Field) -> f64 {
        self.sub(other).l2_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        let mut m: f64 = 0.0;
        Zip::from(&self.values)
            .and(&other.values)
            .for_each(|a, b| m = m.max((a - b).norm()));
        m
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Drops the imaginary part.
    pub fn real_part(&self) -> Field {
        self.with_values(self.values.mapv(|z| Complex64::new(z.re, 0.0)))
    }

    pub fn imag_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.im * z.im).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn value_at(&self, idx: &[usize]) -> Complex64 {
        self.values[IxDyn(idx)]
    }

    /// Index of the grid point closest to the origin.
    pub fn origin_index(&self) -> Vec<usize> {
        self.grid.shape().iter().map(|&n| n / 2).collect()
    }

    /// Writes `<path>` (raw little-endian interleaved re/im `f64`, row-major)
    /// and the `<path>.json` sidecar.
    pub fn write_snapshot(&self, path: &Path, meta: SnapshotMeta) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for z in self.values.iter() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()?;
        let header = SnapshotHeader {
            n_dims: self.grid.n_dims(),
            points: self.grid.points(),
            half_lengths: self.grid.half_lengths(),
            time: meta.time,
            omega: meta.omega,
            p: meta.p,
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }

    /// Reads a snapshot and the grid it was written on.
    pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotHeader)> {
        let header: SnapshotHeader = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let grid = Grid::new(header.n_dims, &header.points, &header.half_lengths)?;
        let bytes = fs::read(path)?;
        let n = grid.len();
        if bytes.len() != 16 * n {
            return Err(Error::Snapshot(format!(
                "{}: expected {} bytes, found {}",
                path.display(),
                16 * n,
                bytes.len()
            )));
        }
        let data: Vec<Complex64> = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        let values = ArrayD::from_shape_vec(IxDyn(grid.shape()), data)
            .map_err(|e| Error::Snapshot(e.to_string()))?;
        Ok((Field { grid, values }, header))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SnapshotMeta {
    pub time: f64,
    pub omega: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n_dims: usize,
    pub points: Vec<usize>,
    pub half_lengths: Vec<f64>,
    pub time: f64,
    pub omega: f64,
    pub p: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
