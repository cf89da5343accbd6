use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Scalar field on a uniform isotropic voxel grid covering `[-1, 1]³`.
///
/// Voxel `(i, j, k)` (x, y, z indices) is centered at
/// `-1 + (index + 0.5) · spacing` on each axis; `data` is stored with `k`
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dim: usize,
    pub spacing: f64,
    pub origin: Vec3,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("volume dimension must be positive"));
        }
        Ok(Volume {
            dim,
            spacing: 2.0 / dim as f64,
            origin: [-1.0; 3],
            data: vec![0.0; dim * dim * dim],
        })
    }

    /// Evaluates `f` at every voxel center, in parallel over x-slabs.
    pub fn from_fn(dim: usize, f: impl Fn(Vec3) -> f64 + Sync) -> Result<Self> {
        let mut v = Volume::zeros(dim)?;
        let slab = dim * dim;
        let spacing = v.spacing;
        let coord = |idx: usize| -1.0 + (idx as f64 + 0.5) * spacing;
        v.data.par_chunks_mut(slab).enumerate().for_each(|(i, chunk)| {
            let x = coord(i);
            for j in 0..dim {
                let y = coord(j);
                for k in 0..dim {
                    chunk[j * dim + k] = f([x, y, coord(k)]);
                }
            }
        });
        Ok(v)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    /// Center coordinate of voxel index `idx` along any axis.
    #[inline]
    pub fn coord(&self, idx: usize) -> f64 {
        -1.0 + (idx as f64 + 0.5) * self.spacing
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Index of the voxel whose center is nearest to coordinate `x`, clamped
    /// to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = ((x + 1.0) / self.spacing - 0.5).round();
        f.clamp(0.0, (self.dim - 1) as f64) as usize
    }

    /// Trilinear interpolation between voxel centers; coordinates beyond the
    /// outermost centers are clamped.
    pub fn sample_trilinear(&self, x: Vec3) -> f64 {
        let last = (self.dim - 1) as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            let u = ((x[d] + 1.0) / self.spacing - 0.5).clamp(0.0, last);
            let b = (u.floor() as usize).min(self.dim.saturating_sub(2));
            base[d] = b;
            frac[d] = u - b as f64;
        }
        if self.dim == 1 {
            return self.data[0];
        }
        let mut acc = 0.0;
        for (di, wi) in [(0, 1.0 - frac[0]), (1, frac[0])] {
            for (dj, wj) in [(0, 1.0 - frac[1]), (1, frac[1])] {
                for (dk, wk) in [(0, 1.0 - frac[2]), (1, frac[2])] {
                    let w = wi * wj * wk;
                    if w != 0.0 {
                        acc += w * self.get(base[0] + di, base[1] + dj, base[2] + dk);
                    }
                }
            }
        }
        acc
    }

    pub fn same_shape(&self, other: &Volume) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "volume dimensions differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Volume {
        Volume {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}
