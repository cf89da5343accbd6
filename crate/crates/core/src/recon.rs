//! Backprojection reconstructors and the discrete Laplacian.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sinogram::{interpolate_row, second_radial_derivative, Sinogram};
use crate::volume::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Second radial derivative, then weighted backprojection.
    Fbp,
    /// Weighted backprojection, then the Laplacian.
    Rho,
    /// Unweighted backprojection, then the Laplacian.
    Approx,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fbp" => Ok(Method::Fbp),
            "rho" => Ok(Method::Rho),
            "approx" => Ok(Method::Approx),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected fbp, rho or approx)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fbp => "fbp",
            Method::Rho => "rho",
            Method::Approx => "approx",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub dim: usize,
    pub method: Method,
    /// Only voxels with `|x| <= roi_radius` are reconstructed.
    pub roi_radius: f64,
}

impl ReconConfig {
    pub fn new(dim: usize, method: Method) -> Result<Self> {
        Self::with_roi(dim, method, 1.0)
    }

    pub fn with_roi(dim: usize, method: Method, roi_radius: f64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::invalid(format!(
                "reconstruction dim must be at least 8, got {dim}"
            )));
        }
        if !(roi_radius > 0.0 && roi_radius <= 1.0) {
            return Err(Error::invalid(format!("roi radius {roi_radius} outside (0, 1]")));
        }
        Ok(ReconConfig {
            dim,
            method,
            roi_radius,
        })
    }
}

/// `-1/(8π²)`, the constant of both exact inversion formulas.
pub const INVERSION_CONSTANT: f64 = -1.0 / (8.0 * PI * PI);

/// Transducer data flattened for the voxel loop.
struct Aperture<'a> {
    px: Vec<f64>,
    py: Vec<f64>,
    pz: Vec<f64>,
    w: Vec<f64>,
    rows: Vec<&'a [f64]>,
}

impl<'a> Aperture<'a> {
    /// Active transducers in row-major `(i, j)` order.
    fn new(s: &'a Sinogram) -> Self {
        let n = s.grid.len();
        let mut ap = Aperture {
            px: Vec::with_capacity(n),
            py: Vec::with_capacity(n),
            pz: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            rows: Vec::with_capacity(n),
        };
        for i in 0..s.grid.n_phi {
            for j in 0..s.grid.n_theta {
                if !s.mask.is_active(i, j) {
                    continue;
                }
                let p = s.grid.position(i, j);
                ap.px.push(p[0]);
                ap.py.push(p[1]);
                ap.pz.push(p[2]);
                ap.w.push(s.grid.weight(i, j));
                ap.rows.push(s.row(i, j));
            }
        }
        ap
    }
}

/// `Σ_{i,j} w_ij · W(x, p_ij) · s(p_ij, |x - p_ij|)` at every voxel center
/// inside the ROI, with `W = 1/|x - p|` when `weighted`, else 1.
///
/// Each voxel's sum runs over transducers in row-major order, so the
/// result does not depend on the number of worker threads.
pub fn backproject(s: &Sinogram, cfg: &ReconConfig, weighted: bool) -> Result<Volume> {
    backproject_within(s, cfg.dim, cfg.roi_radius, weighted)
}

fn backproject_within(s: &Sinogram, dim: usize, radius: f64, weighted: bool) -> Result<Volume> {
    let mut vol = Volume::zeros(dim)?;
    let spacing = vol.spacing;
    let coord = |idx: usize| -1.0 + (idx as f64 + 0.5) * spacing;
    let roi2 = radius * radius;
    let inv_dr = 1.0 / s.radial.step();
    let ap = Aperture::new(s);

    vol.data
        .par_chunks_mut(dim * dim)
        .enumerate()
        .try_for_each(|(i, slab)| -> Result<()> {
            let x = coord(i);
            // in-ROI voxels of this slab
            let mut pts: Vec<(usize, [f64; 3])> = Vec::new();
            for j in 0..dim {
                let y = coord(j);
                for k in 0..dim {
                    let z = coord(k);
                    let r2 = x * x + y * y + z * z;
                    if r2 <= roi2 {
                        // |x - p| >= ||x| - 1| for every transducer
                        if weighted && (1.0 - r2.sqrt()).abs() < 1e-12 {
                            return Err(Error::NumericalFailure(format!(
                                "voxel center {:?} lies on the transducer sphere",
                                [x, y, z]
                            )));
                        }
                        pts.push((j * dim + k, [x, y, z]));
                    }
                }
            }
            if pts.is_empty() {
                return Ok(());
            }
            let mut acc = vec![0.0f64; pts.len()];
            for t in 0..ap.w.len() {
                let (px, py, pz, w, row) = (ap.px[t], ap.py[t], ap.pz[t], ap.w[t], ap.rows[t]);
                for (a, (_, v)) in acc.iter_mut().zip(&pts) {
                    let dx = v[0] - px;
                    let dy = v[1] - py;
                    let dz = v[2] - pz;
                    let d = (dx * dx + dy * dy + dz * dz).sqrt();
                    let val = interpolate_row(row, inv_dr, d);
                    *a += if weighted { w * val / d } else { w * val };
                }
            }
            for ((idx, v), a) in pts.iter().zip(acc) {
                if !a.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "non-finite backprojection at voxel center {v:?}"
                    )));
                }
                slab[*idx] = a;
            }
            Ok(())
        })?;

    Ok(vol)
}

/// 7-point Laplacian `(Σ face neighbours - 6 center) / spacing²` with
/// replicate padding at the volume boundary.
pub fn discrete_laplacian(v: &Volume) -> Result<Volume> {
    let dim = v.dim;
    if dim < 3 {
        return Err(Error::invalid(format!("Laplacian needs dim >= 3, got {dim}")));
    }
    let inv_h2 = 1.0 / (v.spacing * v.spacing);
    let mut out = v.clone();
    let last = dim - 1;
    out.data.par_chunks_mut(dim * dim).enumerate().for_each(|(i, slab)| {
        let (im, ip) = (i.saturating_sub(1), (i + 1).min(last));
        for j in 0..dim {
            let (jm, jp) = (j.saturating_sub(1), (j + 1).min(last));
            for k in 0..dim {
                let (km, kp) = (k.saturating_sub(1), (k + 1).min(last));
                let c = v.get(i, j, k);
                let sum = v.get(im, j, k)
                    + v.get(ip, j, k)
                    + v.get(i, jm, k)
                    + v.get(i, jp, k)
                    + v.get(i, j, km)
                    + v.get(i, j, kp);
                slab[j * dim + k] = (sum - 6.0 * c) * inv_h2;
            }
        }
    });
    Ok(out)
}

fn scaled(mut v: Volume) -> Volume {
    for x in &mut v.data {
        *x *= INVERSION_CONSTANT;
    }
    v
}

/// Filtered backprojection: `-1/(8π²) ∫ ∂²_r Rf(p, |x-p|) / |x-p| dp`.
pub fn reconstruct_fbp(s: &Sinogram, cfg: &ReconConfig) -> Result<Volume> {
    let filtered = second_radial_derivative(s)?;
    Ok(scaled(backproject(&filtered, cfg, true)?))
}

/// Laplacian of a backprojection that extends one voxel beyond the ROI, so
/// the stencil at the ROI boundary never reads the zero fill outside it.
fn laplacian_of_backprojection(s: &Sinogram, cfg: &ReconConfig, weighted: bool) -> Result<Volume> {
    let spacing = 2.0 / cfg.dim as f64;
    let bp = backproject_within(s, cfg.dim, cfg.roi_radius + spacing * (1.0 + 1e-9), weighted)?;
    let mut out = scaled(discrete_laplacian(&bp)?);
    let roi2 = cfg.roi_radius * cfg.roi_radius;
    for i in 0..cfg.dim {
        for j in 0..cfg.dim {
            for k in 0..cfg.dim {
                let x = out.center(i, j, k);
                if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > roi2 {
                    let n = out.index(i, j, k);
                    out.data[n] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

/// ρ-filtered backprojection: `-1/(8π²) Δ ∫ Rf(p, |x-p|) / |x-p| dp`.
pub fn reconstruct_rho_filtered(s: &Sinogram, cfg: &ReconConfig) -> Result<Volume> {
    laplacian_of_backprojection(s, cfg, true)
}

/// The historical approximation: ρ-filtered backprojection without the
/// `1/|x-p|` weight.
pub fn reconstruct_approx(s: &Sinogram, cfg: &ReconConfig) -> Result<Volume> {
    laplacian_of_backprojection(s, cfg, false)
}

pub fn reconstruct(s: &Sinogram, cfg: &ReconConfig) -> Result<Volume> {
    match cfg.method {
        Method::Fbp => reconstruct_fbp(s, cfg),
        Method::Rho => reconstruct_rho_filtered(s, cfg),
        Method::Approx => reconstruct_approx(s, cfg),
    }
}
