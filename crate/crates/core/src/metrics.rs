//! Quantitative evaluation of reconstructions.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::TransducerGrid;
use crate::sinogram::ScanMask;
use crate::vec3::{add, dot, norm, scale, Vec3};
use crate::volume::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two remaining axes, in increasing order.
    pub fn others(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::invalid(format!("unknown axis '{other}' (expected x, y or z)"))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["x", "y", "z"][self.index()])
    }
}

/// Voxel values along a line of voxel centers parallel to `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    pub axis: Axis,
    /// Coordinates on the other two axes, in increasing axis order.
    pub fixed: [f64; 2],
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

/// Samples the voxel line nearest to `fixed`.
pub fn extract_profile(v: &Volume, axis: Axis, fixed: [f64; 2]) -> Result<LineProfile> {
    if fixed.iter().any(|c| !(-1.0..=1.0).contains(c)) {
        return Err(Error::invalid(format!(
            "profile coordinates {fixed:?} lie outside [-1, 1]"
        )));
    }
    let [a, b] = axis.others();
    let mut idx = [0usize; 3];
    idx[a] = v.nearest_index(fixed[0]);
    idx[b] = v.nearest_index(fixed[1]);
    let d = axis.index();
    let mut coords = Vec::with_capacity(v.dim);
    let mut values = Vec::with_capacity(v.dim);
    for n in 0..v.dim {
        idx[d] = n;
        coords.push(v.coord(n));
        values.push(v.get(idx[0], idx[1], idx[2]));
    }
    Ok(LineProfile {
        axis,
        fixed,
        coords,
        values,
    })
}

/// RMS of `v - reference` over voxels whose centers satisfy `region`.
pub fn region_rms_error(v: &Volume, reference: &Volume, region: impl Fn(Vec3) -> bool) -> Result<f64> {
    v.same_shape(reference)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..v.dim {
        for j in 0..v.dim {
            for k in 0..v.dim {
                if region(v.center(i, j, k)) {
                    let n = v.index(i, j, k);
                    let e = v.data[n] - reference.data[n];
                    sum += e * e;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyRegion("no voxel satisfies the region predicate".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Mean of `v` over voxels whose centers satisfy `region`.
pub fn region_mean(v: &Volume, region: impl Fn(Vec3) -> bool) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..v.dim {
        for j in 0..v.dim {
            for k in 0..v.dim {
                if region(v.center(i, j, k)) {
                    sum += v.get(i, j, k);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyRegion("no voxel satisfies the region predicate".into()));
    }
    Ok(sum / count as f64)
}

/// Pearson correlation of two volumes over voxels satisfying `region`.
pub fn correlation(a: &Volume, b: &Volume, region: impl Fn(Vec3) -> bool) -> Result<f64> {
    a.same_shape(b)?;
    let mut pairs = Vec::new();
    for i in 0..a.dim {
        for j in 0..a.dim {
            for k in 0..a.dim {
                if region(a.center(i, j, k)) {
                    let n = a.index(i, j, k);
                    pairs.push((a.data[n], b.data[n]));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyRegion("no voxel satisfies the region predicate".into()));
    }
    let n = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(sa, sb), &(x, y)| (sa + x, sb + y));
    let (ma, mb) = (ma / n, mb / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::NumericalFailure("correlation of a constant field".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Both points where the line `x + t n` crosses the unit sphere.
pub fn line_sphere_hits(x: Vec3, n: Vec3) -> Result<[Vec3; 2]> {
    if !(norm(x) < 1.0) {
        return Err(Error::invalid(format!("point {x:?} is not inside the unit ball")));
    }
    if (norm(n) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("direction {n:?} is not a unit vector")));
    }
    // t² + 2 (x·n) t + |x|² - 1 = 0, with negative constant term
    let b = dot(x, n);
    let c = dot(x, x) - 1.0;
    let disc = (b * b - c).sqrt();
    let t1 = if b >= 0.0 { -b - disc } else { -b + disc };
    let t2 = c / t1;
    Ok([add(x, scale(n, t1)), add(x, scale(n, t2))])
}

/// Whether an active transducer lies within half a grid cell of `p` on the
/// unit sphere. Polar cells run between midpoints of neighbouring nodes and
/// extend to the poles at both ends.
fn near_active(p: Vec3, m: &ScanMask, grid: &TransducerGrid) -> bool {
    let theta = p[2].clamp(-1.0, 1.0).acos();
    let rho = p[0].hypot(p[1]);
    let tol = 1e-12;
    let polar: Vec<usize> = (0..grid.n_theta)
        .filter(|&j| {
            let lo = if j == 0 {
                0.0
            } else {
                0.5 * (grid.theta(j - 1) + grid.theta(j))
            };
            let hi = if j + 1 == grid.n_theta {
                PI
            } else {
                0.5 * (grid.theta(j) + grid.theta(j + 1))
            };
            theta >= lo - tol && theta <= hi + tol
        })
        .collect();
    let half = PI / grid.n_phi as f64;
    let phi = p[1].atan2(p[0]).rem_euclid(TAU);
    (0..grid.n_phi)
        .filter(|&i| {
            if rho < 1e-12 {
                return true;
            }
            let d = (phi - grid.phi_values[i]).rem_euclid(TAU);
            d.min(TAU - d) <= half + tol
        })
        .any(|i| polar.iter().any(|&j| m.is_active(i, j)))
}

/// Whether the edge at `x` with normal `n` can be touched tangentially by a
/// sphere centered at an available transducer.
///
/// Such spheres are centered on the normal line through `x`; the edge
/// counts as visible when either crossing of that line with the unit
/// sphere lies within half a grid cell of an active transducer.
pub fn wavefront_visible(x: Vec3, n: Vec3, m: &ScanMask, grid: &TransducerGrid) -> Result<bool> {
    if m.n_phi != grid.n_phi || m.n_theta != grid.n_theta {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{}, grid is {}x{}",
            m.n_phi, m.n_theta, grid.n_phi, grid.n_theta
        )));
    }
    let hits = line_sphere_hits(x, n)?;
    Ok(hits.iter().any(|&p| near_active(p, m, grid)))
}

/// Steepest slope of a volume across an interface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeResponse {
    /// Largest absolute finite-difference slope along the normal segment.
    pub slope: f64,
    /// Signed distance along the normal from the sample point to the
    /// midpoint of the steepest step.
    pub offset: f64,
}

/// Finite differences of trilinear samples at spacing steps along
/// `x + t n`, `t ∈ [-half_width, half_width]`.
pub fn edge_response(v: &Volume, x: Vec3, n: Vec3, half_width: f64) -> Result<EdgeResponse> {
    if !(half_width > 0.0) {
        return Err(Error::invalid(format!("half-width must be positive, got {half_width}")));
    }
    let len = norm(n);
    if !(len > 0.0) {
        return Err(Error::invalid("edge normal must be nonzero"));
    }
    let n = scale(n, 1.0 / len);
    let h = v.spacing;
    let steps = ((2.0 * half_width / h).floor() as usize).max(1);
    let start = -0.5 * steps as f64 * h;
    let sample = |t: f64| v.sample_trilinear(add(x, scale(n, t)));
    let mut prev = sample(start);
    let mut best = EdgeResponse {
        slope: 0.0,
        offset: 0.0,
    };
    for s in 1..=steps {
        let t = start + s as f64 * h;
        let cur = sample(t);
        let slope = ((cur - prev) / h).abs();
        if slope > best.slope {
            best = EdgeResponse {
                slope,
                offset: t - 0.5 * h,
            };
        }
        prev = cur;
    }
    Ok(best)
}

/// Mean steepest slope over interface samples `(point, normal)`.
pub fn edge_sharpness(v: &Volume, samples: &[(Vec3, Vec3)], half_width: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyRegion("no interface samples".into()));
    }
    let mut sum = 0.0;
    for &(x, n) in samples {
        sum += edge_response(v, x, n, half_width)?.slope;
    }
    Ok(sum / samples.len() as f64)
}

/// Voxels farther than this many voxels from any interface of the
/// reference enter the axis-noise columns.
pub const AXIS_EXCLUSION: usize = 3;

fn near_interface(reference: &Volume, i: usize, j: usize, k: usize) -> bool {
    let d = AXIS_EXCLUSION;
    let last = reference.dim - 1;
    let value = reference.get(i, j, k);
    for a in i.saturating_sub(d)..=(i + d).min(last) {
        for b in j.saturating_sub(d)..=(j + d).min(last) {
            for c in k.saturating_sub(d)..=(k + d).min(last) {
                if reference.get(a, b, c) != value {
                    return true;
                }
            }
        }
    }
    false
}

fn column_rms(v: &Volume, reference: &Volume, x: f64, y: f64) -> Result<f64> {
    let (i, j) = (v.nearest_index(x), v.nearest_index(y));
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..v.dim {
        if near_interface(reference, i, j, k) {
            continue;
        }
        let e = v.get(i, j, k) - reference.get(i, j, k);
        sum += e * e;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyRegion(format!(
            "every voxel of the column at ({x}, {y}) lies near an interface"
        )));
    }
    Ok((sum / count as f64).sqrt())
}

/// RMS error along the voxel column nearest the z axis divided by the RMS
/// error along the column at `x = y = 0.25`, both skipping voxels within
/// [`AXIS_EXCLUSION`] voxels of an interface of `reference`.
///
/// Returns 1 when both errors are below `1e-14`.
pub fn axis_noise_ratio(v: &Volume, reference: &Volume) -> Result<f64> {
    v.same_shape(reference)?;
    let on_axis = column_rms(v, reference, 0.0, 0.0)?;
    let off_axis = column_rms(v, reference, 0.25, 0.25)?;
    if on_axis < 1e-14 && off_axis < 1e-14 {
        return Ok(1.0);
    }
    if off_axis == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(on_axis / off_axis)
}

/// Scalar comparison of a reconstruction against a reference volume.
pub fn report(v: &Volume, reference: &Volume) -> Result<BTreeMap<String, f64>> {
    v.same_shape(reference)?;
    let mut out = BTreeMap::new();
    let everywhere = |_: Vec3| true;
    let inside = |x: Vec3| norm(x) < 1.0;
    out.insert("rms_error".to_string(), region_rms_error(v, reference, everywhere)?);
    out.insert(
        "rms_error_unit_ball".to_string(),
        region_rms_error(v, reference, inside)?,
    );
    let max_abs = v
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.insert("max_abs_error".to_string(), max_abs);
    // undefined when the reference has interfaces all along a column
    match axis_noise_ratio(v, reference) {
        Ok(r) => {
            out.insert("axis_noise_ratio".to_string(), r);
        }
        Err(Error::EmptyRegion(_)) => {}
        Err(e) => return Err(e),
    }
    let (lo, hi) = v.min_max();
    out.insert("min".to_string(), lo);
    out.insert("max".to_string(), hi);
    Ok(out)
}
