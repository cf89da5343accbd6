//! Projection data on (azimuth, polar angle, radius), radial filtering and
//! partial-scan masking.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{RadialGrid, TransducerGrid};

/// Per-transducer availability, row-major like [`TransducerGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanMask {
    pub n_phi: usize,
    pub n_theta: usize,
    pub active: Vec<bool>,
}

impl ScanMask {
    pub fn new(n_phi: usize, n_theta: usize, active: Vec<bool>) -> Result<Self> {
        if active.len() != n_phi * n_theta {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} entries, expected {n_phi}x{n_theta}",
                active.len()
            )));
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::invalid("scan mask has no active transducer"));
        }
        Ok(ScanMask { n_phi, n_theta, active })
    }

    pub fn full(n_phi: usize, n_theta: usize) -> Self {
        ScanMask {
            n_phi,
            n_theta,
            active: vec![true; n_phi * n_theta],
        }
    }

    #[inline]
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[i * self.n_theta + j]
    }

    pub fn count_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_full(&self) -> bool {
        self.active.iter().all(|&a| a)
    }
}

/// Named half-sphere apertures.
///
/// `East` is the positive-x hemisphere taken half-open, azimuths in
/// `[-π/2, π/2)`, so that exactly `n_phi / 2` azimuths are active when
/// `n_phi` is a multiple of 4. `South` is `θ > π/2` (negative z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskRegion {
    Full,
    East,
    West,
    South,
    North,
}

impl FromStr for MaskRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(MaskRegion::Full),
            "east" => Ok(MaskRegion::East),
            "west" => Ok(MaskRegion::West),
            "south" => Ok(MaskRegion::South),
            "north" => Ok(MaskRegion::North),
            other => Err(Error::invalid(format!(
                "unknown mask region '{other}' (expected full, east, west, south or north)"
            ))),
        }
    }
}

impl fmt::Display for MaskRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MaskRegion::Full => "full",
            MaskRegion::East => "east",
            MaskRegion::West => "west",
            MaskRegion::South => "south",
            MaskRegion::North => "north",
        };
        f.write_str(name)
    }
}

/// Azimuth index `i` of `n` lies in `[-π/2, π/2)`, decided in integer
/// arithmetic so the split is exact.
fn is_east(i: usize, n: usize) -> bool {
    4 * i < n || 4 * i >= 3 * n
}

pub fn make_mask(grid: &TransducerGrid, region: MaskRegion) -> Result<ScanMask> {
    let (n_phi, n_theta) = (grid.n_phi, grid.n_theta);
    let mut active = Vec::with_capacity(n_phi * n_theta);
    for i in 0..n_phi {
        for j in 0..n_theta {
            let south = grid.theta(j) > std::f64::consts::FRAC_PI_2;
            active.push(match region {
                MaskRegion::Full => true,
                MaskRegion::East => is_east(i, n_phi),
                MaskRegion::West => !is_east(i, n_phi),
                MaskRegion::South => south,
                MaskRegion::North => !south,
            });
        }
    }
    ScanMask::new(n_phi, n_theta, active)
}

/// `Rf(p, r)` sampled on a transducer grid and a uniform radial grid.
///
/// `data` is indexed `(i * n_theta + j) * n_r + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub grid: TransducerGrid,
    pub radial: RadialGrid,
    pub data: Vec<f64>,
    pub mask: ScanMask,
}

impl Sinogram {
    pub fn zeros(grid: TransducerGrid, radial: RadialGrid) -> Self {
        let len = grid.len() * radial.n_r;
        let mask = ScanMask::full(grid.n_phi, grid.n_theta);
        Sinogram {
            grid,
            radial,
            data: vec![0.0; len],
            mask,
        }
    }

    /// Fills every entry from `f(i, j, r_k)`.
    pub fn from_fn(grid: TransducerGrid, radial: RadialGrid, f: impl Fn(usize, usize, f64) -> f64 + Sync) -> Self {
        let mut s = Sinogram::zeros(grid, radial);
        let n_theta = s.grid.n_theta;
        let radii = &s.radial.radii;
        s.data.par_chunks_mut(s.radial.n_r).enumerate().for_each(|(row, out)| {
            let (i, j) = (row / n_theta, row % n_theta);
            for (o, &r) in out.iter_mut().zip(radii) {
                *o = f(i, j, r);
            }
        });
        s
    }

    pub fn n_phi(&self) -> usize {
        self.grid.n_phi
    }

    pub fn n_theta(&self) -> usize {
        self.grid.n_theta
    }

    pub fn n_r(&self) -> usize {
        self.radial.n_r
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.grid.n_theta + j) * self.radial.n_r + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    /// Radial samples of transducer `(i, j)`.
    #[inline]
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let start = self.index(i, j, 0);
        &self.data[start..start + self.radial.n_r]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.radial.n_r)
    }

    pub fn same_shape(&self, other: &Sinogram) -> Result<()> {
        if self.grid.n_phi != other.grid.n_phi
            || self.grid.n_theta != other.grid.n_theta
            || self.radial.n_r != other.radial.n_r
        {
            return Err(Error::ShapeMismatch(format!(
                "sinogram shapes differ: {}x{}x{} vs {}x{}x{}",
                self.n_phi(),
                self.n_theta(),
                self.n_r(),
                other.n_phi(),
                other.n_theta(),
                other.n_r()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Linear interpolation in `r` of transducer `(i, j)`'s samples.
    pub fn sample_radial(&self, i: usize, j: usize, r: f64) -> f64 {
        interpolate_row(self.row(i, j), 1.0 / self.radial.step(), r)
    }
}

/// Linear interpolation of uniformly spaced samples starting at `r = 0`;
/// zero outside the sampled range.
#[inline]
pub fn interpolate_row(row: &[f64], inv_step: f64, r: f64) -> f64 {
    let u = r * inv_step;
    let last = (row.len() - 1) as f64;
    if !(u >= 0.0) || u > last {
        return 0.0;
    }
    let k = (u as usize).min(row.len() - 2);
    let t = u - k as f64;
    (1.0 - t) * row[k] + t * row[k + 1]
}

/// Centered second difference in `r` with zero padding at both ends.
pub fn second_radial_derivative(s: &Sinogram) -> Result<Sinogram> {
    let n_r = s.radial.n_r;
    if n_r < 3 {
        return Err(Error::invalid(format!(
            "second radial derivative needs n_r >= 3, got {n_r}"
        )));
    }
    let inv_dr2 = {
        let dr = s.radial.step();
        1.0 / (dr * dr)
    };
    let mut out = s.clone();
    out.data
        .par_chunks_mut(n_r)
        .zip(s.data.par_chunks(n_r))
        .for_each(|(o, d)| {
            for k in 0..n_r {
                let prev = if k == 0 { 0.0 } else { d[k - 1] };
                let next = if k + 1 == n_r { 0.0 } else { d[k + 1] };
                o[k] = (prev - 2.0 * d[k] + next) * inv_dr2;
            }
        });
    Ok(out)
}

/// Zero-fills the data of inactive transducers and records the mask.
pub fn apply_mask(s: &Sinogram, m: &ScanMask) -> Result<Sinogram> {
    if m.n_phi != s.grid.n_phi || m.n_theta != s.grid.n_theta {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{} but sinogram has {}x{} transducers",
            m.n_phi, m.n_theta, s.grid.n_phi, s.grid.n_theta
        )));
    }
    let mut out = s.clone();
    let n_r = s.radial.n_r;
    for (row, &active) in out.data.chunks_mut(n_r).zip(&m.active) {
        if !active {
            row.fill(0.0);
        }
    }
    out.mask = m.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sino(n_phi: usize, n_theta: usize, n_r: usize, f: impl Fn(usize, usize, f64) -> f64 + Sync) -> Sinogram {
        Sinogram::from_fn(
            TransducerGrid::new(n_phi, n_theta).unwrap(),
            RadialGrid::new(n_r, 2.0).unwrap(),
            f,
        )
    }

    #[test]
    fn derivative_of_cubic() {
        let s = sino(4, 3, 50, |_, _, r| r * r * r);
        let d = second_radial_derivative(&s).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                for k in 1..49 {
                    let exact = 6.0 * s.radial.radii[k];
                    let got = d.get(i, j, k);
                    assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1e-300), "k = {k}");
                }
            }
        }
    }

    #[test]
    fn derivative_of_constant_and_square() {
        let s = sino(4, 2, 20, |_, _, _| 3.5);
        let d = second_radial_derivative(&s).unwrap();
        for k in 1..19 {
            assert_eq!(d.get(1, 1, k), 0.0);
        }
        let s = sino(4, 2, 20, |_, _, r| r * r);
        let d = second_radial_derivative(&s).unwrap();
        for k in 1..19 {
            assert!((d.get(2, 0, k) - 2.0).abs() < 1e-10);
        }
        let short = sino(4, 2, 2, |_, _, r| r);
        assert!(second_radial_derivative(&short).is_err());
    }

    #[test]
    fn derivative_zero_pads_boundaries() {
        let s = sino(4, 2, 5, |_, _, _| 1.0);
        let d = second_radial_derivative(&s).unwrap();
        let inv = 1.0 / (s.radial.step() * s.radial.step());
        assert_eq!(d.get(0, 0, 0), -inv);
        assert_eq!(d.get(0, 0, 4), -inv);
    }

    #[test]
    fn radial_interpolation() {
        let s = sino(4, 2, 11, |i, j, r| (i + 2 * j) as f64 + r * r);
        for k in 0..11 {
            assert_eq!(s.sample_radial(1, 1, s.radial.radii[k]), s.get(1, 1, k));
        }
        let mid = 0.5 * (s.radial.radii[3] + s.radial.radii[4]);
        let avg = 0.5 * (s.get(2, 0, 3) + s.get(2, 0, 4));
        assert!((s.sample_radial(2, 0, mid) - avg).abs() < 1e-14);
        assert_eq!(s.sample_radial(2, 0, 2.0001), 0.0);
        assert_eq!(s.sample_radial(2, 0, -0.1), 0.0);
    }

    #[test]
    fn mask_counts() {
        let g = TransducerGrid::new(400, 200).unwrap();
        assert_eq!(make_mask(&g, MaskRegion::Full).unwrap().count_active(), 80000);
        assert_eq!(make_mask(&g, MaskRegion::East).unwrap().count_active(), 200 * 200);
        assert_eq!(make_mask(&g, MaskRegion::West).unwrap().count_active(), 200 * 200);
        assert_eq!(make_mask(&g, MaskRegion::South).unwrap().count_active(), 400 * 100);
        assert_eq!(make_mask(&g, MaskRegion::North).unwrap().count_active(), 400 * 100);
    }

    #[test]
    fn east_means_positive_x() {
        let g = TransducerGrid::new(36, 6).unwrap();
        let m = make_mask(&g, MaskRegion::East).unwrap();
        for i in 0..36 {
            for j in 0..6 {
                let x = g.position(i, j)[0];
                if x > 1e-9 {
                    assert!(m.is_active(i, j));
                }
                if x < -1e-9 {
                    assert!(!m.is_active(i, j));
                }
            }
        }
    }

    #[test]
    fn masking() {
        let s = sino(8, 4, 6, |i, j, r| 1.0 + i as f64 + j as f64 * r);
        let full = make_mask(&s.grid, MaskRegion::Full).unwrap();
        assert_eq!(apply_mask(&s, &full).unwrap(), s);

        let east = make_mask(&s.grid, MaskRegion::East).unwrap();
        let west = make_mask(&s.grid, MaskRegion::West).unwrap();
        let e = apply_mask(&s, &east).unwrap();
        for i in 0..8 {
            for j in 0..4 {
                for k in 0..6 {
                    let expect = if east.is_active(i, j) { s.get(i, j, k) } else { 0.0 };
                    assert_eq!(e.get(i, j, k), expect);
                }
            }
        }
        assert_eq!(apply_mask(&e, &east).unwrap(), e);
        let both = apply_mask(&e, &west).unwrap();
        assert!(both.data.iter().all(|&v| v == 0.0));

        let other = make_mask(&TransducerGrid::new(4, 4).unwrap(), MaskRegion::Full).unwrap();
        assert!(matches!(apply_mask(&s, &other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(ScanMask::new(2, 2, vec![false; 4]).is_err());
        assert!(ScanMask::new(2, 2, vec![true; 3]).is_err());
    }

    #[test]
    fn region_names() {
        for r in [
            MaskRegion::Full,
            MaskRegion::East,
            MaskRegion::West,
            MaskRegion::South,
            MaskRegion::North,
        ] {
            assert_eq!(r.to_string().parse::<MaskRegion>().unwrap(), r);
        }
        assert!("up".parse::<MaskRegion>().is_err());
    }
}
