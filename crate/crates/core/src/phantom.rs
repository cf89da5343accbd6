//! Ellipsoid-sum phantoms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{dist, Vec3};
use crate::volume::Volume;

fn default_amplitude() -> f64 {
    1.0
}

/// Indicator function of an axis-aligned ellipsoid, scaled by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub semiaxes: Vec3,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Ellipsoid {
    pub fn new(center: Vec3, semiaxes: Vec3, amplitude: f64) -> Result<Self> {
        let e = Ellipsoid {
            center,
            semiaxes,
            amplitude,
        };
        e.validate_shape()?;
        Ok(e)
    }

    pub fn ball(center: Vec3, radius: f64) -> Result<Self> {
        Self::new(center, [radius; 3], 1.0)
    }

    fn validate_shape(&self) -> Result<()> {
        if self.semiaxes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid(format!(
                "ellipsoid semiaxes must be positive, got {:?}",
                self.semiaxes
            )));
        }
        if self.center.iter().any(|c| !c.is_finite()) || !self.amplitude.is_finite() {
            return Err(Error::invalid("ellipsoid center and amplitude must be finite"));
        }
        Ok(())
    }

    pub fn max_semiaxis(&self) -> f64 {
        self.semiaxes.iter().copied().fold(0.0, f64::max)
    }

    /// Largest distance from the origin to a point of the ellipsoid.
    ///
    /// Stationary points of `|x|²` on the surface satisfy
    /// `x_d = ν c_d / (ν - e_d²)` with `ν` the root above `max e_d²` of
    /// `Σ c_d² e_d² / (ν - e_d²)² = 1`; when that sum stays below 1 the
    /// maximum sits on the circle (or sphere) of the longest axes.
    pub fn max_norm(&self) -> f64 {
        let e2 = self.semiaxes.map(|e| e * e);
        let c = self.center;
        let top = e2.iter().copied().fold(0.0, f64::max);
        let secular = |nu: f64| -> f64 {
            (0..3)
                .filter(|&d| c[d] != 0.0)
                .map(|d| {
                    let t = c[d] * self.semiaxes[d] / (nu - e2[d]);
                    t * t
                })
                .sum()
        };
        let point_norm2 = |nu: f64| -> f64 {
            (0..3)
                .filter(|&d| c[d] != 0.0)
                .map(|d| {
                    let x = nu * c[d] / (nu - e2[d]);
                    x * x
                })
                .sum()
        };
        let blocked = (0..3).any(|d| e2[d] == top && c[d] != 0.0);
        if !blocked && secular(top) <= 1.0 {
            return (point_norm2(top) + top * (1.0 - secular(top))).sqrt();
        }
        let mut lo = top;
        let mut hi = top + (0..3).map(|d| (c[d] * self.semiaxes[d]).powi(2)).sum::<f64>().sqrt() + 1e-300;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if secular(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        point_norm2(0.5 * (lo + hi)).sqrt()
    }

    /// Every point of the ellipsoid lies strictly inside the unit ball.
    pub fn inside_unit_ball(&self) -> bool {
        self.max_norm() < 1.0
    }

    /// `Σ ((x_d - c_d) / e_d)²`; at most 1 inside the ellipsoid.
    #[inline]
    pub fn level(&self, x: Vec3) -> f64 {
        (0..3)
            .map(|d| {
                let u = (x[d] - self.center[d]) / self.semiaxes[d];
                u * u
            })
            .sum()
    }

    #[inline]
    pub fn contains(&self, x: Vec3) -> bool {
        self.level(x) <= 1.0
    }

    /// Rotationally symmetric about the z axis.
    pub fn is_z_axisymmetric(&self) -> bool {
        self.semiaxes[0] == self.semiaxes[1] && self.center[0] == 0.0 && self.center[1] == 0.0
    }

    /// Bounds `[lo, hi]` on the distance from `p` to points of the
    /// ellipsoid, from its axis-aligned bounding box.
    pub fn distance_bounds(&self, p: Vec3) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for d in 0..3 {
            let lo = self.center[d] - self.semiaxes[d];
            let hi = self.center[d] + self.semiaxes[d];
            let gap = (lo - p[d]).max(p[d] - hi).max(0.0);
            near += gap * gap;
            let span = (p[d] - lo).abs().max((hi - p[d]).abs());
            far += span * span;
        }
        (near.sqrt(), far.sqrt())
    }
}

/// Sum of ellipsoid indicators, all contained in the open unit ball.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Phantom {
    ellipsoids: Vec<Ellipsoid>,
}

impl Phantom {
    pub fn new(ellipsoids: Vec<Ellipsoid>) -> Result<Self> {
        for (n, e) in ellipsoids.iter().enumerate() {
            e.validate_shape()?;
            if !e.inside_unit_ball() {
                return Err(Error::invalid(format!(
                    "ellipsoid #{} (center {:?}, semiaxes {:?}) is not contained in the unit ball",
                    n + 1,
                    e.center,
                    e.semiaxes
                )));
            }
        }
        Ok(Phantom { ellipsoids })
    }

    pub fn empty() -> Self {
        Phantom::default()
    }

    pub fn ellipsoids(&self) -> &[Ellipsoid] {
        &self.ellipsoids
    }

    pub fn len(&self) -> usize {
        self.ellipsoids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ellipsoids.is_empty()
    }

    /// Overlapping ellipsoids add their amplitudes.
    pub fn evaluate(&self, x: Vec3) -> f64 {
        self.ellipsoids
            .iter()
            .filter(|e| e.contains(x))
            .fold(0.0, |acc, e| acc + e.amplitude)
    }

    pub fn voxelize(&self, dim: usize) -> Result<Volume> {
        if dim < 2 {
            return Err(Error::invalid(format!("voxelization needs dim >= 2, got {dim}")));
        }
        Volume::from_fn(dim, |x| self.evaluate(x))
    }

    pub fn total_amplitude(&self) -> f64 {
        self.ellipsoids.iter().map(|e| e.amplitude).sum()
    }
}

/// The five thin coaxial ellipsoids of the Defrise phantom, numbered from
/// the lowest.
pub fn defrise_phantom() -> Phantom {
    const TABLE: [(f64, f64); 5] = [(-0.64, 0.65), (-0.32, 0.85), (0.0, 0.9), (0.32, 0.85), (0.64, 0.65)];
    let ellipsoids = TABLE
        .iter()
        .map(|&(z0, e)| Ellipsoid {
            center: [0.0, 0.0, z0],
            semiaxes: [e, e, 0.08],
            amplitude: 1.0,
        })
        .collect();
    Phantom::new(ellipsoids).expect("Defrise table is contained in the unit ball")
}

/// Area of the sphere `|x - p| = r` lying inside the ball of the given
/// center and radius, for a transducer outside the ball.
///
/// On its support `d - radius < r < d + radius` this is the cubic
/// `(π r / d)(radius² - (d - r)²)`, with `d = |p - center|`.
pub fn ball_projection_analytic(center: Vec3, radius: f64, p: Vec3, r: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
    }
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("sphere radius must be non-negative, got {r}")));
    }
    let d = dist(p, center);
    if d <= radius {
        return Err(Error::invalid(format!(
            "transducer at distance {d} is not outside the ball of radius {radius}"
        )));
    }
    if r <= d - radius || r >= d + radius {
        return Ok(0.0);
    }
    Ok(PI * r / d * (radius * radius - (d - r) * (d - r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::norm;

    #[test]
    fn defrise_table() {
        let ph = defrise_phantom();
        assert_eq!(ph.len(), 5);
        let e3 = ph.ellipsoids()[2];
        assert_eq!(e3.center, [0.0, 0.0, 0.0]);
        assert_eq!(e3.semiaxes, [0.9, 0.9, 0.08]);
        // z -> -z maps the list onto itself (reversed)
        for (a, b) in ph.ellipsoids().iter().zip(ph.ellipsoids().iter().rev()) {
            assert_eq!(a.center[2], -b.center[2]);
            assert_eq!(a.semiaxes, b.semiaxes);
            assert_eq!(a.amplitude, b.amplitude);
        }
    }

    #[test]
    fn evaluate_examples() {
        let ph = defrise_phantom();
        assert_eq!(ph.evaluate([0.0, 0.0, 0.0]), 1.0);
        assert_eq!(ph.evaluate([0.0, 0.0, 0.16]), 0.0);
        assert_eq!(Phantom::empty().evaluate([0.1, 0.2, 0.3]), 0.0);
    }

    #[test]
    fn overlapping_amplitudes_add() {
        let a = Ellipsoid::new([0.0; 3], [0.3; 3], 1.0).unwrap();
        let b = Ellipsoid::new([0.1, 0.0, 0.0], [0.3; 3], 2.5).unwrap();
        let ph = Phantom::new(vec![a, b]).unwrap();
        assert_eq!(ph.evaluate([0.05, 0.0, 0.0]), 3.5);
    }

    #[test]
    fn max_norm_against_surface_scan() {
        let cases = [
            Ellipsoid::new([0.0, 0.0, -0.64], [0.65, 0.65, 0.08], 1.0).unwrap(),
            Ellipsoid::new([0.0, 0.2, -0.1], [0.4, 0.3, 0.5], 1.0).unwrap(),
            Ellipsoid::new([0.3, -0.1, 0.05], [0.1, 0.5, 0.2], 1.0).unwrap(),
            Ellipsoid::new([0.0; 3], [0.3, 0.2, 0.1], 1.0).unwrap(),
            Ellipsoid::new([0.2, 0.0, 0.0], [0.3, 0.3, 0.3], 1.0).unwrap(),
        ];
        for e in cases {
            let mut best = 0.0f64;
            let n = 800;
            for a in 0..=n {
                let th = PI * a as f64 / n as f64;
                for b in 0..2 * n {
                    let ph = PI * b as f64 / n as f64;
                    let u = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                    let x = [0, 1, 2].map(|d| e.center[d] + e.semiaxes[d] * u[d]);
                    best = best.max(norm(x));
                }
            }
            let got = e.max_norm();
            assert!(got >= best - 1e-12 && got - best < 1e-5, "{e:?}: {got} vs scan {best}");
        }
    }

    #[test]
    fn containment_is_enforced() {
        let e = Ellipsoid::new([0.5, 0.0, 0.0], [0.5, 0.1, 0.1], 1.0).unwrap();
        assert!(Phantom::new(vec![e]).is_err());
        assert!(Ellipsoid::new([0.0; 3], [0.1, 0.0, 0.1], 1.0).is_err());
    }

    #[test]
    fn voxelize_empty_and_ball() {
        let v = Phantom::empty().voxelize(8).unwrap();
        assert!(v.data.iter().all(|&x| x == 0.0));
        assert!(Phantom::empty().voxelize(1).is_err());

        let ball = Phantom::new(vec![Ellipsoid::ball([0.0; 3], 0.5).unwrap()]).unwrap();
        let v = ball.voxelize(64).unwrap();
        let count = v.data.iter().filter(|&&x| x != 0.0).count() as f64;
        let volume = count * v.spacing.powi(3);
        let exact = 4.0 / 3.0 * PI * 0.125;
        assert!((volume - exact).abs() < 0.03 * exact, "{volume} vs {exact}");
    }

    #[test]
    fn voxelized_defrise_support() {
        let ph = defrise_phantom();
        let v = ph.voxelize(64).unwrap();
        let centers = [-0.64, -0.32, 0.0, 0.32, 0.64];
        for i in 0..64 {
            for j in 0..64 {
                for k in 0..64 {
                    if v.get(i, j, k) != 0.0 {
                        let z = v.coord(k);
                        let near = centers.iter().map(|c| (z - c).abs()).fold(f64::INFINITY, f64::min);
                        assert!(near <= 0.08 + v.spacing);
                    }
                }
            }
        }
    }

    /// Cap area `2πr²(1 - cos α)` with the law of cosines for `α`.
    fn cap_area(d: f64, rho: f64, r: f64) -> f64 {
        if r <= d - rho || r >= d + rho {
            return 0.0;
        }
        let cos_a = (d * d + r * r - rho * rho) / (2.0 * d * r);
        2.0 * PI * r * r * (1.0 - cos_a)
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn ball_projection_examples() {
        let c = [0.0; 3];
        let p = [1.0, 0.0, 0.0];
        let v = ball_projection_analytic(c, 0.5, p, 1.0).unwrap();
        assert!((v - PI / 4.0).abs() < 1e-15);
        assert!((v - 0.785_398_2).abs() < 1e-7);
        assert_eq!(ball_projection_analytic(c, 0.5, p, 0.4).unwrap(), 0.0);
        assert_eq!(ball_projection_analytic(c, 0.5, p, 1.5).unwrap(), 0.0);
        assert!(ball_projection_analytic(c, 1.0, p, 0.5).is_err());
        assert!(ball_projection_analytic(c, 0.5, p, -0.1).is_err());
    }

    #[test]
    fn ball_projection_matches_cap_formula() {
        let c = [0.1, -0.2, 0.05];
        let p = [0.0, 0.6, 0.8];
        let rho = 0.35;
        let d = dist(p, c);
        for n in 0..=400 {
            let r = 2.0 * n as f64 / 400.0;
            let got = ball_projection_analytic(c, rho, p, r).unwrap();
            assert!((got - cap_area(d, rho, r)).abs() < 1e-13);
        }
    }

    #[test]
    fn ball_projection_shape() {
        let c = [0.0, 0.0, 0.2];
        let p = [0.0, 1.0, 0.0];
        let rho = 0.4;
        let d = dist(p, c);
        let eps = 1e-9;
        assert!(ball_projection_analytic(c, rho, p, d - rho + eps).unwrap() < 1e-8);
        assert!(ball_projection_analytic(c, rho, p, d + rho - eps).unwrap() < 1e-8);
        let mut best = (0.0, 0.0);
        for n in 1..2000 {
            let r = 2.0 * n as f64 / 2000.0;
            let v = ball_projection_analytic(c, rho, p, r).unwrap();
            assert!(v / (4.0 * PI * r * r) <= 1.0);
            if v > best.1 {
                best = (r, v);
            }
        }
        assert!(best.0 > d - rho && best.0 < d + rho);
    }

    #[test]
    fn evaluate_is_order_independent() {
        let mut list = defrise_phantom().ellipsoids().to_vec();
        list.push(Ellipsoid::new([0.0, 0.1, 0.0], [0.2, 0.3, 0.1], 0.5).unwrap());
        let a = Phantom::new(list.clone()).unwrap();
        list.reverse();
        list.swap(0, 3);
        let b = Phantom::new(list).unwrap();
        for n in 0..500 {
            let t = n as f64 * 0.37;
            let x = [0.9 * t.sin(), 0.5 * (1.3 * t).cos(), 0.8 * (0.7 * t).sin()];
            assert_eq!(a.evaluate(x), b.evaluate(x));
        }
    }

    #[test]
    fn distance_bounds_bracket_the_ellipsoid() {
        let e = Ellipsoid::new([0.0, 0.2, -0.1], [0.4, 0.3, 0.5], 1.0).unwrap();
        let p = [0.6, 0.0, 0.8];
        let (lo, hi) = e.distance_bounds(p);
        for n in 0..2000 {
            let t = n as f64 * 0.013;
            let s = n as f64 * 0.0071;
            let u = [t.sin() * s.cos(), t.sin() * s.sin(), t.cos()];
            let x = [
                e.center[0] + e.semiaxes[0] * u[0],
                e.center[1] + e.semiaxes[1] * u[1],
                e.center[2] + e.semiaxes[2] * u[2],
            ];
            let d = dist(p, x);
            assert!(d >= lo && d <= hi);
        }
    }
}
