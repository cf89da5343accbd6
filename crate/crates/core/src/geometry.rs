//! Quadrature rules and the discrete transducer aperture on the unit sphere.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Nodes and weights of a quadrature rule on an interval `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Wraps externally supplied nodes and weights, checking the ordering
    /// and positivity invariants.
    pub fn from_parts(a: f64, b: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid(format!(
                "quadrature rule needs matching non-empty node/weight lists (got {} and {})",
                nodes.len(),
                weights.len()
            )));
        }
        if !(a < b) {
            return Err(Error::invalid(format!("empty interval [{a}, {b}]")));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("quadrature nodes must be strictly increasing"));
        }
        if nodes.iter().any(|&x| !(x > a && x < b)) {
            return Err(Error::invalid("quadrature nodes must lie inside (a, b)"));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("quadrature weights must be positive"));
        }
        Ok(QuadratureRule { a, b, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[a, b]`.
///
/// Roots of `P_n` are found by Newton iteration from Chebyshev-like initial
/// guesses. Only the positive half is computed; the negative half is its
/// exact mirror so the rule is symmetric about the interval midpoint.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::invalid("Gauss-Legendre order must be at least 1"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("Gauss-Legendre interval [{a}, {b}] is empty")));
    }

    // Reference rule on [-1, 1], descending positive roots first.
    let half = n / 2;
    let mut pos_x = Vec::with_capacity(half);
    let mut pos_w = Vec::with_capacity(half);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-14 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        pos_x.push(x);
        pos_w.push(2.0 / ((1.0 - x * x) * dp * dp));
    }

    let mut ref_x = Vec::with_capacity(n);
    let mut ref_w = Vec::with_capacity(n);
    for i in 0..half {
        ref_x.push(-pos_x[i]);
        ref_w.push(pos_w[i]);
    }
    if n % 2 == 1 {
        let (_, dp) = legendre(n, 0.0);
        ref_x.push(0.0);
        ref_w.push(2.0 / (dp * dp));
    }
    for i in (0..half).rev() {
        ref_x.push(pos_x[i]);
        ref_w.push(pos_w[i]);
    }

    let mid = 0.5 * (a + b);
    let half_len = 0.5 * (b - a);
    let nodes = ref_x.iter().map(|&x| mid + half_len * x).collect();
    let weights = ref_w.iter().map(|&w| half_len * w).collect();
    Ok(QuadratureRule { a, b, nodes, weights })
}

/// Periodic trapezoid (rectangle) rule over one full period of uniform
/// samples.
pub fn trapezoid_periodic(samples: &[f64], period: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("periodic trapezoid rule needs at least one sample"));
    }
    Ok(period / samples.len() as f64 * samples.iter().sum::<f64>())
}

/// Transducer positions on the unit sphere: uniform azimuths times
/// Gauss–Legendre polar angles on `[0, π]`.
///
/// Positions are stored row-major, `index = i * n_theta + j` for azimuth
/// index `i` and polar index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransducerGrid {
    pub n_phi: usize,
    pub n_theta: usize,
    pub phi_values: Vec<f64>,
    pub theta_rule: QuadratureRule,
    pub positions: Vec<Vec3>,
    /// Surface weight per polar index; the full weight of transducer (i, j)
    /// is `polar_surface_weights[j]` for every `i`.
    pub polar_surface_weights: Vec<f64>,
}

impl TransducerGrid {
    pub fn new(n_phi: usize, n_theta: usize) -> Result<Self> {
        if n_theta < 2 {
            return Err(Error::invalid(format!("n_theta = {n_theta} is below the minimum of 2")));
        }
        let rule = gauss_legendre(n_theta, 0.0, PI)?;
        Self::from_polar_rule(n_phi, rule)
    }

    /// Builds the grid from an explicit polar rule, as stored in sinogram
    /// files.
    pub fn from_polar_rule(n_phi: usize, theta_rule: QuadratureRule) -> Result<Self> {
        if n_phi < 4 {
            return Err(Error::invalid(format!("n_phi = {n_phi} is below the minimum of 4")));
        }
        let n_theta = theta_rule.len();
        if n_theta < 2 {
            return Err(Error::invalid(format!("n_theta = {n_theta} is below the minimum of 2")));
        }
        let phi_values: Vec<f64> = (0..n_phi).map(|i| TAU * i as f64 / n_phi as f64).collect();
        let mut positions = Vec::with_capacity(n_phi * n_theta);
        for &phi in &phi_values {
            let (sp, cp) = phi.sin_cos();
            for &theta in &theta_rule.nodes {
                let (st, ct) = theta.sin_cos();
                positions.push([st * cp, st * sp, ct]);
            }
        }
        let dphi = TAU / n_phi as f64;
        let polar_surface_weights = theta_rule
            .nodes
            .iter()
            .zip(&theta_rule.weights)
            .map(|(&t, &w)| dphi * w * t.sin())
            .collect();
        Ok(TransducerGrid {
            n_phi,
            n_theta,
            phi_values,
            theta_rule,
            positions,
            polar_surface_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Vec3 {
        self.positions[i * self.n_theta + j]
    }

    /// Surface-quadrature weight `(2π/n_phi) · w_j · sin θ_j`.
    #[inline]
    pub fn weight(&self, _i: usize, j: usize) -> f64 {
        self.polar_surface_weights[j]
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta_rule.nodes[j]
    }

    /// Integrates `f(p)` over the unit sphere with the grid's surface rule.
    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_phi {
            for j in 0..self.n_theta {
                acc += self.weight(i, j) * f(self.position(i, j));
            }
        }
        acc
    }
}

/// Uniform radii `r_i = i · r_max / (n_r - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub n_r: usize,
    pub r_max: f64,
    pub radii: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n_r: usize, r_max: f64) -> Result<Self> {
        if n_r < 2 {
            return Err(Error::invalid(format!("n_r = {n_r} is below the minimum of 2")));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::invalid(format!("r_max = {r_max} must be positive")));
        }
        let last = (n_r - 1) as f64;
        let radii = (0..n_r).map(|i| r_max * (i as f64 / last)).collect();
        Ok(RadialGrid { n_r, r_max, radii })
    }

    /// Sampling step `Δr`.
    pub fn step(&self) -> f64 {
        self.r_max / (self.n_r - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::{norm, rotate_z};

    #[test]
    fn two_point_rule() {
        let q = gauss_legendre(2, -1.0, 1.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((q.nodes[0] + s).abs() < 1e-15);
        assert!((q.nodes[1] - s).abs() < 1e-15);
        assert!((q.weights[0] - 1.0).abs() < 1e-15);
        assert!((q.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let q = gauss_legendre(1, 0.0, PI).unwrap();
        assert!((q.nodes[0] - PI / 2.0).abs() < 1e-15);
        assert!((q.weights[0] - PI).abs() < 1e-15);
    }

    #[test]
    fn integrates_sine() {
        let q = gauss_legendre(16, 0.0, PI).unwrap();
        // ∫₀^π sin = [-cos]₀^π = 2
        assert!((q.integrate(f64::sin) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(gauss_legendre(0, 0.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(gauss_legendre(3, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(gauss_legendre(3, 2.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(TransducerGrid::new(3, 8).is_err());
        assert!(TransducerGrid::new(8, 1).is_err());
        assert!(RadialGrid::new(1, 2.0).is_err());
        assert!(trapezoid_periodic(&[], 1.0).is_err());
    }

    #[test]
    fn rule_invariants() {
        for n in 1..=40 {
            let q = gauss_legendre(n, -0.3, 2.5).unwrap();
            let total: f64 = q.weights.iter().sum();
            assert!((total - 2.8).abs() <= 1e-12 * 2.8, "n = {n}");
            assert!(q.weights.iter().all(|&w| w > 0.0));
            assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(q.nodes.iter().all(|&x| x > -0.3 && x < 2.5));
            QuadratureRule::from_parts(q.a, q.b, q.nodes.clone(), q.weights.clone()).unwrap();
        }
    }

    #[test]
    fn exact_on_monomials() {
        // ∫_a^b t^k dt = (b^{k+1} - a^{k+1}) / (k + 1)
        let (a, b) = (-0.5, 1.5);
        for n in 1..=10 {
            let q = gauss_legendre(n, a, b).unwrap();
            for k in 0..2 * n {
                let exact = (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0);
                let got = q.integrate(|t| t.powi(k as i32));
                assert!(
                    (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                    "n = {n}, k = {k}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn trapezoid_examples() {
        assert!((trapezoid_periodic(&[1.0; 7], TAU).unwrap() - TAU).abs() < 1e-15);
        let cos8: Vec<f64> = (0..8).map(|i| (TAU * i as f64 / 8.0).cos()).collect();
        assert!(trapezoid_periodic(&cos8, TAU).unwrap().abs() < 1e-14);
        let cos2: Vec<f64> = (0..16).map(|i| (TAU * i as f64 / 16.0).cos().powi(2)).collect();
        assert!((trapezoid_periodic(&cos2, TAU).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn small_grid_positions_are_unit() {
        let g = TransducerGrid::new(4, 2).unwrap();
        assert_eq!(g.len(), 8);
        for p in &g.positions {
            assert!((norm(*p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_weights_sum_to_sphere_area() {
        let g = TransducerGrid::new(400, 200).unwrap();
        let total = g.integrate(|_| 1.0);
        assert!((total - 4.0 * PI).abs() <= 1e-9 * 4.0 * PI);
        for n_theta in 8..20 {
            let g = TransducerGrid::new(12, n_theta).unwrap();
            assert!((g.integrate(|_| 1.0) - 4.0 * PI).abs() <= 1e-6 * 4.0 * PI);
        }
    }

    #[test]
    fn second_moment_of_sphere() {
        // ∫ p_z² dp = 4π/3
        for n_theta in [16, 17, 32] {
            let g = TransducerGrid::new(8, n_theta).unwrap();
            let m = g.integrate(|p| p[2] * p[2]);
            assert!((m - 4.0 * PI / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn polar_mirror_symmetry() {
        let g = TransducerGrid::new(12, 9).unwrap();
        for i in 0..g.n_phi {
            for j in 0..g.n_theta {
                let a = g.position(i, j);
                let b = g.position(i, g.n_theta - 1 - j);
                assert!((a[0] - b[0]).abs() < 1e-12);
                assert!((a[1] - b[1]).abs() < 1e-12);
                assert!((a[2] + b[2]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn azimuthal_shift_is_rotation() {
        let g = TransducerGrid::new(36, 10).unwrap();
        let step = TAU / g.n_phi as f64;
        for i in 0..g.n_phi {
            for j in 0..g.n_theta {
                let shifted = g.position((i + 1) % g.n_phi, j);
                let back = rotate_z(shifted, -step);
                let orig = g.position(i, j);
                for d in 0..3 {
                    assert!((back[d] - orig[d]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phi_values_formula() {
        let g = TransducerGrid::new(400, 4).unwrap();
        for (i, &phi) in g.phi_values.iter().enumerate() {
            assert_eq!(phi, TAU * i as f64 / 400.0);
        }
    }

    #[test]
    fn radial_grid_endpoints() {
        let r = RadialGrid::new(200, 2.0).unwrap();
        assert_eq!(r.radii[0], 0.0);
        assert_eq!(r.radii[199], 2.0);
        let r = RadialGrid::new(7, 1.3).unwrap();
        assert_eq!(r.radii[6], 1.3);
        for w in r.radii.windows(2) {
            assert!((w[1] - w[0] - r.step()).abs() < 1e-15);
        }
    }
}
