//! Exact forward projection of ellipsoid phantoms.
//!
//! A sphere of integration `|x - p| = r` is parameterized by its own polar
//! angle `θ` and azimuth `φ`. For fixed `φ` the meridian `θ ∈ [0, π]` cuts an
//! ellipsoid in a finite union of arcs; with `t = cos θ` the arc endpoints
//! are roots of a quartic in `t`. The area of the cut is
//!
//! ```text
//! r² ∫₀^{2π} F(φ) dφ,   F(φ) = Σ_arcs (cos θ₁ - cos θ₂)
//! ```
//!
//! `F` is integrated with the periodic trapezoid rule when it is smooth and
//! piecewise with Gauss–Legendre otherwise.

mod quartic;

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;

pub use quartic::{solve_quartic, QuarticCoefficients, RealRoots};

use crate::error::{Error, Result};
use crate::geometry::{gauss_legendre, QuadratureRule, RadialGrid, TransducerGrid};
use crate::phantom::{Ellipsoid, Phantom};
use crate::sinogram::Sinogram;
use crate::vec3::{add, norm, scale, Vec3};

/// Quadrature settings of [`project_ellipsoid`].
#[derive(Debug, Clone)]
pub struct ForwardConfig {
    /// Uniform azimuth samples used both for the trapezoid rule and for
    /// detecting where the number of arcs changes.
    pub n_smooth: usize,
    /// Gauss–Legendre order per smooth piece.
    pub gauss_order: usize,
    /// Bisection stops once a breakpoint is bracketed this tightly.
    pub breakpoint_width: f64,
    gauss: QuadratureRule,
}

impl ForwardConfig {
    pub fn new(n_smooth: usize, gauss_order: usize) -> Result<Self> {
        if n_smooth < 4 {
            return Err(Error::invalid(format!("n_smooth = {n_smooth} is below 4")));
        }
        Ok(ForwardConfig {
            n_smooth,
            gauss_order,
            breakpoint_width: 1e-10,
            gauss: gauss_legendre(gauss_order, 0.0, 1.0)?,
        })
    }
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig::new(256, 32).expect("default forward settings are valid")
    }
}

/// The meridian equation `A(t) + B √(1 - t²) = 0` with `A` quadratic and
/// `B` independent of `t`, obtained by substituting
/// `x = p + r (sin θ cos φ, sin θ sin φ, cos θ)` into the ellipsoid level
/// set `Σ ((x_d - c_d) / e_d)² = 1`.
#[derive(Debug, Clone, Copy)]
struct MeridianEquation {
    a2: f64,
    a1: f64,
    a0: f64,
    b: f64,
}

impl MeridianEquation {
    fn new(e: &Ellipsoid, p: Vec3, r: f64, phi: f64) -> Self {
        let q = [
            (p[0] - e.center[0]) / e.semiaxes[0],
            (p[1] - e.center[1]) / e.semiaxes[1],
            (p[2] - e.center[2]) / e.semiaxes[2],
        ];
        let s = [r / e.semiaxes[0], r / e.semiaxes[1], r / e.semiaxes[2]];
        let (sp, cp) = phi.sin_cos();
        // horizontal part of Σ s_d² u_d², which multiplies sin²θ = 1 - t²
        let k = s[0] * s[0] * cp * cp + s[1] * s[1] * sp * sp;
        let q0 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] - 1.0;
        MeridianEquation {
            a2: s[2] * s[2] - k,
            a1: 2.0 * q[2] * s[2],
            a0: q0 + k,
            b: 2.0 * (q[0] * s[0] * cp + q[1] * s[1] * sp),
        }
    }

    /// Level-set value minus one at `t = cos θ`; negative inside.
    #[inline]
    fn residual(&self, t: f64) -> f64 {
        (self.a2 * t + self.a1) * t + self.a0 + self.b * (1.0 - t * t).max(0.0).sqrt()
    }

    /// Newton refinement of a root of the unsquared equation, where tangency
    /// roots of the squared quartic become simple roots.
    fn refine(&self, mut t: f64) -> f64 {
        let mut g = self.residual(t);
        for _ in 0..3 {
            let s = (1.0 - t * t).max(0.0).sqrt();
            if s < 1e-8 || g == 0.0 {
                break;
            }
            let dg = 2.0 * self.a2 * t + self.a1 - self.b * t / s;
            if dg == 0.0 {
                break;
            }
            let next = t - g / dg;
            if !(-1.0..=1.0).contains(&next) {
                break;
            }
            let gn = self.residual(next);
            if gn.abs() >= g.abs() {
                break;
            }
            t = next;
            g = gn;
        }
        t
    }

    fn scale(&self) -> f64 {
        self.a2.abs() + self.a1.abs() + self.a0.abs() + self.b.abs()
    }

    /// `A(t)² - B²(1 - t²)`.
    fn quartic(&self) -> QuarticCoefficients {
        let (a2, a1, a0, b) = (self.a2, self.a1, self.a0, self.b);
        let b2 = b * b;
        QuarticCoefficients([
            a2 * a2,
            2.0 * a2 * a1,
            a1 * a1 + 2.0 * a2 * a0 + b2,
            2.0 * a1 * a0,
            a0 * a0 - b2,
        ])
    }
}

/// Quartic in `t = cos θ` whose real roots contain every intersection of
/// the meridian at azimuth `phi` of the sphere `|x - p| = r` with the
/// ellipsoid surface.
pub fn sphere_ellipsoid_quartic(e: &Ellipsoid, p: Vec3, r: f64, phi: f64) -> Result<QuarticCoefficients> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("sphere radius must be positive, got {r}")));
    }
    Ok(MeridianEquation::new(e, p, r, phi).quartic())
}

/// Arcs of one meridian lying inside an ellipsoid, as `(lower, upper)`
/// pairs of `cos θ`, sorted and disjoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntersectionIntervals {
    pub phi: f64,
    pub intervals: Vec<(f64, f64)>,
}

/// Roots of the squared equation that do not satisfy the unsquared one to
/// this relative tolerance are discarded.
const SPURIOUS_ROOT_TOL: f64 = 1e-7;
/// Arcs narrower than this are tangencies and are dropped.
const MIN_ARC: f64 = 1e-12;

/// Inside arcs stored inline; at most three arcs can occur per meridian.
#[derive(Debug, Clone, Copy, Default)]
struct Arcs {
    buf: [(f64, f64); 4],
    len: usize,
}

impl Arcs {
    fn as_slice(&self) -> &[(f64, f64)] {
        &self.buf[..self.len]
    }

    fn total(&self) -> f64 {
        self.as_slice().iter().map(|(lo, hi)| hi - lo).sum()
    }
}

fn arcs(eq: &MeridianEquation) -> Result<Arcs> {
    let roots = solve_quartic(&eq.quartic())?;
    let tol = SPURIOUS_ROOT_TOL * eq.scale().max(1.0);
    let mut cuts = [0.0f64; 6];
    let mut n = 0;
    cuts[n] = -1.0;
    n += 1;
    for &t in roots.iter() {
        if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&t) {
            continue;
        }
        let t = t.clamp(-1.0, 1.0);
        if eq.residual(t).abs() <= tol {
            cuts[n] = eq.refine(t);
            n += 1;
        }
    }
    cuts[n] = 1.0;
    n += 1;
    cuts[..n].sort_by(|a, b| a.total_cmp(b));

    let mut out = Arcs::default();
    let mut open: Option<(f64, f64)> = None;
    for w in cuts[..n].windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if !(hi > lo) {
            continue;
        }
        let inside = eq.residual(0.5 * (lo + hi)) <= 0.0;
        match (&mut open, inside) {
            (Some(cur), true) => cur.1 = hi,
            (None, true) => open = Some((lo, hi)),
            (Some(cur), false) => {
                if cur.1 - cur.0 >= MIN_ARC {
                    out.buf[out.len] = *cur;
                    out.len += 1;
                }
                open = None;
            }
            (None, false) => {}
        }
    }
    if let Some(cur) = open {
        if cur.1 - cur.0 >= MIN_ARC {
            out.buf[out.len] = cur;
            out.len += 1;
        }
    }
    Ok(out)
}

/// Inside arcs of the meridian at global azimuth `phi`.
pub fn meridian_intervals(e: &Ellipsoid, p: Vec3, r: f64, phi: f64) -> Result<IntersectionIntervals> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("sphere radius must be positive, got {r}")));
    }
    let found = arcs(&MeridianEquation::new(e, p, r, phi))?;
    Ok(IntersectionIntervals {
        phi,
        intervals: found.as_slice().to_vec(),
    })
}

/// `F(φ) = Σ (upper - lower)` over the arcs.
pub fn meridian_sum(iv: &IntersectionIntervals) -> f64 {
    iv.intervals.iter().map(|(lo, hi)| hi - lo).sum()
}

/// Evaluates `F` and the arc count in the transducer-aligned frame, where
/// local azimuth `φ` corresponds to global azimuth `φ + offset`.
struct MeridianSampler<'a> {
    e: &'a Ellipsoid,
    p: Vec3,
    r: f64,
    offset: f64,
}

impl MeridianSampler<'_> {
    fn sample(&self, phi: f64) -> Result<(f64, usize)> {
        let eq = MeridianEquation::new(self.e, self.p, self.r, phi + self.offset);
        let found = arcs(&eq)?;
        let value = found.total();
        if !value.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite meridian sum at p = {:?}, r = {}, phi = {}",
                self.p, self.r, phi
            )));
        }
        Ok((value, found.len))
    }
}

/// Area of the part of the sphere `|x - p| = r` inside the ellipsoid
/// (amplitude not applied).
///
/// The sphere's azimuth is measured from the transducer's own azimuth so
/// that rotating transducer and ellipsoid together about `z` leaves the
/// sampled integrand unchanged.
pub fn project_ellipsoid(e: &Ellipsoid, p: Vec3, r: f64, cfg: &ForwardConfig) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("sphere radius must be positive, got {r}")));
    }
    if (norm(p) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("transducer {p:?} is not on the unit sphere")));
    }
    let (near, far) = e.distance_bounds(p);
    if r <= near || r >= far {
        return Ok(0.0);
    }

    let sampler = MeridianSampler {
        e,
        p,
        r,
        offset: p[1].atan2(p[0]),
    };
    let n = cfg.n_smooth;
    let step = TAU / n as f64;
    let mut values = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for m in 0..n {
        let (v, c) = sampler.sample(m as f64 * step)?;
        values.push(v);
        counts.push(c);
    }

    if counts.iter().all(|&c| c == counts[0]) {
        return Ok(r * r * step * values.iter().sum::<f64>());
    }

    // Locate every change of the arc count between neighbouring samples.
    let mut breaks = Vec::new();
    for m in 0..n {
        let next = (m + 1) % n;
        if counts[m] != counts[next] {
            let mut lo = m as f64 * step;
            let mut hi = lo + step;
            while hi - lo > cfg.breakpoint_width {
                let mid = 0.5 * (lo + hi);
                let (_, c) = sampler.sample(mid)?;
                if c == counts[m] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push((0.5 * (lo + hi), m));
        }
    }

    // Integrate each piece between consecutive breakpoints (cyclically).
    let mut total = 0.0;
    let nb = breaks.len();
    for b in 0..nb {
        let (start, m_start) = breaks[b];
        let (mut end, m_end) = breaks[(b + 1) % nb];
        if b + 1 == nb {
            end += TAU;
        }
        let len = end - start;
        if len < 1e-12 {
            continue;
        }
        // The samples strictly inside the piece are m_start+1 ..= m_end
        // (cyclically); skip pieces where they all see no arc.
        let inside: Vec<usize> = if b + 1 == nb {
            (m_start + 1..=m_end + n).map(|m| m % n).collect()
        } else {
            (m_start + 1..=m_end).collect()
        };
        if !inside.is_empty() && inside.iter().all(|&m| counts[m] == 0) {
            continue;
        }
        total += integrate_piece(&sampler, &cfg.gauss, start, len)?;
    }
    Ok(r * r * total)
}

/// Gauss–Legendre over `[start, start + len]` after the substitution
/// `φ = start + len (3u² - 2u³)`, whose vanishing end derivatives absorb
/// the square-root behaviour of `F` at tangency breakpoints.
fn integrate_piece(sampler: &MeridianSampler<'_>, gauss: &QuadratureRule, start: f64, len: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (&u, &w) in gauss.nodes.iter().zip(&gauss.weights) {
        let phi = start + len * u * u * (3.0 - 2.0 * u);
        let jac = 6.0 * len * u * (1.0 - u);
        let (v, _) = sampler.sample(phi)?;
        acc += w * jac * v;
    }
    Ok(acc)
}

/// Spherical Radon transform of a phantom on the given acquisition grid.
///
/// Ellipsoids rotationally symmetric about `z` are projected once per polar
/// index and reused across azimuths.
pub fn simulate(ph: &Phantom, grid: &TransducerGrid, radial: &RadialGrid, cfg: &ForwardConfig) -> Result<Sinogram> {
    let mut sino = Sinogram::zeros(grid.clone(), radial.clone());
    let n_r = radial.n_r;
    let n_theta = grid.n_theta;
    for e in ph.ellipsoids() {
        let amp = e.amplitude;
        let project_row = |i: usize, j: usize| -> Result<Vec<f64>> {
            let p = grid.position(i, j);
            radial
                .radii
                .iter()
                .map(|&r| {
                    if r > 0.0 {
                        project_ellipsoid(e, p, r, cfg)
                    } else {
                        Ok(0.0)
                    }
                })
                .collect()
        };
        if e.is_z_axisymmetric() {
            let columns = (0..n_theta)
                .into_par_iter()
                .map(|j| project_row(0, j))
                .collect::<Result<Vec<_>>>()?;
            sino.data.par_chunks_mut(n_r).enumerate().for_each(|(row, out)| {
                let col = &columns[row % n_theta];
                for (o, v) in out.iter_mut().zip(col) {
                    *o += amp * v;
                }
            });
        } else {
            sino.data
                .par_chunks_mut(n_r)
                .enumerate()
                .try_for_each(|(row, out)| -> Result<()> {
                    let vals = project_row(row / n_theta, row % n_theta)?;
                    for (o, v) in out.iter_mut().zip(&vals) {
                        *o += amp * v;
                    }
                    Ok(())
                })?;
        }
        log::debug!("projected ellipsoid centered at {:?}", e.center);
    }
    Ok(sino)
}

/// Monte Carlo estimate of `Rf(p, r)` from `n` uniform points on the
/// sphere, with its standard error.
pub fn monte_carlo_projection(ph: &Phantom, p: Vec3, r: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 1000 {
        return Err(Error::invalid(format!(
            "Monte Carlo needs at least 1000 samples, got {n}"
        )));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("sphere radius must be positive, got {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let u: [f64; 3] = UnitSphere.sample(&mut rng);
        let v = ph.evaluate(add(p, scale(u, r)));
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let area = 4.0 * PI * r * r;
    Ok((area * mean, area * (var / n as f64).sqrt()))
}
