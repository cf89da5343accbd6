//! Real roots of polynomials of degree at most four, from the eigenvalues
//! of the balanced companion matrix.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Coefficients `[c4, c3, c2, c1, c0]` of `c4 t⁴ + c3 t³ + c2 t² + c1 t + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoefficients(pub [f64; 5]);

impl QuarticCoefficients {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.0;
        (((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]
    }

    #[inline]
    fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let c = &self.0;
        let mut p = c[0];
        let mut dp = 0.0;
        for &ci in &c[1..] {
            dp = dp * t + p;
            p = p * t + ci;
        }
        (p, dp)
    }

    /// `Σ |c_i| |t|^i`, the natural scale of a rounding error in `eval(t)`.
    #[inline]
    fn magnitude_at(&self, t: f64) -> f64 {
        let a = t.abs();
        self.0.iter().fold(0.0, |acc, c| acc * a + c.abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Up to four real roots, ascending, with multiplicity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RealRoots {
    buf: [f64; 4],
    len: usize,
}

impl RealRoots {
    fn push(&mut self, t: f64) {
        self.buf[self.len] = t;
        self.len += 1;
    }
}

impl Deref for RealRoots {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.buf[..self.len]
    }
}

/// Leading coefficients smaller than this fraction of the largest one are
/// treated as zero, lowering the degree.
const LEADING_CUTOFF: f64 = 1e-13;
/// Eigenvalues with `|im| <= IMAG_TOL * max(1, |re|)` are candidate
/// (nearly double) real roots.
const IMAG_TOL: f64 = 1e-5;
/// Accepted roots satisfy `|p(t)| <= RESIDUAL_TOL * Σ|c_i||t|^i`.
const RESIDUAL_TOL: f64 = 1e-9;

pub fn solve_quartic(q: &QuarticCoefficients) -> Result<RealRoots> {
    let scale = q.max_abs();
    if !scale.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "non-finite quartic coefficients {:?}",
            q.0
        )));
    }
    if q.0.iter().all(|c| c.abs() < 1e-300) {
        return Err(Error::DegeneratePolynomial);
    }
    let lead =
        q.0.iter()
            .position(|c| c.abs() > LEADING_CUTOFF * scale)
            .expect("some coefficient reaches the maximum");
    let degree = 4 - lead;
    let mut roots = RealRoots::default();
    if degree == 0 {
        return Ok(roots);
    }

    // Companion matrix of the monic polynomial, 1-based indexing to follow
    // the classic Hessenberg QR formulation.
    let c = &q.0[lead..];
    let mut a = [[0.0f64; 5]; 5];
    for j in 1..=degree {
        a[1][j] = -c[j] / c[0];
    }
    for i in 2..=degree {
        a[i][i - 1] = 1.0;
    }
    balance(&mut a, degree);
    let mut wr = [0.0; 5];
    let mut wi = [0.0; 5];
    hessenberg_qr(&mut a, degree, &mut wr, &mut wi).map_err(|e| match e {
        Error::NumericalFailure(msg) => Error::NumericalFailure(format!("{msg} for coefficients {:?}", q.0)),
        other => other,
    })?;

    for m in 1..=degree {
        if wi[m].abs() > IMAG_TOL * wr[m].abs().max(1.0) {
            continue;
        }
        let mut t = wr[m];
        let (p, dp) = q.eval_with_derivative(t);
        if dp != 0.0 {
            let polished = t - p / dp;
            if polished.is_finite() && q.eval(polished).abs() < p.abs() {
                t = polished;
            }
        }
        if q.eval(t).abs() <= RESIDUAL_TOL * q.magnitude_at(t) {
            roots.push(t);
        }
    }
    roots.buf[..roots.len].sort_by(|x, y| x.total_cmp(y));
    Ok(roots)
}

/// Diagonal similarity scaling by powers of two so that row and column
/// norms are comparable.
fn balance(a: &mut [[f64; 5]; 5], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for j in 1..=n {
                        a[j][i] *= f;
                    }
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift
/// QR iteration. `a` is destroyed.
fn hessenberg_qr(a: &mut [[f64; 5]; 5], n: usize, wr: &mut [f64; 5], wi: &mut [f64; 5]) -> Result<()> {
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                } else {
                    if its == 100 {
                        return Err(Error::NumericalFailure(
                            "companion-matrix QR iteration did not converge".into(),
                        ));
                    }
                    if its > 0 && its % 10 == 0 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = nn.min(k + 3);
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roots_of(c: [f64; 5]) -> Vec<f64> {
        solve_quartic(&QuarticCoefficients(c)).unwrap().to_vec()
    }

    fn assert_roots(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn four_distinct_roots() {
        let got = roots_of([1.0, 0.0, -4.25, 0.0, 1.0]);
        assert_roots(&got, &[-2.0, -0.5, 0.5, 2.0], 1e-12);
    }

    #[test]
    fn double_root_with_complex_pair() {
        // (t - 1)²(t² + 1)
        let q = QuarticCoefficients([1.0, -2.0, 2.0, -2.0, 1.0]);
        let got = solve_quartic(&q).unwrap();
        assert_roots(&got, &[1.0, 1.0], 1e-7);
        for &t in got.iter() {
            assert!(q.eval(t).abs() <= 1e-9 * q.max_abs());
        }
    }

    #[test]
    fn no_real_roots() {
        assert!(roots_of([1.0, 0.0, 0.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn lower_degree() {
        // 64t² + 112t + 49 = (8t + 7)²
        let got = roots_of([0.0, 0.0, 64.0, 112.0, 49.0]);
        assert_roots(&got, &[-0.875, -0.875], 1e-7);
        assert_roots(&roots_of([0.0, 0.0, 0.0, 2.0, -1.0]), &[0.5], 1e-15);
        assert!(roots_of([0.0, 0.0, 0.0, 0.0, 3.0]).is_empty());
        assert_roots(&roots_of([0.0, 1.0, 0.0, -1.0, 0.0]), &[-1.0, 0.0, 1.0], 1e-14);
    }

    #[test]
    fn two_complex_pairs_converge() {
        // roots ≈ -2.0945 ± 0.1296i and 1.6897 ± 0.0960i; the balanced
        // companion matrix stalls without repeated exceptional shifts
        let q = QuarticCoefficients([
            44.12642441945669,
            35.72591253444275,
            -303.9565871213149,
            -127.23976923614649,
            556.5994708110056,
        ]);
        assert!(solve_quartic(&q).unwrap().is_empty());
    }

    #[test]
    fn degenerate() {
        assert!(matches!(
            solve_quartic(&QuarticCoefficients([0.0; 5])),
            Err(Error::DegeneratePolynomial)
        ));
    }

    fn expand(r: [f64; 4], lead: f64) -> [f64; 5] {
        let mut c = [lead, 0.0, 0.0, 0.0, 0.0];
        // multiply by (t - r_k) successively; c[0] is the leading term
        for (deg, root) in r.into_iter().enumerate() {
            let mut next = [0.0; 5];
            for i in 0..=deg {
                next[i] += c[i];
                next[i + 1] -= root * c[i];
            }
            c = next;
        }
        c
    }

    proptest! {
        #[test]
        fn recovers_constructed_roots(
            mut r in prop::array::uniform4(-3.0f64..3.0),
            lead in prop_oneof![0.5f64..40.0, -40.0f64..-0.5],
        ) {
            r.sort_by(|a, b| a.total_cmp(b));
            prop_assume!(r.windows(2).all(|w| w[1] - w[0] > 1e-2));
            let c = expand(r, lead);
            let got = roots_of(c);
            prop_assert_eq!(got.len(), 4);
            for (g, w) in got.iter().zip(&r) {
                prop_assert!((g - w).abs() < 1e-8, "{:?} vs {:?}", got, r);
            }
        }

        #[test]
        fn residuals_are_small(c in prop::array::uniform5(-10.0f64..10.0)) {
            prop_assume!(c[0].abs() > 1e-3);
            let q = QuarticCoefficients(c);
            let roots = solve_quartic(&q).unwrap();
            prop_assert!(roots.windows(2).all(|w| w[0] <= w[1]));
            for &t in roots.iter() {
                prop_assert!(q.eval(t).abs() <= 1e-9 * q.magnitude_at(t));
            }
            // every sign change on a fine scan is bracketed by a root
            let lo = -20.0;
            let n = 4000;
            let step = 40.0 / n as f64;
            for s in 0..n {
                let a = lo + s as f64 * step;
                let b = a + step;
                if q.eval(a).signum() * q.eval(b).signum() < 0.0 {
                    prop_assert!(roots.iter().any(|&t| t >= a - 1e-9 && t <= b + 1e-9),
                        "missed root in [{}, {}] for {:?}: {:?}", a, b, c, roots.to_vec());
                }
            }
        }
    }
}
