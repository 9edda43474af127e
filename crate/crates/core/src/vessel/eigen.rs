//! Eigenvalues of symmetric 3x3 matrices.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues ordered by ascending magnitude: `|l1| <= |l2| <= |l3|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenTriple<T> {
    pub l1: T,
    pub l2: T,
    pub l3: T,
}

impl<T: Real> EigenTriple<T> {
    pub fn from_unsorted(mut v: [T; 3]) -> Self {
        v.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("finite eigenvalues"));
        EigenTriple {
            l1: v[0],
            l2: v[1],
            l3: v[2],
        }
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.l1, self.l2, self.l3]
    }

    /// Bright-structure convention: `l2` and `l3` negated.
    pub fn bright(&self) -> Self {
        EigenTriple {
            l1: self.l1,
            l2: -self.l2,
            l3: -self.l3,
        }
    }
}

/// Eigenvalues of the symmetric matrix given as `[xx, yy, zz, xy, xz, yz]`.
pub fn eig3_symmetric<T: Real>(h: [T; 6]) -> Result<EigenTriple<T>> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("non-finite matrix entry in {h:?}")));
    }
    Ok(EigenTriple::from_unsorted(eigenvalues(h)))
}

/// Unchecked eigenvalues (any order) via the trigonometric closed form, with
/// an implicit QL fallback close to a repeated root.
#[inline]
pub(crate) fn eigenvalues<T: Real>(h: [T; 6]) -> [T; 3] {
    let [a, b, c, d, e, f] = h;
    let p1 = d * d + e * e + f * f;
    if p1 == T::zero() {
        return [a, b, c];
    }
    let three = T::c(3.0);
    let q = (a + b + c) / three;
    let (aq, bq, cq) = (a - q, b - q, c - q);
    let p2 = aq * aq + bq * bq + cq * cq + T::c(2.0) * p1;
    let p = (p2 / T::c(6.0)).sqrt();
    // det((A - qI) / p) / 2
    let r = (aq * (bq * cq - f * f) - d * (d * cq - f * e) + e * (d * f - bq * e)) / (T::c(2.0) * p * p * p);
    if (T::one() - r.abs()) < T::c(1e-12) {
        return ql_eigenvalues(h);
    }
    let phi = r.acos() / three;
    let two_pi_3 = T::c(2.0 * std::f64::consts::FRAC_PI_3);
    let e1 = q + T::c(2.0) * p * phi.cos();
    let e3 = q + T::c(2.0) * p * (phi + two_pi_3).cos();
    let e2 = three * q - e1 - e3;
    [e1, e2, e3]
}

/// Givens reduction to tridiagonal form followed by implicit QL with
/// Wilkinson shifts (eigenvalues only).
pub(crate) fn ql_eigenvalues<T: Real>(h: [T; 6]) -> [T; 3] {
    let [a00, a11, a22, a01, a02, a12] = h;
    let mut d = [a00, a11, a22];
    let mut e = [a01, a12, T::zero()];
    if a02 != T::zero() {
        let r = a01.hypot(a02);
        let (c, s) = (a01 / r, a02 / r);
        let two = T::c(2.0);
        d[1] = c * c * a11 + two * c * s * a12 + s * s * a22;
        d[2] = s * s * a11 - two * c * s * a12 + c * c * a22;
        e[0] = r;
        e[1] = c * s * (a22 - a11) + (c * c - s * s) * a12;
    }
    tql(&mut d, &mut e);
    d
}

fn tql<T: Real>(d: &mut [T; 3], e: &mut [T; 3]) {
    let n = 3;
    let two = T::c(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iter == 60 {
                break;
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
}
