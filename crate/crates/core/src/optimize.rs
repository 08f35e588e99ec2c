// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bracketing one-dimensional solvers (Brent 1973).

use crate::Scalar;

pub(crate) struct Outcome<T> {
    pub x: T,
    pub converged: bool,
}

/// Root of `f` inside `[a, b]`, given `f(a)` and `f(b)` of opposite sign.
pub(crate) fn zeroin<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut a: T,
    mut b: T,
    mut fa: T,
    mut fb: T,
    rel_tol: T,
    max_iter: usize,
) -> Outcome<T> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let eps = T::epsilon();
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * eps * b.abs() + half * rel_tol * (T::one() + b.abs());
        let m = half * (c - b);
        if m.abs() <= tol || fb == T::zero() {
            return Outcome { x: b, converged: true };
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < T::lit(3.0) * m * q - (tol * q).abs() && p < (half * e * q).abs() {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol {
            d
        } else if m > T::zero() {
            tol
        } else {
            -tol
        };
        fb = f(b);
    }
    Outcome {
        x: b,
        converged: false,
    }
}

/// Minimum of `f` on `[lo, hi]` by golden section with parabolic steps.
pub(crate) fn minimize<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    lo: T,
    hi: T,
    rel_tol: T,
    abs_tol: T,
    max_iter: usize,
) -> (Outcome<T>, T) {
    let golden = T::lit(0.381_966_011_250_105_1);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let tiny = abs_tol.max(T::epsilon() * T::lit(10.0));
    let (mut a, mut b) = (lo, hi);
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d = T::zero();
    let mut e = T::zero();

    for _ in 0..max_iter {
        let xm = half * (a + b);
        let tol1 = rel_tol * x.abs() + tiny;
        let tol2 = two * tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            return (Outcome { x, converged: true }, fx);
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = two * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (half * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm - x >= T::zero() { tol1 } else { -tol1 };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (Outcome { x, converged: false }, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroin_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0;
        let out = zeroin(f, 0.0, 3.0, f(0.0), f(3.0), 1e-14, 200);
        assert!(out.converged);
        assert!((out.x - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn minimize_quadratic_and_skewed() {
        let (out, fx) = minimize(|x: f64| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-10, 1e-12, 200);
        assert!(out.converged);
        assert!((out.x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);

        let (out, _) = minimize(|x: f64| x.exp() - 2.0 * x, -4.0, 4.0, 1e-10, 1e-12, 200);
        assert!((out.x - 2f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn works_in_f32() {
        let f = |x: f32| x * x - 3.0;
        let out = zeroin(f, 0.0, 2.0, f(0.0), f(2.0), 1e-6, 100);
        assert!((out.x - 3f32.sqrt()).abs() < 1e-5);
    }
}
