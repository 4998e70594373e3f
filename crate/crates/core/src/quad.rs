//! Adaptive Gauss-Kronrod quadrature (G7/K15) for the bath integrals.
//!
//! The integrands here are products of a spectral density, a thermal factor
//! and trigonometric window functions. They can be mildly singular at the
//! origin (sub-Ohmic exponents) and oscillatory at long lags, so the engine
//! bisects the worst interval until the global error estimate meets the
//! requested tolerance.

use num_complex::Complex64 as C64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// QUADPACK dqk15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 200_000;

struct Segment {
    a: f64,
    b: f64,
    value: C64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = C64::new(0.0, 0.0);
    let mut gauss = C64::new(0.0, 0.0);
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        if x == 0.0 {
            let fc = f(c);
            kronrod += wk * fc;
            gauss += WG[3] * fc;
        } else {
            let flo = f(c - h * x);
            let fhi = f(c + h * x);
            kronrod += wk * (flo + fhi);
            // odd Kronrod points (even index here) are not Gauss points
            if i % 2 == 1 {
                gauss += WG[i / 2] * (flo + fhi);
            }
        }
    }
    kronrod *= h;
    gauss *= h;
    ((kronrod), (kronrod - gauss).norm())
}

/// Integrate a complex-valued function over [a, b] to the requested
/// relative tolerance (with an absolute floor for near-zero integrals).
pub fn integrate_complex<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<C64> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::Argument(format!("bad integration range [{a}, {b}]")));
    }
    let (v0, e0) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v0, err: e0 });
    let mut total = v0;
    let mut total_err = e0;

    while total_err > (rel_tol * total.norm()).max(abs_floor) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature did not converge: achieved absolute error {total_err:.3e} \
                 ({} intervals)",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap non-empty while error positive");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at machine resolution; accept its estimate
            total_err -= worst.err;
            let pinned = Segment { err: 0.0, ..worst };
            heap.push(pinned);
            continue;
        }
        let (vl, el) = gk15(&f, worst.a, mid);
        let (vr, er) = gk15(&f, mid, worst.b);
        total += vl + vr - worst.value;
        total_err += el + er - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: vl, err: el });
        heap.push(Segment { a: mid, b: worst.b, value: vr, err: er });
    }
    Ok(total)
}

/// Real-valued wrapper around [`integrate_complex`].
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    integrate_complex(|x| C64::new(f(x), 0.0), a, b, rel_tol, abs_floor).map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12, 1e-14).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_oscillatory() {
        // \int_0^{10 pi} sin(x) dx = 0, \int_0^{9.5 pi} sin(x) dx = 1
        let v = integrate(f64::sin, 0.0, 9.5 * PI, 1e-12, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn integrates_endpoint_singularity() {
        // \int_0^1 x^{-0.4} dx = 1/0.6
        let v = integrate(|x| x.powf(-0.4), 1e-300, 1.0, 1e-10, 1e-12).unwrap();
        assert!((v - 1.0 / 0.6).abs() < 1e-8, "got {v}");
    }

    #[test]
    fn complex_integrand() {
        // \int_0^1 e^{ix} dx = sin(1) + i(1 - cos(1))
        let v = integrate_complex(|x| C64::new(0.0, x).exp(), 0.0, 1.0, 1e-13, 1e-15).unwrap();
        assert!((v.re - 1.0f64.sin()).abs() < 1e-13);
        assert!((v.im - (1.0 - 1.0f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn reports_nonconvergence() {
        // pathological: rapidly oscillating with tiny tolerance and tight cap
        let r = integrate(|x| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, 1e-14, 0.0);
        assert!(r.is_err());
    }
}
