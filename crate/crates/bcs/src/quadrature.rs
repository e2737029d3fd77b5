//! Quadrature primitives: Gauss-Legendre nodes/weights on an interval and an
//! adaptive Gauss-Kronrod 7/15 integrator for the angular kernel integrals.

use crate::error::{BcsError, Result};

/// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on the
/// Legendre recurrence. Exact for polynomials up to degree 2n - 1.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(BcsError::InvalidInput("gauss_legendre: n = 0".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev estimate, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                let (_, d2) = legendre_and_derivative(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre nodes and weights mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(BcsError::InvalidInput(format!(
            "gauss_legendre_on: bad interval [{a}, {b}]"
        )));
    }
    let (x, w) = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok((
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| half * v).collect(),
    ))
}

// Kronrod 15-point extension of 7-point Gauss; positive abscissae.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss-Kronrod 7/15 panel: returns (integral, |K15 - G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (half * kronrod, half * (kronrod - gauss).abs())
}

struct Panel {
    err: f64,
    a: f64,
    b: f64,
    value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over [a, b] to absolute
/// tolerance `tol`: bisect the panel with the largest error estimate until
/// the summed estimate drops below `tol`. Panels at floating-point
/// resolution are frozen rather than split further.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a > b || !(tol > 0.0) {
        return Err(BcsError::InvalidInput(format!(
            "adaptive_gk: interval [{a}, {b}], tol {tol}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let width_floor = 64.0 * f64::EPSILON * (a.abs().max(b.abs()) + 1.0);
    let mut heap = std::collections::BinaryHeap::new();
    let (v0, e0) = gk15(f, a, b);
    heap.push(Panel {
        err: e0,
        a,
        b,
        value: v0,
    });
    let mut active_err = e0;
    let mut active_val = v0;
    let mut frozen_val = 0.0;
    let mut frozen_err = 0.0;
    // Round-off floor: |K - G| cannot shrink below machine precision of the
    // accumulated value, so large integrals stop on relative accuracy.
    let floor = |val: f64| tol.max(32.0 * f64::EPSILON * val.abs());
    while active_err + frozen_err > floor(active_val + frozen_val) {
        let Some(worst) = heap.pop() else { break };
        active_err -= worst.err;
        active_val -= worst.value;
        if worst.b - worst.a <= width_floor {
            frozen_val += worst.value;
            frozen_err += worst.err;
            continue;
        }
        if heap.len() >= 20_000 {
            return Err(BcsError::Numeric(format!(
                "adaptive quadrature stalled on [{a}, {b}] with error {:.3e}",
                active_err + frozen_err + worst.err
            )));
        }
        let mid = 0.5 * (worst.a + worst.b);
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15(f, lo, hi);
            active_err += e;
            active_val += v;
            heap.push(Panel {
                err: e,
                a: lo,
                b: hi,
                value: v,
            });
        }
    }
    Ok(frozen_val + heap.iter().map(|p| p.value).sum::<f64>())
}
