//! Special functions and quadrature nodes used by the geometric kernels:
//! the exponential integral E₁ (Ewald real-space kernel), Gauss–Legendre
//! nodes (sphere quadrature, graded radial patches) and a C² bump window.

use crate::scalar::{euler_gamma, r64, rus, Real};

/// Exponential integral E₁(z) for z > 0.
///
/// Power series for z ≤ 1, modified Lentz continued fraction otherwise;
/// relative accuracy ≈ machine epsilon across the range used here.
pub fn exp_int_e1<R: Real>(z: R) -> R {
    assert!(z > R::zero(), "E1 requires a positive argument");
    if z <= R::one() {
        // E1(z) = -γ - ln z + Σ_{k≥1} (-1)^{k+1} z^k / (k·k!)
        let mut sum = R::zero();
        let mut term = R::one();
        for k in 1..=40 {
            let kf = rus::<R>(k);
            term = term * (-z) / kf;
            let contrib = -term / kf;
            sum += contrib;
            if contrib.abs() < sum.abs() * r64(1e-18) + r64(1e-300) {
                break;
            }
        }
        -euler_gamma::<R>() - z.ln() + sum
    } else {
        // E1(z) = e^{-z} / (z + 1 - 1²/(z + 3 - 2²/(z + 5 - ...)))
        let tiny = r64::<R>(1e-290);
        let mut b = z + R::one();
        let mut c = R::one() / tiny;
        let mut d = b.recip();
        let mut h = d;
        for k in 1..200 {
            let kf = rus::<R>(k);
            let a = -kf * kf;
            b += r64(2.0);
            d = (a * d + b).recip();
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            let delta = c * d;
            h = h * delta;
            if (delta - R::one()).abs() < r64(1e-17) {
                break;
            }
        }
        (-z).exp() * h
    }
}

/// Nodes and weights of n-point Gauss–Legendre quadrature on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre<R: Real>(n: usize) -> (Vec<R>, Vec<R>) {
    assert!(n >= 1);
    let mut nodes = vec![R::zero(); n];
    let mut weights = vec![R::zero(); n];
    let nf = rus::<R>(n);
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess.
        let theta = r64::<R>(std::f64::consts::PI) * (rus::<R>(i) + r64(0.75))
            / (nf + r64(0.5));
        let mut x = theta.cos();
        let mut dp = R::zero();
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < r64(1e-16) {
                let (_, d2) = legendre_and_derivative(n, x);
                dp = d2;
                break;
            }
        }
        let w = r64::<R>(2.0) / ((R::one() - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Centre node of odd rules sits exactly at zero.
        nodes[n / 2] = R::zero();
        let (_, d) = legendre_and_derivative(n, R::zero());
        weights[n / 2] = r64::<R>(2.0) / (d * d);
    }
    (nodes, weights)
}

fn legendre_and_derivative<R: Real>(n: usize, x: R) -> (R, R) {
    let mut p0 = R::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = rus::<R>(k);
        let p2 = ((r64::<R>(2.0) * kf - R::one()) * x * p1 - (kf - R::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = rus::<R>(n) * (x * p1 - p0) / (x * x - R::one());
    (p1, d)
}

/// Quintic smootherstep: 0 for t ≤ 0, 1 for t ≥ 1, C² across both ends.
pub fn smootherstep<R: Real>(t: R) -> R {
    if t <= R::zero() {
        R::zero()
    } else if t >= R::one() {
        R::one()
    } else {
        t * t * t * (t * (t * r64(6.0) - r64(15.0)) + r64(10.0))
    }
}

/// C^∞ step built from exp(-1/t): 0 for t ≤ 0, 1 for t ≥ 1. Used by the
/// windowed quadrature, where infinite smoothness keeps the grid rule
/// super-algebraically convergent.
pub fn smooth_step_cinf<R: Real>(t: R) -> R {
    if t <= R::zero() {
        R::zero()
    } else if t >= R::one() {
        R::one()
    } else {
        let f = |u: R| (-u.recip()).exp();
        let a = f(t);
        a / (a + f(R::one() - t))
    }
}
