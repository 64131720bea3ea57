//! Standard normal CDF, its inverse (rational approximation plus one
//! Halley refinement), and a bivariate normal CDF used by the copula
//! generator diagnostics.

use statrs::function::erf;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn dnorm(x: f64) -> f64 {
    (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse standard normal CDF. Acklam's rational approximation refined with
/// one Halley step; absolute accuracy well below 1e-9 on (0, 1).
pub fn phi_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "phi_inv requires p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // one Halley refinement
    let e = phi(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Bivariate standard normal CDF P(X <= h, Y <= k) with correlation rho,
/// via Gauss-Legendre quadrature of the correlation-derivative identity.
pub fn phi2(h: f64, k: f64, rho: f64) -> f64 {
    assert!(rho > -1.0 && rho < 1.0);
    // 32-point Gauss-Legendre nodes/weights on [0, 1]
    const NODES: usize = 32;
    let (xs, ws) = gauss_legendre_01::<NODES>();
    let mut integral = 0.0;
    for i in 0..NODES {
        let r = rho * xs[i];
        let omr = 1.0 - r * r;
        integral += ws[i] * (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * omr)).exp() / omr.sqrt();
    }
    phi(h) * phi(k) + rho * integral / (2.0 * std::f64::consts::PI)
}

/// Gauss-Legendre nodes and weights on [0, 1], computed by Newton iteration
/// on the Legendre polynomial roots.
fn gauss_legendre_01<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut xs = [0.0; N];
    let mut ws = [0.0; N];
    let n = N as f64;
    // find the roots in (0, 1] by Newton, then mirror; guesses near -1
    // are too poor for Newton to converge directly
    for i in 0..(N + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(N, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(N, x);
        let w = 1.0 / ((1.0 - x * x) * dp * dp); // weight/2 for unit interval
        xs[i] = 0.5 * (1.0 - x); // map to [0,1], order irrelevant
        ws[i] = w;
        xs[N - 1 - i] = 0.5 * (1.0 + x);
        ws[N - 1 - i] = w;
    }
    (xs, ws)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    // (1 - x^2) P_n' = n (P_{n-1} - x P_n)
    let dp = n as f64 * (p0 - x * p1) / (1.0 - x * x);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_symmetry_and_values() {
        assert!((phi(0.0) - 0.5).abs() < 1e-15);
        assert!((phi(1.959963984540054) - 0.975).abs() < 1e-11);
        assert!((phi(-3.0) + phi(3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_inv_round_trip() {
        for &p in &[1e-10, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9] {
            let x = phi_inv(p);
            assert!((phi(x) - p).abs() < 1e-12 * p.max(1e-3), "p={p}");
        }
        assert!((phi_inv(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn phi2_closed_form_at_origin() {
        // Phi2(0,0;rho) = 1/4 + asin(rho)/(2 pi)
        for &rho in &[-0.9f64, -0.5, 0.0, 0.3, 0.5, 0.9] {
            let exact = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            assert!((phi2(0.0, 0.0, rho) - exact).abs() < 1e-12, "rho={rho}");
        }
    }

    #[test]
    fn phi2_independence_and_marginals() {
        assert!((phi2(0.7, -0.3, 0.0) - phi(0.7) * phi(-0.3)).abs() < 1e-14);
        // as k -> inf the bivariate CDF approaches the marginal
        assert!((phi2(0.5, 8.0, 0.6) - phi(0.5)).abs() < 1e-10);
    }
}
