//! Gauss–Hermite quadrature, used as the independent oracle for
//! infinite-width kernel limits.

use crate::math;
use alloc::vec;
use alloc::vec::Vec;

/// Nodes and weights for n-point Gauss–Hermite quadrature with weight
/// `e^{-x^2}`: `∫ f(x) e^{-x^2} dx ≈ Σ w_i f(x_i)`.
///
/// Newton iteration on the orthonormal Hermite recurrence; accurate to
/// near machine precision for the modest `n` used here.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        // Standard initial guesses for the i-th largest root.
        z = match i {
            0 => math::sqrt(2.0 * nf + 1.0) - 1.85575 * libm_powf(2.0 * nf + 1.0, -1.0 / 6.0),
            1 => z - 1.14 * libm_powf(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite values at z.
            let mut p1 = 1.0 / math::sqrt(math::sqrt(core::f64::consts::PI));
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * math::sqrt(2.0 / jf) * p2 - math::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = math::sqrt(2.0 * nf) * p2;
            let dz = p1 / pp;
            z -= dz;
            if math::abs(dz) < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

fn libm_powf(x: f64, p: f64) -> f64 {
    // x^p for positive x via exp/ln, enough for the initial guesses.
    math::exp(p * math::ln(x))
}

/// `E_{w ~ N(0,1)}[ g(w) ]` by n-point Gauss–Hermite quadrature.
pub fn gauss_normal_expectation<F: Fn(f64) -> f64>(n: usize, g: F) -> f64 {
    let (nodes, weights) = gauss_hermite(n);
    let sqrt2 = math::sqrt(2.0);
    let inv_sqrt_pi = 1.0 / math::sqrt(core::f64::consts::PI);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * g(sqrt2 * x))
        .sum::<f64>()
        * inv_sqrt_pi
}
