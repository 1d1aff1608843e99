//! Divided differences of analytic functions that stay accurate when the two
//! nodes coincide.
//!
//! For distinct, well separated nodes the ordinary quotient is used. Close or
//! equal nodes are handled with the Cauchy representation
//! `f[z1, z2] = (1 / 2 pi i) \oint f(s) / ((s - z1)(s - z2)) ds` on a circle
//! around the nodes, discretised with the trapezoidal rule (geometric
//! convergence for analytic integrands).

use num_complex::Complex64;
use std::f64::consts::PI;

/// Number of trapezoidal nodes on the contour.
pub const CONTOUR_POINTS: usize = 32;

fn contour_nodes(z1: Complex64, z2: Complex64, radius: f64, n: usize) -> Vec<(Complex64, Complex64)> {
    let centre = 0.5 * (z1 + z2);
    (0..n)
        .map(|j| {
            let theta = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            let offset = Complex64::from_polar(radius, theta);
            let s = centre + offset;
            // weight = (s - centre) / ((s - z1)(s - z2)) / n
            let w = offset / ((s - z1) * (s - z2)) / n as f64;
            (s, w)
        })
        .collect()
}

/// First divided difference `(f(z1) - f(z2)) / (z1 - z2)`, or `f'(z1)` when
/// the nodes coincide.
///
/// `radius` must be well above `|z1 - z2|` and below the distance to the
/// nearest singularity of `f`; the quotient is used whenever
/// `|z1 - z2| >= switch * radius`.
pub fn divided_difference<F>(f: F, z1: Complex64, z2: Complex64, radius: f64, switch: f64) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    let d = z1 - z2;
    if d.norm() >= switch * radius {
        return (f(z1) - f(z2)) / d;
    }
    contour_nodes(z1, z2, radius, CONTOUR_POINTS)
        .into_iter()
        .map(|(s, w)| f(s) * w)
        .sum()
}

/// Tensor divided difference `Δ_a Δ_b F(a, b)` over the node pair `(z1, z2)` in
/// both arguments.
pub fn divided_difference_2<F>(f: F, z1: Complex64, z2: Complex64, radius: f64, switch: f64) -> Complex64
where
    F: Fn(Complex64, Complex64) -> Complex64,
{
    let d = z1 - z2;
    if d.norm() >= switch * radius {
        let f11 = f(z1, z1);
        let f12 = f(z1, z2);
        let f21 = f(z2, z1);
        let f22 = f(z2, z2);
        return ((f11 - f21) - (f12 - f22)) / (d * d);
    }
    let nodes = contour_nodes(z1, z2, radius, CONTOUR_POINTS);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(a, wa) in &nodes {
        for &(b, wb) in &nodes {
            acc += f(a, b) * wa * wb;
        }
    }
    acc
}
