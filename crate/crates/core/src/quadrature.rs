//! Gauss–Hermite and Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Hermite rule for `int f(t) exp(-t^2) dt`.
///
/// Initial nodes are the eigenvalues of the Jacobi matrix; each is then
/// polished by Newton's method on the orthonormal Hermite recurrence, which
/// also gives weights with full relative accuracy deep in the tails.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let mut diag = vec![0.0; n];
    let mut off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    off.push(0.0);
    tridiagonal_eigenvalues(&mut diag, &mut off);
    let mut nodes = diag;
    nodes.sort_by(f64::total_cmp);
    let weights = nodes
        .iter_mut()
        .map(|z| {
            for _ in 0..20 {
                let (p, deriv) = hermite_orthonormal(n, *z, pim4);
                let dz = p / deriv;
                *z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, deriv) = hermite_orthonormal(n, *z, pim4);
            2.0 / (deriv * deriv)
        })
        .collect();
    Rule { nodes, weights }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL, in place.
/// `e[i]` couples rows `i` and `i + 1`; `e[n - 1]` is scratch.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "QL iteration did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Orthonormal Hermite value at `z` and its derivative.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Rule { nodes, weights }
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(rule: &Rule, a: f64, b: f64, panels: usize, f: F) -> f64 {
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * width;
            let mid = lo + 0.5 * width;
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| w * f(mid + 0.5 * width * t))
                .sum::<f64>()
                * 0.5
                * width
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for n in [5, 20, 200, 256] {
            let r = gauss_hermite(n);
            let total: f64 = r.weights.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-12, "n={n}: {total}");
            // E[X^{2k}] = (2k-1)!! for X = sqrt(2) t under the normalized weight
            let mut double_fact = 1.0;
            for k in 1..=n.min(12) / 2 {
                double_fact *= (2 * k - 1) as f64;
                let m: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(t, w)| w * (2f64.sqrt() * t).powi(2 * k as i32))
                    .sum::<f64>()
                    / PI.sqrt();
                assert!((m / double_fact - 1.0).abs() < 1e-11, "n={n} k={k}: {m}");
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn legendre_polynomials_exact() {
        let r = gauss_legendre(16);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let v = integrate(&r, 0.0, 2.0, 3, |x| x.powi(7) - 3.0 * x * x);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-12);
        let g = integrate(&gauss_legendre(32), -8.0, 8.0, 8, |x| (-x * x / 2.0).exp());
        assert!((g - (2.0 * PI).sqrt()).abs() < 1e-12);
    }
}
