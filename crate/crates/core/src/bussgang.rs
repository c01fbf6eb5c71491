//! Bussgang characterization of a memoryless nonlinearity driven by a
//! zero-mean Gaussian input: `Z = C X + eta`, with `eta` uncorrelated to `X`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::led::{ibo_to_rho, LedTransfer, ShiftedNonlinearity};
use crate::quadrature::{self, Rule};

/// Gauss–Hermite order used by [`bussgang_numeric`].
pub const HERMITE_NODES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BussgangStats {
    /// Bussgang gain `E[X Z] / sigma_x^2`.
    pub c: f64,
    /// `E[Z^2]` of the zero-mean output.
    pub ez2: f64,
    /// Distortion power `E[Z^2] - C^2 sigma_x^2`.
    pub sigma_eta_sq: f64,
    pub sigma_x_sq: f64,
}

impl BussgangStats {
    fn from_moments(c: f64, ez2: f64, sigma_x_sq: f64) -> Self {
        let raw = ez2 - c * c * sigma_x_sq;
        // rounding in the subtraction can leave a negative residue of order ulp(ez2)
        debug_assert!(raw >= -1e-10 * ez2.abs().max(1e-300), "negative distortion {raw}");
        Self {
            c,
            ez2,
            sigma_eta_sq: raw.max(0.0),
            sigma_x_sq,
        }
    }

    /// Signal-to-distortion ratio `C^2 sigma_x^2 / sigma_eta^2`.
    pub fn sdr(&self) -> f64 {
        self.c * self.c * self.sigma_x_sq / self.sigma_eta_sq
    }
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Closed-form statistics of a symmetric clipped polynomial.
///
/// Works on the exactly odd part of `snl`, using the truncated Gaussian
/// moments `I_j = int_{-l}^{l} x^j N(x; 0, sigma^2) dx`.
pub fn bussgang_closed_form(snl: &ShiftedNonlinearity, sigma_x_sq: f64) -> Result<BussgangStats> {
    if !snl.symmetric {
        return Err(Error::Asymmetric);
    }
    check_variance(sigma_x_sq)?;
    let odd = snl.odd_part();
    let sigma = sigma_x_sq.sqrt();
    let lambda = odd.lambda_u;
    let level = odd.out_hi;
    let a = &odd.coeffs;
    let n = a.len() - 1;

    let (edge, tail) = if lambda.is_finite() {
        (
            (-lambda * lambda / (2.0 * sigma_x_sq)).exp() / (2.0 * PI).sqrt(),
            erfc(lambda / (SQRT_2 * sigma)),
        )
    } else {
        (0.0, 0.0)
    };

    let mut moments = vec![0.0; 2 * n + 2];
    moments[0] = 1.0 - tail;
    for j in (2..moments.len()).step_by(2) {
        let boundary = if edge == 0.0 {
            0.0
        } else {
            2.0 * lambda.powi(j as i32 - 1) * sigma * edge
        };
        moments[j] = -boundary + (j as f64 - 1.0) * sigma_x_sq * moments[j - 2];
    }

    let tail_xz = if edge == 0.0 { 0.0 } else { 2.0 * level * sigma * edge };
    let c = (tail_xz + a.iter().enumerate().map(|(l, al)| al * moments[l + 1]).sum::<f64>())
        / sigma_x_sq;

    let mut ez2 = if tail == 0.0 { 0.0 } else { level * level * tail };
    for (l, al) in a.iter().enumerate() {
        for (k, ak) in a.iter().enumerate() {
            ez2 += al * ak * moments[l + k];
        }
    }
    Ok(BussgangStats::from_moments(c, ez2, sigma_x_sq))
}

fn hermite_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| quadrature::gauss_hermite(HERMITE_NODES))
}

fn legendre_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| quadrature::gauss_legendre(48))
}

/// Quadrature statistics for any clipped polynomial, symmetric or not.
///
/// The polynomial branch is integrated over the whole line by Gauss–Hermite
/// (exact for polynomial integrands), the parts of it lying beyond the
/// thresholds are removed with Gauss–Legendre tail integrals, and the constant
/// clipped tails are added in closed form. A nonzero output mean is removed
/// before forming `E[Z^2]`.
pub fn bussgang_numeric(snl: &ShiftedNonlinearity, sigma_x_sq: f64) -> Result<BussgangStats> {
    check_variance(sigma_x_sq)?;
    let sigma = sigma_x_sq.sqrt();
    let gh = hermite_rule();
    let density = |x: f64| (-x * x / (2.0 * sigma_x_sq)).exp() / ((2.0 * PI).sqrt() * sigma);

    // [E f, E x f, E f^2] restricted to the polynomial branch
    let full: [f64; 3] = gh
        .nodes
        .iter()
        .zip(&gh.weights)
        .fold([0.0; 3], |mut acc, (&t, &w)| {
            let x = SQRT_2 * sigma * t;
            let p = snl.poly(x);
            let w = w / PI.sqrt();
            acc[0] += w * p;
            acc[1] += w * x * p;
            acc[2] += w * p * p;
            acc
        });

    let reach = 40.0 * sigma;
    let gl = legendre_rule();
    let tail_moments = |a: f64, b: f64| -> [f64; 3] {
        if !(b > a) {
            return [0.0; 3];
        }
        let panels = (((b - a) / sigma).ceil() as usize).clamp(4, 200);
        let m = |k: usize| {
            quadrature::integrate(gl, a, b, panels, |x| {
                let p = snl.poly(x);
                let v = match k {
                    0 => p,
                    1 => x * p,
                    _ => p * p,
                };
                v * density(x)
            })
        };
        [m(0), m(1), m(2)]
    };
    let upper = if snl.lambda_u.is_finite() {
        tail_moments(snl.lambda_u, snl.lambda_u.max(-reach) + reach)
    } else {
        [0.0; 3]
    };
    let lower = if snl.lambda_d.is_finite() {
        tail_moments(snl.lambda_d.min(reach) - reach, snl.lambda_d)
    } else {
        [0.0; 3]
    };

    let mut m = [0.0; 3];
    for k in 0..3 {
        m[k] = full[k] - upper[k] - lower[k];
    }

    // clipped constant tails
    if snl.lambda_u.is_finite() {
        let prob = 0.5 * erfc(snl.lambda_u / (SQRT_2 * sigma));
        m[0] += snl.out_hi * prob;
        m[1] += snl.out_hi * sigma_x_sq * density(snl.lambda_u);
        m[2] += snl.out_hi * snl.out_hi * prob;
    }
    if snl.lambda_d.is_finite() {
        let prob = 0.5 * erfc(-snl.lambda_d / (SQRT_2 * sigma));
        m[0] += snl.out_lo * prob;
        m[1] -= snl.out_lo * sigma_x_sq * density(snl.lambda_d);
        m[2] += snl.out_lo * snl.out_lo * prob;
    }

    let mean = m[0];
    let c = m[1] / sigma_x_sq;
    let ez2 = m[2] - mean * mean;
    Ok(BussgangStats::from_moments(c, ez2, sigma_x_sq))
}

/// Closed form when the nonlinearity is symmetric, quadrature otherwise.
pub fn bussgang(snl: &ShiftedNonlinearity, sigma_x_sq: f64) -> Result<BussgangStats> {
    if snl.symmetric {
        bussgang_closed_form(snl, sigma_x_sq)
    } else {
        bussgang_numeric(snl, sigma_x_sq)
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("input variance must be positive, got {v}")))
    }
}

/// Recenters `led` at the back-off implied by `ibo_db` for an input of
/// variance `sigma_x_sq` and characterizes the result.
pub fn characterize(
    led: &LedTransfer,
    ibo_db: f64,
    sigma_x_sq: f64,
) -> Result<(ShiftedNonlinearity, BussgangStats)> {
    let snl = led.recenter(ibo_to_rho(ibo_db, sigma_x_sq))?;
    let stats = bussgang(&snl, sigma_x_sq)?;
    Ok((snl, stats))
}

/// Channel noise variance per real dimension for a given `Eb/N0` (linear).
pub fn sigma_n_sq(c: f64, sigma_x_sq: f64, ebn0: f64) -> f64 {
    c * c * sigma_x_sq / (2.0 * ebn0)
}

/// `C^2 sigma_x^2 / (2 (sigma_eta^2 + sigma_n^2))`.
pub fn ebn0_equivalent(stats: &BussgangStats, sigma_n_sq: f64, sigma_x_sq: f64) -> f64 {
    stats.c * stats.c * sigma_x_sq / (2.0 * (stats.sigma_eta_sq + sigma_n_sq))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
