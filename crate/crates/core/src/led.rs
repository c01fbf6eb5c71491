//! Memoryless LED transfer function and its recentered, back-off scaled form.

use std::path::Path;

use crate::error::{Error, Result};

/// Absolute tolerance for the polynomial meeting the clip levels.
pub const JUNCTION_TOL: f64 = 1e-3;

const GRID_POINTS: usize = 2001;

/// Clipped polynomial LED response `F_nl`.
///
/// `F_nl(x) = y_min` for `x <= x_cut`, `y_max` for `x > x_sat`, and the
/// polynomial (ascending coefficients) in between.
#[derive(Debug, Clone, PartialEq)]
pub struct LedTransfer {
    coeffs: Vec<f64>,
    x_cut: f64,
    x_sat: f64,
    y_min: f64,
    y_max: f64,
    beta_dc: f64,
}

impl LedTransfer {
    pub fn new(
        coeffs: Vec<f64>,
        x_cut: f64,
        x_sat: f64,
        y_min: f64,
        y_max: f64,
        beta_dc: f64,
    ) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("LED polynomial needs finite coefficients".into()));
        }
        if x_cut >= x_sat || x_cut.is_nan() || x_sat.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "cut-in {x_cut} must lie below saturation {x_sat}"
            )));
        }
        let led = Self {
            coeffs,
            x_cut,
            x_sat,
            y_min,
            y_max,
            beta_dc,
        };
        if x_cut.is_finite() && (led.poly(x_cut) - y_min).abs() > JUNCTION_TOL {
            return Err(Error::InvalidParameter(format!(
                "polynomial is {} at cut-in, clip level is {y_min}",
                led.poly(x_cut)
            )));
        }
        if x_sat.is_finite() && (led.poly(x_sat) - y_max).abs() > JUNCTION_TOL {
            return Err(Error::InvalidParameter(format!(
                "polynomial is {} at saturation, clip level is {y_max}",
                led.poly(x_sat)
            )));
        }
        if x_cut.is_finite() && x_sat.is_finite() {
            let step = (x_sat - x_cut) / (GRID_POINTS - 1) as f64;
            let mut prev = led.poly(x_cut);
            for k in 1..GRID_POINTS {
                let y = led.poly(x_cut + k as f64 * step);
                if y < prev - 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "LED response decreases near x = {}",
                        x_cut + k as f64 * step
                    )));
                }
                prev = y;
            }
        }
        Ok(led)
    }

    /// Cubic white-LED fit with clipping at 0.1 and 1.0 drive, biased at 0.55.
    pub fn cubic_reference() -> Self {
        Self::new(vec![0.0239, -0.4938, 2.7160, -1.6461], 0.1, 1.0, 0.0, 0.6, 0.55)
            .expect("reference LED is valid")
    }

    /// Ideally predistorted reference LED, `0.75 x - 0.075` clamped to `[0, 0.6]`.
    ///
    /// The linear segment reaches the upper clip level at `x = 0.9`, which is
    /// therefore the effective saturation input.
    pub fn predistorted_reference() -> Self {
        Self::new(vec![-0.075, 0.75], 0.1, 0.9, 0.0, 0.6, 0.55)
            .expect("predistorted LED is valid")
    }

    /// Unclipped identity response, `F(x) = x` everywhere.
    pub fn linear(beta_dc: f64) -> Self {
        Self::new(
            vec![0.0, 1.0],
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            beta_dc,
        )
        .expect("identity response is valid")
    }

    /// Clip-only linearization: a straight line from `(x_cut, y_min)` to
    /// `(x_sat, y_max)` with the same bias.
    pub fn ideal_predistortion(&self) -> Result<Self> {
        if !(self.x_cut.is_finite() && self.x_sat.is_finite()) {
            return Ok(self.clone());
        }
        let slope = (self.y_max - self.y_min) / (self.x_sat - self.x_cut);
        Self::new(
            vec![self.y_min - slope * self.x_cut, slope],
            self.x_cut,
            self.x_sat,
            self.y_min,
            self.y_max,
            self.beta_dc,
        )
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn x_cut(&self) -> f64 {
        self.x_cut
    }

    pub fn x_sat(&self) -> f64 {
        self.x_sat
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn beta_dc(&self) -> f64 {
        self.beta_dc
    }

    fn poly(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_cut {
            self.y_min
        } else if x > self.x_sat {
            self.y_max
        } else {
            self.poly(x)
        }
    }

    /// `f_nl(x) = F_nl(rho x + beta_dc) - F_nl(beta_dc)` as a clipped polynomial.
    pub fn recenter(&self, rho: f64) -> Result<ShiftedNonlinearity> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("back-off must be positive, got {rho}")));
        }
        let beta = self.beta_dc;
        if !(beta > self.x_cut && beta < self.x_sat) {
            return Err(Error::BiasOutOfRange {
                beta,
                lo: self.x_cut,
                hi: self.x_sat,
            });
        }
        let degree = self.coeffs.len() - 1;
        // sum_k c_k (rho x + beta)^k, expanded by the binomial theorem
        let mut a = vec![0.0; degree + 1];
        for (k, &ck) in self.coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for l in 0..=k {
                a[l] += ck * binom * rho.powi(l as i32) * beta.powi((k - l) as i32);
                binom = binom * (k - l) as f64 / (l + 1) as f64;
            }
        }
        let center = self.eval(beta);
        a[0] -= center;

        let lambda_u = (self.x_sat - beta) / rho;
        let lambda_d = (self.x_cut - beta) / rho;
        let even_small = a.iter().step_by(2).all(|c| c.abs() < 1e-3);
        let balanced = if lambda_u.is_infinite() && lambda_d.is_infinite() {
            true
        } else {
            (lambda_u + lambda_d).abs() < 1e-9 * lambda_u.abs()
        };
        Ok(ShiftedNonlinearity {
            coeffs: a,
            lambda_d,
            lambda_u,
            out_lo: self.y_min - center,
            out_hi: self.y_max - center,
            rho,
            symmetric: even_small && balanced,
        })
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut coeffs = None;
        let mut scalars: [Option<f64>; 5] = [None; 5];
        const KEYS: [&str; 5] = ["x_cut", "x_sat", "y_min", "y_max", "beta_dc"];
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| perr(format!("bad number `{v}` for `{key}`")))
            };
            if key == "coeffs" {
                coeffs = Some(value.split(',').map(num).collect::<Result<Vec<f64>>>()?);
            } else if let Some(k) = KEYS.iter().position(|&k| k == key) {
                scalars[k] = Some(num(value)?);
            } else {
                return Err(perr(format!("unknown key `{key}`")));
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 0,
            msg: format!("missing key `{k}`"),
        };
        let coeffs = coeffs.ok_or_else(|| missing("coeffs"))?;
        let mut vals = [0.0; 5];
        for (k, v) in scalars.iter().enumerate() {
            vals[k] = v.ok_or_else(|| missing(KEYS[k]))?;
        }
        Self::new(coeffs, vals[0], vals[1], vals[2], vals[3], vals[4])
    }

    pub fn to_kv_string(&self) -> String {
        let coeffs: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        format!(
            "coeffs = {}\nx_cut = {}\nx_sat = {}\ny_min = {}\ny_max = {}\nbeta_dc = {}\n",
            coeffs.join(", "),
            self.x_cut,
            self.x_sat,
            self.y_min,
            self.y_max,
            self.beta_dc
        )
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }
}

/// `f_nl(x) = F_nl(rho x + beta_dc) - F_nl(beta_dc)` in signal units.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedNonlinearity {
    /// Polynomial coefficients `a_l`, ascending degree.
    pub coeffs: Vec<f64>,
    pub lambda_d: f64,
    pub lambda_u: f64,
    /// Output below `lambda_d`.
    pub out_lo: f64,
    /// Output at or above `lambda_u`.
    pub out_hi: f64,
    pub rho: f64,
    pub symmetric: bool,
}

impl ShiftedNonlinearity {
    /// Odd clipped polynomial: `clamp`-style response with threshold `lambda`
    /// and level `level`, polynomial `coeffs` in between.
    pub fn odd(coeffs: Vec<f64>, lambda: f64, level: f64) -> Self {
        let coeffs = coeffs
            .into_iter()
            .enumerate()
            .map(|(l, c)| if l % 2 == 0 { 0.0 } else { c })
            .collect();
        Self {
            coeffs,
            lambda_d: -lambda,
            lambda_u: lambda,
            out_lo: -level,
            out_hi: level,
            rho: 1.0,
            symmetric: true,
        }
    }

    /// Hard limiter `clamp(x, -lambda, lambda)`.
    pub fn hard_clipper(lambda: f64) -> Self {
        Self::odd(vec![0.0, 1.0], lambda, lambda)
    }

    /// Exactly odd part: even coefficients dropped, thresholds and clip levels
    /// averaged in magnitude.
    pub fn odd_part(&self) -> Self {
        let lambda = if self.lambda_u.is_infinite() {
            f64::INFINITY
        } else {
            0.5 * (self.lambda_u - self.lambda_d)
        };
        let level = 0.5 * (self.out_hi - self.out_lo);
        let mut odd = Self::odd(self.coeffs.clone(), lambda, level);
        odd.rho = self.rho;
        odd
    }

    pub fn poly(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn apply(&self, x: f64) -> f64 {
        if x <= self.lambda_d {
            self.out_lo
        } else if x >= self.lambda_u {
            self.out_hi
        } else {
            self.poly(x)
        }
    }

    /// Largest slope of the polynomial segment, sampled on a dense grid.
    pub fn max_slope(&self) -> f64 {
        let lo = self.lambda_d.max(-1e3);
        let hi = self.lambda_u.min(1e3);
        let deriv: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, c)| l as f64 * c)
            .collect();
        (0..GRID_POINTS)
            .map(|k| horner(&deriv, lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `IBO = -10 log10(rho^2 E[X^2])` solved for `rho`.
pub fn ibo_to_rho(ibo_db: f64, ex2: f64) -> f64 {
    (10f64.powf(-ibo_db / 10.0) / ex2).sqrt()
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
