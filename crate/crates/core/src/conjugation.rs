//! Sampled conjugation function and the unit-circle phase mapper.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest admissible increment between consecutive samples.
pub const MIN_GAP: f64 = 1e-6;

/// Non-decreasing map `g : [0,1] -> [0,1]` sampled at `z^j = j / P`.
///
/// Endpoints are pinned to `s^0 = 0`, `s^P = 1`; interior samples lie in the
/// open unit interval and increase by at least [`MIN_GAP`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationTable {
    samples: Vec<f64>,
}

impl ConjugationTable {
    /// Validates `samples` (`P + 1` values) against the table constraints.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a conjugation table needs P >= 2, got {} samples",
                samples.len()
            )));
        }
        let p = samples.len() - 1;
        for (j, &s) in samples.iter().enumerate() {
            let fail = |reason: &str| {
                Err(Error::ConstraintViolation {
                    index: j,
                    reason: reason.to_string(),
                })
            };
            if !s.is_finite() {
                return fail("non-finite sample");
            }
            if j == 0 && s != 0.0 {
                return fail("first sample must be 0");
            }
            if j == p && s != 1.0 {
                return fail("last sample must be 1");
            }
            if j > 0 && j < p && !(s > 0.0 && s < 1.0) {
                return fail("interior sample outside the open interval (0, 1)");
            }
            if j > 0 && s - samples[j - 1] < MIN_GAP {
                return fail("samples not strictly increasing by the minimum gap");
            }
        }
        Ok(Self { samples })
    }

    /// `s^j = j / P`.
    pub fn identity(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidParameter(format!("P must be >= 2, got {p}")));
        }
        Self::new((0..=p).map(|j| j as f64 / p as f64).collect())
    }

    /// Builds a table from the `P - 1` interior samples.
    pub fn from_interior(interior: &[f64]) -> Result<Self> {
        let mut samples = Vec::with_capacity(interior.len() + 2);
        samples.push(0.0);
        samples.extend_from_slice(interior);
        samples.push(1.0);
        Self::new(samples)
    }

    pub fn p(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn interior(&self) -> &[f64] {
        &self.samples[1..self.samples.len() - 1]
    }

    /// Knot index `j` and weight `t` such that `g(z) = (1-t) s^j + t s^{j+1}`.
    pub fn bracket(&self, z: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain {
                value: z,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let p = self.p();
        let pos = z * p as f64;
        let nearest = pos.round();
        if (pos - nearest).abs() <= 1e-12 * p as f64 {
            let j = nearest as usize;
            return Ok(if j == p { (p - 1, 1.0) } else { (j, 0.0) });
        }
        let j = (pos.floor() as usize).min(p - 1);
        Ok((j, pos - j as f64))
    }

    /// Piecewise-linear interpolation; exact at the knots.
    pub fn eval(&self, z: f64) -> Result<f64> {
        let (j, t) = self.bracket(z)?;
        if t == 0.0 {
            return Ok(self.samples[j]);
        }
        if t == 1.0 {
            return Ok(self.samples[j + 1]);
        }
        Ok(self.samples[j] + t * (self.samples[j + 1] - self.samples[j]))
    }

    /// Symbols `phase_map(g(m / 2^Q))` for every encoder state `m`.
    pub fn symbol_map(&self, q: u32) -> Vec<Complex64> {
        let n = 1usize << q;
        (0..n)
            .map(|m| phase_map(self.eval(m as f64 / n as f64).expect("grid point inside [0,1]")))
            .collect()
    }

    /// Writes the `index,z,s` text format.
    pub fn to_lut_string(&self) -> String {
        let p = self.p();
        let mut out = String::from("index,z,s\n");
        for (j, s) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{j},{:.16e},{:.16e}", j as f64 / p as f64, s);
        }
        out
    }

    pub fn from_lut_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "index,z,s")) => {}
            Some((line, other)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected header `index,z,s`, found `{other}`"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "empty LUT".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            let perr = |msg: String| Error::Parse { line, msg };
            if fields.len() != 3 {
                return Err(perr(format!("expected 3 fields, found {}", fields.len())));
            }
            let j: usize = fields[0]
                .parse()
                .map_err(|_| perr(format!("bad index `{}`", fields[0])))?;
            let z: f64 = fields[1]
                .parse()
                .map_err(|_| perr(format!("bad abscissa `{}`", fields[1])))?;
            let s: f64 = fields[2]
                .parse()
                .map_err(|_| perr(format!("bad sample `{}`", fields[2])))?;
            if j != rows.len() {
                return Err(perr(format!("index {j} out of sequence")));
            }
            rows.push((line, z, s));
        }
        let p = rows.len().saturating_sub(1);
        for (j, &(line, z, _)) in rows.iter().enumerate() {
            if p > 0 && (z - j as f64 / p as f64).abs() > 1e-9 {
                return Err(Error::Parse {
                    line,
                    msg: format!("abscissa {z} does not match {j}/{p}"),
                });
            }
        }
        Self::new(rows.into_iter().map(|r| r.2).collect())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_lut_str(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_lut_string())?;
        Ok(())
    }
}

/// `exp(2 pi i s)`, renormalized to unit modulus.
pub fn phase_map(s: f64) -> Complex64 {
    let (sin, cos) = (TAU * s).sin_cos();
    let c = Complex64::new(cos, sin);
    c / c.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_tables() {
        let t = ConjugationTable::identity(4).unwrap();
        assert_eq!(t.samples(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = ConjugationTable::identity(64).unwrap();
        assert_eq!(t.samples().len(), 65);
        for k in 0..=1000 {
            let z = k as f64 / 1000.0;
            assert!((t.eval(z).unwrap() - z).abs() < 1e-15);
        }
        assert!(ConjugationTable::identity(1).is_err());
    }

    #[test]
    fn rejects_flat_step() {
        let mut s: Vec<f64> = (0..=8).map(|j| j as f64 / 8.0).collect();
        s[4] = s[3];
        match ConjugationTable::new(s) {
            Err(Error::ConstraintViolation { index, .. }) => assert_eq!(index, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_interior_zero() {
        let mut s: Vec<f64> = (0..=8).map(|j| j as f64 / 8.0).collect();
        s[1] = 0.0;
        match ConjugationTable::new(s) {
            Err(Error::ConstraintViolation { index, reason }) => {
                assert_eq!(index, 1);
                assert!(reason.contains("open interval"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_loose_endpoints() {
        let mut s: Vec<f64> = (0..=8).map(|j| j as f64 / 8.0).collect();
        s[8] = 0.99;
        assert!(ConjugationTable::new(s).is_err());
    }

    #[test]
    fn knots_and_midpoints() {
        let p = 16;
        let t = ConjugationTable::new((0..=p).map(|j| (j as f64 / p as f64).powi(2)).collect())
            .unwrap();
        for j in 0..=p {
            assert_eq!(t.eval(j as f64 / p as f64).unwrap(), t.samples()[j]);
        }
        for j in 0..p {
            let mid = (j as f64 + 0.5) / p as f64;
            let want = 0.5 * (t.samples()[j] + t.samples()[j + 1]);
            assert!((t.eval(mid).unwrap() - want).abs() < 1e-15);
        }
        assert!(t.eval(-0.01).is_err());
        assert!(t.eval(1.01).is_err());
    }

    #[test]
    fn phase_points() {
        let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-15;
        assert!(close(phase_map(0.0), Complex64::new(1.0, 0.0)));
        assert!(close(phase_map(0.25), Complex64::new(0.0, 1.0)));
        assert!(close(phase_map(0.5), Complex64::new(-1.0, 0.0)));
    }

    #[test]
    fn lut_round_trip() {
        let t = ConjugationTable::new((0..=8).map(|j| (j as f64 / 8.0).powf(1.5)).collect())
            .unwrap();
        let text = t.to_lut_string();
        assert!(text.starts_with("index,z,s\n"));
        assert_eq!(ConjugationTable::from_lut_str(&text).unwrap(), t);
        assert!(ConjugationTable::from_lut_str("j,z,s\n0,0,0\n").is_err());
        assert!(ConjugationTable::from_lut_str("index,z,s\n0,0,0\n2,1,1\n").is_err());
    }
}
