//! Block interleaver and Hermitian-symmetric (DCO) OFDM modulator.
//!
//! Transforms are unitary (`1/sqrt(N)` in both directions), so a unit-power
//! symbol stream produces real samples of power `(N-2)/N`: bins `0` and `N/2`
//! carry nulls.

use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Transform order `N` and interleaver block length `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmParams {
    n: usize,
    m: usize,
}

impl OfdmParams {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "transform order must be a power of two >= 4, got {n}"
            )));
        }
        let carriers = n / 2 - 1;
        if m == 0 || !m.is_multiple_of(carriers) {
            return Err(Error::InvalidParameter(format!(
                "block length {m} is not a positive multiple of {carriers} data carriers"
            )));
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Data-bearing subcarriers per OFDM symbol, `N/2 - 1`.
    pub fn carriers(&self) -> usize {
        self.n / 2 - 1
    }

    pub fn ofdm_symbols(&self) -> usize {
        self.m / self.carriers()
    }

    /// Real samples per interleaver block.
    pub fn samples_per_block(&self) -> usize {
        self.ofdm_symbols() * self.n
    }

    /// `E[X^2] / sigma_x^2 = (N-2)/N`.
    pub fn power_factor(&self) -> f64 {
        (self.n - 2) as f64 / self.n as f64
    }
}

/// Seeded pseudorandom permutation of `0..M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    seed: u64,
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl Interleaver {
    /// Uniform shuffle driven by ChaCha8 seeded with `seed`.
    pub fn new(m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("interleaver length must be >= 1".into()));
        }
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self::from_permutation_unchecked(seed, perm))
    }

    pub fn identity(m: usize) -> Self {
        Self::from_permutation_unchecked(0, (0..m).collect())
    }

    fn from_permutation_unchecked(seed: u64, perm: Vec<usize>) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        Self {
            seed,
            perm,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `out[k] = x[perm[k]]`.
    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        self.check(x.len())?;
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    pub fn deinterleave<T: Copy>(&self, y: &[T]) -> Result<Vec<T>> {
        self.check(y.len())?;
        Ok(self.inverse.iter().map(|&k| y[k]).collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::LengthMismatch {
                expected: self.perm.len(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Places `N/2 - 1` symbols on bins `1..N/2` and mirrors their conjugates.
pub fn hermitian_extend(symbols: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    hermitian_extend_into(symbols, &mut spectrum)?;
    Ok(spectrum)
}

fn hermitian_extend_into(symbols: &[Complex64], spectrum: &mut [Complex64]) -> Result<()> {
    let n = spectrum.len();
    if symbols.len() != n / 2 - 1 {
        return Err(Error::LengthMismatch {
            expected: n / 2 - 1,
            actual: symbols.len(),
        });
    }
    spectrum[0] = Complex64::new(0.0, 0.0);
    spectrum[n / 2] = Complex64::new(0.0, 0.0);
    for (k, &x) in symbols.iter().enumerate() {
        spectrum[k + 1] = x;
        spectrum[n - k - 1] = x.conj();
    }
    Ok(())
}

/// DCO-OFDM modulator/demodulator with cached transform plans.
#[derive(Clone)]
pub struct OfdmModem {
    params: OfdmParams,
    inverse: Arc<dyn Fft<f64>>,
    forward: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem").field("params", &self.params).finish()
    }
}

impl OfdmModem {
    pub fn new(params: OfdmParams) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            params,
            inverse: planner.plan_fft_inverse(params.n),
            forward: planner.plan_fft_forward(params.n),
            scale: 1.0 / (params.n as f64).sqrt(),
        }
    }

    pub fn params(&self) -> &OfdmParams {
        &self.params
    }

    /// Interleaves the block, then emits `N` real samples per `N/2 - 1` symbols.
    pub fn modulate(&self, x: &[Complex64], interleaver: &Interleaver) -> Result<Vec<f64>> {
        self.check_symbols(x.len(), interleaver)?;
        let mixed = interleaver.interleave(x)?;
        Ok(self.modulate_raw(&mixed).0)
    }

    /// Modulates without interleaving; also returns the largest imaginary
    /// magnitude discarded from the inverse transform.
    pub fn modulate_raw(&self, x: &[Complex64]) -> (Vec<f64>, f64) {
        let n = self.params.n;
        let carriers = self.params.carriers();
        let mut out = Vec::with_capacity(x.len() / carriers * n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let mut max_imag: f64 = 0.0;
        for chunk in x.chunks_exact(carriers) {
            hermitian_extend_into(chunk, &mut buf).expect("chunk has carrier length");
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for c in &buf {
                max_imag = max_imag.max((c.im * self.scale).abs());
                out.push(c.re * self.scale);
            }
        }
        (out, max_imag)
    }

    /// Forward transform per OFDM symbol, bins `1..N/2`, then deinterleave.
    pub fn demodulate(&self, samples: &[f64], interleaver: &Interleaver) -> Result<Vec<Complex64>> {
        let n = self.params.n;
        if !samples.len().is_multiple_of(n) {
            return Err(Error::LengthMismatch {
                expected: (samples.len() / n + 1) * n,
                actual: samples.len(),
            });
        }
        let raw = self.demodulate_raw(samples);
        self.check_symbols(raw.len(), interleaver)?;
        interleaver.deinterleave(&raw)
    }

    pub fn demodulate_raw(&self, samples: &[f64]) -> Vec<Complex64> {
        let n = self.params.n;
        let carriers = self.params.carriers();
        let mut out = Vec::with_capacity(samples.len() / n * carriers);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for block in samples.chunks_exact(n) {
            for (b, &s) in buf.iter_mut().zip(block) {
                *b = Complex64::new(s, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            out.extend(buf[1..=carriers].iter().map(|c| c * self.scale));
        }
        out
    }

    fn check_symbols(&self, len: usize, interleaver: &Interleaver) -> Result<()> {
        if len != interleaver.len() {
            return Err(Error::LengthMismatch {
                expected: interleaver.len(),
                actual: len,
            });
        }
        if !len.is_multiple_of(self.params.carriers()) {
            return Err(Error::InvalidParameter(format!(
                "{len} symbols do not fill whole OFDM symbols of {} carriers",
                self.params.carriers()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn params_validation() {
        assert!(OfdmParams::new(256, 12700).is_ok());
        assert!(OfdmParams::new(256, 12701).is_err());
        assert!(OfdmParams::new(100, 49).is_err());
        assert!(OfdmParams::new(2, 1).is_err());
        let p = OfdmParams::new(256, 12700).unwrap();
        assert_eq!(p.ofdm_symbols(), 100);
        assert_eq!(p.samples_per_block(), 25600);
    }

    #[test]
    fn hermitian_layout() {
        let (a, b, cc) = (c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0));
        let x = hermitian_extend(&[a, b, cc], 8).unwrap();
        let zero = c(0.0, 0.0);
        assert_eq!(x, vec![zero, a, b, cc, zero, cc.conj(), b.conj(), a.conj()]);
        assert!(hermitian_extend(&[a, b], 8).is_err());
        assert!(hermitian_extend(&[zero; 3], 8).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_carrier_is_a_cosine() {
        let p = OfdmParams::new(16, 7).unwrap();
        let modem = OfdmModem::new(p);
        let mut x = vec![c(0.0, 0.0); 7];
        x[0] = c(1.0, 0.0);
        let (y, imag) = modem.modulate_raw(&x);
        assert!(imag < 1e-15);
        for (k, v) in y.iter().enumerate() {
            let want = 2.0 / 4.0 * (std::f64::consts::TAU * k as f64 / 16.0).cos();
            assert!((v - want).abs() < 1e-14, "{k}: {v} vs {want}");
        }
    }

    #[test]
    fn interleaver_basics() {
        let il = Interleaver::new(1, 99).unwrap();
        assert_eq!(il.permutation(), &[0]);
        let il = Interleaver::new(1000, 7).unwrap();
        let x: Vec<u32> = (0..1000).collect();
        let y = il.interleave(&x).unwrap();
        assert_ne!(x, y);
        assert_eq!(il.deinterleave(&y).unwrap(), x);
        let mut sorted = y.clone();
        sorted.sort();
        assert_eq!(sorted, x);
        assert!(il.interleave(&x[..10]).is_err());
        assert_eq!(Interleaver::new(1000, 7).unwrap(), il);
        assert_eq!(Interleaver::identity(5).interleave(&[1, 2, 3, 4, 5]).unwrap(), [1, 2, 3, 4, 5]);
    }

    #[test]
    fn zero_in_zero_out() {
        let p = OfdmParams::new(16, 14).unwrap();
        let modem = OfdmModem::new(p);
        let il = Interleaver::new(14, 1).unwrap();
        let y = modem.modulate(&[c(0.0, 0.0); 14], &il).unwrap();
        assert_eq!(y.len(), 32);
        assert!(y.iter().all(|v| *v == 0.0));
        let x = modem.demodulate(&y, &il).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
        assert!(modem.demodulate(&y[..31], &il).is_err());
    }
}
