//! Reference schemes sharing the OFDM/LED chain: uncoded BPSK and a 64-state
//! rate-1/4 convolutional code mapped onto Gray-labeled 16-QAM.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::trellis::{Trellis, ViterbiDecoder};

pub fn bpsk_modulate(bits: &[u8]) -> Vec<Complex64> {
    bits.iter()
        .map(|&b| Complex64::new(if b == 0 { -1.0 } else { 1.0 }, 0.0))
        .collect()
}

/// Hard decision on the sign of the real part; `c` only rescales and is
/// checked for validity.
pub fn bpsk_demodulate(received: &[Complex64], c: f64) -> Result<Vec<u8>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("gain must be positive, got {c}")));
    }
    Ok(received.iter().map(|r| u8::from(r.re / c > 0.0)).collect())
}

/// Rate-1/4 feedforward code, generators read MSB-first over a 7-tap register
/// whose MSB multiplies the current input bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcmParams {
    pub generators: [u8; 4],
}

impl Default for TcmParams {
    fn default() -> Self {
        Self {
            generators: [0o127, 0o171, 0o155, 0o177],
        }
    }
}

impl TcmParams {
    pub const MEMORY: u32 = 6;

    pub fn num_states(&self) -> usize {
        1 << Self::MEMORY
    }

    /// 4-bit label `c1 c2 c3 c4` (c1 in bit 3) and next state for input `bit`.
    pub fn step(&self, state: usize, bit: u8) -> (u8, usize) {
        let reg = ((bit as usize & 1) << Self::MEMORY) | state;
        let mut label = 0u8;
        for g in self.generators {
            label = (label << 1) | ((reg & g as usize).count_ones() & 1) as u8;
        }
        (label, reg >> 1)
    }
}

/// Gray level per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
fn gray_level(pair: u8) -> f64 {
    match pair & 3 {
        0b00 => -3.0,
        0b01 => -1.0,
        0b11 => 1.0,
        _ => 3.0,
    }
}

/// Unit-power square 16-QAM: `(c1, c2)` select I, `(c3, c4)` select Q.
pub fn qam16(label: u8) -> Complex64 {
    Complex64::new(gray_level(label >> 2), gray_level(label)) / 10f64.sqrt()
}

pub fn tcm_labels(bits: &[u8], params: &TcmParams) -> Vec<u8> {
    let mut state = 0;
    bits.iter()
        .map(|&b| {
            let (label, next) = params.step(state, b);
            state = next;
            label
        })
        .collect()
}

/// One 16-QAM symbol per input bit, from the zero state.
pub fn tcm_encode(bits: &[u8], params: &TcmParams) -> Vec<Complex64> {
    tcm_labels(bits, params).into_iter().map(qam16).collect()
}

/// Trellis of the TCM baseline for the shared Viterbi decoder.
#[derive(Debug, Clone, Copy)]
pub struct TcmTrellis(pub TcmParams);

impl Trellis for TcmTrellis {
    fn num_states(&self) -> usize {
        self.0.num_states()
    }

    fn next(&self, state: usize, bit: u8) -> usize {
        self.0.step(state, bit).1
    }

    fn symbol(&self, state: usize, bit: u8) -> Complex64 {
        qam16(self.0.step(state, bit).0)
    }
}

/// Reusable decoder; building the branch tables once per link saves work
/// across blocks.
pub fn tcm_decoder(params: &TcmParams) -> ViterbiDecoder {
    ViterbiDecoder::new(&TcmTrellis(*params))
}

pub fn tcm_decode(received: &[Complex64], c: f64, params: &TcmParams) -> Result<Vec<u8>> {
    tcm_decoder(params).decode(received, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_examples() {
        let s = bpsk_modulate(&[0, 1]);
        assert_eq!(s, vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)]);
        let scaled: Vec<_> = s.iter().map(|x| x * 0.3).collect();
        assert_eq!(bpsk_demodulate(&scaled, 0.3).unwrap(), vec![0, 1]);
        assert!(bpsk_demodulate(&scaled, 0.0).is_err());
    }

    #[test]
    fn zero_input_sits_on_corner() {
        let p = TcmParams::default();
        let out = tcm_encode(&[0; 20], &p);
        let corner = Complex64::new(-3.0, -3.0) / 10f64.sqrt();
        assert!(out.iter().all(|&s| s == corner));
    }

    #[test]
    fn impulse_response_reads_generators() {
        let p = TcmParams::default();
        let mut bits = vec![1u8];
        bits.extend([0; 9]);
        let labels = tcm_labels(&bits, &p);
        for (i, g) in p.generators.iter().enumerate() {
            // bit i of the label stream, read over the 7 register taps
            let mut read = 0u8;
            for &l in &labels[..7] {
                read = (read << 1) | ((l >> (3 - i)) & 1);
            }
            assert_eq!(read, *g, "generator {i}");
        }
        assert!(labels[7..].iter().all(|&l| l == 0));
    }

    #[test]
    fn constellation_has_unit_power() {
        let mean: f64 = (0..16u8).map(|l| qam16(l).norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-15);
        // Gray: horizontal neighbours differ in one bit
        for l in 0..16u8 {
            for m in 0..16u8 {
                if (qam16(l) - qam16(m)).norm() * 10f64.sqrt() < 2.0 + 1e-9 && l != m {
                    assert_eq!((l ^ m).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let p = TcmParams::default();
        let bits: Vec<u8> = (0..300u32).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8 & 1).collect();
        let rx: Vec<_> = tcm_encode(&bits, &p).iter().map(|s| s * 0.25).collect();
        assert_eq!(tcm_decode(&rx, 0.25, &p).unwrap(), bits);
    }
}
