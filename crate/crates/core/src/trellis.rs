//! Binary-input trellises and a full-traceback maximum-likelihood Viterbi decoder.
//!
//! Both the chaos-based coded modulator and the convolutional TCM baseline are
//! finite-state machines driven by one bit per step and emitting one complex
//! symbol per step, so they share the decoder below.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A binary-input finite-state machine that emits one complex symbol per step.
pub trait Trellis {
    fn num_states(&self) -> usize;
    fn next(&self, state: usize, bit: u8) -> usize;
    fn symbol(&self, state: usize, bit: u8) -> Complex64;
}

/// Viterbi decoder with tabulated transitions and symbols.
///
/// Decoding starts in state 0 and leaves the terminal state free; the whole
/// block is traced back at the end. Branch metrics are computed once per
/// distinct constellation point and step.
#[derive(Debug, Clone)]
pub struct ViterbiDecoder {
    num_states: usize,
    next: Vec<[u16; 2]>,
    /// Index into `alphabet` of each branch symbol.
    branch: Vec<[u16; 2]>,
    alphabet: Vec<Complex64>,
}

impl ViterbiDecoder {
    pub fn new<T: Trellis + ?Sized>(trellis: &T) -> Self {
        let n = trellis.num_states();
        assert!(n <= 1 << 15, "trellis too large for packed survivors");
        let next = (0..n)
            .map(|s| [trellis.next(s, 0) as u16, trellis.next(s, 1) as u16])
            .collect();
        let mut alphabet: Vec<Complex64> = Vec::new();
        let mut index_of = |x: Complex64| match alphabet.iter().position(|&a| a == x) {
            Some(k) => k as u16,
            None => {
                alphabet.push(x);
                (alphabet.len() - 1) as u16
            }
        };
        let branch = (0..n)
            .map(|s| [index_of(trellis.symbol(s, 0)), index_of(trellis.symbol(s, 1))])
            .collect();
        Self {
            num_states: n,
            next,
            branch,
            alphabet,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Returns the input sequence minimizing `sum |r_i - gain * x_i|^2`.
    pub fn decode(&self, received: &[Complex64], gain: f64) -> Result<Vec<u8>> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decoder gain must be positive and finite, got {gain}"
            )));
        }
        if let Some(i) = received.iter().position(|r| !(r.re.is_finite() && r.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        let n = self.num_states;
        let len = received.len();
        if len == 0 {
            return Ok(Vec::new());
        }

        let mut metric = vec![f64::INFINITY; n];
        let mut fresh = vec![f64::INFINITY; n];
        metric[0] = 0.0;
        // survivors[i * n + s] = (predecessor << 1) | input bit, for state s after step i
        let mut survivors = vec![0u16; len * n];

        let scaled: Vec<Complex64> = self.alphabet.iter().map(|a| a * gain).collect();
        let mut dist = vec![0.0; scaled.len()];
        for (i, &r) in received.iter().enumerate() {
            dist.iter_mut()
                .zip(&scaled)
                .for_each(|(d, a)| *d = (r - a).norm_sqr());
            fresh.iter_mut().for_each(|m| *m = f64::INFINITY);
            let row = &mut survivors[i * n..(i + 1) * n];
            for s in 0..n {
                let m = metric[s];
                if m == f64::INFINITY {
                    continue;
                }
                for bit in 0..2 {
                    let ns = self.next[s][bit] as usize;
                    let cand = m + dist[self.branch[s][bit] as usize];
                    if cand < fresh[ns] {
                        fresh[ns] = cand;
                        row[ns] = ((s as u16) << 1) | bit as u16;
                    }
                }
            }
            std::mem::swap(&mut metric, &mut fresh);
        }

        let mut state = metric
            .iter()
            .enumerate()
            .fold((0usize, f64::INFINITY), |best, (s, &m)| {
                if m < best.1 {
                    (s, m)
                } else {
                    best
                }
            })
            .0;
        let mut bits = vec![0u8; len];
        for i in (0..len).rev() {
            let packed = survivors[i * n + state];
            bits[i] = (packed & 1) as u8;
            state = (packed >> 1) as usize;
        }
        Ok(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-state toy: the state is the last bit, the symbol is +-1 by the new bit.
    struct Toggle;

    impl Trellis for Toggle {
        fn num_states(&self) -> usize {
            2
        }
        fn next(&self, _state: usize, bit: u8) -> usize {
            bit as usize
        }
        fn symbol(&self, _state: usize, bit: u8) -> Complex64 {
            Complex64::new(2.0 * bit as f64 - 1.0, 0.0)
        }
    }

    #[test]
    fn decodes_noiseless_toy() {
        let dec = ViterbiDecoder::new(&Toggle);
        let bits = [1u8, 0, 0, 1, 1, 0];
        let rx: Vec<_> = bits
            .iter()
            .map(|&b| Complex64::new(0.5 * (2.0 * b as f64 - 1.0), 0.0))
            .collect();
        assert_eq!(dec.decode(&rx, 0.5).unwrap(), bits);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dec = ViterbiDecoder::new(&Toggle);
        assert!(dec.decode(&[Complex64::new(f64::NAN, 0.0)], 1.0).is_err());
        assert!(dec.decode(&[Complex64::new(1.0, 0.0)], 0.0).is_err());
        assert!(dec.decode(&[], 1.0).unwrap().is_empty());
    }
}
