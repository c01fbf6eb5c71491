//! Chaos-based coded modulator (CCM).
//!
//! A perturbed piecewise-linear chaotic map restricted to the dyadic grid
//! `S_Q = { m 2^-Q }` is exactly a recursive binary convolutional encoder with
//! `Q` memory cells. The register is kept as an integer whose bit `k-1` holds
//! `v_k`, so the constellation value `z = sum_k 2^-(Q+1-k) v_k` is simply the
//! register read as `m / 2^Q`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::trellis::{Trellis, ViterbiDecoder};

/// Tap vector `u_1..u_6` and quantization depth of the CCM encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CcmParams {
    taps: [u8; 6],
    q: u32,
}

impl CcmParams {
    /// Largest supported depth; the trellis decoder packs states into 15 bits.
    pub const MAX_Q: u32 = 14;

    pub fn new(taps: [u8; 6], q: u32) -> Result<Self> {
        if let Some(k) = taps.iter().position(|&t| t > 1) {
            return Err(Error::InvalidParameter(format!(
                "tap u_{} must be 0 or 1, got {}",
                k + 1,
                taps[k]
            )));
        }
        if !(2..=Self::MAX_Q).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "quantization depth must be in 2..={}, got {q}",
                Self::MAX_Q
            )));
        }
        Ok(Self { taps, q })
    }

    /// Multi-tent map configuration, `u = (1,1,1,1,1,1)`.
    pub fn multi_tent(q: u32) -> Result<Self> {
        Self::new([1; 6], q)
    }

    pub fn taps(&self) -> [u8; 6] {
        self.taps
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn num_states(&self) -> usize {
        1 << self.q
    }

    pub fn is_multi_tent(&self) -> bool {
        self.taps == [1; 6]
    }
}

/// Contents of the `Q`-cell register; `v_Q` is the most significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct EncoderState(pub u32);

impl EncoderState {
    pub const ZERO: EncoderState = EncoderState(0);

    /// Cell `v_k`, `1 <= k <= Q`.
    pub fn cell(self, k: u32) -> u8 {
        ((self.0 >> (k - 1)) & 1) as u8
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::BitXor for EncoderState {
    type Output = EncoderState;
    fn bitxor(self, rhs: Self) -> Self {
        EncoderState(self.0 ^ rhs.0)
    }
}

/// A point of `S_Q`, stored exactly as the numerator `m` of `m / 2^Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedSample {
    pub numerator: u32,
    pub q: u32,
}

impl QuantizedSample {
    pub fn value(self) -> f64 {
        self.numerator as f64 / (1u64 << self.q) as f64
    }
}

/// One step of the register recursion.
///
/// `v'_Q = u1 v_Q + u2 v_{Q-1} + u3 b`, `v'_j = u4 v_{j-1} + u5 v_Q` for
/// `j = Q-1..2` and `v'_1 = u6 b`, all over GF(2).
pub fn next_state(state: EncoderState, bit: u8, params: &CcmParams) -> EncoderState {
    let q = params.q;
    let [u1, u2, u3, u4, u5, u6] = params.taps.map(u32::from);
    let s = state.0;
    let b = u32::from(bit & 1);
    let vq = (s >> (q - 1)) & 1;
    let vq1 = (s >> (q - 2)) & 1;

    let top = ((u1 & vq) ^ (u2 & vq1) ^ (u3 & b)) << (q - 1);
    // cells 2..Q-1 sit at bit positions 1..Q-2
    let mid_mask = ((1u32 << (q - 1)) - 1) & !1;
    let shifted = if u4 == 1 { (s << 1) & mid_mask } else { 0 };
    let fold = if u5 & vq == 1 { mid_mask } else { 0 };
    let low = u6 & b;

    EncoderState(top | (shifted ^ fold) | low)
}

pub fn state_to_z(state: EncoderState, params: &CcmParams) -> QuantizedSample {
    QuantizedSample {
        numerator: state.0,
        q: params.q,
    }
}

/// Encodes from the all-zero state; returns the state value after every step.
pub fn encode_block(bits: &[u8], params: &CcmParams) -> Vec<QuantizedSample> {
    encode_states(bits, params)
        .into_iter()
        .map(|s| state_to_z(s, params))
        .collect()
}

/// Like [`encode_block`] but returns the raw register after every step.
pub fn encode_states(bits: &[u8], params: &CcmParams) -> Vec<EncoderState> {
    let mut state = EncoderState::ZERO;
    bits.iter()
        .map(|&b| {
            state = next_state(state, b, params);
            state
        })
        .collect()
}

/// Multi-tent map: `f(z,0) = 1 - |2z-1|`, `f(z,1) = (3/2 - |2z-1|) mod 1`.
pub fn map_recursion_step(z: f64, bit: u8) -> f64 {
    let fold = (2.0 * z - 1.0).abs();
    if bit & 1 == 0 {
        1.0 - fold
    } else {
        (1.5 - fold).rem_euclid(1.0)
    }
}

/// Perturbed chaotic recursion `z_i = f(z_{i-1}, b_i) + b_i 2^-Q`.
pub fn chaotic_recursion_step(z: f64, bit: u8, q: u32) -> f64 {
    map_recursion_step(z, bit) + f64::from(bit & 1) * (-(q as f64)).exp2()
}

/// The CCM seen as a trellis: the emitted symbol is the mapped value of the
/// state the branch lands in.
#[derive(Debug, Clone)]
pub struct CcmTrellis<'a> {
    params: CcmParams,
    symbols: &'a [Complex64],
}

impl<'a> CcmTrellis<'a> {
    /// `symbols[m]` is the constellation point for `z = m / 2^Q`.
    pub fn new(params: CcmParams, symbols: &'a [Complex64]) -> Result<Self> {
        if symbols.len() != params.num_states() {
            return Err(Error::LengthMismatch {
                expected: params.num_states(),
                actual: symbols.len(),
            });
        }
        Ok(Self { params, symbols })
    }
}

impl Trellis for CcmTrellis<'_> {
    fn num_states(&self) -> usize {
        self.params.num_states()
    }

    fn next(&self, state: usize, bit: u8) -> usize {
        next_state(EncoderState(state as u32), bit, &self.params).index()
    }

    fn symbol(&self, state: usize, bit: u8) -> Complex64 {
        self.symbols[self.next(state, bit)]
    }
}

/// Maps an encoded block through a per-state symbol table.
pub fn modulate_block(bits: &[u8], params: &CcmParams, symbols: &[Complex64]) -> Vec<Complex64> {
    encode_states(bits, params)
        .into_iter()
        .map(|s| symbols[s.index()])
        .collect()
}

/// Maximum-likelihood sequence decoding of a CCM block.
pub fn viterbi_decode(
    received: &[Complex64],
    gain: f64,
    symbols: &[Complex64],
    params: &CcmParams,
) -> Result<Vec<u8>> {
    let trellis = CcmTrellis::new(*params, symbols)?;
    ViterbiDecoder::new(&trellis).decode(received, gain)
}
