//! Error-loop union bound on the bit error probability of a CCM.
//!
//! The encoder is linear over GF(2), so the state difference between the
//! transmitted path and an erroneous one evolves independently of the data:
//! an input error pattern `e` drives the difference register from zero, away,
//! and back to zero. Such simple events are the error loops of the bound. The
//! Euclidean distance of a loop does depend on the data, so each loop is
//! averaged over every initial state and every data pattern it spans.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bussgang::{db_to_linear, erfc, BussgangStats};
use crate::codec::{next_state, CcmParams, EncoderState};
use crate::conjugation::{phase_map, ConjugationTable};
use crate::error::{Error, Result};

/// A simple error event of the difference automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorLoop {
    bits: Vec<u8>,
    diffs: Vec<EncoderState>,
    weight: usize,
}

impl ErrorLoop {
    /// Validates `bits` as a simple loop: first bit set, difference nonzero
    /// after every step but the last, zero after the last.
    pub fn new(bits: Vec<u8>, params: &CcmParams) -> Result<Self> {
        if bits.first() != Some(&1) {
            return Err(Error::InvalidParameter("an error loop starts with a 1".into()));
        }
        let mut diff = EncoderState::ZERO;
        let mut diffs = Vec::with_capacity(bits.len());
        for (t, &b) in bits.iter().enumerate() {
            diff = next_state(diff, b, params);
            let last = t + 1 == bits.len();
            if (diff == EncoderState::ZERO) != last {
                return Err(Error::InvalidParameter(format!(
                    "pattern {bits:?} is not a simple loop (step {})",
                    t + 1
                )));
            }
            diffs.push(diff);
        }
        let weight = bits.iter().filter(|&&b| b == 1).count();
        Ok(Self {
            bits,
            diffs,
            weight,
        })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of input bits from divergence to remerge.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Trellis nodes spanned, divergence and remerge nodes included.
    pub fn span(&self) -> usize {
        self.bits.len() + 1
    }

    /// Hamming weight `omega(e)`.
    pub fn weight(&self) -> usize {
        self.weight
    }

    /// State difference after each step; the last entry is zero.
    pub fn diffs(&self) -> &[EncoderState] {
        &self.diffs
    }
}

/// All simple loops spanning at most `l_max` trellis nodes, in lexicographic
/// order of their bit patterns.
///
/// A loop of `L` input bits touches `L + 1` nodes; for the multi-tent map with
/// `Q = 6` and `l_max = 12` this yields the 32 loops of lengths 6 to 11.
pub fn enumerate_loops(params: &CcmParams, l_max: usize) -> Vec<ErrorLoop> {
    fn dfs(
        params: &CcmParams,
        diff: EncoderState,
        bits: &mut Vec<u8>,
        max_bits: usize,
        out: &mut Vec<ErrorLoop>,
    ) {
        if !bits.is_empty() && diff == EncoderState::ZERO {
            out.push(ErrorLoop::new(bits.clone(), params).expect("dfs builds simple loops"));
            return;
        }
        if bits.len() == max_bits {
            return;
        }
        let first = if bits.is_empty() { 1 } else { 0 };
        for b in first..=1u8 {
            bits.push(b);
            dfs(params, next_state(diff, b, params), bits, max_bits, out);
            bits.pop();
        }
    }
    let mut out = Vec::new();
    if l_max >= 2 {
        dfs(params, EncoderState::ZERO, &mut Vec::new(), l_max - 1, &mut out);
    }
    out
}

/// How the per-loop average over data sequences is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Every initial state and every data pattern.
    Exact,
    /// `count` uniformly drawn (state, data) pairs per loop, reproducible from `seed`.
    Subsampled { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    params: CcmParams,
    l_max: usize,
    loops: Vec<ErrorLoop>,
    averaging: Averaging,
}

impl BoundConfig {
    pub fn new(params: CcmParams, l_max: usize, averaging: Averaging) -> Self {
        Self {
            params,
            l_max,
            loops: enumerate_loops(&params, l_max),
            averaging,
        }
    }

    /// `l_max = 2Q`, exact averaging.
    pub fn standard(params: CcmParams) -> Self {
        Self::new(params, 2 * params.q() as usize, Averaging::Exact)
    }

    /// Same loop set with a single hand-picked loop; used for degenerate
    /// single-event studies.
    pub fn with_loops(params: CcmParams, loops: Vec<ErrorLoop>, averaging: Averaging) -> Self {
        let l_max = loops.iter().map(ErrorLoop::span).max().unwrap_or(0);
        Self {
            params,
            l_max,
            loops,
            averaging,
        }
    }

    pub fn with_averaging(&self, averaging: Averaging) -> Self {
        Self {
            averaging,
            ..self.clone()
        }
    }

    pub fn params(&self) -> &CcmParams {
        &self.params
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn loops(&self) -> &[ErrorLoop] {
        &self.loops
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging
    }
}

/// Receiver-side disturbance: Bussgang gain plus distortion and channel
/// noise variances per real dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStats {
    pub c: f64,
    pub sigma_eta_sq: f64,
    pub sigma_n_sq: f64,
}

impl NoiseStats {
    pub fn new(c: f64, sigma_eta_sq: f64, sigma_n_sq: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(sigma_eta_sq >= 0.0) || !(sigma_n_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid noise statistics C={c}, eta={sigma_eta_sq}, n={sigma_n_sq}"
            )));
        }
        Ok(Self {
            c,
            sigma_eta_sq,
            sigma_n_sq,
        })
    }

    /// Subcarrier statistics of the OFDM link for unit-energy symbols at
    /// `ebn0_db`, one bit per symbol.
    ///
    /// The unitary FFT turns the time-domain distortion power `sigma_eta^2`
    /// into a complex subcarrier disturbance of the same power, i.e. half of
    /// it per real dimension.
    pub fn for_link(stats: &BussgangStats, ebn0_db: f64) -> Result<Self> {
        let sn2 = crate::bussgang::sigma_n_sq(stats.c, 1.0, db_to_linear(ebn0_db));
        Self::new(stats.c, 0.5 * stats.sigma_eta_sq, sn2)
    }

    /// `C^2 / (2 (eta + n))` for unit-energy symbols.
    pub fn ebn0_equivalent(&self) -> f64 {
        self.c * self.c / (2.0 * (self.sigma_eta_sq + self.sigma_n_sq))
    }

    /// Scale `k` with `PEP = erfc(k d) / 2`.
    fn pep_scale(&self) -> f64 {
        let var = self.sigma_eta_sq + self.sigma_n_sq;
        self.c / (2.0 * (2.0 * var).sqrt())
    }
}

/// `sqrt(sum |x_i - y_i|^2)`.
pub fn pairwise_distance(x: &[Complex64], y: &[Complex64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
}

/// Pairwise error probability `erfc(C d / (2 sqrt(2 (eta + n)))) / 2`.
pub fn pep(d: f64, noise: &NoiseStats) -> f64 {
    pep_scaled(d, noise.pep_scale())
}

fn pep_scaled(d: f64, k: f64) -> f64 {
    if d == 0.0 {
        return 0.5;
    }
    0.5 * erfc(k * d)
}

/// Per-state phases `g(m / 2^Q)` and the pairwise squared symbol distances.
#[derive(Debug, Clone)]
pub struct SymbolGeometry {
    n: usize,
    phases: Vec<f64>,
    d2: Vec<f64>,
}

impl SymbolGeometry {
    pub fn new(params: &CcmParams, table: &ConjugationTable) -> Self {
        let n = params.num_states();
        let phases: Vec<f64> = (0..n)
            .map(|m| table.eval(m as f64 / n as f64).expect("grid inside [0,1]"))
            .collect();
        Self::from_phases(phases)
    }

    pub fn from_phases(phases: Vec<f64>) -> Self {
        let n = phases.len();
        let symbols: Vec<Complex64> = phases.iter().map(|&s| phase_map(s)).collect();
        let mut d2 = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                d2[a * n + b] = (symbols[a] - symbols[b]).norm_sqr();
            }
        }
        Self { n, phases, d2 }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    #[inline]
    pub fn d2(&self, a: usize, b: usize) -> f64 {
        self.d2[a * self.n + b]
    }
}

/// Calls `visit(d2, multiplicity)` for every (initial state, data pattern) of
/// the loop under the given averaging; multiplicities of a loop sum to
/// `2^(Q+L)` in exact mode and to `count` when subsampled.
fn for_each_distance<F: FnMut(f64, f64)>(
    params: &CcmParams,
    lp: &ErrorLoop,
    geom: &SymbolGeometry,
    averaging: Averaging,
    loop_index: usize,
    initial: Option<usize>,
    mut visit: F,
) {
    let diffs = lp.diffs();
    // the final bit lands both paths on the same state, so it never changes the distance
    let free = diffs.len() - 1;
    match averaging {
        Averaging::Exact => {
            fn walk<F: FnMut(f64, f64)>(
                params: &CcmParams,
                geom: &SymbolGeometry,
                diffs: &[EncoderState],
                state: EncoderState,
                depth: usize,
                acc: f64,
                visit: &mut F,
            ) {
                if depth == diffs.len() - 1 {
                    visit(acc, 2.0);
                    return;
                }
                for b in 0..=1u8 {
                    let a = next_state(state, b, params);
                    let pair = a ^ diffs[depth];
                    walk(
                        params,
                        geom,
                        diffs,
                        a,
                        depth + 1,
                        acc + geom.d2(a.index(), pair.index()),
                        visit,
                    );
                }
            }
            let states: Box<dyn Iterator<Item = usize>> = match initial {
                Some(s) => Box::new(std::iter::once(s)),
                None => Box::new(0..params.num_states()),
            };
            for s0 in states {
                walk(params, geom, diffs, EncoderState(s0 as u32), 0, 0.0, &mut visit);
            }
        }
        Averaging::Subsampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(loop_index as u64);
            let n = params.num_states();
            for _ in 0..count {
                let mut state = EncoderState(rng.random_range(0..n) as u32);
                let mut acc = 0.0;
                for &d in &diffs[..free] {
                    state = next_state(state, rng.random_range(0..=1u8), params);
                    acc += geom.d2(state.index(), (state ^ d).index());
                }
                visit(acc, 1.0);
            }
        }
    }
}

fn normalizer(params: &CcmParams, lp: &ErrorLoop, averaging: Averaging) -> f64 {
    match averaging {
        Averaging::Exact => (params.q() as f64 + lp.len() as f64).exp2(),
        Averaging::Subsampled { count, .. } => count as f64,
    }
}

/// Work units: (loop, initial state) in exact mode, whole loops when subsampled.
fn work_units(cfg: &BoundConfig) -> Vec<(usize, Option<usize>)> {
    let n = cfg.params.num_states();
    cfg.loops
        .iter()
        .enumerate()
        .flat_map(|(li, _)| match cfg.averaging {
            Averaging::Exact => (0..n).map(|s| (li, Some(s))).collect::<Vec<_>>(),
            Averaging::Subsampled { .. } => vec![(li, None)],
        })
        .collect()
}

/// Union bound `sum_e sum_x omega(e) / 2^(Q+L_e) PEP(x -> x')`.
///
/// Partial sums are formed in parallel and reduced in a fixed order, so the
/// result does not depend on the thread schedule.
pub fn pb_bound(table: &ConjugationTable, noise: &NoiseStats, cfg: &BoundConfig) -> f64 {
    let geom = SymbolGeometry::new(&cfg.params, table);
    bound_with_geometry(&geom, noise, cfg)
}

pub fn bound_with_geometry(geom: &SymbolGeometry, noise: &NoiseStats, cfg: &BoundConfig) -> f64 {
    let k = noise.pep_scale();
    let partials: Vec<f64> = work_units(cfg)
        .into_par_iter()
        .map(|(li, s0)| {
            let lp = &cfg.loops[li];
            let mut sum = 0.0;
            for_each_distance(&cfg.params, lp, geom, cfg.averaging, li, s0, |d2, mult| {
                sum += mult * pep_scaled(d2.sqrt(), k);
            });
            sum * lp.weight() as f64 / normalizer(&cfg.params, lp, cfg.averaging)
        })
        .collect();
    partials.iter().sum()
}

/// Bound value and its gradient with respect to the per-state phases
/// `g(m / 2^Q)`.
pub fn bound_gradient(geom: &SymbolGeometry, noise: &NoiseStats, cfg: &BoundConfig) -> (f64, Vec<f64>) {
    let params = &cfg.params;
    let n = params.num_states();
    let k = noise.pep_scale();
    let phases = geom.phases();
    // d/ds_a |x_a - x_b|^2 = 4 pi sin(2 pi (s_a - s_b))
    let mut dd = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            dd[a * n + b] = 4.0 * PI * (TAU * (phases[a] - phases[b])).sin();
        }
    }
    let dpep = |d2: f64| {
        let d2 = d2.max(1e-24);
        let d = d2.sqrt();
        -k * (-(k * d).powi(2)).exp() / (2.0 * PI.sqrt() * d)
    };

    let partials: Vec<(f64, Vec<f64>)> = work_units(cfg)
        .into_par_iter()
        .map(|(li, s0)| {
            let lp = &cfg.loops[li];
            let scale = lp.weight() as f64 / normalizer(params, lp, cfg.averaging);
            let mut value = 0.0;
            let mut grad = vec![0.0; n];
            match cfg.averaging {
                Averaging::Exact => {
                    // returns the summed leaf sensitivity below this node
                    #[allow(clippy::too_many_arguments)]
                    fn walk(
                        params: &CcmParams,
                        geom: &SymbolGeometry,
                        dd: &[f64],
                        diffs: &[EncoderState],
                        state: EncoderState,
                        depth: usize,
                        acc: f64,
                        value: &mut f64,
                        grad: &mut [f64],
                        leaf: &dyn Fn(f64) -> (f64, f64),
                    ) -> f64 {
                        if depth == diffs.len() - 1 {
                            let (v, w) = leaf(acc);
                            *value += 2.0 * v;
                            return 2.0 * w;
                        }
                        let n = geom.n;
                        let mut total = 0.0;
                        for b in 0..=1u8 {
                            let a = next_state(state, b, params);
                            let pair = a ^ diffs[depth];
                            let (ia, ib) = (a.index(), pair.index());
                            let w = walk(
                                params,
                                geom,
                                dd,
                                diffs,
                                a,
                                depth + 1,
                                acc + geom.d2(ia, ib),
                                value,
                                grad,
                                leaf,
                            );
                            let slope = dd[ia * n + ib];
                            grad[ia] += w * slope;
                            grad[ib] -= w * slope;
                            total += w;
                        }
                        total
                    }
                    let leaf = |d2: f64| (pep_scaled(d2.sqrt(), k), dpep(d2));
                    walk(
                        params,
                        geom,
                        &dd,
                        lp.diffs(),
                        EncoderState(s0.expect("exact units carry a state") as u32),
                        0,
                        0.0,
                        &mut value,
                        &mut grad,
                        &leaf,
                    );
                }
                Averaging::Subsampled { count, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(li as u64);
                    let diffs = lp.diffs();
                    let mut path = Vec::with_capacity(diffs.len());
                    for _ in 0..count {
                        path.clear();
                        let mut state = EncoderState(rng.random_range(0..n) as u32);
                        let mut acc = 0.0;
                        for &d in &diffs[..diffs.len() - 1] {
                            state = next_state(state, rng.random_range(0..=1u8), params);
                            let pair = state ^ d;
                            acc += geom.d2(state.index(), pair.index());
                            path.push((state.index(), pair.index()));
                        }
                        value += pep_scaled(acc.sqrt(), k);
                        let w = dpep(acc);
                        for &(ia, ib) in &path {
                            let slope = dd[ia * n + ib];
                            grad[ia] += w * slope;
                            grad[ib] -= w * slope;
                        }
                    }
                }
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            (value * scale, grad)
        })
        .collect();

    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for (v, g) in partials {
        value += v;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    (value, grad)
}

/// Normalized histogram of squared loop distances `d_E^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpectrum {
    pub bin_width: f64,
    /// `masses[k]` covers `[k w, (k+1) w)`.
    pub masses: Vec<f64>,
    pub min_d2: f64,
    pub max_d2: f64,
}

impl DistanceSpectrum {
    /// Lower edge of the first occupied bin.
    pub fn min_occupied_bin(&self) -> Option<f64> {
        self.masses
            .iter()
            .position(|&m| m > 0.0)
            .map(|k| k as f64 * self.bin_width)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,mass\n");
        for (k, m) in self.masses.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{:e}\n",
                k as f64 * self.bin_width,
                (k + 1) as f64 * self.bin_width,
                m
            ));
        }
        out
    }
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.25;

/// Every (loop, initial state, data pattern) carries equal mass.
pub fn distance_spectrum(
    table: &ConjugationTable,
    cfg: &BoundConfig,
    bin_width: f64,
) -> Result<DistanceSpectrum> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be positive, got {bin_width}")));
    }
    let geom = SymbolGeometry::new(&cfg.params, table);
    let partials: Vec<(Vec<f64>, f64, f64)> = work_units(cfg)
        .into_par_iter()
        .map(|(li, s0)| {
            let mut counts: Vec<f64> = Vec::new();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let lp = &cfg.loops[li];
            for_each_distance(&cfg.params, lp, &geom, cfg.averaging, li, s0, |d2, mult| {
                let k = (d2 / bin_width).floor() as usize;
                if counts.len() <= k {
                    counts.resize(k + 1, 0.0);
                }
                counts[k] += mult;
                lo = lo.min(d2);
                hi = hi.max(d2);
            });
            (counts, lo, hi)
        })
        .collect();

    let mut masses: Vec<f64> = Vec::new();
    let (mut min_d2, mut max_d2) = (f64::INFINITY, f64::NEG_INFINITY);
    for (counts, lo, hi) in partials {
        if masses.len() < counts.len() {
            masses.resize(counts.len(), 0.0);
        }
        masses.iter_mut().zip(&counts).for_each(|(m, c)| *m += c);
        min_d2 = min_d2.min(lo);
        max_d2 = max_d2.max(hi);
    }
    let total: f64 = masses.iter().sum();
    if total > 0.0 {
        masses.iter_mut().for_each(|m| *m /= total);
    }
    Ok(DistanceSpectrum {
        bin_width,
        masses,
        min_d2,
        max_d2,
    })
}

/// Smallest squared distance over every loop and every data pattern.
pub fn min_loop_distance_sq(table: &ConjugationTable, cfg: &BoundConfig) -> f64 {
    let exact = cfg.with_averaging(Averaging::Exact);
    let geom = SymbolGeometry::new(&cfg.params, table);
    work_units(&exact)
        .into_par_iter()
        .map(|(li, s0)| {
            let mut lo = f64::INFINITY;
            for_each_distance(&exact.params, &exact.loops[li], &geom, Averaging::Exact, li, s0, |d2, _| {
                lo = lo.min(d2)
            });
            lo
        })
        .reduce(|| f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_states;

    fn mtm(q: u32) -> CcmParams {
        CcmParams::multi_tent(q).unwrap()
    }

    #[test]
    fn loop_census_multi_tent() {
        let loops = enumerate_loops(&mtm(6), 12);
        assert_eq!(loops.len(), 32);
        assert!(loops.iter().all(|l| l.len() >= 6 && l.span() <= 12));
        let mut sorted = loops.clone();
        sorted.sort_by(|a, b| a.bits().cmp(b.bits()));
        assert_eq!(sorted, loops);
    }

    #[test]
    fn no_loop_fits_short_cap() {
        // the shortest multi-tent loop has 6 bits
        assert!(enumerate_loops(&mtm(6), 6).is_empty());
        assert_eq!(enumerate_loops(&mtm(6), 7).len(), 1);
        assert!(enumerate_loops(&mtm(6), 0).is_empty());
    }

    #[test]
    fn loops_remerge_exactly_once() {
        let p = mtm(5);
        for lp in enumerate_loops(&p, 10) {
            let mut diff = EncoderState::ZERO;
            for (t, &b) in lp.bits().iter().enumerate() {
                diff = next_state(diff, b, &p);
                assert_eq!(diff == EncoderState::ZERO, t + 1 == lp.len());
            }
            assert_eq!(lp.weight(), lp.bits().iter().filter(|&&b| b == 1).count());
        }
        assert!(ErrorLoop::new(vec![0, 1], &p).is_err());
        assert!(ErrorLoop::new(vec![1, 0, 0], &p).is_err());
    }

    #[test]
    fn loops_hold_for_real_paths() {
        let p = mtm(6);
        let loops = enumerate_loops(&p, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for lp in &loops {
            for _ in 0..100 {
                let pre: Vec<u8> = (0..8).map(|_| rng.random_range(0..=1)).collect();
                let body: Vec<u8> = (0..lp.len() + 5).map(|_| rng.random_range(0..=1)).collect();
                let mut a = pre.clone();
                a.extend(&body);
                let mut b = pre.clone();
                b.extend(body.iter().enumerate().map(|(i, &x)| {
                    x ^ lp.bits().get(i).copied().unwrap_or(0)
                }));
                let sa = encode_states(&a, &p);
                let sb = encode_states(&b, &p);
                for t in 0..a.len() {
                    let inside = t >= 8 && t < 8 + lp.len() - 1;
                    assert_eq!(sa[t] != sb[t], inside, "t={t}");
                }
            }
        }
    }

    #[test]
    fn distance_examples() {
        let one = [Complex64::new(1.0, 0.0)];
        let minus = [Complex64::new(-1.0, 0.0)];
        assert_eq!(pairwise_distance(&one, &one).unwrap(), 0.0);
        assert_eq!(pairwise_distance(&one, &minus).unwrap(), 2.0);
        let l = 7;
        let x: Vec<_> = (0..l).map(|i| phase_map(0.1 * i as f64)).collect();
        let y: Vec<_> = (0..l).map(|i| phase_map(0.1 * i as f64 + 0.5)).collect();
        assert!((pairwise_distance(&x, &y).unwrap() - 2.0 * (l as f64).sqrt()).abs() < 1e-12);
        assert!(pairwise_distance(&x, &y[1..]).is_err());
    }

    #[test]
    fn pep_examples() {
        let noise = NoiseStats::new(1.0, 0.0, 0.05).unwrap();
        assert_eq!(pep(0.0, &noise), 0.5);
        // erfc(1/sqrt(0.1)) / 2
        assert!((pep(2.0, &noise) / 3.872108216e-6 - 1.0).abs() < 1e-8);
        let mut prev = 0.5;
        for k in 1..200 {
            let v = pep(k as f64 * 0.05, &noise);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn empty_loop_set_gives_zero() {
        let p = mtm(6);
        let cfg = BoundConfig::with_loops(p, vec![], Averaging::Exact);
        let t = ConjugationTable::identity(64).unwrap();
        let noise = NoiseStats::new(1.0, 0.0, 0.05).unwrap();
        assert_eq!(pb_bound(&t, &noise, &cfg), 0.0);
    }

    #[test]
    fn constant_distance_loop() {
        // with every phase on one of two antipodal points spread so that all
        // states share a symbol, every loop distance is zero
        let p = mtm(3);
        let cfg = BoundConfig::new(p, 6, Averaging::Exact);
        let lp = cfg.loops()[0].clone();
        let geom = SymbolGeometry::from_phases(vec![0.3; 8]);
        let noise = NoiseStats::new(1.0, 0.0, 0.05).unwrap();
        let single = BoundConfig::with_loops(p, vec![lp.clone()], Averaging::Exact);
        let v = bound_with_geometry(&geom, &noise, &single);
        assert!((v - lp.weight() as f64 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn spectrum_mass_and_single_bin() {
        let p = mtm(3);
        let cfg = BoundConfig::new(p, 6, Averaging::Exact);
        let t = ConjugationTable::identity(8).unwrap();
        let sp = distance_spectrum(&t, &cfg, DEFAULT_BIN_WIDTH).unwrap();
        assert!((sp.total_mass() - 1.0).abs() < 1e-12);
        assert!(sp.min_d2 <= sp.max_d2);
        assert_eq!(sp.min_d2, min_loop_distance_sq(&t, &cfg));
        assert!(distance_spectrum(&t, &cfg, 0.0).is_err());
    }

    #[test]
    fn gradient_matches_value() {
        let p = mtm(4);
        let cfg = BoundConfig::standard(p);
        let t = ConjugationTable::identity(16).unwrap();
        let noise = NoiseStats::new(1.0, 0.01, 0.05).unwrap();
        let geom = SymbolGeometry::new(&p, &t);
        let (v, _) = bound_gradient(&geom, &noise, &cfg);
        assert!((v - pb_bound(&t, &noise, &cfg)).abs() <= 1e-14 * v);
        let sub = cfg.with_averaging(Averaging::Subsampled { count: 512, seed: 9 });
        let (vs, _) = bound_gradient(&geom, &noise, &sub);
        assert!((vs - pb_bound(&t, &noise, &sub)).abs() <= 1e-14 * vs);
    }
}
