//! Seeded Monte Carlo link simulation over the shared OFDM/LED chain, bound
//! curves, and CSV/config plumbing.
//!
//! Blocks are simulated in parallel in fixed-size rounds. Each block draws its
//! bits and noise from a ChaCha8 stream keyed by (noise seed, block index) and
//! the stop rule is checked only between rounds, so results do not depend on
//! the number of worker threads.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::baseline::{bpsk_demodulate, bpsk_modulate, tcm_decoder, tcm_encode, TcmParams};
use crate::bound::{pb_bound, Averaging, BoundConfig, NoiseStats};
use crate::bussgang::{characterize, linear_to_db, BussgangStats};
use crate::codec::{modulate_block, CcmParams, CcmTrellis};
use crate::conjugation::ConjugationTable;
use crate::error::{Error, Result};
use crate::led::{LedTransfer, ShiftedNonlinearity};
use crate::ofdm::{Interleaver, OfdmModem, OfdmParams};
use crate::trellis::ViterbiDecoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Ccm,
    Tcm,
    Bpsk,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ccm" => Ok(Scheme::Ccm),
            "tcm" => Ok(Scheme::Tcm),
            "bpsk" => Ok(Scheme::Bpsk),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Ccm => "ccm",
            Scheme::Tcm => "tcm",
            Scheme::Bpsk => "bpsk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_bits: 100_000_000,
        }
    }
}

/// Blocks simulated between two stop-rule checks.
pub const ROUND_BLOCKS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub scheme: Scheme,
    pub params: CcmParams,
    /// Conjugation table for the CCM scheme; identity with `P = 64` if absent.
    pub table: Option<ConjugationTable>,
    pub led: LedTransfer,
    /// Replace the LED by its ideal (clip-only) predistortion.
    pub predistorted: bool,
    pub ibo_db: f64,
    pub ebn0_db: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub interleaver_seed: u64,
    pub noise_seed: u64,
    pub stop: StopRule,
}

impl LinkConfig {
    /// mTM with `Q = 6`, `N = 256`, 100 OFDM symbols per block.
    pub fn new(scheme: Scheme, led: LedTransfer, ibo_db: f64) -> Self {
        Self {
            scheme,
            params: CcmParams::multi_tent(6).expect("Q = 6 is valid"),
            table: None,
            led,
            predistorted: false,
            ibo_db,
            ebn0_db: Vec::new(),
            n: 256,
            m: 100 * 127,
            interleaver_seed: 1,
            noise_seed: 1,
            stop: StopRule::default(),
        }
    }

    pub fn ofdm(&self) -> Result<OfdmParams> {
        OfdmParams::new(self.n, self.m)
    }

    /// LED actually driven by the chain.
    pub fn effective_led(&self) -> Result<LedTransfer> {
        if self.predistorted {
            self.led.ideal_predistortion()
        } else {
            Ok(self.led.clone())
        }
    }

    pub fn table_or_identity(&self) -> Result<ConjugationTable> {
        match &self.table {
            Some(t) => Ok(t.clone()),
            None => ConjugationTable::identity(64),
        }
    }

    /// Recentered nonlinearity and its Bussgang statistics for this link.
    pub fn characterize(&self) -> Result<(ShiftedNonlinearity, BussgangStats)> {
        let ofdm = self.ofdm()?;
        characterize(&self.effective_led()?, self.ibo_db, ofdm.power_factor())
    }

    /// Parses flat `key = value` text; relative file paths resolve against `base`.
    ///
    /// Keys: `scheme`, `led`, `lut`, `predistorted`, `ibo_db`, `ebn0_db`
    /// (comma list), `n`, `m`, `q`, `taps` (six 0/1 digits), `interleaver_seed`,
    /// `noise_seed`, `min_errors`, `max_bits`.
    pub fn from_kv_str(text: &str, base: &Path) -> Result<Self> {
        let entries = parse_kv(text)?;
        let get = |k: &str| entries.iter().rev().find(|(key, _, _)| key == k);
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let num = |k: &str| -> Result<Option<f64>> {
            get(k)
                .map(|(_, v, line)| {
                    v.parse::<f64>()
                        .map_err(|_| perr(*line, format!("bad number `{v}` for `{k}`")))
                })
                .transpose()
        };
        let int = |k: &str| -> Result<Option<u64>> {
            get(k)
                .map(|(_, v, line)| {
                    v.parse::<u64>()
                        .map_err(|_| perr(*line, format!("bad integer `{v}` for `{k}`")))
                })
                .transpose()
        };
        for (key, _, line) in &entries {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(perr(*line, format!("unknown key `{key}`")));
            }
        }

        let scheme: Scheme = match get("scheme") {
            Some((_, v, _)) => v.parse()?,
            None => Scheme::Ccm,
        };
        let led = match get("led") {
            Some((_, v, _)) => LedTransfer::read(resolve(base, v))?,
            None => LedTransfer::cubic_reference(),
        };
        let mut cfg = Self::new(scheme, led, num("ibo_db")?.unwrap_or(0.0));
        if let Some((_, v, _)) = get("lut") {
            cfg.table = Some(ConjugationTable::read(resolve(base, v))?);
        }
        if let Some((_, v, line)) = get("predistorted") {
            cfg.predistorted = parse_bool(v).ok_or_else(|| perr(*line, format!("bad flag `{v}`")))?;
        }
        if let Some((_, v, line)) = get("ebn0_db") {
            cfg.ebn0_db = parse_list(v).map_err(|msg| perr(*line, msg))?;
        }
        let q = int("q")?.map(|q| q as u32).unwrap_or(cfg.params.q());
        let taps = match get("taps") {
            Some((_, v, line)) => parse_taps(v).ok_or_else(|| perr(*line, format!("bad taps `{v}`")))?,
            None => cfg.params.taps(),
        };
        cfg.params = CcmParams::new(taps, q)?;
        if let Some(v) = int("n")? {
            cfg.n = v as usize;
        }
        if let Some(v) = int("m")? {
            cfg.m = v as usize;
        }
        if let Some(v) = int("interleaver_seed")? {
            cfg.interleaver_seed = v;
        }
        if let Some(v) = int("noise_seed")? {
            cfg.noise_seed = v;
        }
        if let Some(v) = int("min_errors")? {
            cfg.stop.min_errors = v;
        }
        if let Some(v) = int("max_bits")? {
            cfg.stop.max_bits = v;
        }
        cfg.ofdm()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_kv_str(&std::fs::read_to_string(path)?, &base)
    }
}

pub const CONFIG_KEYS: [&str; 14] = [
    "scheme",
    "led",
    "lut",
    "predistorted",
    "ibo_db",
    "ebn0_db",
    "n",
    "m",
    "q",
    "taps",
    "interleaver_seed",
    "noise_seed",
    "min_errors",
    "max_bits",
];

/// `(key, value, line)` triples of a flat `key = value` file; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, found `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

fn resolve(base: &Path, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Comma-separated reals; `inf` is accepted for the noiseless sentinel.
pub fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().map_err(|_| format!("bad number `{x}` in list")))
        .collect()
}

/// Six 0/1 digits `u1..u6`.
pub fn parse_taps(v: &str) -> Option<[u8; 6]> {
    let digits: Vec<u8> = v
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| match c {
            '0' => Some(0),
            '1' => Some(1),
            _ => None,
        })
        .collect::<Option<_>>()?;
    digits.try_into().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    /// Analytic, from the Bussgang statistics and the channel noise.
    pub equivalent_ebn0_db: f64,
    pub c: f64,
    pub sigma_eta_sq: f64,
    /// Stop rule ended on the bit budget before reaching the error target.
    pub few_errors: bool,
}

impl BerPoint {
    /// Binomial standard error of the BER estimate.
    pub fn std_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
}

pub const CSV_HEADER: &str = "ebn0_db,bits,errors,ber,equivalent_ebn0_db,C,sigma_eta_sq,flag";

impl BerCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{},{:e},{}",
                p.ebn0_db,
                p.bits,
                p.errors,
                p.ber,
                p.equivalent_ebn0_db,
                p.c,
                p.sigma_eta_sq,
                if p.few_errors { "few_errors" } else { "ok" }
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{CSV_HEADER}`"),
                })
            }
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let perr = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            if f.len() != 8 {
                return Err(perr("expected 8 fields"));
            }
            let real = |s: &str| s.parse::<f64>().map_err(|_| perr("bad number"));
            let int = |s: &str| s.parse::<u64>().map_err(|_| perr("bad integer"));
            points.push(BerPoint {
                ebn0_db: real(f[0])?,
                bits: int(f[1])?,
                errors: int(f[2])?,
                ber: real(f[3])?,
                equivalent_ebn0_db: real(f[4])?,
                c: real(f[5])?,
                sigma_eta_sq: real(f[6])?,
                few_errors: f[7] == "few_errors",
            });
        }
        Ok(Self { points })
    }
}

enum Coder {
    Ccm {
        symbols: Vec<Complex64>,
        decoder: ViterbiDecoder,
    },
    Tcm {
        params: TcmParams,
        decoder: ViterbiDecoder,
    },
    Bpsk,
}

/// Everything a block needs, built once per link.
struct Link {
    params: CcmParams,
    coder: Coder,
    modem: OfdmModem,
    interleaver: Interleaver,
    snl: ShiftedNonlinearity,
    stats: BussgangStats,
}

impl Link {
    fn new(cfg: &LinkConfig) -> Result<Self> {
        let ofdm = cfg.ofdm()?;
        let (snl, stats) = cfg.characterize()?;
        let coder = match cfg.scheme {
            Scheme::Ccm => {
                let symbols = cfg.table_or_identity()?.symbol_map(cfg.params.q());
                let decoder = ViterbiDecoder::new(&CcmTrellis::new(cfg.params, &symbols)?);
                Coder::Ccm { symbols, decoder }
            }
            Scheme::Tcm => {
                let params = TcmParams::default();
                Coder::Tcm {
                    params,
                    decoder: tcm_decoder(&params),
                }
            }
            Scheme::Bpsk => Coder::Bpsk,
        };
        Ok(Self {
            params: cfg.params,
            coder,
            modem: OfdmModem::new(ofdm),
            interleaver: Interleaver::new(cfg.m, cfg.interleaver_seed)?,
            snl,
            stats,
        })
    }

    /// Bit errors of one block.
    fn block(&self, seed: u64, index: u64, noise_std: f64) -> Result<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let m = self.interleaver.len();
        let bits: Vec<u8> = (0..m).map(|_| rng.random_range(0..=1u8)).collect();
        let symbols = match &self.coder {
            Coder::Ccm { symbols, .. } => modulate_block(&bits, &self.params, symbols),
            Coder::Tcm { params, .. } => tcm_encode(&bits, params),
            Coder::Bpsk => bpsk_modulate(&bits),
        };
        let mut samples = self.modem.modulate(&symbols, &self.interleaver)?;
        for x in samples.iter_mut() {
            *x = self.snl.apply(*x);
            if noise_std > 0.0 {
                let w: f64 = rng.sample(StandardNormal);
                *x += noise_std * w;
            }
        }
        let received = self.modem.demodulate(&samples, &self.interleaver)?;
        let c = self.stats.c;
        let decoded = match &self.coder {
            Coder::Ccm { decoder, .. } | Coder::Tcm { decoder, .. } => decoder.decode(&received, c)?,
            Coder::Bpsk => bpsk_demodulate(&received, c)?,
        };
        Ok(bits.iter().zip(&decoded).filter(|(a, b)| a != b).count() as u64)
    }
}

pub fn run_link(cfg: &LinkConfig, ebn0_db: f64) -> Result<BerPoint> {
    run_with(&Link::new(cfg)?, cfg, ebn0_db)
}

fn run_with(link: &Link, cfg: &LinkConfig, ebn0_db: f64) -> Result<BerPoint> {
    if ebn0_db.is_nan() {
        return Err(Error::InvalidParameter("Eb/N0 is NaN".into()));
    }
    if cfg.stop.max_bits == 0 {
        return Err(Error::InvalidParameter("bit budget must be positive".into()));
    }
    let noise = NoiseStats::for_link(&link.stats, ebn0_db)?;
    let sn2 = noise.sigma_n_sq;
    // time-domain variance 2 sigma_n^2 gives sigma_n^2 per real subcarrier dimension
    let noise_std = (2.0 * sn2).sqrt();
    let per_block = cfg.m as u64;
    let (mut bits, mut errors, mut next_block) = (0u64, 0u64, 0u64);
    while errors < cfg.stop.min_errors && bits < cfg.stop.max_bits {
        let remaining = (cfg.stop.max_bits - bits).div_ceil(per_block);
        let count = remaining.min(ROUND_BLOCKS as u64);
        let counts = (next_block..next_block + count)
            .into_par_iter()
            .map(|b| link.block(cfg.noise_seed, b, noise_std))
            .collect::<Result<Vec<u64>>>()?;
        errors += counts.iter().sum::<u64>();
        bits += count * per_block;
        next_block += count;
    }
    Ok(BerPoint {
        ebn0_db,
        bits,
        errors,
        ber: errors as f64 / bits as f64,
        equivalent_ebn0_db: linear_to_db(noise.ebn0_equivalent()),
        c: link.stats.c,
        sigma_eta_sq: link.stats.sigma_eta_sq,
        few_errors: errors < cfg.stop.min_errors,
    })
}

pub fn sweep(cfg: &LinkConfig) -> Result<BerCurve> {
    let link = Link::new(cfg)?;
    let points = cfg
        .ebn0_db
        .iter()
        .map(|&e| run_with(&link, cfg, e))
        .collect::<Result<_>>()?;
    Ok(BerCurve { points })
}

/// Exact-averaged bound over `cfg.ebn0_db`, with `L_max = 2Q`.
pub fn bound_curve(cfg: &LinkConfig) -> Result<Vec<(f64, f64)>> {
    let (_, stats) = cfg.characterize()?;
    let table = cfg.table_or_identity()?;
    let bcfg = BoundConfig::new(cfg.params, 2 * cfg.params.q() as usize, Averaging::Exact);
    cfg.ebn0_db
        .iter()
        .map(|&e| {
            let noise = NoiseStats::for_link(&stats, e)?;
            Ok((e, pb_bound(&table, &noise, &bcfg)))
        })
        .collect()
}

pub fn bound_curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("ebn0_db,bound\n");
    for (e, b) in curve {
        let _ = writeln!(out, "{e},{b:e}");
    }
    out
}

/// Eb/N0 at which a simulated curve crosses `target`, interpolating
/// `log10(BER)` linearly in dB between the bracketing points.
pub fn interpolate_required(curve: &BerCurve, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target BER {target} outside (0, 1)")));
    }
    let mut pts: Vec<&BerPoint> = curve
        .points
        .iter()
        .filter(|p| p.errors > 0 && p.ebn0_db.is_finite())
        .collect();
    pts.sort_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db));
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.ber >= target && b.ber < target {
            let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
            return Ok(a.ebn0_db + (la - lt) / (la - lb) * (b.ebn0_db - a.ebn0_db));
        }
    }
    let floor = pts.iter().map(|p| p.ber).fold(f64::INFINITY, f64::min);
    if floor >= target {
        Err(Error::UnreachableTarget { target, floor })
    } else {
        Err(Error::InvalidParameter(format!(
            "no pair of simulated points brackets BER {target}"
        )))
    }
}

/// Simulates `cfg.ebn0_db` and interpolates the crossing of `target`.
pub fn required_ebn0(cfg: &LinkConfig, target: f64) -> Result<f64> {
    interpolate_required(&sweep(cfg)?, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(scheme: Scheme) -> LinkConfig {
        let mut cfg = LinkConfig::new(scheme, LedTransfer::linear(0.0), 0.0);
        cfg.n = 16;
        cfg.m = 7 * 20;
        cfg.stop = StopRule {
            min_errors: 50,
            max_bits: 20_000,
        };
        cfg
    }

    #[test]
    fn noiseless_linear_chain_is_error_free() {
        for scheme in [Scheme::Ccm, Scheme::Tcm, Scheme::Bpsk] {
            let p = run_link(&quick(scheme), f64::INFINITY).unwrap();
            assert_eq!(p.errors, 0, "{scheme}");
            assert!(p.bits >= 20_000);
            assert!(p.few_errors);
        }
    }

    #[test]
    fn reproducible() {
        let cfg = quick(Scheme::Bpsk);
        assert_eq!(run_link(&cfg, 3.0).unwrap(), run_link(&cfg, 3.0).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let curve = BerCurve {
            points: vec![BerPoint {
                ebn0_db: 4.0,
                bits: 1000,
                errors: 12,
                ber: 0.012,
                equivalent_ebn0_db: 3.9,
                c: 0.9,
                sigma_eta_sq: 1e-3,
                few_errors: false,
            }],
        };
        let text = curve.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(BerCurve::from_csv(&text).unwrap(), curve);
    }

    #[test]
    fn interpolation() {
        let mk = |e: f64, ber: f64| BerPoint {
            ebn0_db: e,
            bits: 1_000_000,
            errors: (ber * 1e6) as u64,
            ber,
            equivalent_ebn0_db: e,
            c: 1.0,
            sigma_eta_sq: 0.0,
            few_errors: false,
        };
        let curve = BerCurve {
            points: vec![mk(4.0, 1e-2), mk(6.0, 1e-3), mk(8.0, 1e-5)],
        };
        assert!((interpolate_required(&curve, 1e-4).unwrap() - 7.0).abs() < 1e-12);
        assert!(matches!(
            interpolate_required(&curve, 1e-7),
            Err(Error::UnreachableTarget { .. })
        ));
        assert!(matches!(
            interpolate_required(&curve, 0.1),
            Err(Error::InvalidParameter(_))
        ));
        let floor = BerCurve {
            points: vec![mk(4.0, 1e-2), mk(6.0, 5e-3)],
        };
        assert!(matches!(
            interpolate_required(&floor, 1e-4),
            Err(Error::UnreachableTarget { .. })
        ));
    }

    #[test]
    fn config_parsing() {
        let text = "scheme = tcm\nibo_db = 10\nebn0_db = 2, 4,inf\npredistorted = yes\nn = 16\nm = 70\nnoise_seed = 9\n";
        let cfg = LinkConfig::from_kv_str(text, Path::new(".")).unwrap();
        assert_eq!(cfg.scheme, Scheme::Tcm);
        assert_eq!(cfg.ebn0_db, vec![2.0, 4.0, f64::INFINITY]);
        assert!(cfg.predistorted);
        assert_eq!((cfg.n, cfg.m, cfg.noise_seed), (16, 70, 9));
        assert!(LinkConfig::from_kv_str("speed = 3\n", Path::new(".")).is_err());
        assert!(LinkConfig::from_kv_str("n = 16\nm = 8\n", Path::new(".")).is_err());
        assert_eq!(parse_taps("110100"), Some([1, 1, 0, 1, 0, 0]));
        assert_eq!(parse_taps("11010"), None);
    }
}
