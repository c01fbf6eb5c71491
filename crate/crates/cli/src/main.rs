use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccm_core::bound::{
    distance_spectrum, enumerate_loops, pb_bound, Averaging, BoundConfig, NoiseStats,
    DEFAULT_BIN_WIDTH,
};
use ccm_core::bussgang::{characterize, linear_to_db};
use ccm_core::codec::CcmParams;
use ccm_core::conjugation::ConjugationTable;
use ccm_core::led::LedTransfer;
use ccm_core::optimizer::{optimize_conjugation, plateau_levels, OptimizeSpec, PLATEAU_GAP};
use ccm_core::sim::{bound_curve_csv, parse_kv, parse_list, parse_taps, sweep, LinkConfig, Scheme};
use ccm_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ccm", version, about = "Chaos-coded modulation over DC-biased optical OFDM")]
struct Cli {
    /// Flat `key = value` file supplying defaults; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// LED description (`key = value`); defaults to the built-in cubic LED.
    #[arg(long)]
    led: Option<PathBuf>,
    /// Replace the LED by its clip-only linearization.
    #[arg(long)]
    predistorted: bool,
    #[arg(long, allow_hyphen_values = true)]
    ibo: Option<f64>,
    /// FFT size, used for the LED input power (N - 2) / N.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct Code {
    #[arg(long)]
    q: Option<u32>,
    /// Encoder taps u1..u6 as six 0/1 digits.
    #[arg(long)]
    u: Option<String>,
    /// Largest loop span in trellis nodes; defaults to 2Q.
    #[arg(long)]
    lmax: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Bussgang gain, distortion power and equivalent Eb/N0 of an LED at a back-off.
    Characterize {
        #[command(flatten)]
        common: Common,
        /// Input variance; defaults to (N - 2) / N.
        #[arg(long = "sigma-x2")]
        sigma_x2: Option<f64>,
        /// Eb/N0 list (dB) for the equivalent Eb/N0 table.
        #[arg(long)]
        ebn0: Option<String>,
    },
    /// Error loops of the encoder.
    Loops {
        #[command(flatten)]
        code: Code,
    },
    /// Union bound on the BER over a list of Eb/N0 values (CSV).
    Bound {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        code: Code,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        ebn0: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize the conjugation table and write it as a LUT.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        code: Code,
        #[arg(long)]
        ebn0: Option<f64>,
        #[arg(long)]
        p: Option<usize>,
        /// Average each loop over this many random sequences instead of all of them.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the run report; printed to stderr otherwise.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Monte Carlo BER over a list of Eb/N0 values (CSV).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        ebn0: Option<String>,
        /// Noise seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        interleaver_seed: Option<u64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        min_errors: Option<u64>,
        #[arg(long)]
        max_bits: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram of squared loop distances (CSV).
    Spectrum {
        #[command(flatten)]
        code: Code,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        bin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config-file values with their source directory.
struct Defaults {
    values: HashMap<String, String>,
    base: PathBuf,
}

impl Defaults {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                values: HashMap::new(),
                base: PathBuf::new(),
            });
        };
        let text = std::fs::read_to_string(path)?;
        let values = parse_kv(&text)?.into_iter().map(|(k, v, _)| (k, v)).collect();
        Ok(Self {
            values,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn path(&self, flag: Option<&PathBuf>, key: &str) -> Option<PathBuf> {
        flag.cloned()
            .or_else(|| self.get(key).map(|v| self.base.join(v)))
    }

    fn parse<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| Error::InvalidParameter(format!("bad value `{v}` for `{key}`")))
                })
                .transpose(),
        }
    }

    fn list(&self, flag: Option<&String>, key: &str) -> Result<Vec<f64>> {
        let text = flag.map(String::as_str).or_else(|| self.get(key)).unwrap_or("");
        parse_list(text).map_err(Error::InvalidParameter)
    }

    fn led(&self, common: &Common) -> Result<LedTransfer> {
        let led = match self.path(common.led.as_ref(), "led") {
            Some(p) => LedTransfer::read(p)?,
            None => LedTransfer::cubic_reference(),
        };
        let pre = common.predistorted
            || matches!(self.get("predistorted"), Some("true" | "yes" | "1"));
        if pre {
            led.ideal_predistortion()
        } else {
            Ok(led)
        }
    }

    fn ibo(&self, common: &Common) -> Result<f64> {
        Ok(self.parse(common.ibo, "ibo_db")?.unwrap_or(0.0))
    }

    fn n(&self, common: &Common) -> Result<usize> {
        Ok(self.parse(common.n, "n")?.unwrap_or(256))
    }

    fn params(&self, code: &Code) -> Result<CcmParams> {
        let q = self.parse(code.q, "q")?.unwrap_or(6);
        let taps = match code.u.as_deref().or_else(|| self.get("taps")) {
            Some(s) => parse_taps(s)
                .ok_or_else(|| Error::InvalidParameter(format!("taps must be six 0/1 digits, got `{s}`")))?,
            None => CcmParams::multi_tent(q)?.taps(),
        };
        CcmParams::new(taps, q)
    }

    fn lmax(&self, code: &Code, params: &CcmParams) -> Result<usize> {
        Ok(self
            .parse(code.lmax, "lmax")?
            .unwrap_or(2 * params.q() as usize))
    }

    fn table(&self, flag: Option<&PathBuf>) -> Result<ConjugationTable> {
        match self.path(flag, "lut") {
            Some(p) => ConjugationTable::read(p),
            None => ConjugationTable::identity(64),
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let d = Defaults::load(cli.config.as_deref())?;
    match cli.command {
        Command::Characterize {
            common,
            sigma_x2,
            ebn0,
        } => {
            let led = d.led(&common)?;
            let ibo = d.ibo(&common)?;
            let n = d.n(&common)?;
            let var = d.parse(sigma_x2, "sigma_x2")?.unwrap_or((n - 2) as f64 / n as f64);
            let (snl, stats) = characterize(&led, ibo, var)?;
            println!("ibo_db        {ibo}");
            println!("rho           {}", snl.rho);
            println!("sigma_x2      {var}");
            println!("symmetric     {}", snl.symmetric);
            println!("C             {:.10}", stats.c);
            println!("E[Z^2]        {:.10e}", stats.ez2);
            println!("sigma_eta^2   {:.10e}", stats.sigma_eta_sq);
            println!("SDR_dB        {:.4}", linear_to_db(stats.sdr()));
            let mut list = d.list(ebn0.as_ref(), "ebn0_db")?;
            if list.is_empty() {
                list = (0..=10).map(|k| 2.0 * k as f64).collect();
            }
            println!("\nebn0_db,equivalent_ebn0_db");
            for e in list {
                let noise = NoiseStats::for_link(&stats, e)?;
                println!("{e},{:.4}", linear_to_db(noise.ebn0_equivalent()));
            }
        }
        Command::Loops { code } => {
            let params = d.params(&code)?;
            let lmax = d.lmax(&code, &params)?;
            let loops = enumerate_loops(&params, lmax);
            println!("bits,length,weight");
            for l in &loops {
                let bits: String = l.bits().iter().map(|b| char::from(b'0' + b)).collect();
                println!("{bits},{},{}", l.len(), l.weight());
            }
            eprintln!("{} loops spanning at most {lmax} nodes", loops.len());
        }
        Command::Bound {
            common,
            code,
            lut,
            ebn0,
            out,
        } => {
            let params = d.params(&code)?;
            let cfg = BoundConfig::new(params, d.lmax(&code, &params)?, Averaging::Exact);
            let n = d.n(&common)?;
            let (_, stats) = characterize(&d.led(&common)?, d.ibo(&common)?, (n - 2) as f64 / n as f64)?;
            let table = d.table(lut.as_ref())?;
            let curve = d
                .list(ebn0.as_ref(), "ebn0_db")?
                .into_iter()
                .map(|e| Ok((e, pb_bound(&table, &NoiseStats::for_link(&stats, e)?, &cfg))))
                .collect::<Result<Vec<_>>>()?;
            emit(out.as_ref(), &bound_curve_csv(&curve))?;
        }
        Command::Optimize {
            common,
            code,
            ebn0,
            p,
            subsample,
            seed,
            max_iter,
            out,
            report,
        } => {
            let params = d.params(&code)?;
            let mut spec = OptimizeSpec::new(params, d.led(&common)?, d.ibo(&common)?);
            let n = d.n(&common)?;
            spec.sigma_x_sq = (n - 2) as f64 / n as f64;
            spec.l_max = d.lmax(&code, &params)?;
            if let Some(e) = d.parse(ebn0, "ebn0_db")? {
                spec.ebn0_db = e;
            }
            if let Some(p) = d.parse(p, "p")? {
                spec.p = p;
            }
            if let Some(m) = max_iter {
                spec.max_iter = m;
            }
            if let Some(count) = subsample {
                spec.averaging = Averaging::Subsampled { count, seed };
            }
            let (table, rep) = optimize_conjugation(&spec)?;
            table.write(&out)?;
            let noise = spec.noise()?;
            let exact = BoundConfig::new(params, spec.l_max, Averaging::Exact);
            let identity = ConjugationTable::identity(spec.p)?;
            let mut text = rep.to_text();
            let spectrum = |t: &ConjugationTable| distance_spectrum(t, &exact, DEFAULT_BIN_WIDTH);
            text.push_str(&format!(
                "\nexact bound identity   {:.6e}\nexact bound optimized  {:.6e}\nmin d^2 identity       {:.6}\nmin d^2 optimized      {:.6}\nplateau levels         {:?}\n",
                pb_bound(&identity, &noise, &exact),
                pb_bound(&table, &noise, &exact),
                spectrum(&identity)?.min_d2,
                spectrum(&table)?.min_d2,
                plateau_levels(&table, PLATEAU_GAP),
            ));
            if !rep.converged {
                eprintln!("warning: optimizer stopped on its iteration budget");
            }
            match report {
                Some(path) => std::fs::write(path, text)?,
                None => eprint!("{text}"),
            }
        }
        Command::Simulate {
            common,
            scheme,
            lut,
            ebn0,
            seed,
            interleaver_seed,
            m,
            min_errors,
            max_bits,
            out,
        } => {
            let mut cfg = match &cli.config {
                Some(path) => LinkConfig::read(path)?,
                None => LinkConfig::new(Scheme::Ccm, LedTransfer::cubic_reference(), 0.0),
            };
            if let Some(s) = scheme {
                cfg.scheme = s.parse()?;
            }
            if let Some(p) = &common.led {
                cfg.led = LedTransfer::read(p)?;
            }
            cfg.predistorted |= common.predistorted;
            if let Some(v) = common.ibo {
                cfg.ibo_db = v;
            }
            if let Some(v) = common.n {
                cfg.n = v;
            }
            if let Some(p) = &lut {
                cfg.table = Some(ConjugationTable::read(p)?);
            }
            if let Some(list) = &ebn0 {
                cfg.ebn0_db = parse_list(list).map_err(Error::InvalidParameter)?;
            }
            if let Some(v) = seed {
                cfg.noise_seed = v;
            }
            if let Some(v) = interleaver_seed {
                cfg.interleaver_seed = v;
            }
            if let Some(v) = m {
                cfg.m = v;
            }
            if let Some(v) = min_errors {
                cfg.stop.min_errors = v;
            }
            if let Some(v) = max_bits {
                cfg.stop.max_bits = v;
            }
            let curve = sweep(&cfg)?;
            emit(out.as_ref(), &curve.to_csv())?;
        }
        Command::Spectrum {
            code,
            lut,
            bin,
            out,
        } => {
            let params = d.params(&code)?;
            let cfg = BoundConfig::new(params, d.lmax(&code, &params)?, Averaging::Exact);
            let sp = distance_spectrum(&d.table(lut.as_ref())?, &cfg, bin)?;
            eprintln!("min d^2 {:.6}", sp.min_d2);
            emit(out.as_ref(), &sp.to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
