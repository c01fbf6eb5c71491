//! Constrained minimization of the union bound over the sampled conjugation
//! function.
//!
//! The free variables are the interior samples `s^1 .. s^(P-1)`; the pinned
//! endpoints and the gap constraints `s^(k+1) - s^k > delta` are enforced by a
//! logarithmic barrier. Each barrier subproblem is solved by L-BFGS with a
//! fraction-to-boundary step rule, so every iterate stays strictly feasible.
//! The objective is `ln P_b`, whose gradient comes analytically from the
//! bound engine.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bound::{
    bound_gradient, bound_with_geometry, distance_spectrum, pb_bound, Averaging, BoundConfig,
    NoiseStats, SymbolGeometry, DEFAULT_BIN_WIDTH,
};
use crate::bussgang::characterize;
use crate::codec::CcmParams;
use crate::conjugation::{ConjugationTable, MIN_GAP};
use crate::error::{Error, Result};
use crate::led::LedTransfer;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSpec {
    pub params: CcmParams,
    pub led: LedTransfer,
    pub ibo_db: f64,
    pub ebn0_db: f64,
    /// Variance of the time-domain OFDM signal entering the LED.
    pub sigma_x_sq: f64,
    pub p: usize,
    pub l_max: usize,
    pub delta: f64,
    /// Relative objective tolerance of the inner solver.
    pub rel_tol: f64,
    /// Budget of inner iterations over the whole barrier schedule.
    pub max_iter: usize,
    pub averaging: Averaging,
}

impl OptimizeSpec {
    /// Defaults: 10 dB, `P = 64`, `L_max = 2Q`, `delta = 1e-6`, 256-point OFDM
    /// input power, exact averaging.
    pub fn new(params: CcmParams, led: LedTransfer, ibo_db: f64) -> Self {
        Self {
            params,
            led,
            ibo_db,
            ebn0_db: 10.0,
            sigma_x_sq: 254.0 / 256.0,
            p: 64,
            l_max: 2 * params.q() as usize,
            delta: MIN_GAP,
            rel_tol: 1e-8,
            max_iter: 5000,
            averaging: Averaging::Exact,
        }
    }

    pub fn noise(&self) -> Result<NoiseStats> {
        let (_, stats) = characterize(&self.led, self.ibo_db, self.sigma_x_sq)?;
        NoiseStats::for_link(&stats, self.ebn0_db)
    }

    pub fn bound_config(&self) -> BoundConfig {
        BoundConfig::new(self.params, self.l_max, self.averaging)
    }

    pub fn settings(&self) -> Settings {
        Settings {
            delta: self.delta,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
        }
    }
}

/// Bound as a function of the interior samples of a `P`-table.
#[derive(Debug, Clone)]
pub struct Objective {
    cfg: BoundConfig,
    noise: NoiseStats,
    p: usize,
    /// `(j, t)` such that the phase of state `m` is `(1 - t) s^j + t s^(j+1)`.
    brackets: Vec<(usize, f64)>,
}

impl Objective {
    pub fn new(cfg: BoundConfig, noise: NoiseStats, p: usize) -> Result<Self> {
        let identity = ConjugationTable::identity(p)?;
        let n = cfg.params().num_states();
        let brackets = (0..n)
            .map(|m| identity.bracket(m as f64 / n as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg,
            noise,
            p,
            brackets,
        })
    }

    pub fn from_spec(spec: &OptimizeSpec) -> Result<Self> {
        Self::new(spec.bound_config(), spec.noise()?, spec.p)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn config(&self) -> &BoundConfig {
        &self.cfg
    }

    pub fn noise(&self) -> &NoiseStats {
        &self.noise
    }

    fn geometry(&self, samples: &[f64]) -> SymbolGeometry {
        let phases = self
            .brackets
            .iter()
            .map(|&(j, t)| {
                if t == 0.0 {
                    samples[j]
                } else {
                    (1.0 - t) * samples[j] + t * samples[j + 1]
                }
            })
            .collect();
        SymbolGeometry::from_phases(phases)
    }

    fn check(&self, table: &ConjugationTable) -> Result<()> {
        if table.p() != self.p {
            return Err(Error::LengthMismatch {
                expected: self.p + 1,
                actual: table.samples().len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, table: &ConjugationTable) -> Result<f64> {
        self.check(table)?;
        Ok(bound_with_geometry(&self.geometry(table.samples()), &self.noise, &self.cfg))
    }

    /// Bound and its gradient with respect to the interior samples.
    pub fn value_and_gradient(&self, table: &ConjugationTable) -> Result<(f64, Vec<f64>)> {
        self.check(table)?;
        let (value, per_state) =
            bound_gradient(&self.geometry(table.samples()), &self.noise, &self.cfg);
        let mut grad = vec![0.0; self.p + 1];
        for (&(j, t), g) in self.brackets.iter().zip(per_state) {
            grad[j] += (1.0 - t) * g;
            if t != 0.0 {
                grad[j + 1] += t * g;
            }
        }
        Ok((value, grad[1..self.p].to_vec()))
    }
}

/// Bound of the table with interior samples `s` under `spec`.
pub fn objective(s: &[f64], spec: &OptimizeSpec) -> Result<f64> {
    let table = ConjugationTable::from_interior(s)?;
    Objective::from_spec(spec)?.value(&table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub delta: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            delta: MIN_GAP,
            rel_tol: 1e-8,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub mu: f64,
    pub objective: f64,
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Smallest `s^(k+1) - s^k - delta` of the returned table, endpoints included.
    pub min_margin: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub plateaus: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl OptimizeReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "iterations          {}", self.iterations);
        let _ = writeln!(out, "converged           {}", self.converged);
        let _ = writeln!(out, "initial objective   {:.6e}", self.initial_objective);
        let _ = writeln!(out, "final objective     {:.6e}", self.final_objective);
        let _ = writeln!(out, "min gap margin      {:.3e}", self.min_margin);
        let _ = writeln!(out, "s^1 margin          {:.3e}", self.lower_margin);
        let _ = writeln!(out, "1 - s^(P-1) margin  {:.3e}", self.upper_margin);
        let _ = writeln!(out, "plateaus            {}", self.plateaus);
        let _ = writeln!(out, "\niteration,mu,objective,min_margin");
        for e in &self.trace {
            let _ = writeln!(
                out,
                "{},{:.3e},{:.10e},{:.3e}",
                e.iteration, e.mu, e.objective, e.min_margin
            );
        }
        out
    }
}

/// Optimizes from the identity table.
pub fn optimize_conjugation(spec: &OptimizeSpec) -> Result<(ConjugationTable, OptimizeReport)> {
    let obj = Objective::from_spec(spec)?;
    minimize(&obj, &ConjugationTable::identity(spec.p)?, &spec.settings())
}

/// Gaps `s^(k+1) - s^k` of the full sample vector.
fn gaps(samples: &[f64]) -> impl Iterator<Item = f64> + '_ {
    samples.windows(2).map(|w| w[1] - w[0])
}

fn samples_of(x: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(x.len() + 2);
    s.push(0.0);
    s.extend_from_slice(x);
    s.push(1.0);
    s
}

struct Barrier<'a> {
    obj: &'a Objective,
    delta: f64,
    evaluations: usize,
}

impl Barrier<'_> {
    /// `(ln P_b - mu sum ln(gap - delta), gradient, ln P_b)`, or `None` if infeasible.
    fn eval(&mut self, x: &[f64], mu: f64) -> Option<(f64, Vec<f64>, f64)> {
        let s = samples_of(x);
        let slack: Vec<f64> = gaps(&s).map(|g| g - self.delta).collect();
        if slack.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let table = ConjugationTable::new(s).ok()?;
        self.evaluations += 1;
        let (b, g) = self.obj.value_and_gradient(&table).ok()?;
        if !(b > 0.0) {
            return None;
        }
        let ln_b = b.ln();
        let mut f = ln_b;
        let mut grad: Vec<f64> = g.iter().map(|v| v / b).collect();
        for (k, &sl) in slack.iter().enumerate() {
            f -= mu * sl.ln();
            // gap k = s^(k+1) - s^k; interior index i holds s^(i+1)
            if k < x.len() {
                grad[k] -= mu / sl;
            }
            if k >= 1 {
                grad[k - 1] += mu / sl;
            }
        }
        Some((f, grad, ln_b))
    }

    /// Largest step along `d` that keeps every slack positive.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let s = samples_of(x);
        let mut ds = Vec::with_capacity(d.len() + 2);
        ds.push(0.0);
        ds.extend_from_slice(d);
        ds.push(0.0);
        let mut alpha = f64::INFINITY;
        for k in 0..s.len() - 1 {
            let dg = ds[k + 1] - ds[k];
            if dg < 0.0 {
                alpha = alpha.min((s[k + 1] - s[k] - self.delta) / -dg);
            }
        }
        alpha
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Barrier interior-point minimization of `ln P_b` from a feasible `start`.
///
/// Returns the best feasible iterate. The report is flagged non-converged if
/// the iteration budget ran out before the barrier weight reached its floor.
pub fn minimize(
    obj: &Objective,
    start: &ConjugationTable,
    settings: &Settings,
) -> Result<(ConjugationTable, OptimizeReport)> {
    if start.p() != obj.p() {
        return Err(Error::LengthMismatch {
            expected: obj.p() + 1,
            actual: start.samples().len(),
        });
    }
    if !(settings.delta >= MIN_GAP) {
        return Err(Error::InvalidParameter(format!(
            "gap delta must be at least {MIN_GAP}, got {}",
            settings.delta
        )));
    }
    let min_slack = gaps(start.samples()).fold(f64::INFINITY, f64::min) - settings.delta;
    if !(min_slack > 0.0) {
        return Err(Error::ConstraintViolation {
            index: 0,
            reason: "start table does not clear the gap delta strictly".into(),
        });
    }

    let initial_objective = obj.value(start)?;
    let mut barrier = Barrier {
        obj,
        delta: settings.delta,
        evaluations: 0,
    };
    let mut x = start.interior().to_vec();
    let mut best = (initial_objective, x.clone());
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut budget_hit = false;

    const MU_START: f64 = 1e-2;
    const MU_FACTOR: f64 = 0.2;
    const MU_FLOOR: f64 = 1e-9;
    const MEMORY: usize = 12;

    let mut mu = MU_START;
    'outer: loop {
        let Some((mut f, mut g, mut ln_b)) = barrier.eval(&x, mu) else {
            return Err(Error::ConstraintViolation {
                index: 0,
                reason: "iterate left the feasible set".into(),
            });
        };
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut stalls = 0;
        loop {
            if iterations >= settings.max_iter {
                budget_hit = true;
                break 'outer;
            }
            iterations += 1;

            // two-loop recursion
            let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &d);
                d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = history.back() {
                let gamma = dot(s, y) / dot(y, y);
                d.iter_mut().for_each(|v| *v *= gamma);
            } else {
                let norm = dot(&g, &g).sqrt();
                let scale = 1e-3 / norm.max(1e-300);
                d.iter_mut().for_each(|v| *v *= scale);
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &d);
                d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
            }
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                history.clear();
                d = g.iter().map(|v| -v * 1e-3 / dot(&g, &g).sqrt()).collect();
                slope = dot(&g, &d);
            }

            let mut step = (0.99 * barrier.max_step(&x, &d)).min(1.0);
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
                if let Some((ft, gt, lt)) = barrier.eval(&trial, mu) {
                    if ft <= f + 1e-4 * step * slope {
                        accepted = Some((trial, ft, gt, lt));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((xn, fn_, gn, ln_bn)) = accepted else {
                break;
            };
            let s_vec: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y_vec: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s_vec, &y_vec);
            if sy > 1e-16 * dot(&s_vec, &s_vec).sqrt() * dot(&y_vec, &y_vec).sqrt() {
                history.push_back((s_vec, y_vec, 1.0 / sy));
                if history.len() > MEMORY {
                    history.pop_front();
                }
            }
            let decrease = (f - fn_) / f.abs().max(1.0);
            x = xn;
            f = fn_;
            g = gn;
            ln_b = ln_bn;
            let b = ln_b.exp();
            if b < best.0 {
                best = (b, x.clone());
            }
            if decrease < settings.rel_tol {
                stalls += 1;
                if stalls >= 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
        }
        trace.push(TraceEntry {
            iteration: iterations,
            mu,
            objective: ln_b.exp(),
            min_margin: gaps(&samples_of(&x)).fold(f64::INFINITY, f64::min) - settings.delta,
        });
        if mu <= MU_FLOOR {
            break;
        }
        mu = (mu * MU_FACTOR).max(MU_FLOOR);
    }

    let (final_objective, xb) = best;
    let table = ConjugationTable::from_interior(&xb)?;
    let s = table.samples();
    let report = OptimizeReport {
        iterations,
        initial_objective,
        final_objective,
        min_margin: gaps(s).fold(f64::INFINITY, f64::min) - settings.delta,
        lower_margin: s[1],
        upper_margin: 1.0 - s[s.len() - 2],
        plateaus: count_plateaus(&table, PLATEAU_GAP),
        converged: !budget_hit,
        trace,
    };
    Ok((table, report))
}

/// Gap below which consecutive samples count as one level.
pub const PLATEAU_GAP: f64 = 1e-3;

/// Number of flat runs: maximal runs of consecutive gaps below `gap_tol`.
pub fn count_plateaus(table: &ConjugationTable, gap_tol: f64) -> usize {
    let mut count = 0;
    let mut inside = false;
    for g in gaps(table.samples()) {
        let flat = g < gap_tol;
        if flat && !inside {
            count += 1;
        }
        inside = flat;
    }
    count
}

/// Distinct output levels of a staircase table, one per plateau, as the mean
/// of each flat run.
pub fn plateau_levels(table: &ConjugationTable, gap_tol: f64) -> Vec<f64> {
    let s = table.samples();
    let mut levels = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    for w in s.windows(2) {
        if w[1] - w[0] < gap_tol {
            if run.is_empty() {
                run.push(w[0]);
            }
            run.push(w[1]);
        } else if !run.is_empty() {
            levels.push(run.iter().sum::<f64>() / run.len() as f64);
            run.clear();
        }
    }
    if !run.is_empty() {
        levels.push(run.iter().sum::<f64>() / run.len() as f64);
    }
    levels
}

/// Uniformly drawn strictly increasing table whose gaps clear `delta`.
pub fn random_feasible_table(p: usize, delta: f64, seed: u64) -> Result<ConjugationTable> {
    if p < 2 || !(delta * (p as f64) < 0.5) {
        return Err(Error::InvalidParameter(format!("no random table for P={p}, delta={delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // positive increments, normalized, then shifted by the gap floor
    let raw: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let spare = 1.0 - 2.0 * delta * p as f64;
    let mut s = Vec::with_capacity(p + 1);
    let mut acc = 0.0;
    s.push(0.0);
    for r in &raw[..p - 1] {
        acc += r / total * spare + 2.0 * delta;
        s.push(acc);
    }
    s.push(1.0);
    ConjugationTable::new(s)
}

/// Exact bound and minimum loop distance of `table`, for reporting.
pub fn exact_summary(
    table: &ConjugationTable,
    noise: &NoiseStats,
    cfg: &BoundConfig,
) -> Result<(f64, f64)> {
    let exact = cfg.with_averaging(Averaging::Exact);
    let bound = pb_bound(table, noise, &exact);
    let spectrum = distance_spectrum(table, &exact, DEFAULT_BIN_WIDTH)?;
    Ok((bound, spectrum.min_d2))
}
