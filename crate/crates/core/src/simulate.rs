//! Monte Carlo: Brownian paths run to the embedding stopping rules, a
//! Heston simulator with double no-touch pricing, and the hedging backtest.
//!
//! Work is split into fixed batches, each with its own ChaCha stream, and
//! batch results are reduced in batch order, so every estimate depends only
//! on the seed and not on the thread count.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::bounds::{upper_bound_finite, UpperTerm};
use crate::embedding::{JackaRule, Path, PerkinsRule, Segment, Step, StoppingRule};
use crate::hedging::{dnt_payoff, HedgePortfolio};
use crate::market::{same_strike, tv_between, Barriers, CallQuoteSet, DigitalQuotes, ImpliedMeasure, QuotedMarket};
use crate::{fmt_sig, DntError, Result};

const BATCH: usize = 2048;

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Runs `f(rng, batch, count)` over fixed batches covering `n` items; results come back in batch order.
fn batched<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let nb = n.div_ceil(BATCH);
    (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            f(&mut rng, b, BATCH.min(n - b * BATCH))
        })
        .collect()
}

/// Monte Carlo estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub paths: usize,
}

impl McEstimate {
    pub fn from_sum(sum: f64, n: usize) -> Self {
        let p = sum / n as f64;
        McEstimate { value: p, std_err: (p * (1.0 - p)).max(0.0).sqrt() / (n as f64).sqrt(), paths: n }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_err + 1e-12
    }
}

impl fmt::Display for McEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} se {} paths {}", fmt_sig(self.value), fmt_sig(self.std_err), self.paths)
    }
}

/// Probability that a Brownian bridge from `x` to `y` with total variance
/// `var` reaches `level`, which lies beyond both ends.
#[inline]
fn bridge_cross(level: f64, x: f64, y: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    (-2.0 * (level - x) * (level - y) / var).exp()
}

/// Bridge extremes from one pair of uniforms: the maximum and minimum of a
/// Brownian bridge from `x` to `y` with total variance `var`, each sampled
/// exactly from its marginal law. Reusing the uniforms for a shorter end
/// point keeps the result consistent with `bridge_cross`.
#[derive(Debug, Clone, Copy)]
struct BridgeDraw {
    u_up: f64,
    u_dn: f64,
    var: f64,
}

impl BridgeDraw {
    fn new<R: Rng>(rng: &mut R, var: f64) -> Self {
        // uniforms in (0, 1]
        BridgeDraw { u_up: 1.0 - rng.random::<f64>(), u_dn: 1.0 - rng.random::<f64>(), var }
    }

    fn segment(&self, x: f64, y: f64) -> Segment {
        let d2 = (y - x) * (y - x);
        let up = (d2 - 2.0 * self.var * self.u_up.ln()).sqrt();
        let dn = (d2 - 2.0 * self.var * self.u_dn.ln()).sqrt();
        Segment { from: x, to: y, high: 0.5 * (x + y + up), low: 0.5 * (x + y - dn) }
    }
}

/// `n` discretised Brownian paths from `s0` with `steps` increments of size `dt`.
pub fn brownian_paths(s0: f64, n: usize, dt: f64, steps: usize, seed: u64) -> Result<Vec<Path>> {
    if n == 0 || steps == 0 || !(dt > 0.0) {
        return Err(DntError::invalid("need n > 0, steps > 0 and dt > 0"));
    }
    let sd = dt.sqrt();
    let out = batched(n, seed, |rng, _, cnt| {
        (0..cnt)
            .map(|_| {
                let mut v = Vec::with_capacity(steps + 1);
                let mut x = s0;
                v.push(x);
                for _ in 0..steps {
                    let z: f64 = rng.sample(StandardNormal);
                    x += sd * z;
                    v.push(x);
                }
                Path::from_values(v, dt)
            })
            .collect::<Vec<_>>()
    });
    Ok(out.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmbeddingKind {
    Perkins,
    TiltedJacka,
    /// Perkins with probability `λ`, tilted Jacka otherwise.
    Mix(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Hard cap on steps per path.
    pub max_steps: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { paths: 100_000, dt: 1e-3, seed: 20_240_601, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    pub estimate: McEstimate,
    /// Empirical law of the stopped value; values off the atom grid appear as their own atoms.
    pub stopped_law: Vec<(f64, f64)>,
    pub tv_distance: f64,
    pub capped: usize,
    pub warnings: Vec<String>,
}

struct Immediate(f64);

impl StoppingRule for Immediate {
    fn reset(&mut self, _u: f64) -> Option<f64> {
        Some(self.0)
    }
    fn step(&mut self, seg: &Segment) -> Step {
        Step::Stop(seg.to)
    }
}

struct PathOutcome {
    survived: bool,
    terminal: f64,
    capped: bool,
}

/// Bisection depth for ambiguous steps; 2^-12 of a step is far below any level spacing.
const MAX_SPLIT: u32 = 12;

enum Advance {
    Continue(f64),
    Stop(f64),
}

/// Feeds the bridge from `x` to `y` to the rule, splitting it at a sampled
/// midpoint while the rule finds the reachable range ambiguous. Clears `alive` if a barrier is
/// touched before the rule stops.
#[allow(clippy::too_many_arguments)]
fn advance<R: Rng>(
    rule: &mut dyn StoppingRule,
    x: f64,
    y: f64,
    var: f64,
    depth: u32,
    barriers: &Barriers,
    alive: &mut bool,
    rng: &mut R,
) -> Advance {
    // The split decision may only look at the end points: deciding on sampled
    // extremes and then redrawing them would bias the bridge law.
    let pad = 5.0 * var.sqrt();
    let reach = Segment { from: x, to: y, high: x.max(y) + pad, low: x.min(y) - pad };
    let near_barrier = *alive && (reach.touches(barriers.lower) || reach.touches(barriers.upper));
    if depth < MAX_SPLIT && (rule.ambiguous(&reach) || (near_barrier && rule.may_stop(&reach))) {
        let z: f64 = rng.sample(StandardNormal);
        let mid = 0.5 * (x + y) + 0.5 * var.sqrt() * z;
        return match advance(rule, x, mid, 0.5 * var, depth + 1, barriers, alive, rng) {
            Advance::Continue(m) => advance(rule, m, y + (m - mid), 0.5 * var, depth + 1, barriers, alive, rng),
            stop => stop,
        };
    }
    let draw = BridgeDraw::new(rng, var);
    let (next, stop) = match rule.step(&draw.segment(x, y)) {
        Step::Continue(v) => (v, false),
        Step::Stop(v) => (v, true),
    };
    let mut seg = draw.segment(x, next);
    if next != y {
        // the rule stopped at or jumped to a level it was reaching for the first time
        if next >= x {
            seg.high = next;
        } else {
            seg.low = next;
        }
    }
    if *alive && (seg.touches(barriers.lower) || seg.touches(barriers.upper)) {
        *alive = false;
    }
    if stop {
        Advance::Stop(next)
    } else {
        Advance::Continue(next)
    }
}

fn run_rule<R: Rng>(
    rule: &mut dyn StoppingRule,
    s0: f64,
    barriers: &Barriers,
    dt: f64,
    max_steps: usize,
    rng: &mut R,
) -> PathOutcome {
    let u: f64 = rng.random();
    if let Some(v) = rule.reset(u) {
        return PathOutcome { survived: barriers.survives(s0, s0), terminal: v, capped: false };
    }
    let sd = dt.sqrt();
    let mut x = s0;
    let mut alive = barriers.survives(s0, s0);
    for _ in 0..max_steps {
        let z: f64 = rng.sample(StandardNormal);
        match advance(rule, x, x + sd * z, dt, 0, barriers, &mut alive, rng) {
            Advance::Continue(v) => x = v,
            Advance::Stop(v) => return PathOutcome { survived: alive, terminal: v, capped: false },
        }
    }
    PathOutcome { survived: alive, terminal: x, capped: true }
}

/// Estimates `P(b < min, max < b̄)` under the chosen embedding of `mu`,
/// with the empirical stopped law as a diagnostic.
pub fn realize_embedding(
    mu: &ImpliedMeasure,
    barriers: &Barriers,
    kind: EmbeddingKind,
    cfg: &McConfig,
) -> Result<EmbeddingReport> {
    barriers.check_spot(mu.spot)?;
    if cfg.paths == 0 || !(cfg.dt > 0.0) || cfg.max_steps == 0 {
        return Err(DntError::invalid("need paths > 0, dt > 0 and max_steps > 0"));
    }
    let lambda = match kind {
        EmbeddingKind::Perkins => 1.0,
        EmbeddingKind::TiltedJacka => 0.0,
        EmbeddingKind::Mix(l) if (0.0..=1.0).contains(&l) => l,
        EmbeddingKind::Mix(l) => return Err(DntError::invalid(format!("mixture weight {l} outside [0,1]"))),
    };
    let degenerate = mu.is_degenerate();
    let perkins = if degenerate || lambda == 0.0 { None } else { Some(PerkinsRule::new(mu)?) };
    let jacka = if lambda == 1.0 { None } else { Some(JackaRule::for_barriers(mu, barriers)?.0) };
    let xs: Vec<f64> = mu.locations().collect();
    let s0 = mu.spot;

    let batches = batched(cfg.paths, cfg.seed, |rng, _, cnt| {
        let mut p = perkins.clone();
        let mut j = jacka.clone();
        let mut imm = Immediate(s0);
        let mut sum = 0.0;
        let mut capped = 0usize;
        let mut counts = vec![0usize; xs.len()];
        let mut stray: Vec<f64> = Vec::new();
        for _ in 0..cnt {
            let pick: f64 = rng.random();
            let rule: &mut dyn StoppingRule = if degenerate {
                &mut imm
            } else if pick < lambda {
                p.as_mut().unwrap()
            } else {
                j.as_mut().unwrap()
            };
            let o = run_rule(rule, s0, barriers, cfg.dt, cfg.max_steps, rng);
            if o.survived {
                sum += 1.0;
            }
            capped += usize::from(o.capped);
            let i = xs.partition_point(|&x| x < o.terminal - 1e-9);
            if i < xs.len() && (xs[i] - o.terminal).abs() <= 1e-9 {
                counts[i] += 1;
            } else {
                stray.push(o.terminal);
            }
        }
        (sum, capped, counts, stray)
    });

    let mut sum = 0.0;
    let mut capped = 0;
    let mut counts = vec![0usize; xs.len()];
    let mut stray = Vec::new();
    for (s, c, cn, st) in batches {
        sum += s;
        capped += c;
        for (a, b) in counts.iter_mut().zip(cn) {
            *a += b;
        }
        stray.extend(st);
    }
    let n = cfg.paths as f64;
    let mut law: Vec<(f64, f64)> =
        xs.iter().zip(&counts).filter(|(_, &c)| c > 0).map(|(&x, &c)| (x, c as f64 / n)).collect();
    stray.sort_by(f64::total_cmp);
    for x in stray {
        match law.iter_mut().find(|a| a.0 == x) {
            Some(a) => a.1 += 1.0 / n,
            None => law.push((x, 1.0 / n)),
        }
    }
    law.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tv = tv_between(&law, &mu.atoms);
    let mut warnings = Vec::new();
    if capped as f64 > 1e-3 * n {
        warnings.push(format!("cap bias: {capped} of {} paths reached the step cap", cfg.paths));
    }
    Ok(EmbeddingReport {
        estimate: McEstimate::from_sum(sum, cfg.paths),
        stopped_law: law,
        tv_distance: tv,
        capped,
        warnings,
    })
}

/// Heston dynamics `dS = sqrt(v) S dW1`, `dv = kappa (theta - v) dt + xi sqrt(v) dW2`, `d<W1,W2> = rho dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub s0: f64,
    pub v0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
}

impl HestonParams {
    pub fn new(s0: f64, v0: f64, kappa: f64, theta: f64, xi: f64, rho: f64) -> Result<Self> {
        let p = HestonParams { s0, v0, kappa, theta, xi, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in
            [("s0", self.s0), ("v0", self.v0), ("kappa", self.kappa), ("theta", self.theta), ("xi", self.xi)]
        {
            if !(x.is_finite() && x > 0.0) {
                return Err(DntError::invalid(format!("Heston {name} must be positive, got {x}")));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(DntError::invalid(format!("Heston rho must lie in [-1, 1], got {}", self.rho)));
        }
        Ok(())
    }

    /// USD/JPY estimates: spot 2.006, initial volatility 2.5% (so
    /// `v0 = 0.025²`), long-run variance 0.02.
    pub fn usd_jpy() -> Self {
        HestonParams { s0: 2.006, v0: 0.025 * 0.025, kappa: 0.559, theta: 0.02, xi: 0.26, rho: 0.076 }
    }
}

/// Full-truncation Euler for the variance, log-Euler for the price.
#[derive(Debug, Clone, Copy)]
struct HestonStepper {
    p: HestonParams,
    dt: f64,
    sd: f64,
    rho_c: f64,
}

impl HestonStepper {
    fn new(p: HestonParams, dt: f64) -> Self {
        HestonStepper { p, dt, sd: dt.sqrt(), rho_c: (1.0 - p.rho * p.rho).max(0.0).sqrt() }
    }

    /// Advances `(ln S, v)`; also returns the variance `v⁺ dt` used for the log-price step.
    #[inline]
    fn step<R: Rng>(&self, ln_s: f64, v: f64, rng: &mut R) -> (f64, f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let vp = v.max(0.0);
        let sv = vp.sqrt();
        let ln_s2 = ln_s - 0.5 * vp * self.dt + sv * self.sd * z1;
        let w2 = self.p.rho * z1 + self.rho_c * z2;
        let v2 = v + self.p.kappa * (self.p.theta - vp) * self.dt + self.p.xi * sv * self.sd * w2;
        (ln_s2, v2, vp * self.dt)
    }
}

/// Probability that the log-price bridge over one step stays inside `(lo, hi)`
/// (log levels), treating the two sides separately.
#[inline]
fn survive_step(lo: f64, hi: f64, x: f64, y: f64, var: f64) -> f64 {
    if !(x > lo && x < hi && y > lo && y < hi) {
        return 0.0;
    }
    (1.0 - bridge_cross(hi, x, y, var)) * (1.0 - bridge_cross(lo, x, y, var))
}

fn steps_for(maturity: f64, dt: f64) -> Result<(usize, f64)> {
    if !(maturity > 0.0 && dt > 0.0) {
        return Err(DntError::invalid("maturity and dt must be positive"));
    }
    let n = (maturity / dt).round().max(1.0) as usize;
    Ok((n, maturity / n as f64))
}

/// A simulated Heston path with the per-step variance `v⁺ dt` used to move it.
#[derive(Debug, Clone, PartialEq)]
pub struct HestonPath {
    pub path: Path,
    pub step_var: Vec<f64>,
}

/// `n` Heston paths on a grid of roughly `dt` (adjusted to divide the maturity).
pub fn heston_paths(params: &HestonParams, n: usize, dt: f64, maturity: f64, seed: u64) -> Result<Vec<HestonPath>> {
    params.validate()?;
    let (steps, h) = steps_for(maturity, dt)?;
    let st = HestonStepper::new(*params, h);
    let out = batched(n, seed, |rng, _, cnt| {
        (0..cnt)
            .map(|_| {
                let mut vals = Vec::with_capacity(steps + 1);
                let mut vars = Vec::with_capacity(steps);
                let (mut x, mut v) = (params.s0.ln(), params.v0);
                vals.push(params.s0);
                for _ in 0..steps {
                    let (x2, v2, var) = st.step(x, v, rng);
                    x = x2;
                    v = v2;
                    vals.push(x.exp());
                    vars.push(var);
                }
                HestonPath { path: Path::from_values(vals, h), step_var: vars }
            })
            .collect::<Vec<_>>()
    });
    Ok(out.into_iter().flatten().collect())
}

/// Double no-touch price over stored paths. Each path contributes its
/// bridge survival probability given the grid values; the standard error is
/// the binomial one, which bounds the spread of these weights.
pub fn price_dnt_mc(paths: &[HestonPath], barriers: &Barriers) -> McEstimate {
    let (lo, hi) = (barriers.lower.ln(), barriers.upper.ln());
    let sum: f64 = paths
        .iter()
        .map(|hp| {
            let v = &hp.path.values;
            let mut w = survive_step(lo, hi, v[0].ln(), v[0].ln(), 0.0);
            for k in 0..hp.step_var.len() {
                if w == 0.0 {
                    break;
                }
                w *= survive_step(lo, hi, v[k].ln(), v[k + 1].ln(), hp.step_var[k]);
            }
            w
        })
        .sum();
    McEstimate::from_sum(sum, paths.len())
}

/// Double no-touch indicator on plain paths (grid monitoring only).
pub fn price_dnt_paths(paths: &[Path], barriers: &Barriers) -> McEstimate {
    let sum: f64 = paths.iter().map(|p| dnt_payoff(p, barriers)).sum();
    McEstimate::from_sum(sum, paths.len())
}

/// Streaming version of `price_dnt_mc(heston_paths(..))`: same draws, same
/// answer, no path storage.
pub fn heston_dnt_price(
    params: &HestonParams,
    barriers: &Barriers,
    maturity: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    params.validate()?;
    if n == 0 {
        return Err(DntError::invalid("need at least one path"));
    }
    let (steps, h) = steps_for(maturity, dt)?;
    let st = HestonStepper::new(*params, h);
    let (lo, hi) = (barriers.lower.ln(), barriers.upper.ln());
    let sums = batched(n, seed, |rng, _, cnt| {
        let mut acc = 0.0;
        for _ in 0..cnt {
            let (mut x, mut v) = (params.s0.ln(), params.v0);
            let mut w = survive_step(lo, hi, x, x, 0.0);
            for _ in 0..steps {
                let (x2, v2, var) = st.step(x, v, rng);
                if w > 0.0 {
                    w *= survive_step(lo, hi, x, x2, var);
                }
                x = x2;
                v = v2;
            }
            acc += w;
        }
        acc
    });
    Ok(McEstimate::from_sum(sums.iter().sum(), n))
}

/// `E[exp(i z ln(S_T / S_t))]` under Heston with current variance `v` and time to maturity `tau`.
fn heston_cf(p: &HestonParams, v: f64, tau: f64, z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let xi2 = p.xi * p.xi;
    let beta = p.kappa - p.rho * p.xi * i * z;
    let d = (beta * beta + xi2 * (i * z + z * z)).sqrt();
    let g = (beta - d) / (beta + d);
    let e = (-d * tau).exp();
    let dd = (beta - d) / xi2 * (1.0 - e) / (1.0 - g * e);
    let cc = p.kappa * p.theta / xi2 * ((beta - d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
    (cc + dd * v).exp()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Heston call price with zero rates, by Fourier inversion of the
/// log-price transform along `Im z = -1/2`.
pub fn heston_call(p: &HestonParams, s: f64, v: f64, strike: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return (s - strike).max(0.0);
    }
    if strike <= 0.0 {
        return s - strike;
    }
    let k = (s / strike).ln();
    let f = |u: f64| {
        let z = Complex64::new(u, -0.5);
        let val = Complex64::new(0.0, u * k).exp() * heston_cf(p, v.max(0.0), tau, z);
        val.re / (u * u + 0.25)
    };
    let mut total = simpson(&f, 0.0, 0.5, 64);
    let mut a = 0.5;
    while a < 1e7 {
        let part = simpson(&f, a, 2.0 * a, 64);
        total += part;
        a *= 2.0;
        if a >= 8.0 && part.abs() < 1e-15 * total.abs().max(1.0) {
            break;
        }
    }
    s - (s * strike).sqrt() / std::f64::consts::PI * total
}

/// Call quotes at `strikes` generated by the Heston model at time zero.
pub fn heston_quotes(p: &HestonParams, maturity: f64, strikes: &[f64]) -> Result<CallQuoteSet> {
    p.validate()?;
    let pairs: Vec<(f64, f64)> = strikes.iter().map(|&k| (k, heston_call(p, p.s0, p.v0, k, maturity))).collect();
    CallQuoteSet::from_pairs(p.s0, &pairs, Some(maturity))
}

/// Strikes `center + k step` for `k = -half..=half`.
pub fn strike_grid(center: f64, step: f64, half: usize) -> Vec<f64> {
    let h = half as i64;
    (-h..=h).map(|k| center + k as f64 * step).collect()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Black-Scholes call with zero rates.
pub fn bs_call(s: f64, k: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 || sigma <= 0.0 {
        return (s - k).max(0.0);
    }
    let n = std_normal();
    let sq = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + 0.5 * sq * sq) / sq;
    s * n.cdf(d1) - k * n.cdf(d1 - sq)
}

/// Straddle price, delta and vega under Black-Scholes with zero rates.
pub fn bs_straddle(s: f64, k: f64, sigma: f64, tau: f64) -> (f64, f64, f64) {
    if tau <= 0.0 || sigma <= 0.0 {
        return ((s - k).abs(), (s - k).signum(), 0.0);
    }
    let n = std_normal();
    let sq = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + 0.5 * sq * sq) / sq;
    let c = s * n.cdf(d1) - k * n.cdf(d1 - sq);
    (2.0 * c - s + k, 2.0 * n.cdf(d1) - 1.0, 2.0 * s * n.pdf(d1) * tau.sqrt())
}

/// Implied volatility of an at-the-money call price.
pub fn implied_vol_atm(price: f64, s: f64, tau: f64) -> f64 {
    let q = ((price / s + 1.0) / 2.0).clamp(0.5, 1.0 - 1e-16);
    2.0 / tau.sqrt() * std_normal().inverse_cdf(q)
}

/// Black-Scholes double no-touch value and delta (zero rates), by the
/// eigenfunction expansion of the killed log-price.
pub fn bs_dnt(s: f64, barriers: &Barriers, sigma: f64, tau: f64) -> (f64, f64) {
    if !(s > barriers.lower && s < barriers.upper) {
        return (0.0, 0.0);
    }
    if tau <= 0.0 || sigma <= 0.0 {
        return (1.0, 0.0);
    }
    let w = (barriers.upper / barriers.lower).ln();
    let x = (s / barriers.lower).ln();
    let c = -0.5;
    let s2 = sigma * sigma;
    let ecw = (c * w).exp();
    let (emx, pi) = ((-c * x).exp(), std::f64::consts::PI);
    let (mut val, mut dval) = (0.0, 0.0);
    for n in 1..20_000 {
        let a = n as f64 * pi / w;
        let decay = (-(c * c + a * a) * s2 * tau / 2.0).exp();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let coef = 2.0 / w * decay * a * (1.0 - sign * ecw) / (a * a + c * c);
        val += coef * (a * x).sin() * emx;
        dval += coef * emx * (a * (a * x).cos() - c * (a * x).sin());
        if decay < 1e-17 {
            break;
        }
    }
    (val.clamp(0.0, 1.0), dval / s)
}

/// At-the-money implied volatility as a function of (day, variance), from
/// Heston prices on a grid in `sqrt(v)`. ATM implied vol does not depend on the spot.
#[derive(Debug, Clone)]
pub struct AtmVolTable {
    taus: Vec<f64>,
    root_v: Vec<f64>,
    vols: Vec<Vec<f64>>,
}

impl AtmVolTable {
    pub fn new(p: &HestonParams, taus: &[f64], max_vol: f64, points: usize) -> Self {
        let root_v: Vec<f64> = (0..points).map(|k| max_vol * k as f64 / (points - 1) as f64).collect();
        let vols = taus
            .par_iter()
            .map(|&tau| {
                root_v
                    .iter()
                    .map(|&r| {
                        if tau <= 0.0 {
                            return r;
                        }
                        implied_vol_atm(heston_call(p, 1.0, r * r, 1.0, tau), 1.0, tau)
                    })
                    .collect()
            })
            .collect();
        AtmVolTable { taus: taus.to_vec(), root_v, vols }
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    /// Implied vol on day `day` for current variance `v` (clamped to the grid).
    pub fn vol(&self, day: usize, v: f64) -> f64 {
        let r = v.max(0.0).sqrt();
        let row = &self.vols[day];
        let n = self.root_v.len();
        let h = self.root_v[1] - self.root_v[0];
        let t = (r / h).min((n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        row[i] * (1.0 - w) + row[i + 1] * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub params: HestonParams,
    pub maturity: f64,
    pub barriers: Barriers,
    /// Positive strikes of the vanilla quotes available for the robust hedge.
    pub strikes: Vec<f64>,
    pub paths: usize,
    pub steps_per_day: usize,
    pub days_per_year: f64,
    /// Proportional cost on option premia.
    pub option_cost: f64,
    /// Proportional cost on the underlying.
    pub spot_cost: f64,
    /// The delta/vega hedge is abandoned once one rebalance would cost more than this.
    pub stop_cost: f64,
    /// Risk aversion of the exponential utility score.
    pub utility_alpha: f64,
    pub pricing_paths: usize,
    pub pricing_dt: f64,
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            params: HestonParams::usd_jpy(),
            maturity: 0.5,
            barriers: Barriers { lower: 1.95, upper: 2.05 },
            strikes: strike_grid(2.0, 0.0636, 5),
            paths: 10_000,
            steps_per_day: 4,
            days_per_year: 252.0,
            option_cost: 0.01,
            spot_cost: 0.0002,
            stop_cost: 0.02,
            utility_alpha: 1.0,
            pricing_paths: 200_000,
            pricing_dt: 1e-3,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub avg_cost: f64,
    /// `-E[exp(-alpha X)]`.
    pub utility: f64,
}

impl StrategySummary {
    fn of(errors: &[f64], costs: &[f64], alpha: f64) -> Self {
        let n = errors.len() as f64;
        StrategySummary {
            mean: errors.iter().sum::<f64>() / n,
            min: errors.iter().copied().fold(f64::INFINITY, f64::min),
            max: errors.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg_cost: costs.iter().sum::<f64>() / n,
            utility: -errors.iter().map(|x| (-alpha * x).exp()).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    /// Fair price received for the short double no-touch.
    pub price: McEstimate,
    pub robust_hedge: HedgePortfolio,
    pub robust_term: UpperTerm,
    /// Model price of the robust hedge.
    pub robust_premium: f64,
    /// Transaction cost paid when setting it up.
    pub robust_entry_cost: f64,
    /// `price - premium - entry cost`: no robust error may fall below this.
    pub robust_floor: f64,
    pub robust_errors: Vec<f64>,
    pub delta_vega_errors: Vec<f64>,
    pub robust_costs: Vec<f64>,
    pub delta_vega_costs: Vec<f64>,
    pub robust: StrategySummary,
    pub delta_vega: StrategySummary,
    /// Paths on which the delta/vega hedge was abandoned.
    pub abandoned: usize,
}

impl BacktestReport {
    /// Number of paths whose robust error is below the floor.
    pub fn floor_violations(&self) -> usize {
        self.robust_errors.iter().filter(|&&e| e < self.robust_floor - 1e-12).count()
    }

    /// Empirical CDFs of both error samples on `points` evenly spaced values.
    pub fn cdf(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let all = self.robust_errors.iter().chain(&self.delta_vega_errors);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let mut r = self.robust_errors.clone();
        let mut d = self.delta_vega_errors.clone();
        r.sort_by(f64::total_cmp);
        d.sort_by(f64::total_cmp);
        let frac = |v: &[f64], x: f64| v.partition_point(|&e| e <= x) as f64 / v.len() as f64;
        (0..points)
            .map(|k| {
                let x = if points == 1 { hi } else { lo + (hi - lo) * k as f64 / (points - 1) as f64 };
                (x, frac(&r, x), frac(&d, x))
            })
            .collect()
    }

    /// Tab-separated CDF table.
    pub fn cdf_table(&self, points: usize) -> String {
        let mut s = String::from("error\trobust\tdelta_vega\n");
        for (x, a, b) in self.cdf(points) {
            s.push_str(&format!("{}\t{}\t{}\n", fmt_sig(x), fmt_sig(a), fmt_sig(b)));
        }
        s
    }

    /// A small SVG chart of the two error CDFs.
    pub fn to_svg(&self) -> String {
        let pts = self.cdf(200);
        let (w, h, m) = (640.0, 400.0, 40.0);
        let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let sx = |x: f64| m + (x - lo) / span * (w - 2.0 * m);
        let sy = |y: f64| h - m - y * (h - 2.0 * m);
        let line = |sel: &dyn Fn(&(f64, f64, f64)) -> f64| {
            pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(sel(p)))).collect::<Vec<_>>().join(" ")
        };
        format!(
            concat!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
                "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
                "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
                "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
                "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{p1}\"/>\n",
                "<polyline fill=\"none\" stroke=\"firebrick\" stroke-width=\"2\" points=\"{p2}\"/>\n",
                "<text x=\"{m}\" y=\"20\" font-size=\"12\">hedging error CDF: robust (blue), delta/vega (red)</text>\n",
                "<text x=\"{m}\" y=\"{t}\" font-size=\"11\">{lo}</text>\n",
                "<text x=\"{r2}\" y=\"{t}\" font-size=\"11\">{hi}</text>\n",
                "</svg>\n"
            ),
            w = w,
            h = h,
            m = m,
            b = h - m,
            r = w - m,
            r2 = w - m - 60.0,
            t = h - m + 16.0,
            p1 = line(&|p| p.1),
            p2 = line(&|p| p.2),
            lo = fmt_sig(lo),
            hi = fmt_sig(hi),
        )
    }
}

impl fmt::Display for BacktestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "price {}", self.price)?;
        writeln!(f, "robust_term {}", self.robust_term)?;
        writeln!(f, "robust_premium {}", fmt_sig(self.robust_premium))?;
        writeln!(f, "robust_entry_cost {}", fmt_sig(self.robust_entry_cost))?;
        writeln!(f, "robust_floor {}", fmt_sig(self.robust_floor))?;
        writeln!(f, "robust_floor_violations {}", self.floor_violations())?;
        writeln!(f, "paths {}", self.robust_errors.len())?;
        writeln!(f, "delta_vega_abandoned {}", self.abandoned)?;
        for (name, s) in [("robust", &self.robust), ("delta_vega", &self.delta_vega)] {
            writeln!(
                f,
                "{name} mean {} min {} max {} avg_cost {} utility {}",
                fmt_sig(s.mean),
                fmt_sig(s.min),
                fmt_sig(s.max),
                fmt_sig(s.avg_cost),
                fmt_sig(s.utility)
            )?;
        }
        write!(f, "{}", self.robust_hedge)
    }
}

/// One simulated backtest path: fine grid values, daily variance and
/// first barrier hit times (grid crossing or sampled bridge crossing).
struct BacktestPath {
    path: Path,
    daily_v: Vec<f64>,
    hit_lower: Option<f64>,
    hit_upper: Option<f64>,
}

fn simulate_backtest_path<R: Rng>(cfg: &BacktestConfig, days: usize, h: f64, rng: &mut R) -> BacktestPath {
    let st = HestonStepper::new(cfg.params, h);
    let (lo, hi) = (cfg.barriers.lower.ln(), cfg.barriers.upper.ln());
    let n = days * cfg.steps_per_day;
    let mut vals = Vec::with_capacity(n + 1);
    let mut daily_v = Vec::with_capacity(days + 1);
    let (mut x, mut v) = (cfg.params.s0.ln(), cfg.params.v0);
    vals.push(cfg.params.s0);
    daily_v.push(v);
    let (mut hit_lower, mut hit_upper) = (None, None);
    for k in 0..n {
        let (x2, v2, var) = st.step(x, v, rng);
        let seg = BridgeDraw::new(rng, var).segment(x, x2);
        let t = (k + 1) as f64 * h;
        if hit_upper.is_none() && seg.touches(hi) {
            hit_upper = Some(t);
        }
        if hit_lower.is_none() && seg.touches(lo) {
            hit_lower = Some(t);
        }
        x = x2;
        v = v2;
        vals.push(x.exp());
        if (k + 1) % cfg.steps_per_day == 0 {
            daily_v.push(v);
        }
    }
    BacktestPath { path: Path::from_values(vals, h), daily_v, hit_lower, hit_upper }
}

struct DeltaVega {
    error: f64,
    cost: f64,
    abandoned: bool,
}

fn delta_vega_hedge(cfg: &BacktestConfig, bp: &BacktestPath, vols: &AtmVolTable, price: f64) -> DeltaVega {
    let bars = &cfg.barriers;
    let spd = cfg.steps_per_day;
    let days = bp.daily_v.len() - 1;
    let knock = match (bp.hit_lower, bp.hit_upper) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let s_at = |d: usize| bp.path.values[d * spd];
    let tau = |d: usize| vols.taus()[d];

    let targets = |d: usize, strike: f64| -> (f64, f64, f64) {
        let (s, t) = (s_at(d), tau(d));
        let sig = vols.vol(d, bp.daily_v[d]);
        let (_, dd) = bs_dnt(s, bars, sig, t);
        let hv = 1e-4;
        let vega = (bs_dnt(s, bars, sig + hv, t).0 - bs_dnt(s, bars, (sig - hv).max(1e-8), t).0) / (2.0 * hv);
        let (st, sd, sv) = bs_straddle(s, strike, sig, t);
        let nu = if sv > 0.0 { vega / sv } else { 0.0 };
        (nu, dd - nu * sd, st)
    };
    let mark = |d: usize, strike: f64| bs_straddle(s_at(d), strike, vols.vol(d, bp.daily_v[d]), tau(d)).0;

    let mut cash = price;
    let mut cost = 0.0;
    let mut strike = s_at(0);
    let (mut nu, mut delta, st0) = targets(0, strike);
    let c0 = cfg.option_cost * nu.abs() * st0 + cfg.spot_cost * delta.abs() * s_at(0);
    cash -= nu * st0 + delta * s_at(0) + c0;
    cost += c0;
    let mut active = true;
    let mut abandoned = false;

    for d in 1..days {
        let s = s_at(d);
        let knocked = knock.is_some_and(|t| t <= d as f64 / cfg.days_per_year + 1e-12);
        if knocked {
            if active {
                let old = mark(d, strike);
                let c = cfg.option_cost * nu.abs() * old + cfg.spot_cost * delta.abs() * s;
                cash += nu * old + delta * s - c;
                cost += c;
                nu = 0.0;
                delta = 0.0;
            }
            break;
        }
        if !active {
            continue;
        }
        let old = mark(d, strike);
        let (nu2, delta2, st2) = targets(d, s);
        let c = cfg.option_cost * (nu.abs() * old + nu2.abs() * st2) + cfg.spot_cost * (delta2 - delta).abs() * s;
        if c > cfg.stop_cost {
            active = false;
            abandoned = true;
            continue;
        }
        cash += nu * old - nu2 * st2 - (delta2 - delta) * s - c;
        cost += c;
        nu = nu2;
        delta = delta2;
        strike = s;
    }
    let s_t = bp.path.terminal();
    cash += nu * (s_t - strike).abs() + delta * s_t;
    let payoff = f64::from(u8::from(knock.is_none()));
    DeltaVega { error: cash - payoff, cost, abandoned }
}

/// Hedging backtest of a short double no-touch sold at its Heston price:
/// the cheapest call-only robust superhedge against a daily Black-Scholes
/// delta/vega hedge with at-the-money implied volatility.
///
/// The vega leg is an at-the-money straddle rolled to the new spot every
/// day; option positions are marked at Black-Scholes with the day's
/// at-the-money vol.
pub fn backtest(cfg: &BacktestConfig) -> Result<BacktestReport> {
    cfg.params.validate()?;
    cfg.barriers.check_spot(cfg.params.s0)?;
    if cfg.paths == 0 || cfg.steps_per_day == 0 || !(cfg.days_per_year > 0.0) {
        return Err(DntError::Config("paths, steps_per_day and days_per_year must be positive".into()));
    }
    let days = (cfg.maturity * cfg.days_per_year).round().max(1.0) as usize;
    let h = cfg.maturity / (days * cfg.steps_per_day) as f64;

    let price =
        heston_dnt_price(&cfg.params, &cfg.barriers, cfg.maturity, cfg.pricing_dt, cfg.pricing_paths, cfg.seed)?;
    let p = price.value;

    let quotes = heston_quotes(&cfg.params, cfg.maturity, &cfg.strikes)?;
    let ub = upper_bound_finite(&quotes, &cfg.barriers)?;
    let market = QuotedMarket::new(quotes.clone(), DigitalQuotes::default());
    let premium = ub.hedge.cost(&market)?;
    let mut entry = 0.0;
    for leg in &ub.hedge.options {
        entry += cfg.option_cost * leg.price(&market)?.abs();
    }
    let floor = p - premium - entry;

    let taus: Vec<f64> = (0..=days)
        .map(|d| {
            (cfg.maturity - d as f64 / cfg.days_per_year * (cfg.maturity * cfg.days_per_year / days as f64)).max(0.0)
        })
        .collect();
    let vols = AtmVolTable::new(&cfg.params, &taus, 0.8, 97);

    let hedge = &ub.hedge;
    let bars = cfg.barriers;
    let results = batched(cfg.paths, cfg.seed.wrapping_add(1), |rng, _, cnt| {
        (0..cnt)
            .map(|_| {
                let bp = simulate_backtest_path(cfg, days, h, rng);
                let payoff = f64::from(u8::from(bp.hit_lower.is_none() && bp.hit_upper.is_none()));
                let oracle = |l: f64| {
                    if same_strike(l, bars.lower) {
                        bp.hit_lower
                    } else if same_strike(l, bars.upper) {
                        bp.hit_upper
                    } else {
                        bp.path.first_hit(l)
                    }
                };
                let mut fwd_cost = 0.0;
                for fw in &hedge.forwards {
                    if oracle(fw.level).is_some() {
                        fwd_cost += cfg.spot_cost * fw.qty.abs() * fw.level;
                    }
                }
                let robust = p - premium - entry + hedge.payoff_with(bp.path.terminal(), &oracle) - payoff - fwd_cost;
                let dv = delta_vega_hedge(cfg, &bp, &vols, p);
                (robust, entry + fwd_cost, dv)
            })
            .collect::<Vec<_>>()
    });

    let mut robust_errors = Vec::with_capacity(cfg.paths);
    let mut robust_costs = Vec::with_capacity(cfg.paths);
    let mut dv_errors = Vec::with_capacity(cfg.paths);
    let mut dv_costs = Vec::with_capacity(cfg.paths);
    let mut abandoned = 0;
    for (r, rc, dv) in results.into_iter().flatten() {
        robust_errors.push(r);
        robust_costs.push(rc);
        dv_errors.push(dv.error);
        dv_costs.push(dv.cost);
        abandoned += usize::from(dv.abandoned);
    }
    let robust = StrategySummary::of(&robust_errors, &robust_costs, cfg.utility_alpha);
    let delta_vega = StrategySummary::of(&dv_errors, &dv_costs, cfg.utility_alpha);
    Ok(BacktestReport {
        price,
        robust_hedge: ub.hedge.clone(),
        robust_term: ub.term,
        robust_premium: premium,
        robust_entry_cost: entry,
        robust_floor: floor,
        robust_errors,
        delta_vega_errors: dv_errors,
        robust_costs,
        delta_vega_costs: dv_costs,
        robust,
        delta_vega,
        abandoned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bs_call_matches_parity_and_atm_inverse() {
        let c = bs_call(2.0, 2.0, 0.2, 0.5);
        let iv = implied_vol_atm(c, 2.0, 0.5);
        assert!((iv - 0.2).abs() < 1e-10);
    }

    #[test]
    fn heston_call_near_black_scholes_for_tiny_vol_of_vol() {
        let p = HestonParams::new(2.0, 0.04, 1.0, 0.04, 1e-4, 0.0).unwrap();
        for k in [1.6, 2.0, 2.4] {
            let h = heston_call(&p, 2.0, 0.04, k, 0.5);
            let b = bs_call(2.0, k, 0.2, 0.5);
            assert!((h - b).abs() < 1e-7, "k={k}: {h} vs {b}");
        }
    }

    #[test]
    fn bs_dnt_limits() {
        let bars = Barriers::new(1.9, 2.1).unwrap();
        assert!((bs_dnt(2.0, &bars, 0.1, 1e-6).0 - 1.0).abs() < 1e-9);
        assert!(bs_dnt(2.0, &bars, 0.5, 5.0).0 < 1e-6);
        assert_eq!(bs_dnt(1.9, &bars, 0.1, 1.0).0, 0.0);
    }

    #[test]
    fn estimate_window() {
        let e = McEstimate::from_sum(50.0, 100);
        assert!((e.std_err - 0.05).abs() < 1e-15);
        assert!(e.within(0.6, 2.0));
        assert!(!e.within(0.7, 3.0));
    }

    #[test]
    fn streaming_and_stored_heston_agree() {
        let p = HestonParams::usd_jpy();
        let bars = Barriers::new(1.95, 2.05).unwrap();
        let paths = heston_paths(&p, 3000, 1e-2, 0.5, 9).unwrap();
        let a = price_dnt_mc(&paths, &bars);
        let b = heston_dnt_price(&p, &bars, 0.5, 1e-2, 3000, 9).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }
}
