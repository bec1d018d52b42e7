//! Barycentre functions, Perkins curves, and the Perkins and tilted-Jacka
//! stopping rules for an atomic target law.
//!
//! Both rules are written as online state machines over path increments so
//! the same code drives a discrete [`Path`] (crossings by sign change) and
//! the Monte Carlo engine (crossings sampled from the Brownian bridge).

use crate::market::{Barriers, ImpliedMeasure};
use crate::{DntError, Result};

/// A discretely sampled continuous path, linearly interpolated between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Path {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(DntError::invalid("path needs matching, non-empty time and value grids"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DntError::invalid("path times must be strictly increasing"));
        }
        Ok(Path { times, values })
    }

    /// Equally spaced path starting at time 0.
    pub fn from_values(values: Vec<f64>, dt: f64) -> Self {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        Path { times, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index `j` of the first sample at or after the first touch of `level`.
    pub fn first_hit_index(&self, level: f64) -> Option<usize> {
        if self.values[0] == level {
            return Some(0);
        }
        (1..self.values.len()).find(|&j| touches(level, self.values[j - 1], self.values[j]))
    }

    /// Interpolated time of the first touch of `level`.
    pub fn first_hit(&self, level: f64) -> Option<f64> {
        let j = self.first_hit_index(level)?;
        if j == 0 {
            return Some(self.times[0]);
        }
        let (x, y) = (self.values[j - 1], self.values[j]);
        let w = if y == x { 0.0 } else { (level - x) / (y - x) };
        Some(self.times[j - 1] + w * (self.times[j] - self.times[j - 1]))
    }

    /// The path frozen after index `j`.
    pub fn stopped_at(&self, j: usize) -> Path {
        let mut values = self.values.clone();
        let v = values[j];
        for x in &mut values[j..] {
            *x = v;
        }
        Path { times: self.times.clone(), values }
    }
}

/// Whether the straight segment from `x` to `y` touches `level`.
#[inline]
pub fn touches(level: f64, x: f64, y: f64) -> bool {
    (x - level) * (y - level) <= 0.0
}

/// Upper and lower barycentres of an atomic law, as step functions on the atom grid.
#[derive(Debug, Clone)]
pub struct BarycentreFns {
    pub spot: f64,
    pub xs: Vec<f64>,
    /// `psi_at[k]`: mean of the atoms `>= xs[k]`.
    pub psi_at: Vec<f64>,
    /// `theta_at[k]`: mean of the atoms `<= xs[k]`.
    pub theta_at: Vec<f64>,
}

pub fn barycentres(mu: &ImpliedMeasure) -> BarycentreFns {
    let n = mu.atoms.len();
    let xs: Vec<f64> = mu.locations().collect();
    let mut psi_at = vec![0.0; n];
    let (mut m, mut s) = (0.0, 0.0);
    for k in (0..n).rev() {
        m += mu.atoms[k].1;
        s += mu.atoms[k].0 * mu.atoms[k].1;
        psi_at[k] = s / m;
    }
    let mut theta_at = vec![0.0; n];
    let (mut m, mut s) = (0.0, 0.0);
    for (t, &(x, p)) in theta_at.iter_mut().zip(&mu.atoms) {
        m += p;
        s += x * p;
        *t = s / m;
    }
    // the full-mass barycentres are the spot, not its float rendering
    psi_at[0] = mu.spot;
    theta_at[n - 1] = mu.spot;
    BarycentreFns { spot: mu.spot, xs, psi_at, theta_at }
}

impl BarycentreFns {
    /// Mean of the law on `[k, ∞)`; `+∞` when that set has no mass.
    pub fn psi(&self, k: f64) -> f64 {
        let i = self.xs.partition_point(|&x| x < k);
        self.psi_at.get(i).copied().unwrap_or(f64::INFINITY)
    }

    /// Mean of the law on `[0, k]`; `-∞` when that set has no mass.
    pub fn theta(&self, k: f64) -> f64 {
        let i = self.xs.partition_point(|&x| x <= k);
        if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.theta_at[i - 1]
        }
    }

    /// Left-continuous inverse `sup{w : theta(w) <= z}`.
    pub fn theta_inv(&self, z: f64) -> f64 {
        match self.theta_at.iter().rposition(|&t| t <= z) {
            None => self.xs[0],
            Some(k) if k + 1 < self.xs.len() => self.xs[k + 1],
            Some(_) => f64::INFINITY,
        }
    }

    /// Right-continuous inverse `inf{w : psi(w) >= z}`.
    pub fn psi_inv(&self, z: f64) -> f64 {
        match self.psi_at.iter().position(|&p| p >= z) {
            None => *self.xs.last().unwrap(),
            Some(0) => f64::NEG_INFINITY,
            Some(k) => self.xs[k - 1],
        }
    }
}

/// `(theta_inv(b), psi_inv(b̄))`.
pub fn inverse_barycentres(fns: &BarycentreFns, barriers: &Barriers) -> (f64, f64) {
    (fns.theta_inv(barriers.lower), fns.psi_inv(barriers.upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KCase {
    /// Stage one of the tilted-Jacka rule stays strictly inside the corridor.
    Inside,
    /// Stage one already reaches a barrier.
    Outside,
}

/// Deterministic choice of the tilted-Jacka strike: the midpoint of the
/// admissible interval, or the common value when the two inverses agree.
pub fn select_k(fns: &BarycentreFns, barriers: &Barriers) -> (f64, KCase) {
    let (ti, pi) = inverse_barycentres(fns, barriers);
    if ti > pi {
        (0.5 * (ti + pi), KCase::Outside)
    } else if ti == pi {
        (ti, KCase::Outside)
    } else {
        (0.5 * (ti + pi), KCase::Inside)
    }
}

/// Perkins boundaries: the stopping region is leaving
/// `(gamma_plus(running max), gamma_minus(running min))`.
#[derive(Debug, Clone)]
pub struct GammaCurves {
    pub spot: f64,
    /// Atoms strictly below the spot, nearest first.
    below: Vec<(f64, f64)>,
    /// Atoms strictly above the spot, nearest first.
    above: Vec<(f64, f64)>,
    /// Mass sitting exactly at the spot.
    pub spot_mass: f64,
}

pub fn gamma_curves(mu: &ImpliedMeasure) -> Result<GammaCurves> {
    if mu.is_degenerate() {
        return Err(DntError::Degenerate("Perkins curves need a non-degenerate law".into()));
    }
    let s0 = mu.spot;
    let below: Vec<(f64, f64)> = mu.atoms.iter().rev().filter(|a| a.0 < s0).copied().collect();
    let above: Vec<(f64, f64)> = mu.atoms.iter().filter(|a| a.0 > s0).copied().collect();
    let spot_mass = mu.atoms.iter().filter(|a| a.0 == s0).map(|a| a.1).sum();
    if below.is_empty() || above.is_empty() {
        return Err(DntError::Degenerate("law has no mass on one side of the spot".into()));
    }
    Ok(GammaCurves { spot: s0, below, above, spot_mass })
}

impl GammaCurves {
    /// Lower boundary for running maximum `x >= S0`; at `x = S0` the limit from above.
    pub fn gamma_plus(&self, x: f64) -> f64 {
        let c: f64 = self.above.iter().filter(|a| a.0 > x).map(|a| a.1 * (a.0 - x)).sum();
        // tail[j] = sum over below[j..] of p (x - u)
        let mut tail = 0.0;
        let mut best = self.below.len() - 1;
        for j in (1..self.below.len()).rev() {
            tail += self.below[j].1 * (x - self.below[j].0);
            if tail <= c {
                best = j - 1;
            } else {
                break;
            }
        }
        self.below[best].0
    }

    /// Upper boundary for running minimum `y <= S0`; at `y = S0` the limit from below.
    pub fn gamma_minus(&self, y: f64) -> f64 {
        let p: f64 = self.below.iter().filter(|a| a.0 < y).map(|a| a.1 * (y - a.0)).sum();
        let mut tail = 0.0;
        let mut best = self.above.len() - 1;
        for j in (1..self.above.len()).rev() {
            tail += self.above[j].1 * (self.above[j].0 - y);
            if tail <= p {
                best = j - 1;
            } else {
                break;
            }
        }
        self.above[best].0
    }
}

/// Outcome of feeding one increment to a stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// Not stopped; the path continues from this position (which may have
    /// been snapped onto a level where the rule changed stage).
    Continue(f64),
    /// Stopped at this value.
    Stop(f64),
}

/// One step of a continuous path: its end points and the extremes it
/// reached in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub high: f64,
    pub low: f64,
}

impl Segment {
    /// The straight line between two grid values.
    pub fn linear(from: f64, to: f64) -> Self {
        Segment { from, to, high: from.max(to), low: from.min(to) }
    }

    pub fn touches(&self, level: f64) -> bool {
        self.low <= level && level <= self.high
    }
}

pub trait StoppingRule {
    /// Resets the state for a new path starting at the spot. `u` is a
    /// uniform draw for rules that randomise at time zero. Returns the
    /// stopped value if the rule stops immediately.
    fn reset(&mut self, u: f64) -> Option<f64>;

    fn step(&mut self, seg: &Segment) -> Step;

    /// Whether a path confined to `[seg.low, seg.high]` could both move the
    /// rule's levels and reach a level where it stops, so that the order of
    /// events matters. Simulators split such steps before calling
    /// [`StoppingRule::step`].
    fn ambiguous(&self, _seg: &Segment) -> bool {
        false
    }

    /// Whether a path confined to `[seg.low, seg.high]` could stop.
    fn may_stop(&self, _seg: &Segment) -> bool {
        true
    }
}

/// Perkins rule with its running extremes.
#[derive(Debug, Clone)]
pub struct PerkinsRule {
    pub curves: GammaCurves,
    max: f64,
    min: f64,
    lower: f64,
    upper: f64,
}

impl PerkinsRule {
    pub fn new(mu: &ImpliedMeasure) -> Result<Self> {
        let curves = gamma_curves(mu)?;
        let s0 = curves.spot;
        let (lower, upper) = (curves.gamma_plus(s0), curves.gamma_minus(s0));
        Ok(PerkinsRule { curves, max: s0, min: s0, lower, upper })
    }

    /// Both boundaries only move outwards as the extremes grow.
    fn refresh(&mut self, high: f64, low: f64) {
        if high > self.max {
            self.max = high;
            self.lower = self.curves.gamma_plus(high);
        }
        if low < self.min {
            self.min = low;
            self.upper = self.curves.gamma_minus(low);
        }
    }
}

impl StoppingRule for PerkinsRule {
    fn reset(&mut self, u: f64) -> Option<f64> {
        let s0 = self.curves.spot;
        self.max = s0;
        self.min = s0;
        self.lower = self.curves.gamma_plus(s0);
        self.upper = self.curves.gamma_minus(s0);
        (u < self.curves.spot_mass).then_some(s0)
    }

    fn may_stop(&self, seg: &Segment) -> bool {
        seg.touches(self.upper) || seg.touches(self.lower)
    }

    fn ambiguous(&self, seg: &Segment) -> bool {
        let moves = (seg.high > self.max && self.curves.gamma_plus(seg.high) != self.lower)
            || (seg.low < self.min && self.curves.gamma_minus(seg.low) != self.upper);
        moves && (seg.touches(self.upper) || seg.touches(self.lower))
    }

    fn step(&mut self, seg: &Segment) -> Step {
        if seg.touches(self.upper) {
            return Step::Stop(self.upper);
        }
        if seg.touches(self.lower) {
            return Step::Stop(self.lower);
        }
        self.refresh(seg.high, seg.low);
        Step::Continue(seg.to)
    }
}

/// Azéma–Yor stage on one side: atoms sorted away from the start, with the
/// barycentre of the atoms at or beyond each one.
#[derive(Debug, Clone)]
struct AyBranch {
    xs: Vec<f64>,
    /// For the upper branch: mean of atoms `>= xs[k]`; lower: mean of atoms `<= xs[k]`.
    bary: Vec<f64>,
}

impl AyBranch {
    fn new(atoms: &[(f64, f64)], upper: bool) -> Self {
        let n = atoms.len();
        let xs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let mut bary = vec![0.0; n];
        let (mut m, mut s) = (0.0, 0.0);
        let order: Vec<usize> = if upper { (0..n).rev().collect() } else { (0..n).collect() };
        for k in order {
            m += atoms[k].1;
            s += atoms[k].0 * atoms[k].1;
            bary[k] = s / m;
        }
        AyBranch { xs, bary }
    }

    /// Upper branch: stop once the price falls to this level.
    fn up_level(&self, max: f64) -> f64 {
        let k = self.bary.iter().rposition(|&p| p <= max).unwrap_or(0);
        self.xs[k]
    }

    /// Lower branch: stop once the price rises to this level.
    fn down_level(&self, min: f64) -> f64 {
        let k = self.bary.iter().position(|&t| t >= min).unwrap_or(self.xs.len() - 1);
        self.xs[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum JackaStage {
    First,
    Up { max: f64, level: f64 },
    Down { min: f64, level: f64 },
}

/// Tilted-Jacka rule: run to the first exit from `(theta, psi)`, then an
/// Azéma–Yor embedding of the part of the law on the exit side.
///
/// The law is split by upper mass `m`: the top `m` of the mass (splitting
/// one atom if needed) is embedded above, the rest below, so atoms at the
/// split strike are handled exactly.
#[derive(Debug, Clone)]
pub struct JackaRule {
    pub spot: f64,
    pub upper_mass: f64,
    pub theta: f64,
    pub psi: f64,
    degenerate: bool,
    up: AyBranch,
    down: AyBranch,
    stage: JackaStage,
}

type Atoms = Vec<(f64, f64)>;

/// Splits the law into its top `m` of mass and the remainder.
fn split_by_mass(mu: &ImpliedMeasure, m: f64) -> (Atoms, Atoms) {
    let mut up = Vec::new();
    let mut down = Vec::new();
    let mut left = m;
    for &(x, p) in mu.atoms.iter().rev() {
        if left <= 0.0 {
            down.push((x, p));
        } else if p <= left {
            up.push((x, p));
            left -= p;
        } else {
            up.push((x, left));
            down.push((x, p - left));
            left = 0.0;
        }
    }
    up.reverse();
    down.reverse();
    up.retain(|a| a.1 > 0.0);
    down.retain(|a| a.1 > 0.0);
    (up, down)
}

fn mean_of(atoms: &[(f64, f64)]) -> f64 {
    let m: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.iter().map(|a| a.0 * a.1).sum::<f64>() / m
}

impl JackaRule {
    /// Rule with upper mass `m`, which must lie strictly in (0, 1) for a
    /// non-degenerate law.
    pub fn with_upper_mass(mu: &ImpliedMeasure, m: f64) -> Result<Self> {
        let s0 = mu.spot;
        if mu.is_degenerate() {
            return Ok(JackaRule {
                spot: s0,
                upper_mass: 0.0,
                theta: s0,
                psi: s0,
                degenerate: true,
                up: AyBranch { xs: vec![s0], bary: vec![s0] },
                down: AyBranch { xs: vec![s0], bary: vec![s0] },
                stage: JackaStage::First,
            });
        }
        if !(m > 0.0 && m < 1.0) {
            return Err(DntError::invalid(format!("upper mass must lie in (0,1), got {m}")));
        }
        let (up, down) = split_by_mass(mu, m);
        let psi = mean_of(&up);
        let theta = mean_of(&down);
        Ok(JackaRule {
            spot: s0,
            upper_mass: m,
            theta,
            psi,
            degenerate: false,
            up: AyBranch::new(&up, true),
            down: AyBranch::new(&down, false),
            stage: JackaStage::First,
        })
    }

    /// Rule for strike `k`: upper mass `mu((k,∞)) + split * mu({k})`.
    pub fn with_strike(mu: &ImpliedMeasure, k: f64, split: f64) -> Result<Self> {
        let m = mu.mass_gt(k) + split.clamp(0.0, 1.0) * (mu.mass_ge(k) - mu.mass_gt(k));
        Self::with_upper_mass(mu, m)
    }

    /// The upper mass at which `psi` equals `level` (0 if the top atom is already below it).
    fn mass_for_psi(mu: &ImpliedMeasure, level: f64) -> f64 {
        let (mut m0, mut u0) = (0.0, 0.0);
        for &(x, p) in mu.atoms.iter().rev() {
            // on this atom's segment psi(m) = (u0 + (m - m0) x) / m, decreasing in m
            let end = (u0 + p * x) / (m0 + p);
            if end <= level {
                if m0 == 0.0 {
                    return 0.0;
                }
                return ((u0 - m0 * x) / (level - x)).clamp(m0, m0 + p);
            }
            m0 += p;
            u0 += x * p;
        }
        1.0
    }

    /// The upper mass at which `theta` equals `level` (1 if the bottom atom is above it).
    fn mass_for_theta(mu: &ImpliedMeasure, level: f64) -> f64 {
        let s0 = mu.spot;
        let (mut m0, mut u0) = (0.0, 0.0);
        for &(x, p) in mu.atoms.iter().rev() {
            // lower part has mass 1 - m and first moment s0 - u0 - (m - m0) x
            let rest = 1.0 - m0 - p;
            let end = if rest > 1e-15 { (s0 - u0 - p * x) / rest } else { x };
            if end <= level {
                if x == level {
                    return m0;
                }
                return ((level - s0 + u0 - m0 * x) / (level - x)).clamp(m0, m0 + p);
            }
            m0 += p;
            u0 += x * p;
        }
        1.0
    }

    /// Admissible upper masses for the barriers: `(m_upper, m_lower)` with
    /// `psi < b̄` iff `m > m_upper` and `theta > b` iff `m < m_lower`.
    pub fn mass_window(mu: &ImpliedMeasure, barriers: &Barriers) -> (f64, f64) {
        (Self::mass_for_psi(mu, barriers.upper), Self::mass_for_theta(mu, barriers.lower))
    }

    /// Rule attaining the lower price bound for these barriers. Uses the
    /// strike from [`select_k`] when its mass range is admissible.
    pub fn for_barriers(mu: &ImpliedMeasure, barriers: &Barriers) -> Result<(Self, KCase)> {
        if mu.is_degenerate() {
            return Ok((Self::with_upper_mass(mu, 0.0)?, KCase::Inside));
        }
        let (m_hi, m_lo) = Self::mass_window(mu, barriers);
        let (window, case) = if m_hi < m_lo { ((m_hi, m_lo), KCase::Inside) } else { ((m_lo, m_hi), KCase::Outside) };
        let (k, _) = select_k(&barycentres(mu), barriers);
        let k_range = (mu.mass_gt(k), mu.mass_ge(k));
        let lo = k_range.0.max(window.0);
        let hi = k_range.1.min(window.1);
        let strict = case == KCase::Inside;
        let fits = if strict { lo < hi || (lo == hi && lo > window.0 && hi < window.1) } else { lo <= hi };
        let m = if fits { 0.5 * (lo + hi) } else { 0.5 * (window.0 + window.1) };
        let m = m.clamp(1e-12, 1.0 - 1e-12);
        Ok((Self::with_upper_mass(mu, m)?, case))
    }
}

impl StoppingRule for JackaRule {
    fn reset(&mut self, _u: f64) -> Option<f64> {
        self.stage = JackaStage::First;
        if self.degenerate {
            return Some(self.spot);
        }
        None
    }

    fn may_stop(&self, seg: &Segment) -> bool {
        match self.stage {
            JackaStage::First => seg.high >= self.psi || seg.low <= self.theta,
            JackaStage::Up { max, level } => {
                seg.low <= self.up.up_level(max.max(seg.high)).max(level) || seg.high >= *self.up.xs.last().unwrap()
            }
            JackaStage::Down { min, level } => {
                seg.high >= self.down.down_level(min.min(seg.low)).min(level) || seg.low <= self.down.xs[0]
            }
        }
    }

    fn ambiguous(&self, seg: &Segment) -> bool {
        match self.stage {
            JackaStage::First => seg.low <= self.theta && seg.high >= self.psi,
            JackaStage::Up { max, level } => {
                let next = self.up.up_level(max.max(seg.high));
                next != level && seg.low <= next
            }
            JackaStage::Down { min, level } => {
                let next = self.down.down_level(min.min(seg.low));
                next != level && seg.high >= next
            }
        }
    }

    fn step(&mut self, seg: &Segment) -> Step {
        let y = seg.to;
        match self.stage {
            JackaStage::First => {
                if seg.touches(self.psi) || y >= self.psi {
                    let level = self.up.up_level(self.psi);
                    self.stage = JackaStage::Up { max: self.psi, level };
                    if level >= self.psi {
                        return Step::Stop(level);
                    }
                    return Step::Continue(self.psi);
                }
                if seg.touches(self.theta) || y <= self.theta {
                    let level = self.down.down_level(self.theta);
                    self.stage = JackaStage::Down { min: self.theta, level };
                    if level <= self.theta {
                        return Step::Stop(level);
                    }
                    return Step::Continue(self.theta);
                }
                Step::Continue(y)
            }
            JackaStage::Up { max, level } => {
                if seg.touches(level) {
                    return Step::Stop(level);
                }
                let top = *self.up.xs.last().unwrap();
                if seg.touches(top) {
                    return Step::Stop(top);
                }
                let max = max.max(seg.high);
                let level = self.up.up_level(max);
                self.stage = JackaStage::Up { max, level };
                if y <= level {
                    return Step::Stop(level);
                }
                Step::Continue(y)
            }
            JackaStage::Down { min, level } => {
                if seg.touches(level) {
                    return Step::Stop(level);
                }
                let bottom = self.down.xs[0];
                if seg.touches(bottom) {
                    return Step::Stop(bottom);
                }
                let min = min.min(seg.low);
                let level = self.down.down_level(min);
                self.stage = JackaStage::Down { min, level };
                if y >= level {
                    return Step::Stop(level);
                }
                Step::Continue(y)
            }
        }
    }
}

/// Runs a rule along a discrete path; returns the index at which it stops.
pub fn run_on_path(rule: &mut dyn StoppingRule, path: &Path) -> Option<usize> {
    if rule.reset(1.0).is_some() {
        return Some(0);
    }
    for j in 1..path.len() {
        if let Step::Stop(_) = rule.step(&Segment::linear(path.values[j - 1], path.values[j])) {
            return Some(j);
        }
    }
    None
}

/// Perkins stopping index on a path (the spot atom, if any, is never taken
/// at time zero here).
pub fn perkins_stop(path: &Path, mu: &ImpliedMeasure) -> Result<Option<usize>> {
    let mut rule = PerkinsRule::new(mu)?;
    Ok(run_on_path(&mut rule, path))
}

/// Tilted-Jacka stopping index on a path.
pub fn tilted_jacka_stop(path: &Path, rule: &JackaRule) -> Option<usize> {
    let mut r = rule.clone();
    run_on_path(&mut r, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> ImpliedMeasure {
        ImpliedMeasure::from_atoms(vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)]).unwrap()
    }

    fn four() -> ImpliedMeasure {
        ImpliedMeasure::from_atoms(vec![(1.0, 0.1), (1.8, 0.4), (2.2, 0.4), (3.0, 0.1)]).unwrap()
    }

    #[test]
    fn barycentre_steps() {
        let f = barycentres(&three());
        assert!((f.psi(1.5) - 7.0 / 3.0).abs() < 1e-15);
        assert!((f.theta(2.5) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.psi(0.5), 2.0);
        assert_eq!(f.psi(3.5), f64::INFINITY);
        assert_eq!(f.theta(0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn inverses_on_four_atoms() {
        let f = barycentres(&four());
        let b = Barriers::new(1.2, 2.8).unwrap();
        assert_eq!(inverse_barycentres(&f, &b), (1.8, 2.2));
        assert_eq!(select_k(&f, &b), (2.0, KCase::Inside));
    }

    #[test]
    fn gamma_minus_two_point() {
        let mu = ImpliedMeasure::from_atoms(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let g = gamma_curves(&mu).unwrap();
        for y in [1.01, 1.5, 1.99, 2.0] {
            assert_eq!(g.gamma_minus(y), 3.0);
        }
        for x in [2.0, 2.5, 2.99] {
            assert_eq!(g.gamma_plus(x), 1.0);
        }
    }

    #[test]
    fn jacka_mass_window_four_atoms() {
        let b = Barriers::new(1.2, 2.8).unwrap();
        let (hi, lo) = JackaRule::mass_window(&four(), &b);
        assert!((hi - 0.08 / 0.6).abs() < 1e-14);
        assert!((lo - 0.52 / 0.6).abs() < 1e-14);
        let (r, case) = JackaRule::for_barriers(&four(), &b).unwrap();
        assert_eq!(case, KCase::Inside);
        assert!((r.upper_mass - 0.5).abs() < 1e-14);
        assert!((r.theta - 1.64).abs() < 1e-14);
        assert!((r.psi - 2.36).abs() < 1e-14);
    }

    #[test]
    fn jacka_outside_on_three_atoms() {
        let b = Barriers::new(1.5, 2.5).unwrap();
        let (r, case) = JackaRule::for_barriers(&three(), &b).unwrap();
        assert_eq!(case, KCase::Outside);
        assert!((r.theta - 1.5).abs() < 1e-14 && (r.psi - 2.5).abs() < 1e-14);
    }

    #[test]
    fn first_hit_interpolates() {
        let p = Path::from_values(vec![2.0, 1.0, 2.0], 1.0);
        assert_eq!(p.first_hit(1.5), Some(0.5));
        assert_eq!(p.first_hit(0.5), None);
        assert_eq!(p.first_hit(2.0), Some(0.0));
    }
}
