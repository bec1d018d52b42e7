//! Arbitrage classification of call quotes, call curves and call-plus-digital
//! quote sets, with explicit witness portfolios.

use std::fmt;

use crate::hedging::{HedgePortfolio, OptionKind};
use crate::market::{Barriers, CallCurve, CallQuoteSet, DigitalQuotes};
use crate::{fmt_sig, price_tol, DntError, Result, EQUALITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    None,
    ModelFree,
    Weak,
    /// Weak free lunch with vanishing risk.
    Wflvr,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::None => "NONE",
            Verdict::ModelFree => "MODEL_FREE",
            Verdict::Weak => "WEAK",
            Verdict::Wflvr => "WFLVR",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    None,
    /// A single portfolio with non-negative payoff and negative cost.
    Portfolio(HedgePortfolio),
    /// A decision list: for each condition on the model, the portfolio that
    /// is an arbitrage under models satisfying it.
    Conditional(Vec<(String, HedgePortfolio)>),
    /// A portfolio sequence described symbolically, with its limiting price.
    Sequence {
        description: String,
        limit_price: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageReport {
    pub verdict: Verdict,
    /// Short name of the violated inequality.
    pub label: String,
    pub explanation: String,
    pub witness: Witness,
}

impl ArbitrageReport {
    pub fn none() -> Self {
        ArbitrageReport {
            verdict: Verdict::None,
            label: "none".into(),
            explanation: "prices are consistent with a market model".into(),
            witness: Witness::None,
        }
    }

    fn model_free(label: &str, explanation: String, witness: HedgePortfolio) -> Self {
        ArbitrageReport {
            verdict: Verdict::ModelFree,
            label: label.into(),
            explanation,
            witness: Witness::Portfolio(witness),
        }
    }

    /// The single witness portfolio, if there is exactly one.
    pub fn portfolio(&self) -> Option<&HedgePortfolio> {
        match &self.witness {
            Witness::Portfolio(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for ArbitrageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", self.verdict)?;
        writeln!(f, "label: {}", self.label)?;
        writeln!(f, "explanation: {}", self.explanation)?;
        match &self.witness {
            Witness::None => writeln!(f, "witness: none"),
            Witness::Portfolio(p) => write!(f, "witness:\n{p}"),
            Witness::Conditional(cases) => {
                writeln!(f, "witness: conditional")?;
                for (cond, p) in cases {
                    writeln!(f, "if {cond}:")?;
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            Witness::Sequence { description, limit_price } => {
                writeln!(f, "witness: sequence {description}")?;
                writeln!(f, "limit_price: {}", fmt_sig(*limit_price))
            }
        }
    }
}

/// Where a model-free check failed; used to relabel violations around barriers.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Violation {
    Negative,
    Rising(usize),
    SlopeAtZero,
    Butterfly(usize),
    Tail,
}

/// Model-free checks on knots `x` with values `c`. With `tail = Some(s)` the
/// values continue linearly with slope `s` after the last knot.
fn model_free_scan(x: &[f64], c: &[f64], tail: Option<f64>, spot: f64) -> Option<(Violation, ArbitrageReport)> {
    let tol = price_tol(spot);
    let n = x.len();

    if let Some(i) = (0..n).find(|&i| c[i] < -tol) {
        let p = HedgePortfolio::new("long call").call(x[i], 1.0);
        return Some((
            Violation::Negative,
            ArbitrageReport::model_free(
                "non-negativity",
                format!("call at strike {} has negative price {}", fmt_sig(x[i]), fmt_sig(c[i])),
                p,
            ),
        ));
    }
    if let Some(t) = tail {
        if t < -1e-12 {
            let k = x[n - 1] + c[n - 1] / (-t) + 1.0;
            let p = HedgePortfolio::new("long call").call(k, 1.0);
            return Some((
                Violation::Tail,
                ArbitrageReport::model_free(
                    "non-negativity",
                    format!(
                        "tail slope {} drives the call price negative; strike {} prices at {}",
                        fmt_sig(t),
                        fmt_sig(k),
                        fmt_sig(c[n - 1] + t * (k - x[n - 1]))
                    ),
                    p,
                ),
            ));
        }
        if t > 1e-12 {
            let k = x[n - 1];
            let p = HedgePortfolio::new("call spread").call(k, 1.0).call(k + 1.0, -1.0);
            return Some((
                Violation::Tail,
                ArbitrageReport::model_free(
                    "monotonicity",
                    format!("call prices increase beyond strike {} (tail slope {})", fmt_sig(k), fmt_sig(t)),
                    p,
                ),
            ));
        }
    }
    if n >= 2 && x[1] - spot + c[1] < -tol {
        let p = HedgePortfolio::new("synthetic put").cash(x[1]).call(0.0, -1.0).call(x[1], 1.0);
        return Some((
            Violation::SlopeAtZero,
            ArbitrageReport::model_free(
                "slope-at-zero",
                format!(
                    "call price falls faster than the strike near 0: put at {} would cost {}",
                    fmt_sig(x[1]),
                    fmt_sig(x[1] - spot + c[1])
                ),
                p,
            ),
        ));
    }
    if let Some(i) = (0..n - 1).find(|&i| c[i + 1] > c[i] + tol) {
        let p = HedgePortfolio::new("call spread").call(x[i], 1.0).call(x[i + 1], -1.0);
        return Some((
            Violation::Rising(i),
            ArbitrageReport::model_free(
                "monotonicity",
                format!(
                    "C({}) = {} exceeds C({}) = {}",
                    fmt_sig(x[i + 1]),
                    fmt_sig(c[i + 1]),
                    fmt_sig(x[i]),
                    fmt_sig(c[i])
                ),
                p,
            ),
        ));
    }
    let mut ext_x = x.to_vec();
    let mut ext_c = c.to_vec();
    if let Some(t) = tail {
        ext_x.push(x[n - 1] + 1.0);
        ext_c.push(c[n - 1] + t);
    }
    for i in 1..ext_x.len().saturating_sub(1) {
        let lam = (ext_x[i + 1] - ext_x[i]) / (ext_x[i + 1] - ext_x[i - 1]);
        let cost = lam * ext_c[i - 1] + (1.0 - lam) * ext_c[i + 1] - ext_c[i];
        if cost < -tol {
            let p = HedgePortfolio::new("butterfly")
                .call(ext_x[i - 1], lam)
                .call(ext_x[i], -1.0)
                .call(ext_x[i + 1], 1.0 - lam);
            return Some((
                Violation::Butterfly(i),
                ArbitrageReport::model_free(
                    "convexity",
                    format!(
                        "butterfly ({}, {}, {}) has negative price {}",
                        fmt_sig(ext_x[i - 1]),
                        fmt_sig(ext_x[i]),
                        fmt_sig(ext_x[i + 1]),
                        fmt_sig(cost)
                    ),
                    p,
                ),
            ));
        }
    }
    None
}

/// Classifies a full call curve: model-free arbitrage if it is not
/// non-negative, non-increasing and convex with `C'(0+) >= -1`; WFLVR if it
/// is but does not vanish at infinity; otherwise none.
pub fn check_curve(curve: &CallCurve) -> ArbitrageReport {
    if let Some((_, r)) = model_free_scan(&curve.knots, &curve.values, Some(curve.right_tail), curve.spot) {
        return r;
    }
    let last = *curve.values.last().unwrap();
    if last > price_tol(curve.spot) {
        return ArbitrageReport {
            verdict: Verdict::Wflvr,
            label: "vanishing-at-infinity".into(),
            explanation: format!(
                "call prices stay at {} for large strikes; no model-free arbitrage but no market model",
                fmt_sig(last)
            ),
            witness: Witness::Sequence { description: "-(S_T - n)^+".into(), limit_price: -last },
        };
    }
    ArbitrageReport::none()
}

/// First `i` with `C(K_i) = C(K_{i+1}) > 0`.
fn flat_positive_pair(q: &CallQuoteSet) -> Option<usize> {
    let tol = price_tol(q.spot);
    (0..q.len() - 1).find(|&i| (q.prices[i] - q.prices[i + 1]).abs() <= tol && q.prices[i + 1] > tol)
}

/// Classifies a finite quote set.
pub fn check_quotes(q: &CallQuoteSet) -> ArbitrageReport {
    check_quotes_detailed(q).1
}

fn check_quotes_detailed(q: &CallQuoteSet) -> (Option<Violation>, ArbitrageReport) {
    if let Some((v, r)) = model_free_scan(&q.strikes, &q.prices, None, q.spot) {
        return (Some(v), r);
    }
    if let Some(i) = flat_positive_pair(q) {
        let (k1, k2, a) = (q.strikes[i], q.strikes[i + 1], q.prices[i]);
        let cases = vec![
            (format!("P(S_T > {}) > 0", fmt_sig(k1)), HedgePortfolio::new("call spread").call(k1, 1.0).call(k2, -1.0)),
            (format!("P(S_T > {}) = 0", fmt_sig(k1)), HedgePortfolio::new("cash minus call").cash(a).call(k1, -1.0)),
        ];
        return (
            None,
            ArbitrageReport {
                verdict: Verdict::Weak,
                label: "flat-segment".into(),
                explanation: format!(
                    "C({}) = C({}) = {} > 0 cannot be extended to a curve vanishing at infinity",
                    fmt_sig(k1),
                    fmt_sig(k2),
                    fmt_sig(a)
                ),
                witness: Witness::Conditional(cases),
            },
        );
    }
    (None, ArbitrageReport::none())
}

/// Location where the secant through `(K_{i-1}, K_i)` meets the secant
/// through `(K_{i+1}, K_{i+2})`, for `i` the strike just below a level.
pub fn secant_crossover(q: &CallQuoteSet, i: usize) -> Option<f64> {
    if i < 1 || i + 2 >= q.len() {
        return None;
    }
    let (k, c) = (&q.strikes, &q.prices);
    let sl = (c[i] - c[i - 1]) / (k[i] - k[i - 1]);
    let sr = (c[i + 2] - c[i + 1]) / (k[i + 2] - k[i + 1]);
    if (sr - sl).abs() < 1e-15 {
        return None;
    }
    // c_i + sl (x - k_i) = c_{i+1} + sr (x - k_{i+1})
    Some((c[i + 1] - c[i] + sl * k[i] - sr * k[i + 1]) / (sl - sr))
}

/// Positions of the barriers inside a quote set that contains both of them.
pub(crate) struct BarrierLayout {
    pub l: usize,
    pub m: usize,
}

pub(crate) fn barrier_layout(q: &CallQuoteSet, barriers: &Barriers) -> Result<BarrierLayout> {
    let l = q
        .index_of(barriers.lower)
        .ok_or_else(|| DntError::Layout(format!("no call quoted at the lower barrier {}", barriers.lower)))?;
    let m = q
        .index_of(barriers.upper)
        .ok_or_else(|| DntError::Layout(format!("no call quoted at the upper barrier {}", barriers.upper)))?;
    if m < l + 2 {
        return Err(DntError::Layout("at least one strike must lie strictly between the barriers".into()));
    }
    Ok(BarrierLayout { l, m })
}

/// Range `[R, L]` of digital prices at quoted index `l` consistent with the
/// neighbouring call spreads. `R` is 0 when `l` is the last strike.
pub(crate) fn digital_range(q: &CallQuoteSet, l: usize) -> (f64, f64) {
    let (k, c) = (&q.strikes, &q.prices);
    let left = (c[l - 1] - c[l]) / (k[l] - k[l - 1]);
    let right = if l + 1 < q.len() { (c[l] - c[l + 1]) / (k[l + 1] - k[l]) } else { 0.0 };
    (right, left)
}

fn relabel(v: Violation, lay: &BarrierLayout, r: ArbitrageReport) -> ArbitrageReport {
    let label = match v {
        Violation::Butterfly(i) if i == lay.l => "call-upper-bound-lower-barrier",
        Violation::Butterfly(i) if i + 1 == lay.l => "call-lower-bound-left-lower-barrier",
        Violation::Butterfly(i) if i == lay.l + 1 => "call-lower-bound-right-lower-barrier",
        Violation::Butterfly(i) if i == lay.m => "call-upper-bound-upper-barrier",
        Violation::Butterfly(i) if i + 1 == lay.m => "call-lower-bound-left-upper-barrier",
        Violation::Butterfly(i) if i == lay.m + 1 => "call-lower-bound-right-upper-barrier",
        _ => return r,
    };
    ArbitrageReport { label: label.into(), ..r }
}

/// Classifies calls plus digitals at the barriers. The quote set must
/// contain calls struck at both barriers with at least one strike strictly
/// between them; a digital quote, when present, must sit at its barrier.
pub fn check_digitals(q: &CallQuoteSet, d: &DigitalQuotes, barriers: &Barriers) -> Result<ArbitrageReport> {
    barriers.check_spot(q.spot)?;
    let lay = barrier_layout(q, barriers)?;
    if let Some((k, _)) = d.lower {
        if !crate::market::same_strike(k, barriers.lower) {
            return Err(DntError::Layout(format!("lower digital struck at {k}, not at the barrier")));
        }
    }
    if let Some((k, _)) = d.upper {
        if !crate::market::same_strike(k, barriers.upper) {
            return Err(DntError::Layout(format!("upper digital struck at {k}, not at the barrier")));
        }
    }
    let (v, r) = check_quotes_detailed(q);
    if r.verdict != Verdict::None {
        return Ok(match v {
            Some(v) => relabel(v, &lay, r),
            None => r,
        });
    }

    let (k, c) = (&q.strikes, &q.prices);
    let tol = price_tol(q.spot);
    let (b, bu) = (barriers.lower, barriers.upper);
    let (l, m) = (lay.l, lay.m);

    if let Some((_, delta)) = d.lower {
        let (r_lo, l_lo) = digital_range(q, l);
        let dtol = tol / (k[l] - k[l - 1]).min(k[l + 1] - k[l]);
        if delta > l_lo + dtol {
            let w = b - k[l - 1];
            let p = HedgePortfolio::new("short digital, long call spread")
                .leg(OptionKind::DigitalGt, b, -1.0)
                .call(k[l - 1], 1.0 / w)
                .call(b, -1.0 / w);
            return Ok(ArbitrageReport::model_free(
                "digital-upper-lower-barrier",
                format!("digital price {} above the call spread bound {}", fmt_sig(delta), fmt_sig(l_lo)),
                p,
            ));
        }
        if delta < r_lo - dtol {
            let w = k[l + 1] - b;
            let p = HedgePortfolio::new("long digital, short call spread")
                .leg(OptionKind::DigitalGt, b, 1.0)
                .call(b, -1.0 / w)
                .call(k[l + 1], 1.0 / w);
            return Ok(ArbitrageReport::model_free(
                "digital-lower-lower-barrier",
                format!("digital price {} below the call spread bound {}", fmt_sig(delta), fmt_sig(r_lo)),
                p,
            ));
        }
    }
    if let Some((_, dd)) = d.upper {
        let (r_hi, l_hi) = digital_range(q, m);
        let gap = if m + 1 < q.len() { (k[m] - k[m - 1]).min(k[m + 1] - k[m]) } else { k[m] - k[m - 1] };
        let dtol = tol / gap;
        if dd > l_hi + dtol {
            let w = bu - k[m - 1];
            let p = HedgePortfolio::new("short digital, long call spread")
                .leg(OptionKind::DigitalGe, bu, -1.0)
                .call(k[m - 1], 1.0 / w)
                .call(bu, -1.0 / w);
            return Ok(ArbitrageReport::model_free(
                "digital-upper-upper-barrier",
                format!("digital price {} above the call spread bound {}", fmt_sig(dd), fmt_sig(l_hi)),
                p,
            ));
        }
        if dd < r_hi - dtol {
            let w = k[m + 1] - bu;
            let p = HedgePortfolio::new("long digital, short call spread")
                .leg(OptionKind::DigitalGe, bu, 1.0)
                .call(bu, -1.0 / w)
                .call(k[m + 1], 1.0 / w);
            return Ok(ArbitrageReport::model_free(
                "digital-lower-upper-barrier",
                format!("digital price {} below the call spread bound {}", fmt_sig(dd), fmt_sig(r_hi)),
                p,
            ));
        }
    }

    let eq = EQUALITY_TOL * q.spot;
    if let Some((_, delta)) = d.lower {
        if l + 2 < q.len() {
            let line = c[l + 1] - (k[l + 1] - b) * (c[l + 2] - c[l + 1]) / (k[l + 2] - k[l + 1]);
            let (r_lo, _) = digital_range(q, l);
            let dtol = tol / (k[l + 1] - b);
            if (c[l] - line).abs() <= eq && delta > r_lo + dtol {
                let a = 1.0 / (k[l + 1] - b);
                let be = 1.0 / (k[l + 2] - k[l + 1]);
                let cases = vec![
                    (
                        format!("P({} < S_T < {}) = 0", fmt_sig(b), fmt_sig(k[l + 1])),
                        HedgePortfolio::new("short digital, long call spread")
                            .leg(OptionKind::DigitalGt, b, -1.0)
                            .call(b, a)
                            .call(k[l + 1], -a),
                    ),
                    (
                        format!("P({} < S_T < {}) > 0", fmt_sig(b), fmt_sig(k[l + 1])),
                        HedgePortfolio::new("butterfly").call(b, a).call(k[l + 1], -(a + be)).call(k[l + 2], be),
                    ),
                ];
                let cross = secant_crossover(&without(q, l), l - 1)
                    .map(|x| format!(" (secants cross at {})", fmt_sig(x)))
                    .unwrap_or_default();
                return Ok(ArbitrageReport {
                    verdict: Verdict::Weak,
                    label: "weak-right-secant-lower-barrier".into(),
                    explanation: format!(
                        "C({}) lies on the secant through the next two strikes{cross}, which pins the digital at {}, but it is quoted at {}",
                        fmt_sig(b),
                        fmt_sig(r_lo),
                        fmt_sig(delta)
                    ),
                    witness: Witness::Conditional(cases),
                });
            }
        }
    }
    if let Some((_, dd)) = d.upper {
        if m >= 2 {
            let line = c[m - 1] + (bu - k[m - 1]) * (c[m - 1] - c[m - 2]) / (k[m - 1] - k[m - 2]);
            let (_, l_hi) = digital_range(q, m);
            let dtol = tol / (bu - k[m - 1]);
            if (c[m] - line).abs() <= eq && dd < l_hi - dtol {
                let a = 1.0 / (bu - k[m - 1]);
                let be = 1.0 / (k[m - 1] - k[m - 2]);
                let cases = vec![
                    (
                        format!("P({} < S_T < {}) = 0", fmt_sig(k[m - 1]), fmt_sig(bu)),
                        HedgePortfolio::new("long digital, short call spread")
                            .leg(OptionKind::DigitalGe, bu, 1.0)
                            .call(k[m - 1], -a)
                            .call(bu, a),
                    ),
                    (
                        format!("P({} < S_T < {}) > 0", fmt_sig(k[m - 1]), fmt_sig(bu)),
                        HedgePortfolio::new("butterfly").call(k[m - 2], be).call(k[m - 1], -(a + be)).call(bu, a),
                    ),
                ];
                return Ok(ArbitrageReport {
                    verdict: Verdict::Weak,
                    label: "weak-left-secant-upper-barrier".into(),
                    explanation: format!(
                        "C({}) lies on the secant through the previous two strikes, which pins the digital at {}, but it is quoted at {}",
                        fmt_sig(bu),
                        fmt_sig(l_hi),
                        fmt_sig(dd)
                    ),
                    witness: Witness::Conditional(cases),
                });
            }
        }
    }
    Ok(ArbitrageReport::none())
}

fn without(q: &CallQuoteSet, idx: usize) -> CallQuoteSet {
    let mut r = q.clone();
    r.strikes.remove(idx);
    r.prices.remove(idx);
    r
}

/// Moves prices by less than `eps` so that calls plus digitals become
/// consistent with a market model. Consistent input is returned unchanged;
/// model-free arbitrage cannot be repaired.
pub fn perturb_to_consistent(
    q: &CallQuoteSet,
    d: &DigitalQuotes,
    barriers: &Barriers,
    eps: f64,
) -> Result<(CallQuoteSet, DigitalQuotes)> {
    if !(eps > 0.0) {
        return Err(DntError::invalid("perturbation size must be positive"));
    }
    let mut q2 = q.clone();
    let mut d2 = *d;
    let step = eps / 4.0;
    for _ in 0..4 {
        let r = check_digitals(&q2, &d2, barriers)?;
        match r.verdict {
            Verdict::None => break,
            Verdict::ModelFree | Verdict::Wflvr => return Err(DntError::Arbitrage(Box::new(r))),
            Verdict::Weak => {}
        }
        let lay = barrier_layout(&q2, barriers)?;
        if r.label == "flat-segment" {
            tilt_flat_tail(&mut q2, step)?;
        } else if r.label.ends_with("lower-barrier") {
            lift_call(&mut q2, lay.l, step);
        } else {
            lift_call(&mut q2, lay.m, step);
        }
        clamp_digitals(&q2, &mut d2, &lay);
    }
    let r = check_digitals(&q2, &d2, barriers)?;
    if r.verdict != Verdict::None {
        return Err(DntError::Arbitrage(Box::new(r)));
    }
    let moved = q
        .prices
        .iter()
        .zip(&q2.prices)
        .map(|(a, b)| (a - b).abs())
        .chain(
            [d.lower, d.upper].iter().zip([d2.lower, d2.upper]).filter_map(|(a, b)| Some((a.as_ref()?.1 - b?.1).abs())),
        )
        .fold(0.0, f64::max);
    if moved >= eps {
        return Err(DntError::invalid(format!("perturbation needed {moved}, not below {eps}")));
    }
    Ok((q2, d2))
}

/// Tilts a flat positive run `C(K_k) = ... = C(K_N)` into a gently
/// decreasing one.
fn tilt_flat_tail(q: &mut CallQuoteSet, step: f64) -> Result<()> {
    let k0 = flat_positive_pair(q).ok_or_else(|| DntError::invalid("no flat segment to tilt"))?;
    let n = q.len();
    let (k, c) = (&q.strikes, &q.prices);
    let span = k[n - 1] - k[k0];
    let prev_slope = if k0 == 0 { -1.0 } else { (c[k0] - c[k0 - 1]) / (k[k0] - k[k0 - 1]) };
    let eta = (step * span.min(1.0)).min(c[k0] / 2.0).min(-prev_slope * span / 2.0);
    let base = k[k0];
    for i in k0 + 1..n {
        q.prices[i] -= eta * (q.strikes[i] - base) / span;
    }
    Ok(())
}

/// Raises the call at index `i` strictly below its chord.
fn lift_call(q: &mut CallQuoteSet, i: usize, step: f64) {
    let (k, c) = (&q.strikes, &q.prices);
    let (chord, right_gap) = if i + 1 < q.len() {
        let w = (k[i] - k[i - 1]) / (k[i + 1] - k[i - 1]);
        (c[i - 1] + w * (c[i + 1] - c[i - 1]), k[i + 1] - k[i])
    } else {
        (c[i - 1], 1.0)
    };
    let room = chord - c[i];
    let eta = (step * right_gap.min(k[i] - k[i - 1]).min(1.0)).min(room / 2.0);
    q.prices[i] += eta;
}

fn clamp_digitals(q: &CallQuoteSet, d: &mut DigitalQuotes, lay: &BarrierLayout) {
    if let Some((k, p)) = d.lower {
        let (r, l) = digital_range(q, lay.l);
        d.lower = Some((k, p.clamp(r.min(l), l)));
    }
    if let Some((k, p)) = d.upper {
        let (r, l) = digital_range(q, lay.m);
        d.upper = Some((k, p.clamp(r.min(l), l)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::QuotedMarket;

    fn q(pairs: &[(f64, f64)]) -> CallQuoteSet {
        CallQuoteSet::from_pairs(pairs[0].1, pairs, None).unwrap()
    }

    #[test]
    fn textbook_quotes_are_clean() {
        let r = check_quotes(&q(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.25), (3.0, 0.0)]));
        assert_eq!(r.verdict, Verdict::None);
        assert_eq!(r.witness, Witness::None);
    }

    #[test]
    fn rising_call_is_model_free() {
        let c = CallCurve::new(2.0, vec![0.0, 1.0, 2.0, 3.0], vec![2.0, 1.0, 1.2, 0.0], 0.0).unwrap();
        let r = check_curve(&c);
        assert_eq!(r.verdict, Verdict::ModelFree);
        assert_eq!(r.label, "monotonicity");
        assert!(r.portfolio().unwrap().cost(&c).unwrap() < 0.0);
    }

    #[test]
    fn flat_positive_tail_is_wflvr() {
        let c = CallCurve::new(2.0, vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.3], 0.0).unwrap();
        let r = check_curve(&c);
        assert_eq!(r.verdict, Verdict::Wflvr);
        assert!(matches!(r.witness, Witness::Sequence { limit_price, .. } if limit_price == -0.3));
    }

    #[test]
    fn steep_start_is_caught_with_a_put() {
        let qs = q(&[(0.0, 2.0), (1.0, 0.5), (2.0, 0.4)]);
        let r = check_quotes(&qs);
        assert_eq!(r.label, "slope-at-zero");
        let m = QuotedMarket::new(qs, DigitalQuotes::default());
        assert!((r.portfolio().unwrap().cost(&m).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_pair_gives_weak_with_two_cases() {
        let r = check_quotes(&q(&[(0.0, 2.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]));
        assert_eq!(r.verdict, Verdict::Weak);
        let Witness::Conditional(cases) = r.witness else { panic!() };
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].1.options[0].strike, 1.0);
        assert_eq!(cases[0].1.options[1].strike, 2.0);
    }

    #[test]
    fn crossover_of_secants() {
        // slope -1 through (1,1) meets slope -1/4 through (2,1/4) at 5/3
        let qs = q(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.25), (3.0, 0.0)]);
        let x = secant_crossover(&qs, 1).unwrap();
        assert!((x - 5.0 / 3.0).abs() < 1e-15);
    }
}
