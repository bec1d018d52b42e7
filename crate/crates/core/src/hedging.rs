//! Semi-static hedge portfolios: static option legs plus forward positions
//! opened the first time the price touches a level.
//!
//! Forward legs cost nothing. A leg with `before: Some(m)` fires only if its
//! level is touched strictly before `m` (ties on the same interpolated time
//! go to the upper level).

use std::fmt;

use crate::embedding::Path;
use crate::market::{Barriers, CallQuoteSet, PriceSource};
use crate::{fmt_sig, DntError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptionKind {
    Call,
    Put,
    /// `1{S_T > K}`
    DigitalGt,
    /// `1{S_T >= K}`
    DigitalGe,
    /// `1{K < S_T < upper}`
    Corridor {
        upper: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionLeg {
    pub kind: OptionKind,
    pub strike: f64,
    pub qty: f64,
}

impl OptionLeg {
    pub fn payoff(&self, s: f64) -> f64 {
        let k = self.strike;
        let unit = match self.kind {
            OptionKind::Call => (s - k).max(0.0),
            OptionKind::Put => (k - s).max(0.0),
            OptionKind::DigitalGt => f64::from(u8::from(s > k)),
            OptionKind::DigitalGe => f64::from(u8::from(s >= k)),
            OptionKind::Corridor { upper } => f64::from(u8::from(s > k && s < upper)),
        };
        self.qty * unit
    }

    pub fn price(&self, src: &dyn PriceSource) -> Result<f64> {
        let k = self.strike;
        let unit = match self.kind {
            OptionKind::Call => src.call(k)?,
            OptionKind::Put => src.put(k)?,
            OptionKind::DigitalGt => src.digital_gt(k)?,
            OptionKind::DigitalGe => src.digital_ge(k)?,
            OptionKind::Corridor { upper } => src.corridor(k, upper)?,
        };
        Ok(self.qty * unit)
    }
}

/// `qty` units of `S_T - level`, bought when `level` is first touched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardLeg {
    pub level: f64,
    pub before: Option<f64>,
    pub qty: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HedgePortfolio {
    pub label: String,
    pub cash: f64,
    pub options: Vec<OptionLeg>,
    pub forwards: Vec<ForwardLeg>,
}

impl HedgePortfolio {
    pub fn new(label: impl Into<String>) -> Self {
        HedgePortfolio { label: label.into(), ..Default::default() }
    }

    pub fn cash(mut self, amount: f64) -> Self {
        self.cash += amount;
        self
    }

    pub fn leg(mut self, kind: OptionKind, strike: f64, qty: f64) -> Self {
        if qty != 0.0 {
            self.options.push(OptionLeg { kind, strike, qty });
        }
        self
    }

    pub fn call(self, k: f64, qty: f64) -> Self {
        self.leg(OptionKind::Call, k, qty)
    }

    pub fn put(self, k: f64, qty: f64) -> Self {
        self.leg(OptionKind::Put, k, qty)
    }

    pub fn forward(mut self, level: f64, before: Option<f64>, qty: f64) -> Self {
        self.forwards.push(ForwardLeg { level, before, qty });
        self
    }

    /// Adds `scale` times another portfolio (labels are not merged).
    pub fn add_scaled(mut self, other: &HedgePortfolio, scale: f64) -> Self {
        self.cash += scale * other.cash;
        for l in &other.options {
            self = self.leg(l.kind, l.strike, scale * l.qty);
        }
        for f in &other.forwards {
            self.forwards.push(ForwardLeg { qty: scale * f.qty, ..*f });
        }
        self
    }

    /// Payoff of the static part at terminal value `s`.
    pub fn static_payoff(&self, s: f64) -> f64 {
        self.cash + self.options.iter().map(|l| l.payoff(s)).sum::<f64>()
    }

    /// Full payoff given the terminal value and a first-hitting-time oracle.
    pub fn payoff_with(&self, s_t: f64, hit_time: &dyn Fn(f64) -> Option<f64>) -> f64 {
        let mut total = self.static_payoff(s_t);
        for f in &self.forwards {
            if trigger_fires(f, hit_time) {
                total += f.qty * (s_t - f.level);
            }
        }
        total
    }

    /// Payoff on a discrete path, with crossings located by linear interpolation.
    pub fn evaluate_on_path(&self, path: &Path) -> f64 {
        self.payoff_with(path.terminal(), &|l| path.first_hit(l))
    }

    /// Price under a linear pricing rule; forwards cost nothing.
    pub fn cost(&self, src: &dyn PriceSource) -> Result<f64> {
        let mut c = self.cash;
        for l in &self.options {
            c += l.price(src)?;
        }
        Ok(c)
    }
}

fn trigger_fires(f: &ForwardLeg, hit_time: &dyn Fn(f64) -> Option<f64>) -> bool {
    let Some(t) = hit_time(f.level) else {
        return false;
    };
    match f.before {
        None => true,
        Some(m) => match hit_time(m) {
            None => true,
            Some(tm) if t < tm => true,
            Some(tm) if t == tm => f.level > m,
            Some(_) => false,
        },
    }
}

/// Payoff of a double no-touch on a discrete path.
pub fn dnt_payoff(path: &Path, barriers: &Barriers) -> f64 {
    f64::from(u8::from(barriers.survives(path.min(), path.max())))
}

/// Cost of a portfolio; convenience wrapper for [`HedgePortfolio::cost`].
pub fn portfolio_cost(p: &HedgePortfolio, src: &dyn PriceSource) -> Result<f64> {
    p.cost(src)
}

impl fmt::Display for HedgePortfolio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "portfolio: {}", self.label)?;
        if self.cash != 0.0 {
            writeln!(f, "  cash {}", fmt_sig(self.cash))?;
        }
        for l in &self.options {
            let kind = match l.kind {
                OptionKind::Call => "call".to_string(),
                OptionKind::Put => "put".to_string(),
                OptionKind::DigitalGt => "digital_gt".to_string(),
                OptionKind::DigitalGe => "digital_ge".to_string(),
                OptionKind::Corridor { upper } => format!("corridor_to {}", fmt_sig(upper)),
            };
            writeln!(f, "  {kind} strike {} qty {}", fmt_sig(l.strike), fmt_sig(l.qty))?;
        }
        for fw in &self.forwards {
            match fw.before {
                Some(m) => {
                    writeln!(f, "  forward on_hit {} before {} qty {}", fmt_sig(fw.level), fmt_sig(m), fmt_sig(fw.qty))?
                }
                None => writeln!(f, "  forward on_hit {} qty {}", fmt_sig(fw.level), fmt_sig(fw.qty))?,
            }
        }
        Ok(())
    }
}

/// Buy the corridor digital `1{b < S_T < b̄}`.
pub fn build_superhedge_i(barriers: &Barriers) -> HedgePortfolio {
    HedgePortfolio::new("superhedge I").leg(OptionKind::Corridor { upper: barriers.upper }, barriers.lower, 1.0)
}

/// Digital above `b`, `α` calls at `K`, short `α` puts at `b`, and a short
/// forward of size `α` opened at the first touch of `b`; `α = 1/(K - b)`.
pub fn build_superhedge_ii(k: f64, barriers: &Barriers) -> Result<HedgePortfolio> {
    let b = barriers.lower;
    if !(k > b) {
        return Err(DntError::invalid(format!("superhedge II needs K > b, got K={k}, b={b}")));
    }
    let a = 1.0 / (k - b);
    Ok(HedgePortfolio::new(format!("superhedge II(K={})", fmt_sig(k)))
        .leg(OptionKind::DigitalGt, b, 1.0)
        .call(k, a)
        .put(b, -a)
        .forward(b, None, -a))
}

/// Mirror of [`build_superhedge_ii`] at the upper barrier; `α = 1/(b̄ - K)`.
pub fn build_superhedge_iii(k: f64, barriers: &Barriers) -> Result<HedgePortfolio> {
    let bu = barriers.upper;
    if !(k < bu) {
        return Err(DntError::invalid(format!("superhedge III needs K < b̄, got K={k}, b̄={bu}")));
    }
    let a = 1.0 / (bu - k);
    Ok(HedgePortfolio::new(format!("superhedge III(K={})", fmt_sig(k)))
        .cash(1.0)
        .leg(OptionKind::DigitalGe, bu, -1.0)
        .put(k, a)
        .call(bu, -a)
        .forward(bu, None, a))
}

/// The do-nothing subhedge.
pub fn build_subhedge_i() -> HedgePortfolio {
    HedgePortfolio::new("subhedge I")
}

/// Hold one unit of cash, sell calls at `K2` and puts at `K1`, and buy
/// back exposure with a forward at whichever barrier is touched first.
pub fn build_subhedge_ii(k1: f64, k2: f64, barriers: &Barriers) -> Result<HedgePortfolio> {
    let (b, bu) = (barriers.lower, barriers.upper);
    if !(b < k1 && k1 <= k2 && k2 < bu) {
        return Err(DntError::invalid(format!("subhedge II needs b < K1 <= K2 < b̄, got K1={k1}, K2={k2}")));
    }
    let up = 1.0 / (bu - k2);
    let dn = 1.0 / (k1 - b);
    Ok(HedgePortfolio::new(format!("subhedge II(K1={}, K2={})", fmt_sig(k1), fmt_sig(k2)))
        .cash(1.0)
        .call(k2, -up)
        .put(k1, -dn)
        .forward(bu, Some(b), up)
        .forward(b, Some(bu), -dn))
}

/// Index `i` with `K_i < level < K_{i+1}`, or `None` if `level` is quoted or
/// outside the strike range.
fn strict_bracket(q: &CallQuoteSet, level: f64) -> Option<usize> {
    if q.index_of(level).is_some() {
        return None;
    }
    let i = q.bracket(level);
    (i + 1 < q.len() && q.strikes[i] < level).then_some(i)
}

/// Two call-only superhedges of `1{S_T > level}` for a level strictly
/// between quoted strikes `K_i < level < K_{i+1}`:
/// a call spread over `(K_{i-1}, K_i)` and a three-call combination over
/// `K_i, K_{i+1}, K_{i+2}`.
pub fn build_digital_superhedges(q: &CallQuoteSet, level: f64) -> Result<(HedgePortfolio, HedgePortfolio)> {
    let i = strict_bracket(q, level)
        .ok_or_else(|| DntError::Layout(format!("level {level} is not strictly between quoted strikes")))?;
    if i < 1 || i + 2 >= q.len() {
        return Err(DntError::Layout(format!(
            "digital superhedges at {level} need strikes K_(i-1), K_(i+1), K_(i+2) around it"
        )));
    }
    let k = &q.strikes;
    let w = k[i] - k[i - 1];
    let x1 = HedgePortfolio::new(format!("X1({})", fmt_sig(level))).call(k[i - 1], 1.0 / w).call(k[i], -1.0 / w);
    let span = k[i + 2] - k[i + 1];
    let w1 = (k[i + 2] - level) / span;
    let w2 = (k[i + 1] - level) / span;
    let s = 1.0 / (level - k[i]);
    let x2 = HedgePortfolio::new(format!("X2({})", fmt_sig(level)))
        .call(k[i], s)
        .call(k[i + 1], -w1 * s)
        .call(k[i + 2], w2 * s);
    Ok((x1, x2))
}

/// Two put-only superhedges of `1{S_T < level}` for `K_j < level < K_{j+1}`:
/// a put spread over `(K_{j+1}, K_{j+2})` and the mirrored three-put combination.
pub fn build_digital_put_superhedges(q: &CallQuoteSet, level: f64) -> Result<(HedgePortfolio, HedgePortfolio)> {
    let j = strict_bracket(q, level)
        .ok_or_else(|| DntError::Layout(format!("level {level} is not strictly between quoted strikes")))?;
    if j < 1 || j + 2 >= q.len() {
        return Err(DntError::Layout(format!(
            "digital superhedges at {level} need strikes K_(j-1), K_j, K_(j+2) around it"
        )));
    }
    let k = &q.strikes;
    let w = k[j + 2] - k[j + 1];
    let y1 = HedgePortfolio::new(format!("Y1({})", fmt_sig(level))).put(k[j + 2], 1.0 / w).put(k[j + 1], -1.0 / w);
    let span = k[j] - k[j - 1];
    let w1 = (level - k[j - 1]) / span;
    let w2 = (level - k[j]) / span;
    let s = 1.0 / (k[j + 1] - level);
    let y2 = HedgePortfolio::new(format!("Y2({})", fmt_sig(level)))
        .put(k[j + 1], s)
        .put(k[j], -w1 * s)
        .put(k[j - 1], w2 * s);
    Ok((y1, y2))
}

/// Superhedge II at unquoted `b`, with the digital and the put at `b`
/// replaced by quoted instruments.
pub fn build_finite_superhedge_ii(
    q: &CallQuoteSet,
    k: f64,
    x: &HedgePortfolio,
    barriers: &Barriers,
) -> Result<HedgePortfolio> {
    let b = barriers.lower;
    if !(k > b) {
        return Err(DntError::invalid(format!("needs K > b, got K={k}")));
    }
    let i = strict_bracket(q, b)
        .ok_or_else(|| DntError::Layout("lower barrier must lie strictly between strikes".into()))?;
    let ki = q.strikes[i];
    let a = 1.0 / (k - b);
    let mut h = HedgePortfolio::new(format!("superhedge II[{}](K={})", x.label, fmt_sig(k)))
        .call(k, a)
        .put(ki, -a)
        .cash(-a * (b - ki))
        .forward(b, None, -a);
    h = h.add_scaled(x, 1.0 + a * (b - ki));
    Ok(h)
}

/// Mirror of [`build_finite_superhedge_ii`] at unquoted `b̄`.
pub fn build_finite_superhedge_iii(
    q: &CallQuoteSet,
    k: f64,
    y: &HedgePortfolio,
    barriers: &Barriers,
) -> Result<HedgePortfolio> {
    let bu = barriers.upper;
    if !(k < bu) {
        return Err(DntError::invalid(format!("needs K < b̄, got K={k}")));
    }
    let j = strict_bracket(q, bu)
        .ok_or_else(|| DntError::Layout("upper barrier must lie strictly between strikes".into()))?;
    let kj1 = q.strikes[j + 1];
    let a = 1.0 / (bu - k);
    let mut h = HedgePortfolio::new(format!("superhedge III[{}](K={})", y.label, fmt_sig(k)))
        .put(k, a)
        .call(kj1, -a)
        .cash(-a * (kj1 - bu))
        .forward(bu, None, a);
    h = h.add_scaled(y, 1.0 + a * (kj1 - bu));
    Ok(h)
}

/// Every superhedge that uses only quoted strikes when the barriers are not
/// quoted: four corridor replicas, and the II/III families over the quoted
/// strikes above/below the spot.
pub fn build_finite_superhedges(q: &CallQuoteSet, barriers: &Barriers) -> Result<Vec<HedgePortfolio>> {
    let (x1, x2) = build_digital_superhedges(q, barriers.lower)?;
    let (y1, y2) = build_digital_put_superhedges(q, barriers.upper)?;
    let mut out = Vec::new();
    for x in [&x1, &x2] {
        for y in [&y1, &y2] {
            let h = HedgePortfolio::new(format!("superhedge I[{}, {}]", x.label, y.label))
                .cash(-1.0)
                .add_scaled(x, 1.0)
                .add_scaled(y, 1.0);
            out.push(h);
        }
    }
    for &k in q.strikes.iter().filter(|&&k| k > q.spot) {
        for x in [&x1, &x2] {
            out.push(build_finite_superhedge_ii(q, k, x, barriers)?);
        }
    }
    for &k in q.strikes.iter().filter(|&&k| k < q.spot) {
        for y in [&y1, &y2] {
            out.push(build_finite_superhedge_iii(q, k, y, barriers)?);
        }
    }
    Ok(out)
}
