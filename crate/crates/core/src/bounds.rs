//! Sharp model-free bounds on the double no-touch price.
//!
//! Every value is the cost of an explicit hedge from [`crate::hedging`], so
//! a bound and its hedge always agree to the last bit.

use std::fmt;

use rayon::prelude::*;

use crate::arbitrage::{check_digitals, check_quotes, Verdict};
use crate::embedding::{barycentres, inverse_barycentres};
use crate::hedging::{
    build_digital_put_superhedges, build_digital_superhedges, build_finite_superhedge_ii, build_finite_superhedge_iii,
    build_subhedge_i, build_subhedge_ii, build_superhedge_i, build_superhedge_ii, build_superhedge_iii, HedgePortfolio,
};
use crate::market::{
    implied_measure, same_strike, Barriers, CallCurve, CallQuoteSet, DigitalQuotes, ImpliedMeasure, PriceSource,
    QuotedMarket,
};
use crate::{fmt_sig, price_tol, DntError, Result, EQUALITY_TOL};

/// Which superhedge family attains the upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperTerm {
    I,
    II { strike: f64 },
    III { strike: f64 },
}

impl fmt::Display for UpperTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpperTerm::I => f.write_str("I"),
            UpperTerm::II { strike } => write!(f, "II strike {}", fmt_sig(*strike)),
            UpperTerm::III { strike } => write!(f, "III strike {}", fmt_sig(*strike)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attainability {
    /// Some market model prices the double no-touch at the bound.
    Attained,
    /// Only a sequence of market models gets arbitrarily close.
    ApproximatedBySequence,
    /// The strike layout falls outside the range where attainment is settled.
    NotEstablished,
}

impl fmt::Display for Attainability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attainability::Attained => "attained",
            Attainability::ApproximatedBySequence => "approximated-by-sequence",
            Attainability::NotEstablished => "not-established",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Continuum,
    FiniteWithDigitals,
    Finite,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Continuum => "continuum",
            Regime::FiniteWithDigitals => "finite-with-digitals",
            Regime::Finite => "finite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjustedSide {
    Upper,
    Lower,
}

/// Replacement call and digital price at one barrier, used when the plain
/// extension prices would put the minimum on the far side of that barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierAdjustment {
    pub side: AdjustedSide,
    pub call: f64,
    pub digital: f64,
    /// The chord slope sits between the neighbouring call slopes.
    pub chord_in_range: bool,
    /// The adjusted price keeps the calls convex.
    pub no_model_free: bool,
    /// The infimum over quoted strikes equals the value at the barrier.
    pub infimum_matches: bool,
    /// The adjusted term is still the smallest of the three.
    pub ordering: bool,
}

impl BarrierAdjustment {
    pub fn holds(&self) -> bool {
        self.chord_in_range && self.no_model_free && self.infimum_matches && self.ordering
    }
}

/// Call and digital prices at unquoted barriers read off the tightest
/// secants of the neighbouring quotes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticPrices {
    pub call_lower: f64,
    /// Price of `1{S_T > b}`.
    pub digital_lower: f64,
    pub call_upper: f64,
    /// Price of `1{S_T >= b̄}`.
    pub digital_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    pub value: f64,
    pub term: UpperTerm,
    pub hedge: HedgePortfolio,
    pub attainability: Attainability,
    pub adjustment: Option<BarrierAdjustment>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub strikes: Option<(f64, f64)>,
    pub hedge: HedgePortfolio,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub regime: Regime,
    pub lower: LowerBound,
    pub upper: UpperBound,
}

impl fmt::Display for BoundResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regime {}", self.regime)?;
        writeln!(f, "lower {}", fmt_sig(self.lower.value))?;
        writeln!(f, "upper {}", fmt_sig(self.upper.value))?;
        match self.lower.strikes {
            Some((k1, k2)) => writeln!(f, "lower_strikes {} {}", fmt_sig(k1), fmt_sig(k2))?,
            None => writeln!(f, "lower_strikes none")?,
        }
        writeln!(f, "upper_term {}", self.upper.term)?;
        writeln!(f, "attainability {}", self.upper.attainability)?;
        if let Some(a) = &self.upper.adjustment {
            let side = match a.side {
                AdjustedSide::Upper => "upper",
                AdjustedSide::Lower => "lower",
            };
            writeln!(
                f,
                "adjusted_barrier {side} call {} digital {} conditions {}",
                fmt_sig(a.call),
                fmt_sig(a.digital),
                if a.holds() { "hold" } else { "fail" }
            )?;
        }
        for n in self.lower.notes.iter().chain(&self.upper.notes) {
            writeln!(f, "note {n}")?;
        }
        writeln!(f, "upper_hedge")?;
        write!(f, "{}", self.upper.hedge)?;
        writeln!(f, "lower_hedge")?;
        write!(f, "{}", self.lower.hedge)
    }
}

/// Cheapest candidate; ties go to the earliest, so pass terms in the order I, II, III.
fn cheapest(
    cands: Vec<(UpperTerm, HedgePortfolio)>,
    src: &dyn PriceSource,
) -> Result<(f64, UpperTerm, HedgePortfolio)> {
    let mut best: Option<(f64, UpperTerm, HedgePortfolio)> = None;
    for (term, h) in cands {
        let c = h.cost(src)?;
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, term, h));
        }
    }
    best.ok_or_else(|| DntError::invalid("no superhedge candidates"))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| same_strike(*a, *b));
    v
}

fn require_clean_quotes(q: &CallQuoteSet) -> Result<()> {
    let report = check_quotes(q);
    if report.verdict != Verdict::None {
        return Err(DntError::Arbitrage(Box::new(report)));
    }
    Ok(())
}

/// Upper bound for a full, arbitrage-free call curve (vanishing tail).
///
/// Term II is searched over `K = S0`, `K = b̄` and every knot above the
/// spot; term III over `K = S0`, `K = b` and every knot below it. Between
/// knots the objective is monotone, so this is exact.
pub fn upper_bound_continuum(curve: &CallCurve, barriers: &Barriers) -> Result<UpperBound> {
    barriers.check_spot(curve.spot)?;
    let mu = implied_measure(curve)?;
    upper_continuum_with(curve, &mu, barriers)
}

fn upper_continuum_with(curve: &CallCurve, mu: &ImpliedMeasure, barriers: &Barriers) -> Result<UpperBound> {
    let (lo, hi) = mu.support();
    if barriers.lower < lo && barriers.upper > hi {
        return Ok(UpperBound {
            value: 1.0,
            term: UpperTerm::I,
            hedge: build_superhedge_i(barriers),
            attainability: Attainability::Attained,
            adjustment: None,
            notes: vec!["both barriers lie outside the support of the implied law".into()],
        });
    }
    let s0 = curve.spot;
    let mut cands = vec![(UpperTerm::I, build_superhedge_i(barriers))];
    let mut above = vec![s0, barriers.upper];
    above.extend(curve.knots.iter().copied().filter(|&k| k > s0));
    for k in sorted_unique(above) {
        cands.push((UpperTerm::II { strike: k }, build_superhedge_ii(k, barriers)?));
    }
    let mut below = vec![s0, barriers.lower];
    below.extend(curve.knots.iter().copied().filter(|&k| k < s0));
    for k in sorted_unique(below) {
        cands.push((UpperTerm::III { strike: k }, build_superhedge_iii(k, barriers)?));
    }
    let (value, term, hedge) = cheapest(cands, curve)?;
    Ok(UpperBound {
        value,
        term,
        hedge,
        attainability: Attainability::Attained,
        adjustment: None,
        notes: vec!["attained by the Perkins embedding of the implied law".into()],
    })
}

/// Lower bound for a full call curve: the subhedge struck at the inverse
/// barycentres `(theta_inv(b), psi_inv(b̄))`, floored at zero.
pub fn lower_bound_continuum(curve: &CallCurve, barriers: &Barriers) -> Result<LowerBound> {
    barriers.check_spot(curve.spot)?;
    let mu = implied_measure(curve)?;
    let (k1, k2) = inverse_barycentres(&barycentres(&mu), barriers);
    if !(k1 <= k2 && k1 > barriers.lower && k2 < barriers.upper) {
        return Ok(LowerBound {
            value: 0.0,
            strikes: None,
            hedge: build_subhedge_i(),
            notes: vec![format!(
                "inverse barycentres ({}, {}) leave no room for a priced subhedge",
                fmt_sig(k1),
                fmt_sig(k2)
            )],
        });
    }
    let hedge = build_subhedge_ii(k1, k2, barriers)?;
    let bracket = hedge.cost(curve)?;
    if bracket <= 0.0 {
        return Ok(LowerBound {
            value: 0.0,
            strikes: None,
            hedge: build_subhedge_i(),
            notes: vec![format!("subhedge at ({}, {}) costs {}", fmt_sig(k1), fmt_sig(k2), fmt_sig(bracket))],
        });
    }
    let mut notes = vec!["attained by the tilted-Jacka embedding of the implied law".to_string()];
    let open = mu.mass_open(k1, k2);
    if (open - bracket).abs() > price_tol(curve.spot) {
        notes.push(format!(
            "law of the open interval ({}, {}) is {}, not the bracket value; atoms sit at the strikes",
            fmt_sig(k1),
            fmt_sig(k2),
            fmt_sig(open)
        ));
    }
    Ok(LowerBound { value: bracket, strikes: Some((k1, k2)), hedge, notes })
}

/// Best subhedge over strike pairs drawn from `strikes` inside the open corridor.
fn best_pair(strikes: &[f64], src: &dyn PriceSource, barriers: &Barriers) -> Result<LowerBound> {
    let inside: Vec<f64> = strikes.iter().copied().filter(|&k| k > barriers.lower && k < barriers.upper).collect();
    let mut best = LowerBound { value: 0.0, strikes: None, hedge: build_subhedge_i(), notes: vec![] };
    for (a, &k1) in inside.iter().enumerate() {
        for &k2 in &inside[a..] {
            let h = build_subhedge_ii(k1, k2, barriers)?;
            let c = h.cost(src)?;
            if c > best.value {
                best = LowerBound { value: c, strikes: Some((k1, k2)), hedge: h, notes: vec![] };
            }
        }
    }
    Ok(best)
}

/// Lower bound from finitely many quotes: exhaustive search over quoted
/// strike pairs strictly inside the corridor.
pub fn lower_bound_finite(quotes: &CallQuoteSet, barriers: &Barriers) -> Result<LowerBound> {
    barriers.check_spot(quotes.spot)?;
    require_clean_quotes(quotes)?;
    if !quotes.strikes.iter().any(|&k| k > barriers.lower && k < barriers.upper) {
        return Err(DntError::Layout("no quoted strike lies strictly between the barriers".into()));
    }
    let market = QuotedMarket::new(quotes.clone(), DigitalQuotes::default());
    let mut lb = best_pair(&quotes.strikes, &market, barriers)?;
    lb.notes.push(if lb.strikes.is_some() {
        "attained by the tilted-Jacka embedding of the straight-line extension".into()
    } else {
        "no subhedge beats doing nothing".into()
    });
    Ok(lb)
}

/// Upper bound with calls and digitals quoted at both barriers.
pub fn upper_bound_finite_digitals(
    quotes: &CallQuoteSet,
    digitals: &DigitalQuotes,
    barriers: &Barriers,
) -> Result<UpperBound> {
    barriers.check_spot(quotes.spot)?;
    let (Some((_, dl)), Some((_, du))) = (digitals.lower, digitals.upper) else {
        return Err(DntError::Layout("digital quotes are needed at both barriers".into()));
    };
    let report = check_digitals(quotes, digitals, barriers)?;
    if report.verdict != Verdict::None {
        return Err(DntError::Arbitrage(Box::new(report)));
    }
    let (b, bu, s0) = (barriers.lower, barriers.upper, quotes.spot);
    let market = QuotedMarket::new(quotes.clone(), *digitals);
    let mut cands = vec![(UpperTerm::I, build_superhedge_i(barriers))];
    for &k in quotes.strikes.iter().filter(|&&k| k > s0 && k <= bu) {
        cands.push((UpperTerm::II { strike: k }, build_superhedge_ii(k, barriers)?));
    }
    for &k in quotes.strikes.iter().filter(|&&k| k >= b && k < s0) {
        cands.push((UpperTerm::III { strike: k }, build_superhedge_iii(k, barriers)?));
    }
    let (value, term, hedge) = cheapest(cands, &market)?;

    let chord = (market.call(bu)? - market.put(b)?) / (bu - b);
    let at_upper = matches!(term, UpperTerm::II { strike } if same_strike(strike, bu)) && chord < -du - EQUALITY_TOL;
    let at_lower =
        matches!(term, UpperTerm::III { strike } if same_strike(strike, b)) && -chord < dl - 1.0 - EQUALITY_TOL;
    let (attainability, notes) = if at_upper || at_lower {
        (
            Attainability::ApproximatedBySequence,
            vec!["minimum sits at a barrier strike; trading at this price admits a weak arbitrage".into()],
        )
    } else {
        (Attainability::Attained, vec!["attained by the Perkins embedding of an extension of the quotes".into()])
    };
    Ok(UpperBound { value, term, hedge, attainability, adjustment: None, notes })
}

/// Checks that the quoted strikes support the call-only superhedges when
/// the barriers are not quoted, and returns `(i, j)` with
/// `K_i < b < K_{i+1}` and `K_j < b̄ < K_{j+1}`.
///
/// Needs `K_{i-1}`, `K_{i+2}`, `K_{j-1}` and `K_{j+2}`, and at least one
/// strike strictly between the barriers.
pub fn check_layout(quotes: &CallQuoteSet, barriers: &Barriers) -> Result<(usize, usize)> {
    let k = &quotes.strikes;
    let (b, bu) = (barriers.lower, barriers.upper);
    if quotes.index_of(b).is_some() || quotes.index_of(bu).is_some() {
        return Err(DntError::Layout("a barrier is a quoted strike; supply digitals at the barriers".into()));
    }
    let n = k.len() - 1;
    let (i, j) = (quotes.bracket(b), quotes.bracket(bu));
    if !(k[i] < b && i >= 1 && i + 2 <= n) {
        return Err(DntError::Layout(format!(
            "lower barrier {b} needs one quoted strike below its bracket and two above it"
        )));
    }
    if !(j > i && j >= 1 && j + 2 <= n) {
        return Err(DntError::Layout(format!(
            "upper barrier {bu} needs a strike between the barriers, one below its bracket and two above it"
        )));
    }
    Ok((i, j))
}

/// Clauses of the standing strike-layout assumption that fail; the
/// attainability analysis of the finite upper bound relies on all of them.
pub fn layout_assumption_failures(quotes: &CallQuoteSet, barriers: &Barriers) -> Vec<String> {
    let (k, c) = (&quotes.strikes, &quotes.prices);
    let (b, bu) = (barriers.lower, barriers.upper);
    let n = k.len() - 1;
    let mut out = Vec::new();
    if n < 3 {
        out.push(format!("only {n} positive strikes"));
        return out;
    }
    if !(b > k[2]) {
        out.push(format!("lower barrier {} does not exceed K_2 = {}", fmt_sig(b), fmt_sig(k[2])));
    }
    let between = k.iter().filter(|&&x| x > b && x < bu).count();
    if between < 2 {
        out.push(format!("{between} quoted strike(s) between the barriers, need 2"));
    }
    if !(bu < k[n - 1]) {
        out.push(format!("upper barrier {} is not below K_(N-1) = {}", fmt_sig(bu), fmt_sig(k[n - 1])));
    }
    if !(quotes.spot > c[1] && c[1] > c[n - 1] && c[n - 1] > 0.0) {
        out.push("S0 > C(K_1) > C(K_(N-1)) > 0 fails".into());
    }
    out
}

fn lowest_convex_price(k: &[f64], c: &[f64], i: usize, x: f64) -> f64 {
    let left = c[i] + (c[i] - c[i - 1]) / (k[i] - k[i - 1]) * (x - k[i]);
    let right = c[i + 1] + (c[i + 1] - c[i + 2]) / (k[i + 2] - k[i + 1]) * (k[i + 1] - x);
    left.max(right)
}

/// The smallest convex call prices at the barriers with the matching
/// (largest) digital prices.
pub fn synthetic_barrier_prices(quotes: &CallQuoteSet, barriers: &Barriers) -> Result<SyntheticPrices> {
    let (i, j) = check_layout(quotes, barriers)?;
    let (k, c) = (&quotes.strikes, &quotes.prices);
    let (b, bu) = (barriers.lower, barriers.upper);
    let call_lower = lowest_convex_price(k, c, i, b);
    let call_upper = lowest_convex_price(k, c, j, bu);
    Ok(SyntheticPrices {
        call_lower,
        digital_lower: -(call_lower - c[i]) / (b - k[i]),
        call_upper,
        digital_upper: -(c[j + 1] - call_upper) / (k[j + 1] - bu),
    })
}

/// Upper bound from call quotes only, barriers strictly between strikes.
///
/// The value is the cheapest superhedge built from quoted calls. The
/// attainability analysis prices the barriers synthetically; when that
/// pushes the minimum onto a barrier strike the barrier call is raised to
/// the chord value and the resulting conditions are recorded.
pub fn upper_bound_finite(quotes: &CallQuoteSet, barriers: &Barriers) -> Result<UpperBound> {
    barriers.check_spot(quotes.spot)?;
    require_clean_quotes(quotes)?;
    let (i, j) = check_layout(quotes, barriers)?;
    let syn = synthetic_barrier_prices(quotes, barriers)?;
    let (b, bu, s0) = (barriers.lower, barriers.upper, quotes.spot);
    let (k, c) = (&quotes.strikes, &quotes.prices);

    let market = QuotedMarket::new(quotes.clone(), DigitalQuotes::default());
    let (x1, x2) = build_digital_superhedges(quotes, b)?;
    let (y1, y2) = build_digital_put_superhedges(quotes, bu)?;
    let mut cands = Vec::new();
    for x in [&x1, &x2] {
        for y in [&y1, &y2] {
            let h = HedgePortfolio::new(format!("superhedge I[{}, {}]", x.label, y.label))
                .cash(-1.0)
                .add_scaled(x, 1.0)
                .add_scaled(y, 1.0);
            cands.push((UpperTerm::I, h));
        }
    }
    for &kk in k.iter().filter(|&&kk| kk > s0) {
        for x in [&x1, &x2] {
            cands.push((UpperTerm::II { strike: kk }, build_finite_superhedge_ii(quotes, kk, x, barriers)?));
        }
    }
    for &kk in k.iter().filter(|&&kk| kk < s0) {
        for y in [&y1, &y2] {
            cands.push((UpperTerm::III { strike: kk }, build_finite_superhedge_iii(quotes, kk, y, barriers)?));
        }
    }
    let (value, term, hedge) = cheapest(cands, &market)?;

    // Formula side, with synthetic prices at the barriers.
    let put = |kk: f64, ck: f64| kk - s0 + ck;
    let (cb, dl, cbu, du) = (syn.call_lower, syn.digital_lower, syn.call_upper, syn.digital_upper);
    let pb = put(b, cb);
    let inf2 =
        k.iter().zip(c).filter(|(&kk, _)| kk > s0).map(|(&kk, &ck)| (ck - pb) / (kk - b)).fold(f64::INFINITY, f64::min);
    let inf3 = k
        .iter()
        .zip(c)
        .filter(|(&kk, _)| kk < s0)
        .map(|(&kk, &ck)| (put(kk, ck) - cbu) / (bu - kk))
        .fold(f64::INFINITY, f64::min);
    let (t1, t2, t3) = (dl - du, dl + inf2, 1.0 - du + inf3);
    let formula = t1.min(t2).min(t3);
    let chord = (cbu - pb) / (bu - b);
    let t2_bar = dl + chord;
    let t3_b = 1.0 - du - chord;

    let mut notes = Vec::new();
    if (formula - value).abs() > EQUALITY_TOL {
        notes.push(format!(
            "formula value {} differs from the cheapest superhedge {}",
            fmt_sig(formula),
            fmt_sig(value)
        ));
    }

    let mut ext = (cb, dl, cbu, du);
    let mut adjustment = None;
    if t2_bar < formula.min(t3_b) - EQUALITY_TOL {
        let c_star = (c[j + 1] - (c[j + 1] - pb) / (k[j + 1] - b) * (k[j + 1] - bu))
            .min(c[j] + (bu - k[j]) * (c[j] - pb) / (k[j] - b));
        let d_star = (c_star - c[j + 1]) / (k[j + 1] - bu);
        let interp = (k[j + 1] - bu) / (k[j + 1] - k[j]) * c[j] + (bu - k[j]) / (k[j + 1] - k[j]) * c[j + 1];
        let tol = EQUALITY_TOL;
        let star_chord = (c_star - pb) / (bu - b);
        let min_p = k
            .iter()
            .zip(c)
            .filter(|(&kk, _)| kk >= b && kk < bu)
            .map(|(&kk, &ck)| (put(kk, ck) - c_star) / (bu - kk))
            .fold((pb - c_star) / (bu - b), f64::min);
        let left = (cbu - c[j]) / (bu - k[j]);
        let right = (c[j + 1] - cbu) / (k[j + 1] - bu);
        adjustment = Some(BarrierAdjustment {
            side: AdjustedSide::Upper,
            call: c_star,
            digital: d_star,
            chord_in_range: chord >= left - tol && chord <= right + tol,
            no_model_free: cbu <= c_star + tol && c_star <= interp + tol,
            infimum_matches: (star_chord - inf2).abs() <= tol,
            ordering: star_chord <= -d_star + tol && -d_star <= -du + tol && dl <= 1.0 + min_p + tol,
        });
        ext.2 = c_star;
        ext.3 = d_star;
    } else if t3_b < formula.min(t2_bar) - EQUALITY_TOL {
        let pi = put(k[i], c[i]);
        let pi1 = put(k[i + 1], c[i + 1]);
        let p_star =
            (pi - (pi - cbu) / (bu - k[i]) * (b - k[i])).min(pi1 + (k[i + 1] - b) * (pi1 - cbu) / (bu - k[i + 1]));
        let c_star = p_star + s0 - b;
        let dl_star = (c[i] - c_star) / (b - k[i]);
        let interp = (k[i + 1] - b) / (k[i + 1] - k[i]) * pi + (b - k[i]) / (k[i + 1] - k[i]) * pi1;
        let tol = EQUALITY_TOL;
        let star_chord = (p_star - cbu) / (bu - b);
        let min_c = k
            .iter()
            .zip(c)
            .filter(|(&kk, _)| kk > b && kk <= bu)
            .map(|(&kk, &ck)| (ck - p_star) / (kk - b))
            .fold((cbu - p_star) / (bu - b), f64::min);
        let s = -chord;
        let left = (pb - pi) / (b - k[i]);
        let right = (pi1 - pb) / (k[i + 1] - b);
        adjustment = Some(BarrierAdjustment {
            side: AdjustedSide::Lower,
            call: c_star,
            digital: dl_star,
            chord_in_range: -s >= left - tol && -s <= right + tol,
            no_model_free: pb <= p_star + tol && p_star <= interp + tol,
            infimum_matches: (star_chord - inf3).abs() <= tol,
            ordering: star_chord <= -(1.0 - dl_star) + tol
                && -(1.0 - dl_star) <= -(1.0 - dl) + tol
                && 1.0 - du <= 1.0 + min_c + tol,
        });
        ext.0 = c_star;
        ext.1 = dl_star;
    }

    let ext_quotes = {
        let mut pairs: Vec<(f64, f64)> = k.iter().copied().zip(c.iter().copied()).collect();
        pairs.push((b, ext.0));
        pairs.push((bu, ext.2));
        CallQuoteSet::from_pairs(s0, &pairs, quotes.maturity)?
    };
    let ext_digitals = DigitalQuotes::new(Some((b, ext.1.clamp(0.0, 1.0))), Some((bu, ext.3.clamp(0.0, 1.0))))?;
    let verdict = check_digitals(&ext_quotes, &ext_digitals, barriers)?.verdict;
    let holds = adjustment.as_ref().is_none_or(BarrierAdjustment::holds);
    let failures = layout_assumption_failures(quotes, barriers);
    let attainability = if !failures.is_empty() {
        for f in failures {
            notes.push(format!("strike layout: {f}"));
        }
        Attainability::NotEstablished
    } else if verdict == Verdict::None && holds {
        notes.push("attained by the Perkins embedding of the extended quotes".into());
        Attainability::Attained
    } else {
        notes.push(format!("extended quotes classify as {verdict}; the bound is a limit of market models"));
        Attainability::ApproximatedBySequence
    };
    Ok(UpperBound { value, term, hedge, attainability, adjustment, notes })
}

/// Both bounds for a full call curve.
pub fn continuum_bounds(curve: &CallCurve, barriers: &Barriers) -> Result<BoundResult> {
    Ok(BoundResult {
        regime: Regime::Continuum,
        lower: lower_bound_continuum(curve, barriers)?,
        upper: upper_bound_continuum(curve, barriers)?,
    })
}

/// Both bounds for finitely many quotes, picking the regime from the inputs:
/// with digitals the barriers must be quoted, without them they must not be.
pub fn finite_bounds(
    quotes: &CallQuoteSet,
    digitals: Option<&DigitalQuotes>,
    barriers: &Barriers,
) -> Result<BoundResult> {
    let lower = lower_bound_finite(quotes, barriers)?;
    match digitals {
        Some(d) if !d.is_empty() => Ok(BoundResult {
            regime: Regime::FiniteWithDigitals,
            lower,
            upper: upper_bound_finite_digitals(quotes, d, barriers)?,
        }),
        _ => Ok(BoundResult { regime: Regime::Finite, lower, upper: upper_bound_finite(quotes, barriers)? }),
    }
}

/// Barrier pairs on which to evaluate the bound surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierGrid {
    pub lowers: Vec<f64>,
    pub uppers: Vec<f64>,
}

impl BarrierGrid {
    /// `n` evenly spaced lower barriers on `[a, S0]` and upper barriers on
    /// `[S0, z]`, where `[a, z]` is the support of `mu`.
    pub fn spanning(mu: &ImpliedMeasure, n: usize) -> Self {
        let (a, z) = mu.support();
        let s0 = mu.spot;
        let lin = |x0: f64, x1: f64| -> Vec<f64> {
            if n == 1 {
                return vec![x0];
            }
            (0..n).map(|t| if t + 1 == n { x1 } else { x0 + (x1 - x0) * t as f64 / (n - 1) as f64 }).collect()
        };
        BarrierGrid { lowers: lin(a, s0), uppers: lin(s0, z) }
    }
}

/// Lower and upper bound surfaces, row-major in `(lower, upper)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PSurface {
    pub lowers: Vec<f64>,
    pub uppers: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PSurface {
    pub fn lower_at(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.uppers.len() + j]
    }

    pub fn upper_at(&self, i: usize, j: usize) -> f64 {
        self.upper[i * self.uppers.len() + j]
    }
}

/// Rounds to the nearest multiple of 2^-40. Bounds that agree in exact
/// arithmetic but come from different hedges can differ in the last bits;
/// on this grid they compare equal, and rounding keeps every order.
fn snap(x: f64) -> f64 {
    const Q: f64 = (1u64 << 40) as f64;
    (x * Q).round() / Q
}

/// Bound surfaces of `P(b < min, max < b̄)` over all martingales with terminal law `mu`.
///
/// Nodes touching the spot give 0; when the support lies in `[b, b̄]` both
/// bounds equal `mu((b, b̄))`, which is 1 if the support is strictly inside.
/// The lower surface uses the exhaustive pair search over atoms, which
/// equals the inverse-barycentre bracket. Interior values are reported on a
/// 2^-40 grid.
pub fn p_surface(mu: &ImpliedMeasure, grid: &BarrierGrid) -> Result<PSurface> {
    let curve = mu.to_curve();
    let atoms: Vec<f64> = mu.locations().collect();
    let (a, z) = mu.support();
    let s0 = mu.spot;
    let nu = grid.uppers.len();
    let nodes: Vec<(f64, f64)> = grid.lowers.iter().flat_map(|&b| grid.uppers.iter().map(move |&bu| (b, bu))).collect();
    let vals: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&(b, bu)| -> Result<(f64, f64)> {
            if b >= s0 || bu <= s0 {
                return Ok((0.0, 0.0));
            }
            if b < a && bu > z {
                return Ok((1.0, 1.0));
            }
            if b <= a && bu >= z {
                // the price process cannot leave [a, z] and stays put once it reaches an end
                let m = snap(mu.mass_open(b, bu));
                return Ok((m, m));
            }
            let bars = Barriers::new(b, bu)?;
            let lo = best_pair(&atoms, &curve, &bars)?.value;
            let up = upper_continuum_with(&curve, mu, &bars)?.value;
            Ok((snap(lo), snap(up)))
        })
        .collect::<Result<_>>()?;
    debug_assert_eq!(vals.len(), grid.lowers.len() * nu);
    Ok(PSurface {
        lowers: grid.lowers.clone(),
        uppers: grid.uppers.clone(),
        lower: vals.iter().map(|v| v.0).collect(),
        upper: vals.iter().map(|v| v.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_atom() -> ImpliedMeasure {
        ImpliedMeasure::new(2.0, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)]).unwrap()
    }

    fn four_atom() -> ImpliedMeasure {
        ImpliedMeasure::new(2.0, vec![(1.0, 0.1), (1.8, 0.4), (2.2, 0.4), (3.0, 0.1)]).unwrap()
    }

    #[test]
    fn three_atom_upper_is_half() {
        let ub = upper_bound_continuum(&three_atom().to_curve(), &Barriers::new(1.5, 2.5).unwrap()).unwrap();
        assert!((ub.value - 0.5).abs() < 1e-12);
        assert_eq!(ub.term, UpperTerm::I);
    }

    #[test]
    fn two_point_upper_is_zero() {
        let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let ub = upper_bound_continuum(&mu.to_curve(), &Barriers::new(1.5, 2.5).unwrap()).unwrap();
        assert_eq!(ub.value, 0.0);
    }

    #[test]
    fn dirac_bounds_are_one() {
        let mu = ImpliedMeasure::dirac(2.0);
        let r = continuum_bounds(&mu.to_curve(), &Barriers::new(1.5, 2.5).unwrap()).unwrap();
        assert_eq!(r.upper.value, 1.0);
        assert!((r.lower.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_atom_lower_is_eleven_fifteenths() {
        let lb = lower_bound_continuum(&four_atom().to_curve(), &Barriers::new(1.2, 2.8).unwrap()).unwrap();
        assert!((lb.value - 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(lb.strikes, Some((1.8, 2.2)));
        assert!(lb.notes.iter().any(|n| n.contains("open interval")));
    }

    #[test]
    fn three_atom_lower_is_zero() {
        let lb = lower_bound_continuum(&three_atom().to_curve(), &Barriers::new(1.5, 2.5).unwrap()).unwrap();
        assert_eq!(lb.value, 0.0);
    }

    #[test]
    fn outside_support_upper_is_one() {
        let ub = upper_bound_continuum(&three_atom().to_curve(), &Barriers::new(0.5, 3.5).unwrap()).unwrap();
        assert_eq!(ub.value, 1.0);
    }

    #[test]
    fn layout_rejects_sparse_strikes() {
        let q = four_atom().to_quotes(&[1.0, 1.8, 2.2, 3.0]).unwrap();
        let err = upper_bound_finite(&q, &Barriers::new(1.5, 2.6).unwrap()).unwrap_err();
        assert!(matches!(err, DntError::Layout(_)));
    }

    #[test]
    fn finite_lower_matches_continuum_on_atoms() {
        let mu = four_atom();
        let q = mu.to_atom_quotes().unwrap();
        let bars = Barriers::new(1.2, 2.8).unwrap();
        let lb = lower_bound_finite(&q, &bars).unwrap();
        assert!((lb.value - 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(lb.strikes, Some((1.8, 2.2)));
    }
}
