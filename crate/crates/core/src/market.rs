//! Quote data, piecewise-linear call curves and implied terminal laws.
//!
//! Interest rates and dividends are zero, so put prices follow from
//! `P(K) = K - S0 + C(K)` and `C(0) = S0`.

use std::io::BufRead;

use crate::arbitrage::{check_curve, check_quotes, Verdict};
use crate::{price_tol, DntError, Result};

/// Finite call quote table. `strikes[0] == 0` and `prices[0] == spot`.
#[derive(Debug, Clone, PartialEq)]
pub struct CallQuoteSet {
    pub spot: f64,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
    /// Year fraction. Carried along but never used by the bound formulas.
    pub maturity: Option<f64>,
}

impl CallQuoteSet {
    /// Validating constructor; the strike list must already start at 0.
    pub fn new(spot: f64, strikes: Vec<f64>, prices: Vec<f64>, maturity: Option<f64>) -> Result<Self> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(DntError::invalid(format!("spot must be positive, got {spot}")));
        }
        if strikes.len() != prices.len() {
            return Err(DntError::invalid("strike and price lists differ in length"));
        }
        if strikes.len() < 2 {
            return Err(DntError::invalid("need at least one quoted strike besides 0"));
        }
        if strikes[0] != 0.0 {
            return Err(DntError::invalid("strikes must start at 0"));
        }
        if (prices[0] - spot).abs() > price_tol(spot) {
            return Err(DntError::invalid(format!("call at strike 0 must equal the spot {spot}, got {}", prices[0])));
        }
        for w in strikes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(DntError::invalid("strikes must be finite and strictly increasing"));
            }
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(DntError::invalid(format!("call prices must be non-negative, got {p}")));
        }
        if let Some(t) = maturity {
            if !(t.is_finite() && t > 0.0) {
                return Err(DntError::invalid(format!("maturity must be positive, got {t}")));
            }
        }
        Ok(CallQuoteSet { spot, strikes, prices, maturity })
    }

    /// Builds a quote set from unsorted `(strike, price)` pairs, prepending `(0, spot)`
    /// when strike 0 is missing.
    pub fn from_pairs(spot: f64, pairs: &[(f64, f64)], maturity: Option<f64>) -> Result<Self> {
        let mut v = pairs.to_vec();
        if v.iter().any(|(k, c)| k.is_nan() || c.is_nan()) {
            return Err(DntError::invalid("NaN in quotes"));
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in v.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DntError::invalid(format!("duplicate strike {}", w[0].0)));
            }
        }
        if v.first().map(|p| p.0) != Some(0.0) {
            v.insert(0, (0.0, spot));
        }
        let (strikes, prices) = v.into_iter().unzip();
        Self::new(spot, strikes, prices, maturity)
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    /// Index of a quoted strike, matched with a relative tolerance.
    pub fn index_of(&self, k: f64) -> Option<usize> {
        self.strikes.iter().position(|&s| same_strike(s, k))
    }

    pub fn call_at(&self, k: f64) -> Option<f64> {
        self.index_of(k).map(|i| self.prices[i])
    }

    pub fn put_at(&self, k: f64) -> Option<f64> {
        self.call_at(k).map(|c| k - self.spot + c)
    }

    /// Index of the last strike `<= x`.
    pub fn bracket(&self, x: f64) -> usize {
        self.strikes.partition_point(|&k| k <= x).saturating_sub(1)
    }
}

pub(crate) fn same_strike(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Digital quotes at the barriers: `lower = (b, price of 1{S_T > b})`,
/// `upper = (b̄, price of 1{S_T >= b̄})`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DigitalQuotes {
    pub lower: Option<(f64, f64)>,
    pub upper: Option<(f64, f64)>,
}

impl DigitalQuotes {
    pub fn new(lower: Option<(f64, f64)>, upper: Option<(f64, f64)>) -> Result<Self> {
        for (name, q) in [("lower", lower), ("upper", upper)] {
            if let Some((k, p)) = q {
                if !(k.is_finite() && k > 0.0) {
                    return Err(DntError::invalid(format!("{name} digital strike must be positive")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(DntError::invalid(format!("{name} digital price {p} outside [0,1]")));
                }
            }
        }
        Ok(DigitalQuotes { lower, upper })
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }
}

/// Barrier pair `0 < lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barriers {
    pub lower: f64,
    pub upper: f64,
}

impl Barriers {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower > 0.0 && lower < upper) {
            return Err(DntError::invalid(format!("barriers must satisfy 0 < b < b̄, got ({lower}, {upper})")));
        }
        Ok(Barriers { lower, upper })
    }

    /// Checks `b < spot < b̄`.
    pub fn check_spot(&self, spot: f64) -> Result<()> {
        if self.lower < spot && spot < self.upper {
            Ok(())
        } else {
            Err(DntError::invalid(format!(
                "spot {spot} must lie strictly between the barriers ({}, {})",
                self.lower, self.upper
            )))
        }
    }

    /// Double no-touch payoff for a path summarised by its extremes.
    #[inline]
    pub fn survives(&self, min: f64, max: f64) -> bool {
        min > self.lower && max < self.upper
    }
}

/// Continuous piecewise-linear call price function, linear beyond the last
/// knot with slope `right_tail`.
#[derive(Debug, Clone, PartialEq)]
pub struct CallCurve {
    pub spot: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub right_tail: f64,
}

impl CallCurve {
    pub fn new(spot: f64, knots: Vec<f64>, values: Vec<f64>, right_tail: f64) -> Result<Self> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(DntError::invalid("spot must be positive"));
        }
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(DntError::invalid("curve needs at least two knots with one value each"));
        }
        if knots[0] != 0.0 {
            return Err(DntError::invalid("curve knots must start at 0"));
        }
        if (values[0] - spot).abs() > price_tol(spot) {
            return Err(DntError::invalid("curve value at 0 must equal the spot"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DntError::invalid("curve knots must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) || !right_tail.is_finite() {
            return Err(DntError::invalid("curve values must be finite"));
        }
        Ok(CallCurve { spot, knots, values, right_tail })
    }

    /// Straight-line interpolation of quotes with the given tail slope.
    pub fn from_quotes(quotes: &CallQuoteSet, right_tail: f64) -> Result<Self> {
        Self::new(quotes.spot, quotes.strikes.clone(), quotes.prices.clone(), right_tail)
    }

    fn segment_slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.knots[i + 1] - self.knots[i])
    }

    /// Slopes of the `n - 1` interior segments.
    pub fn slopes(&self) -> Vec<f64> {
        (0..self.knots.len() - 1).map(|i| self.segment_slope(i)).collect()
    }

    pub fn last_knot(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn call(&self, k: f64) -> f64 {
        let n = self.knots.len();
        if k >= self.knots[n - 1] {
            return self.values[n - 1] + self.right_tail * (k - self.knots[n - 1]);
        }
        if k <= 0.0 {
            return self.values[0] - k;
        }
        let i = self.knots.partition_point(|&x| x <= k) - 1;
        let w = (k - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    pub fn put(&self, k: f64) -> f64 {
        k - self.spot + self.call(k)
    }

    /// Right derivative `C'(k+)`.
    pub fn slope_right(&self, k: f64) -> f64 {
        let n = self.knots.len();
        if k >= self.knots[n - 1] {
            return self.right_tail;
        }
        if k < 0.0 {
            return -1.0;
        }
        let i = self.knots.partition_point(|&x| x <= k) - 1;
        self.segment_slope(i)
    }

    /// Left derivative `C'(k-)`, with `C'(0-) = -1`.
    pub fn slope_left(&self, k: f64) -> f64 {
        let n = self.knots.len();
        if k <= 0.0 {
            return -1.0;
        }
        if k > self.knots[n - 1] {
            return self.right_tail;
        }
        let i = self.knots.partition_point(|&x| x < k);
        self.segment_slope(i - 1)
    }

    /// Strikes where the slope changes (all interior knots, including the last one).
    pub fn kinks(&self) -> Vec<f64> {
        self.knots[1..].to_vec()
    }
}

/// Atomic terminal law. Atoms are sorted, distinct and strictly positive in mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedMeasure {
    pub spot: f64,
    pub atoms: Vec<(f64, f64)>,
}

const MASS_TOL: f64 = 1e-9;

impl ImpliedMeasure {
    /// Validates mass one and mean `spot`; merges coincident atoms.
    pub fn new(spot: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        let atoms = normalise_atoms(atoms)?;
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(DntError::invalid(format!("atom masses sum to {mass}, not 1")));
        }
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        if (mean - spot).abs() > MASS_TOL * spot.max(1.0) {
            return Err(DntError::invalid(format!("measure mean {mean} differs from spot {spot}")));
        }
        Ok(ImpliedMeasure { spot, atoms })
    }

    /// Builds the measure with the spot set to its mean.
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let atoms = normalise_atoms(atoms)?;
        let mean = atoms.iter().map(|a| a.0 * a.1).sum();
        Self::new(mean, atoms)
    }

    /// Point mass at `spot`.
    pub fn dirac(spot: f64) -> Self {
        ImpliedMeasure { spot, atoms: vec![(spot, 1.0)] }
    }

    pub fn is_degenerate(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn locations(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.0 * a.1).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Smallest and largest atom.
    pub fn support(&self) -> (f64, f64) {
        (self.atoms[0].0, self.atoms[self.atoms.len() - 1].0)
    }

    pub fn call(&self, k: f64) -> f64 {
        self.atoms.iter().map(|&(x, p)| p * (x - k).max(0.0)).sum()
    }

    pub fn put(&self, k: f64) -> f64 {
        self.atoms.iter().map(|&(x, p)| p * (k - x).max(0.0)).sum()
    }

    pub fn mass_gt(&self, k: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 > k).map(|a| a.1).sum()
    }

    pub fn mass_ge(&self, k: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 >= k).map(|a| a.1).sum()
    }

    pub fn mass_lt(&self, k: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 < k).map(|a| a.1).sum()
    }

    pub fn mass_le(&self, k: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 <= k).map(|a| a.1).sum()
    }

    /// Mass of the open interval `(lo, hi)`.
    pub fn mass_open(&self, lo: f64, hi: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 > lo && a.0 < hi).map(|a| a.1).sum()
    }

    /// Total-variation distance between two atomic laws.
    pub fn tv_distance(&self, other: &ImpliedMeasure) -> f64 {
        tv_between(&self.atoms, &other.atoms)
    }

    /// Exact call curve with a knot at 0 and at every atom.
    pub fn to_curve(&self) -> CallCurve {
        let mut knots = vec![0.0];
        knots.extend(self.locations().filter(|&x| x > 0.0));
        if knots.len() == 1 {
            knots.push(self.spot.max(1.0));
        }
        let mut values: Vec<f64> = knots.iter().map(|&k| self.call(k)).collect();
        values[0] = self.spot;
        CallCurve { spot: self.spot, knots, values, right_tail: 0.0 }
    }

    /// Call quotes at the given strikes (0 is added if missing).
    pub fn to_quotes(&self, strikes: &[f64]) -> Result<CallQuoteSet> {
        let pairs: Vec<(f64, f64)> =
            strikes.iter().map(|&k| if k == 0.0 { (0.0, self.spot) } else { (k, self.call(k)) }).collect();
        CallQuoteSet::from_pairs(self.spot, &pairs, None)
    }

    /// Quotes at every atom location plus 0.
    pub fn to_atom_quotes(&self) -> Result<CallQuoteSet> {
        let ks: Vec<f64> = self.locations().filter(|&x| x > 0.0).collect();
        self.to_quotes(&ks)
    }

    /// Digital prices at the barriers implied by this law.
    pub fn digitals(&self, barriers: &Barriers) -> DigitalQuotes {
        DigitalQuotes {
            lower: Some((barriers.lower, self.mass_gt(barriers.lower))),
            upper: Some((barriers.upper, self.mass_ge(barriers.upper))),
        }
    }
}

fn normalise_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    if atoms.is_empty() {
        return Err(DntError::invalid("measure has no atoms"));
    }
    for &(x, p) in &atoms {
        if !(x.is_finite() && x >= 0.0) {
            return Err(DntError::invalid(format!("atom location {x} must be non-negative")));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(DntError::invalid(format!("atom mass {p} must be positive")));
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, p) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += p,
            _ => out.push((x, p)),
        }
    }
    Ok(out)
}

/// Total variation between two sorted atom lists; locations matched with a
/// relative tolerance.
pub fn tv_between(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        if i < a.len() && j < b.len() && (a[i].0 - b[j].0).abs() <= 1e-9 * a[i].0.abs().max(1.0) {
            acc += (a[i].1 - b[j].1).abs();
            i += 1;
            j += 1;
        } else if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            acc += a[i].1;
            i += 1;
        } else {
            acc += b[j].1;
            j += 1;
        }
    }
    0.5 * acc
}

/// Anything that can price calls, puts and digitals.
pub trait PriceSource {
    fn spot(&self) -> f64;

    fn call(&self, k: f64) -> Result<f64>;

    fn put(&self, k: f64) -> Result<f64> {
        Ok(k - self.spot() + self.call(k)?)
    }

    /// Price of `1{S_T > k}`.
    fn digital_gt(&self, k: f64) -> Result<f64>;

    /// Price of `1{S_T >= k}`.
    fn digital_ge(&self, k: f64) -> Result<f64>;

    /// Price of `1{lo < S_T < hi}`.
    fn corridor(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(self.digital_gt(lo)? - self.digital_ge(hi)?)
    }
}

impl PriceSource for CallCurve {
    fn spot(&self) -> f64 {
        self.spot
    }
    fn call(&self, k: f64) -> Result<f64> {
        Ok(CallCurve::call(self, k))
    }
    fn digital_gt(&self, k: f64) -> Result<f64> {
        Ok(-self.slope_right(k))
    }
    fn digital_ge(&self, k: f64) -> Result<f64> {
        Ok(-self.slope_left(k))
    }
}

impl PriceSource for ImpliedMeasure {
    fn spot(&self) -> f64 {
        self.spot
    }
    fn call(&self, k: f64) -> Result<f64> {
        Ok(ImpliedMeasure::call(self, k))
    }
    fn put(&self, k: f64) -> Result<f64> {
        Ok(ImpliedMeasure::put(self, k))
    }
    fn digital_gt(&self, k: f64) -> Result<f64> {
        Ok(self.mass_gt(k))
    }
    fn digital_ge(&self, k: f64) -> Result<f64> {
        Ok(self.mass_ge(k))
    }
    fn corridor(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(self.mass_open(lo, hi))
    }
}

/// A finite market: quoted calls, optional digitals and optional synthetic
/// prices for strikes that are not quoted (such as extension prices at the
/// barriers). Anything else is unpriced.
#[derive(Debug, Clone)]
pub struct QuotedMarket {
    pub quotes: CallQuoteSet,
    pub digitals: DigitalQuotes,
    extra_calls: Vec<(f64, f64)>,
    extra_gt: Vec<(f64, f64)>,
    extra_ge: Vec<(f64, f64)>,
}

impl QuotedMarket {
    pub fn new(quotes: CallQuoteSet, digitals: DigitalQuotes) -> Self {
        QuotedMarket { quotes, digitals, extra_calls: vec![], extra_gt: vec![], extra_ge: vec![] }
    }

    pub fn with_call(mut self, k: f64, price: f64) -> Self {
        self.extra_calls.push((k, price));
        self
    }

    pub fn with_digital_gt(mut self, k: f64, price: f64) -> Self {
        self.extra_gt.push((k, price));
        self
    }

    pub fn with_digital_ge(mut self, k: f64, price: f64) -> Self {
        self.extra_ge.push((k, price));
        self
    }
}

fn lookup(table: &[(f64, f64)], k: f64) -> Option<f64> {
    table.iter().find(|e| same_strike(e.0, k)).map(|e| e.1)
}

impl PriceSource for QuotedMarket {
    fn spot(&self) -> f64 {
        self.quotes.spot
    }

    fn call(&self, k: f64) -> Result<f64> {
        self.quotes
            .call_at(k)
            .or_else(|| lookup(&self.extra_calls, k))
            .ok_or_else(|| DntError::Unpriced(format!("call at strike {k}")))
    }

    fn digital_gt(&self, k: f64) -> Result<f64> {
        self.digitals
            .lower
            .filter(|d| same_strike(d.0, k))
            .map(|d| d.1)
            .or_else(|| lookup(&self.extra_gt, k))
            .ok_or_else(|| DntError::Unpriced(format!("digital 1{{S_T > {k}}}")))
    }

    fn digital_ge(&self, k: f64) -> Result<f64> {
        self.digitals
            .upper
            .filter(|d| same_strike(d.0, k))
            .map(|d| d.1)
            .or_else(|| lookup(&self.extra_ge, k))
            .ok_or_else(|| DntError::Unpriced(format!("digital 1{{S_T >= {k}}}")))
    }
}

fn parse_num(s: &str, row: usize, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| DntError::Parse { row, msg: format!("cannot parse {what} from {:?}", s.trim()) })
}

/// Non-empty, non-comment lines with their 1-based row numbers.
fn content_lines<R: BufRead>(src: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            out.push((i + 1, body.to_string()));
        }
    }
    Ok(out)
}

/// Reads a quote file: `spot,S0[,T]` followed by `strike,price` rows.
pub fn load_quotes<R: BufRead>(src: R) -> Result<CallQuoteSet> {
    let lines = content_lines(src)?;
    let Some((hrow, header)) = lines.first() else {
        return Err(DntError::Parse { row: 1, msg: "missing spot header".into() });
    };
    let fields: Vec<&str> = header.split(',').collect();
    if fields[0].trim() != "spot" || !(2..=3).contains(&fields.len()) {
        return Err(DntError::Parse { row: *hrow, msg: "expected header `spot,<S0>[,<T>]`".into() });
    }
    let spot = parse_num(fields[1], *hrow, "spot")?;
    if spot <= 0.0 {
        return Err(DntError::Parse { row: *hrow, msg: "spot must be positive".into() });
    }
    let maturity = match fields.get(2) {
        Some(t) => {
            let t = parse_num(t, *hrow, "maturity")?;
            if t <= 0.0 {
                return Err(DntError::Parse { row: *hrow, msg: "maturity must be positive".into() });
            }
            Some(t)
        }
        None => None,
    };

    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (row, line) in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 2 {
            return Err(DntError::Parse { row: *row, msg: format!("expected `strike,price`, got {line:?}") });
        }
        let k = parse_num(f[0], *row, "strike")?;
        let c = parse_num(f[1], *row, "price")?;
        if k < 0.0 {
            return Err(DntError::Parse { row: *row, msg: format!("negative strike {k}") });
        }
        if c < 0.0 {
            return Err(DntError::Parse { row: *row, msg: format!("negative price {c}") });
        }
        if k == 0.0 && (c - spot).abs() > price_tol(spot) {
            return Err(DntError::Parse { row: *row, msg: format!("call at strike 0 must equal the spot {spot}") });
        }
        if pairs.iter().any(|p| p.0 == k) {
            return Err(DntError::Parse { row: *row, msg: format!("duplicate strike {k}") });
        }
        pairs.push((k, c));
    }
    if pairs.iter().all(|p| p.0 == 0.0) {
        return Err(DntError::Parse { row: lines.last().unwrap().0, msg: "no strikes quoted".into() });
    }
    CallQuoteSet::from_pairs(spot, &pairs, maturity)
}

/// Reads a digital quote file with lines `lower,<b>,<price>` and `upper,<b̄>,<price>`.
pub fn load_digitals<R: BufRead>(src: R) -> Result<DigitalQuotes> {
    let mut d = DigitalQuotes::default();
    for (row, line) in content_lines(src)? {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(DntError::Parse { row, msg: format!("expected `lower|upper,<level>,<price>`, got {line:?}") });
        }
        let k = parse_num(f[1], row, "level")?;
        let p = parse_num(f[2], row, "price")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(DntError::Parse { row, msg: format!("digital price {p} outside [0,1]") });
        }
        let slot = match f[0] {
            "lower" => &mut d.lower,
            "upper" => &mut d.upper,
            other => return Err(DntError::Parse { row, msg: format!("unknown digital side {other:?}") }),
        };
        if slot.is_some() {
            return Err(DntError::Parse { row, msg: format!("duplicate {} digital", f[0]) });
        }
        *slot = Some((k, p));
    }
    DigitalQuotes::new(d.lower, d.upper)
}

/// Straight-line extension of arbitrage-free quotes to a full call curve
/// that reaches zero.
///
/// `extras` are additional knots with an optional price override; without an
/// override the knot takes the interpolated value. If the last quote is
/// positive a terminal knot is appended at
/// `max(K_N + C_N (K_N - K_{N-1}) / (C_{N-1} - C_N), b̄ + 1)`.
pub fn extend_piecewise_linear(
    quotes: &CallQuoteSet,
    extras: &[(f64, Option<f64>)],
    upper_barrier: Option<f64>,
) -> Result<CallCurve> {
    let report = check_quotes(quotes);
    if report.verdict != Verdict::None {
        return Err(DntError::Arbitrage(Box::new(report)));
    }
    let tol = price_tol(quotes.spot);
    let mut knots = quotes.strikes.clone();
    let mut values = quotes.prices.clone();
    let n = knots.len();
    if values[n - 1] > tol {
        let (k0, k1) = (knots[n - 2], knots[n - 1]);
        let (c0, c1) = (values[n - 2], values[n - 1]);
        let mut terminal = k1 + c1 * (k1 - k0) / (c0 - c1);
        if let Some(bu) = upper_barrier {
            terminal = terminal.max(bu + 1.0);
        }
        knots.push(terminal);
        values.push(0.0);
    } else {
        values[n - 1] = 0.0;
    }
    let base = CallCurve::new(quotes.spot, knots, values, 0.0)?;

    let mut curve = base.clone();
    for &(k, over) in extras {
        if !(k.is_finite() && k > 0.0) {
            return Err(DntError::invalid(format!("extra knot {k} must be positive")));
        }
        if curve.knots.iter().any(|&x| same_strike(x, k)) {
            return Err(DntError::invalid(format!("extra knot {k} coincides with an existing knot")));
        }
        let v = over.unwrap_or_else(|| base.call(k));
        let i = curve.knots.partition_point(|&x| x < k);
        curve.knots.insert(i, k);
        curve.values.insert(i, v);
    }
    if curve.knots.last() != base.knots.last() && *curve.values.last().unwrap() != 0.0 {
        return Err(DntError::invalid("extra knot beyond the terminal knot must price at 0"));
    }
    let report = check_curve(&curve);
    if report.verdict != Verdict::None {
        return Err(DntError::Arbitrage(Box::new(report)));
    }
    Ok(curve)
}

/// Reads the terminal law off a curve: an atom at each kink with mass equal
/// to the slope jump, plus an atom at 0 of mass `1 + C'(0+)`.
pub fn implied_measure(curve: &CallCurve) -> Result<ImpliedMeasure> {
    let tol = price_tol(curve.spot);
    let last = *curve.values.last().unwrap();
    if curve.right_tail.abs() > 1e-12 || last.abs() > tol {
        return Err(DntError::NoMarketModel(format!(
            "call prices do not vanish for large strikes (last value {last}, tail slope {})",
            curve.right_tail
        )));
    }
    let slopes = curve.slopes();
    let mut atoms = Vec::with_capacity(curve.knots.len());
    let mut push = |x: f64, m: f64| -> Result<()> {
        if m < -MASS_TOL {
            return Err(DntError::Arbitrage(Box::new(check_curve(curve))));
        }
        if m > 1e-12 {
            atoms.push((x, m));
        }
        Ok(())
    };
    push(0.0, 1.0 + slopes[0])?;
    for i in 1..curve.knots.len() {
        let right = if i < slopes.len() { slopes[i] } else { curve.right_tail };
        push(curve.knots[i], right - slopes[i - 1])?;
    }
    ImpliedMeasure::new(curve.spot, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(pairs: &[(f64, f64)]) -> CallQuoteSet {
        CallQuoteSet::from_pairs(pairs[0].1, pairs, None).unwrap()
    }

    #[test]
    fn from_pairs_prepends_zero_strike() {
        let qs = CallQuoteSet::from_pairs(2.0, &[(2.0, 0.25), (1.0, 1.0)], None).unwrap();
        assert_eq!(qs.strikes, vec![0.0, 1.0, 2.0]);
        assert_eq!(qs.prices, vec![2.0, 1.0, 0.25]);
    }

    #[test]
    fn curve_interpolates_and_extrapolates() {
        let c = CallCurve::new(2.0, vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.5], -0.25).unwrap();
        assert_eq!(c.call(0.5), 1.5);
        assert_eq!(c.call(1.5), 0.75);
        assert_eq!(c.call(3.0), 0.25);
        assert_eq!(c.slope_right(1.0), -0.5);
        assert_eq!(c.slope_left(1.0), -1.0);
        assert_eq!(c.slope_left(0.0), -1.0);
        assert_eq!(c.slope_right(2.0), -0.25);
    }

    #[test]
    fn implied_measure_of_textbook_curve() {
        let qs = q(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.25), (3.0, 0.0)]);
        let mu = implied_measure(&CallCurve::from_quotes(&qs, 0.0).unwrap()).unwrap();
        assert_eq!(mu.atoms, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)]);
    }

    #[test]
    fn implied_measure_rejects_positive_tail() {
        let c = CallCurve::new(2.0, vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.3], 0.0).unwrap();
        assert!(matches!(implied_measure(&c), Err(DntError::NoMarketModel(_))));
    }

    #[test]
    fn atom_at_zero_when_slope_exceeds_minus_one() {
        // atoms {0: 0.2, 2.5: 0.8}, mean 2
        let mu = ImpliedMeasure::from_atoms(vec![(0.0, 0.2), (2.5, 0.8)]).unwrap();
        let back = implied_measure(&mu.to_curve()).unwrap();
        assert!(back.tv_distance(&mu) < 1e-15);
    }

    #[test]
    fn tv_distance_counts_unmatched_atoms() {
        let a = [(1.0, 0.5), (3.0, 0.5)];
        let b = [(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)];
        assert!((tv_between(&a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quoted_market_prices_only_what_is_quoted() {
        let qs = q(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.25), (3.0, 0.0)]);
        let m = QuotedMarket::new(qs, DigitalQuotes::default()).with_call(1.5, 0.6);
        assert_eq!(m.call(1.5).unwrap(), 0.6);
        assert_eq!(m.put(2.0).unwrap(), 0.25);
        assert!(matches!(m.call(1.7), Err(DntError::Unpriced(_))));
        assert!(matches!(m.digital_gt(1.0), Err(DntError::Unpriced(_))));
    }
}
