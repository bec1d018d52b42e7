use dnt_core::arbitrage::*;
use dnt_core::market::*;

fn quotes(pairs: &[(f64, f64)]) -> CallQuoteSet {
    CallQuoteSet::from_pairs(pairs[0].1, pairs, None).unwrap()
}

#[test]
fn flat_positive_segment_is_weak_with_pair_witness() {
    let r = check_quotes(&quotes(&[(0.0, 2.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]));
    assert_eq!(r.verdict, Verdict::Weak);
    let Witness::Conditional(cases) = &r.witness else { panic!("{r}") };
    let strikes: Vec<f64> = cases[0].1.options.iter().map(|l| l.strike).collect();
    assert_eq!(strikes, vec![1.0, 2.0]);
}

#[test]
fn flat_positive_tail_is_wflvr_only() {
    let c = CallCurve::new(2.0, vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.3], 0.0).unwrap();
    let r = check_curve(&c);
    assert_eq!(r.verdict, Verdict::Wflvr);
    assert_ne!(r.verdict, Verdict::ModelFree);
}

#[test]
fn broken_butterfly_is_model_free() {
    let q = quotes(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.7), (3.0, 0.2)]);
    let r = check_quotes(&q);
    assert_eq!(r.verdict, Verdict::ModelFree);
    let p = r.portfolio().unwrap();
    let m = QuotedMarket::new(q, DigitalQuotes::default());
    assert!(p.cost(&m).unwrap() < 0.0);
    for k in 0..=400 {
        assert!(p.static_payoff(k as f64 * 0.01) >= -1e-12);
    }
}

/// Calls with C(b) on the secant through the next two strikes.
fn secant_fixture() -> (CallQuoteSet, Barriers) {
    let q = quotes(&[(0.0, 2.0), (1.0, 1.1), (1.5, 0.75), (2.0, 0.5), (2.5, 0.25), (3.0, 0.1), (4.0, 0.0)]);
    (q, Barriers::new(1.5, 2.5).unwrap())
}

#[test]
fn secant_equality_with_mispriced_digital_is_weak() {
    let (q, bars) = secant_fixture();
    let d = DigitalQuotes::new(Some((1.5, 0.6)), None).unwrap();
    let r = check_digitals(&q, &d, &bars).unwrap();
    assert_eq!(r.verdict, Verdict::Weak, "{r}");
    let Witness::Conditional(cases) = &r.witness else { panic!("{r}") };
    assert_eq!(cases.len(), 2);
    let m = QuotedMarket::new(q, d);
    // both branches cost at most zero; the butterfly is free
    for (_, p) in cases {
        assert!(p.cost(&m).unwrap() <= 1e-12, "{p}");
    }
}

#[test]
fn secant_equality_with_pinned_digital_is_clean() {
    let (q, bars) = secant_fixture();
    let d = DigitalQuotes::new(Some((1.5, 0.5)), None).unwrap();
    assert_eq!(check_digitals(&q, &d, &bars).unwrap().verdict, Verdict::None);
}

#[test]
fn digital_outside_call_spread_bounds_is_model_free() {
    let (q, bars) = secant_fixture();
    let d = DigitalQuotes::new(Some((1.5, 0.8)), None).unwrap();
    let r = check_digitals(&q, &d, &bars).unwrap();
    assert_eq!(r.verdict, Verdict::ModelFree);
    let m = QuotedMarket::new(q, d);
    assert!(r.portfolio().unwrap().cost(&m).unwrap() < 0.0);
}

#[test]
fn implied_digitals_are_consistent() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.1), (1.5, 0.2), (2.0, 0.4), (2.5, 0.2), (3.0, 0.1)]).unwrap();
    let bars = Barriers::new(1.5, 2.5).unwrap();
    let q = mu.to_atom_quotes().unwrap();
    let r = check_digitals(&q, &mu.digitals(&bars), &bars).unwrap();
    assert_eq!(r.verdict, Verdict::None, "{r}");
}
