use dnt_core::arbitrage::{check_digitals, Verdict};
use dnt_core::bounds::*;
use dnt_core::market::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense7() -> ImpliedMeasure {
    ImpliedMeasure::new(2.0, vec![(1.0, 0.05), (1.4, 0.1), (1.7, 0.2), (2.0, 0.3), (2.3, 0.2), (2.6, 0.1), (3.0, 0.05)])
        .unwrap()
}

fn half_grid() -> Vec<f64> {
    (0..=7).map(|i| i as f64 * 0.5).collect()
}

/// Re-prices the call-only bound in the market extended by the barrier quotes it implies.
fn extended_market_bound(q: &CallQuoteSet, bars: &Barriers, ub: &UpperBound) -> f64 {
    let syn = synthetic_barrier_prices(q, bars).unwrap();
    let (mut cb, mut dl, mut cbu, mut du) = (syn.call_lower, syn.digital_lower, syn.call_upper, syn.digital_upper);
    if let Some(a) = &ub.adjustment {
        match a.side {
            AdjustedSide::Upper => (cbu, du) = (a.call, a.digital),
            AdjustedSide::Lower => (cb, dl) = (a.call, a.digital),
        }
    }
    let mut pairs: Vec<(f64, f64)> = q.strikes.iter().copied().zip(q.prices.iter().copied()).collect();
    pairs.push((bars.lower, cb));
    pairs.push((bars.upper, cbu));
    let ext = CallQuoteSet::from_pairs(q.spot, &pairs, None).unwrap();
    let d = DigitalQuotes::new(Some((bars.lower, dl)), Some((bars.upper, du))).unwrap();
    assert_eq!(check_digitals(&ext, &d, bars).unwrap().verdict, Verdict::None);
    upper_bound_finite_digitals(&ext, &d, bars).unwrap().value
}

#[test]
fn dense_grid_finite_bounds_contain_continuum_bounds() {
    let mu = dense7();
    let q = mu.to_atom_quotes().unwrap();
    let bars = Barriers::new(1.55, 2.45).unwrap();
    let fin = finite_bounds(&q, None, &bars).unwrap();
    assert_eq!(fin.regime, Regime::Finite);
    assert_ne!(fin.upper.attainability, Attainability::NotEstablished, "{fin}");
    let cont = continuum_bounds(&mu.to_curve(), &bars).unwrap();
    assert!(fin.upper.value >= cont.upper.value - 1e-12);
    assert!(fin.lower.value <= cont.lower.value + 1e-12);
    assert!(fin.lower.value <= fin.upper.value);
}

#[test]
fn upper_side_adjustment_matches_extended_market() {
    let mu = ImpliedMeasure::from_atoms(vec![
        (0.75, 2.0 / 7.0),
        (2.0, 1.0 / 7.0),
        (2.25, 2.0 / 7.0),
        (3.0, 0.25),
        (3.5, 1.0 / 28.0),
    ])
    .unwrap();
    let q = mu.to_quotes(&half_grid()).unwrap();
    let bars = Barriers::new(1.75, 2.75).unwrap();
    let ub = upper_bound_finite(&q, &bars).unwrap();
    let adj = ub.adjustment.expect("upper-side adjustment");
    assert_eq!(adj.side, AdjustedSide::Upper);
    assert!(adj.holds());
    assert_eq!(ub.term, UpperTerm::II { strike: 3.0 });
    assert!((ub.value - 0.5).abs() < 1e-12);
    assert_eq!(ub.attainability, Attainability::Attained);
    assert!((extended_market_bound(&q, &bars, &ub) - ub.value).abs() < 1e-12);
}

#[test]
fn lower_side_adjustment_matches_extended_market() {
    let mu = ImpliedMeasure::from_atoms(vec![(0.5, 0.05), (1.25, 0.2), (2.0, 0.1), (2.25, 0.2), (3.75, 0.45)]).unwrap();
    let q = mu.to_quotes(&half_grid()).unwrap();
    let bars = Barriers::new(1.75, 2.75).unwrap();
    let ub = upper_bound_finite(&q, &bars).unwrap();
    let adj = ub.adjustment.expect("lower-side adjustment");
    assert_eq!(adj.side, AdjustedSide::Lower);
    assert_eq!(ub.term, UpperTerm::III { strike: 2.0 });
    assert!((ub.value - 0.25).abs() < 1e-12);
    assert!((extended_market_bound(&q, &bars, &ub) - ub.value).abs() < 1e-12);
}

#[test]
fn unadjusted_bound_matches_extended_market() {
    let mu = dense7();
    let q = mu.to_atom_quotes().unwrap();
    let bars = Barriers::new(1.55, 2.45).unwrap();
    let ub = upper_bound_finite(&q, &bars).unwrap();
    if ub.adjustment.is_none() {
        assert!((extended_market_bound(&q, &bars, &ub) - ub.value).abs() < 1e-12);
    }
}

#[test]
fn sparse_grid_is_flagged_not_established() {
    let mu = dense7();
    let q = mu.to_quotes(&[0.0, 1.0, 1.4, 1.7, 2.6, 3.0]).unwrap();
    let bars = Barriers::new(1.55, 2.45).unwrap();
    let ub = upper_bound_finite(&q, &bars).unwrap();
    assert_eq!(ub.attainability, Attainability::NotEstablished);
    assert!(ub.notes.iter().any(|n| n.contains("strike layout")));
}

#[test]
fn digitals_variant_equals_continuum_on_atom_grid() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.1), (1.5, 0.2), (2.0, 0.4), (2.5, 0.2), (3.0, 0.1)]).unwrap();
    let bars = Barriers::new(1.5, 2.5).unwrap();
    let q = mu.to_atom_quotes().unwrap();
    let d = mu.digitals(&bars);
    let fin = finite_bounds(&q, Some(&d), &bars).unwrap();
    assert_eq!(fin.regime, Regime::FiniteWithDigitals);
    let cont = continuum_bounds(&mu.to_curve(), &bars).unwrap();
    assert!((fin.upper.value - cont.upper.value).abs() < 1e-12, "{fin}\n{cont}");
    assert!((fin.lower.value - cont.lower.value).abs() < 1e-12);
}

#[test]
fn bound_value_is_the_hedge_cost() {
    let mu = dense7();
    let curve = mu.to_curve();
    let bars = Barriers::new(1.55, 2.45).unwrap();
    let r = continuum_bounds(&curve, &bars).unwrap();
    assert_eq!(r.upper.hedge.cost(&curve).unwrap(), r.upper.value);
    assert_eq!(r.lower.hedge.cost(&curve).unwrap(), r.lower.value);
}

fn random_measure(rng: &mut ChaCha8Rng) -> ImpliedMeasure {
    let n = rng.random_range(2..=6);
    let atoms: Vec<(f64, f64)> =
        (0..n).map(|_| (rng.random_range(1..40) as f64 * 0.1, rng.random_range(1..10) as f64)).collect();
    let t: f64 = atoms.iter().map(|a| a.1).sum();
    ImpliedMeasure::from_atoms(atoms.into_iter().map(|(x, p)| (x, p / t)).collect()).unwrap()
}

fn check_surface(mu: &ImpliedMeasure, n: usize) {
    let s = p_surface(mu, &BarrierGrid::spanning(mu, n)).unwrap();
    let (a, z) = mu.support();
    let (nl, nu) = (s.lowers.len(), s.uppers.len());
    for i in 0..nl {
        for j in 0..nu {
            let (lo, up) = (s.lower_at(i, j), s.upper_at(i, j));
            assert!(lo <= up, "lower above upper at ({i},{j})");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&up));
            if s.lowers[i] >= mu.spot || s.uppers[j] <= mu.spot {
                assert_eq!((lo, up), (0.0, 0.0));
            }
            if s.lowers[i] < a && s.uppers[j] > z {
                assert_eq!((lo, up), (1.0, 1.0));
            }
            // raising b lowers the price, raising b̄ raises it
            if i + 1 < nl {
                assert!(s.lower_at(i + 1, j) <= lo && s.upper_at(i + 1, j) <= up, "row {i} col {j}");
            }
            if j + 1 < nu {
                assert!(s.lower_at(i, j + 1) >= lo && s.upper_at(i, j + 1) >= up, "row {i} col {j}");
            }
        }
    }
}

#[test]
fn p_surface_properties_on_random_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let mu = random_measure(&mut rng);
        if mu.is_degenerate() {
            continue;
        }
        check_surface(&mu, 40);
    }
}

#[test]
fn p_surface_of_a_dirac_is_zero_inside_and_one_outside() {
    let mu = ImpliedMeasure::dirac(2.0);
    let grid = BarrierGrid { lowers: vec![1.0, 2.0], uppers: vec![2.0, 3.0] };
    let s = p_surface(&mu, &grid).unwrap();
    assert_eq!(s.lower, vec![0.0, 1.0, 0.0, 0.0]);
    assert_eq!(s.upper, vec![0.0, 1.0, 0.0, 0.0]);
}
