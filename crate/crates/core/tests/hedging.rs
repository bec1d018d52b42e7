use dnt_core::embedding::Path;
use dnt_core::hedging::*;
use dnt_core::market::{Barriers, ImpliedMeasure, QuotedMarket};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random continuous paths from `s0`; some points are snapped exactly onto
/// the given levels so that touching is exercised, not just crossing.
fn random_paths(s0: f64, n: usize, levels: &[f64], seed: u64) -> Vec<Path> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let steps = rng.random_range(1..200);
            let vol = rng.random_range(0.01..0.3);
            let mut v = vec![s0];
            let mut x = s0;
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                x = (x + vol * z).max(0.0);
                if rng.random::<f64>() < 0.05 {
                    x = levels[rng.random_range(0..levels.len())];
                }
                v.push(x);
            }
            Path::from_values(v, 1.0 / steps as f64)
        })
        .collect()
}

fn violations(h: &HedgePortfolio, paths: &[Path], bars: &Barriers, superhedge: bool) -> usize {
    paths
        .iter()
        .filter(|p| {
            let v = h.evaluate_on_path(p);
            let d = dnt_payoff(p, bars);
            if superhedge {
                v < d - 1e-12
            } else {
                v > d + 1e-12
            }
        })
        .count()
}

#[test]
fn continuum_hedges_dominate_pathwise() {
    let bars = Barriers::new(1.5, 2.5).unwrap();
    let levels = [1.0, 1.5, 1.8, 2.0, 2.2, 2.5, 3.0];
    let paths = random_paths(2.0, 10_000, &levels, 11);
    let mut supers = vec![build_superhedge_i(&bars)];
    for k in [1.6, 2.0, 2.5, 3.0] {
        supers.push(build_superhedge_ii(k, &bars).unwrap());
    }
    for k in [1.0, 1.5, 2.0, 2.4] {
        supers.push(build_superhedge_iii(k, &bars).unwrap());
    }
    for h in &supers {
        assert_eq!(violations(h, &paths, &bars, true), 0, "{}", h.label);
    }
    let mut subs = vec![build_subhedge_i()];
    for (a, b) in [(1.6, 2.4), (2.0, 2.0), (1.8, 2.2), (1.51, 2.49)] {
        subs.push(build_subhedge_ii(a, b, &bars).unwrap());
    }
    for h in &subs {
        assert_eq!(violations(h, &paths, &bars, false), 0, "{}", h.label);
    }
}

#[test]
fn finite_superhedges_dominate_pathwise() {
    let mu = ImpliedMeasure::new(
        2.0,
        vec![(1.0, 0.05), (1.4, 0.1), (1.7, 0.2), (2.0, 0.3), (2.3, 0.2), (2.6, 0.1), (3.0, 0.05)],
    )
    .unwrap();
    let q = mu.to_atom_quotes().unwrap();
    let bars = Barriers::new(1.55, 2.45).unwrap();
    let hs = build_finite_superhedges(&q, &bars).unwrap();
    assert!(hs.len() > 4);
    let paths = random_paths(2.0, 10_000, &[1.4, 1.55, 1.7, 2.3, 2.45, 2.6], 12);
    for h in &hs {
        assert_eq!(violations(h, &paths, &bars, true), 0, "{}", h.label);
    }
}

#[test]
fn digital_superhedges_dominate_the_digital() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.2), (1.6, 0.3), (2.4, 0.3), (3.0, 0.2)]).unwrap();
    let q = mu.to_atom_quotes().unwrap();
    let (x1, x2) = build_digital_superhedges(&q, 1.8).unwrap();
    let (y1, y2) = build_digital_put_superhedges(&q, 2.2).unwrap();
    for k in 0..=400 {
        let s = k as f64 * 0.01;
        for x in [&x1, &x2] {
            assert!(x.static_payoff(s) >= f64::from(u8::from(s > 1.8)) - 1e-12, "{} at {s}", x.label);
        }
        for y in [&y1, &y2] {
            assert!(y.static_payoff(s) >= f64::from(u8::from(s < 2.2)) - 1e-12, "{} at {s}", y.label);
        }
    }
}

#[test]
fn superhedge_prices_exceed_the_model_price() {
    // the direct model stopping at once on the atoms prices the option at mu(b, b̄)
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)]).unwrap();
    let bars = Barriers::new(1.5, 2.5).unwrap();
    let curve = mu.to_curve();
    let model_price = mu.mass_open(1.5, 2.5);
    for h in
        [build_superhedge_i(&bars), build_superhedge_ii(2.0, &bars).unwrap(), build_superhedge_iii(2.0, &bars).unwrap()]
    {
        assert!(h.cost(&curve).unwrap() >= model_price - 1e-12, "{}", h.label);
    }
}

#[test]
fn quoted_market_prices_finite_hedges() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.2), (1.6, 0.3), (2.4, 0.3), (3.0, 0.2)]).unwrap();
    let q = mu.to_atom_quotes().unwrap();
    let m = QuotedMarket::new(q.clone(), Default::default());
    let (x1, _) = build_digital_superhedges(&q, 1.8).unwrap();
    // call spread over (1.0, 1.6) scaled by 1/0.6
    let expect = (mu.call(1.0) - mu.call(1.6)) / 0.6;
    assert!((x1.cost(&m).unwrap() - expect).abs() < 1e-14);
}
