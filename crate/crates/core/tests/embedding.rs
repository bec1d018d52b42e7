use dnt_core::bounds::continuum_bounds;
use dnt_core::embedding::*;
use dnt_core::market::*;
use dnt_core::simulate::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_measure(rng: &mut ChaCha8Rng) -> ImpliedMeasure {
    loop {
        let n = rng.random_range(2..=5);
        let atoms: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random_range(5..35) as f64 * 0.1, rng.random_range(1..10) as f64)).collect();
        let t: f64 = atoms.iter().map(|a| a.1).sum();
        let mu = ImpliedMeasure::from_atoms(atoms.into_iter().map(|(x, p)| (x, p / t)).collect()).unwrap();
        if mu.atoms.iter().filter(|a| a.0 != mu.spot).count() >= 2 {
            return mu;
        }
    }
}

fn run(mu: &ImpliedMeasure, bars: &Barriers, kind: EmbeddingKind, seed: u64) -> McEstimate {
    let cfg = McConfig { paths: 20_000, dt: 1e-3, seed, max_steps: 1_000_000 };
    let r = realize_embedding(mu, bars, kind, &cfg).unwrap();
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    r.estimate
}

#[test]
fn embeddings_are_sandwiched_and_attain_the_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..8 {
        let mu = random_measure(&mut rng);
        let s0 = mu.spot;
        let b = s0 - rng.random_range(0.05..1.0);
        let bu = s0 + rng.random_range(0.05..1.0);
        let bars = Barriers::new(b.max(0.01), bu).unwrap();
        let bounds = continuum_bounds(&mu.to_curve(), &bars).unwrap();
        let p = run(&mu, &bars, EmbeddingKind::Perkins, case);
        let j = run(&mu, &bars, EmbeddingKind::TiltedJacka, case + 100);
        let m = run(&mu, &bars, EmbeddingKind::Mix(0.3), case + 200);
        let se = |a: &McEstimate, b: &McEstimate| (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!(j.value <= p.value + 3.0 * se(&j, &p) + 1e-12, "case {case}: {j} vs {p}");
        assert!(m.value <= p.value + 3.0 * se(&m, &p) + 1e-12, "case {case}");
        assert!(m.value >= j.value - 3.0 * se(&m, &j) - 1e-12, "case {case}");
        // 16 two-sided checks here; 4 SE keeps the family-wise false alarm rate small
        assert!(p.within(bounds.upper.value, 4.0), "case {case}: {p} vs {}", bounds.upper.value);
        assert!(j.within(bounds.lower.value, 4.0), "case {case}: {j} vs {}", bounds.lower.value);
    }
}

#[test]
fn stopped_law_matches_target() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.1), (1.8, 0.4), (2.2, 0.4), (3.0, 0.1)]).unwrap();
    let bars = Barriers::new(1.2, 2.8).unwrap();
    let cfg = McConfig { paths: 20_000, ..McConfig::default() };
    for kind in [EmbeddingKind::Perkins, EmbeddingKind::TiltedJacka] {
        let r = realize_embedding(&mu, &bars, kind, &cfg).unwrap();
        assert!(r.tv_distance < 0.02, "{kind:?}: {}", r.tv_distance);
        assert!(r.stopped_law.iter().all(|a| mu.locations().any(|x| x == a.0)));
    }
}

#[test]
fn rules_stop_on_atoms_along_brownian_paths() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.25)]).unwrap();
    let bars = Barriers::new(1.5, 2.5).unwrap();
    let paths = brownian_paths(2.0, 200, 1e-3, 20_000, 4).unwrap();
    let (jr, _) = JackaRule::for_barriers(&mu, &bars).unwrap();
    for p in &paths {
        if let Some(i) = perkins_stop(p, &mu).unwrap() {
            let x = p.values[i];
            // stopped within one step of an atom
            assert!(mu.locations().any(|a| (a - x).abs() < 0.2), "{x}");
        }
        let _ = tilted_jacka_stop(p, &jr);
    }
}

#[test]
fn cap_bias_is_reported() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
    let bars = Barriers::new(1.5, 2.5).unwrap();
    let cfg = McConfig { paths: 500, dt: 1e-3, seed: 1, max_steps: 10 };
    let r = realize_embedding(&mu, &bars, EmbeddingKind::Perkins, &cfg).unwrap();
    assert!(r.capped > 0);
    assert!(r.warnings.iter().any(|w| w.starts_with("cap bias")));
}

#[test]
fn mixture_weight_is_validated() {
    let mu = ImpliedMeasure::new(2.0, vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
    let bars = Barriers::new(1.5, 2.5).unwrap();
    assert!(realize_embedding(&mu, &bars, EmbeddingKind::Mix(1.5), &McConfig::default()).is_err());
}
