//! Randomized invariant checks shared by the property tests and the
//! acceptance harness. Each returns the failure message, if any.

use cvdtr::dtr::pseudo_value;
use cvdtr::matching::{build_surrogates, match_opposite_arm};
use cvdtr::sim::sample_truncated_normal;
use cvdtr::stats::normal_cdf;
use cvdtr::{rng_from, variance_from_rho, Error, StageDataset, StandardizationStats};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub const CASES: u32 = 10_000;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn outcome(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Small datasets with both arms present.
fn dataset() -> impl Strategy<Value = StageDataset> {
    (1usize..4, 4usize..30).prop_flat_map(|(d, n)| {
        (
            vec(-50.0f64..50.0, n * d),
            vec(any::<bool>(), n),
            vec(-100.0f64..100.0, n),
            Just(d),
        )
            .prop_filter_map("both arms", |(x, a, y, d)| {
                let a: Vec<f64> = a.iter().map(|&t| f64::from(u8::from(t))).collect();
                let names = (0..d).map(|j| format!("x{j}")).collect();
                StageDataset::new(names, x, &a, y).ok().filter(|ds| !ds.treated().is_empty() && !ds.control().is_empty())
            })
    })
}

/// Mutually matched pairs carry the same surrogate.
pub fn surrogate_sign_symmetry(cases: u32) -> Result<(), String> {
    outcome(runner(cases).run(&dataset(), |ds| {
        let cols: Vec<usize> = (0..ds.n_features()).collect();
        let stats = StandardizationStats::compute(ds.features(), ds.n_features(), &cols);
        let pairing = match_opposite_arm(&ds, &stats).unwrap();
        let s = build_surrogates(&ds, &pairing);
        for (i, &p) in pairing.partner.iter().enumerate() {
            prop_assert_ne!(ds.action(i), ds.action(p));
            if pairing.partner[p] == i {
                prop_assert_eq!(s.values[i], s.values[p]);
            }
        }
        Ok(())
    }))
}

/// `V̂_k − V̂_{k+1} = |Ĉ|·1{A ≠ 1{Ĉ > 0}} ≥ 0`.
pub fn pseudo_value_increment(cases: u32) -> Result<(), String> {
    outcome(runner(cases).run(&(-1e4f64..1e4, 0u8..2, -1e3f64..1e3), |(next, a, c)| {
        let v = pseudo_value(next, a, c);
        let expected = if a != u8::from(c > 0.0) { c.abs() } else { 0.0 };
        prop_assert!(v - next >= 0.0);
        prop_assert!((v - next - expected).abs() <= 1e-9 * (1.0 + next.abs()));
        Ok(())
    }))
}

/// Strictly increasing in `ρ` on `[0, 1)` for `S_R² > 0`.
pub fn variance_monotone_in_rho(cases: u32) -> Result<(), String> {
    let strat = (1e-6f64..1e3, 2usize..500, 0.0f64..0.999, 0.0f64..0.999);
    outcome(runner(cases).run(&strat, |(s, j, r1, r2)| {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(variance_from_rho(s, lo, j) < variance_from_rho(s, hi, j));
        prop_assert!((variance_from_rho(s, 0.0, j) - s / j as f64).abs() <= 1e-14 * s);
        Ok(())
    }))
}

/// `destandardize(standardize(ds))` reproduces every entry to 1e-10 relative.
pub fn standardization_round_trip(cases: u32) -> Result<(), String> {
    let strat = (1usize..5, 2usize..40).prop_flat_map(|(d, n)| (vec(-1e4f64..1e4, n * d), Just(d), Just(n)));
    outcome(runner(cases).run(&strat, |(x, d, n)| {
        let names = (0..d).map(|j| format!("x{j}")).collect();
        let a: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let ds = StageDataset::new(names, x, &a, vec![0.0; n]).unwrap();
        let (z, stats) = ds.standardize();
        let back = z.destandardize(&stats);
        for (u, v) in ds.features().iter().zip(back.features()) {
            prop_assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0), "{} vs {}", u, v);
        }
        Ok(())
    }))
}

/// Draws land strictly inside the interval, or the interval is reported as
/// degenerate when its mass is below 1e-12.
pub fn truncation_bounds(cases: u32) -> Result<(), String> {
    let strat = (-100.0f64..100.0, 0.01f64..50.0, -10.0f64..10.0, 0.001f64..10.0, any::<u64>());
    outcome(runner(cases).run(&strat, |(mu, sigma, a, width, seed)| {
        let lo = mu + sigma * a;
        let hi = lo + sigma * width;
        prop_assume!(lo < hi);
        let mass = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
        let upper = normal_cdf(-(lo - mu) / sigma) - normal_cdf(-(hi - mu) / sigma);
        let mut rng = rng_from(seed, &[]);
        match sample_truncated_normal(mu, sigma, lo, hi, &mut rng) {
            Ok(x) => prop_assert!(x > lo && x < hi, "{} outside ({}, {})", x, lo, hi),
            Err(Error::DegenerateInterval { .. }) => prop_assert!(mass.min(upper) < 1e-11),
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
        Ok(())
    }))
}

pub type Check = fn(u32) -> Result<(), String>;

pub const ALL: [(&str, Check); 5] = [
    ("surrogate sign symmetry", surrogate_sign_symmetry),
    ("pseudo-value increment", pseudo_value_increment),
    ("variance monotone in rho", variance_monotone_in_rho),
    ("standardization round trip", standardization_round_trip),
    ("truncation bounds", truncation_bounds),
];
