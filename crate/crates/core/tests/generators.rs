use std::sync::Arc;

use bsde_core::generators::{
    check_growth_bound, check_monotonicity, check_monotonicity_with, fixture, fixture_names, psi_r,
    report_assumptions, Assumption, AssumptionStatus, CoefficientSet, Generator, PsiSearch, SamplerConfig,
};
use bsde_core::grid::{time_fn, TimeFn, TimeGrid};
use bsde_core::paths::{sample_brownian, PathContext};
use bsde_core::transforms::{mollify_generator, transform_monotone_to_zero};

fn sampler(name: &str, samples: usize) -> SamplerConfig {
    let f = fixture(name).unwrap();
    SamplerConfig {
        p: f.p,
        ..SamplerConfig::default().with_horizon(f.horizon).with_samples(samples)
    }
}

#[test]
fn every_fixture_passes_what_it_claims() {
    for &name in fixture_names() {
        let f = fixture(name).unwrap();
        let rep = report_assumptions(&f.generator, &sampler(name, 100_000)).unwrap();
        if name == "broken_increasing" {
            let e = rep.entry(Assumption::H4).unwrap();
            assert_eq!(e.status, AssumptionStatus::Fail);
            assert!(e.witness.is_some());
        } else {
            assert!(rep.all_claimed_pass(), "{}", rep.table());
        }
    }
}

#[test]
fn monotonicity_survives_the_change_of_variables() {
    let zero: TimeFn = time_fn(|_| 0.0);
    for name in ["example1", "example2", "example3", "example4", "linear_oracle"] {
        let f = fixture(name).unwrap();
        let cfg = sampler(name, 20_000);
        assert!(check_monotonicity(&f.generator, &cfg).passed(), "{name}");
        let tr = transform_monotone_to_zero(&f.generator).unwrap();
        let e = check_monotonicity_with(&tr.generator, &zero, Assumption::H4Prime, &cfg);
        assert!(e.passed(), "{name}: {e:?}");
    }
}

#[test]
fn psi_grows_with_the_radius() {
    let b = [0.3];
    let ctx = PathContext::new(0, 0, &b);
    for name in ["example1", "example2", "example3", "example4"] {
        let g = fixture(name).unwrap().generator;
        for t in [1e-3, 0.25, 0.9] {
            let vals: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
                .iter()
                .map(|&r| psi_r(&g, r, t, &ctx, &PsiSearch::coarse()).unwrap())
                .collect();
            assert_eq!(vals[0], 0.0);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{name} t={t}: {vals:?}");
        }
    }
}

#[test]
fn mollification_shifts_the_growth_function() {
    let g = Generator::new("cubic", 1, 1, |_, y, _, _, out| out[0] = -y[0].powi(3) + 1.0)
        .with_coefficients(CoefficientSet::new(time_fn(|_| 1.0), time_fn(|_| 0.0)))
        .with_growth(Arc::new(|r: f64| r.powi(3)))
        .with_claims(&[Assumption::H3Prime, Assumption::H4Prime]);
    let cfg = SamplerConfig::default().with_samples(5_000);
    assert!(check_growth_bound(&g, &cfg).unwrap().passed());
    for n in [1.0, 4.0, 16.0] {
        let f_n = mollify_generator(&g, n).unwrap();
        let e = check_growth_bound(&f_n, &cfg).unwrap();
        assert!(e.passed(), "n={n}: {e:?}");
        assert!(check_monotonicity_with(&f_n, &time_fn(|_| 0.0), Assumption::H4Prime, &cfg).passed());
    }
}

#[test]
fn quadratic_variation_approaches_the_horizon() {
    let n = 1 << 10;
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let ens = sample_brownian(&grid, 1000, 1, 17).unwrap();
    let mean_sq: f64 = (0..ens.n_paths())
        .map(|m| {
            let qv: f64 = (0..n).map(|i| ens.increment(m, i)[0].powi(2)).sum();
            (qv - 1.0).powi(2)
        })
        .sum::<f64>()
        / ens.n_paths() as f64;
    // relative error is about √(2/N) per path
    assert!(mean_sq.sqrt() < 5.0 / (n as f64).sqrt(), "{}", mean_sq.sqrt());
}

#[test]
fn ensembles_do_not_depend_on_the_thread_count() {
    let grid = TimeGrid::uniform(2.0, 64).unwrap();
    let sample = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_brownian(&grid, 3000, 2, 99).unwrap())
    };
    let one = sample(1);
    assert_eq!(one, sample(4));
    assert_eq!(one, sample(4));
    assert_ne!(one, sample_brownian(&grid, 3000, 2, 100).unwrap());
}
