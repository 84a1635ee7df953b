use bsde_core::estimates::{class_d_detail, mp_norm, sp_norm, ClassDConfig, StoppingTime};
use bsde_core::grid::TimeGrid;
use bsde_core::paths::{sample_brownian, AdaptedField};
use bsde_core::transforms::radial_truncate;
use proptest::prelude::*;

const PATHS: usize = 8;
const TIMES: usize = 5;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, dim)
}

fn field() -> impl Strategy<Value = AdaptedField> {
    prop::collection::vec(-5.0..5.0f64, PATHS * TIMES * 2).prop_map(|v| {
        let mut f = AdaptedField::zeros(PATHS, TIMES, 2, 1);
        f.values_mut().copy_from_slice(&v);
        f
    })
}

fn add(a: &AdaptedField, b: &AdaptedField) -> AdaptedField {
    a.sub(&b.scaled(-1.0))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn truncation_is_idempotent_and_non_expansive(
        (x, y) in (1usize..6).prop_flat_map(|d| (vector(d), vector(d))),
        q in 0.0..100.0f64,
    ) {
        let px = radial_truncate(&x, q);
        prop_assert_eq!(radial_truncate(&px, q), px.clone());
        prop_assert!(dist(&px, &[0.0].repeat(x.len())) <= q * (1.0 + 1e-12));
        let py = radial_truncate(&y, q);
        prop_assert!(dist(&px, &py) <= dist(&x, &y) * (1.0 + 1e-12) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn norm_axioms(a in field(), b in field(), c in -3.0..3.0f64, p in 1.0..6.0f64) {
        let grid = TimeGrid::uniform(1.0, TIMES - 1).unwrap();
        let sum = add(&a, &b);
        let scaled = a.scaled(c);
        let sa = sp_norm(&a, p).unwrap();
        let ma = mp_norm(&a, &grid, p).unwrap();
        prop_assert!(sa >= 0.0 && ma >= 0.0);
        prop_assert!(close(sp_norm(&scaled, p).unwrap(), c.abs() * sa));
        prop_assert!(close(mp_norm(&scaled, &grid, p).unwrap(), c.abs() * ma));
        prop_assert!(sp_norm(&sum, p).unwrap() <= (sa + sp_norm(&b, p).unwrap()) * (1.0 + 1e-12));
        prop_assert!(mp_norm(&sum, &grid, p).unwrap() <= (ma + mp_norm(&b, &grid, p).unwrap()) * (1.0 + 1e-12));
        prop_assert_eq!(sp_norm(&AdaptedField::zeros(PATHS, TIMES, 2, 1), p).unwrap(), 0.0);
    }

    #[test]
    fn exponent_ordering_on_fields_bounded_by_one(a in field()) {
        let sup = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) * 2f64.sqrt();
        prop_assume!(sup > 0.0);
        let unit = a.scaled(1.0 / sup);
        let norms: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&p| sp_norm(&unit, p).unwrap()).collect();
        let moments: Vec<f64> = [1.0, 2.0, 4.0].iter().zip(&norms).map(|(p, n)| n.powf(*p)).collect();
        // (E Xᵖ)^{1/p} grows with p while E Xᵖ shrinks once X <= 1
        prop_assert!(norms.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)), "{:?}", norms);
        prop_assert!(moments.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{:?}", moments);
        prop_assert!(norms.iter().all(|&n| n <= 1.0 + 1e-12));
    }
}

fn brownian_field(m: usize, n: usize, seed: u64) -> (TimeGrid, AdaptedField) {
    let grid = TimeGrid::uniform(1.0, n).unwrap();
    let ens = sample_brownian(&grid, m, 1, seed).unwrap();
    let b = AdaptedField::from_fn(m, n + 1, 1, 1, |p, i, out| out[0] = ens.position(p, i)[0]);
    (grid, b)
}

#[test]
fn running_maximum_norm_of_brownian_motion() {
    let (_, b) = brownian_field(20_000, 512, 5);
    // E|B_1|² = 1 <= E sup|B|² <= 4 by Doob
    let s2 = sp_norm(&b, 2.0).unwrap();
    assert!(s2 > 1.0 && s2 < 2.0, "{s2}");
    let s1 = sp_norm(&b, 1.0).unwrap();
    assert!(s1 > (2.0 / std::f64::consts::PI).sqrt() && s1 < s2, "{s1}");
}

#[test]
fn quadratic_norm_of_brownian_motion() {
    let (m, n) = (20_000, 64);
    let (grid, b) = brownian_field(m, n, 6);
    // E ∫_0^1 B_t² dt = 1/2; the left-point sum has mean (1 - Δ)/2
    let target = (0.5 * (1.0 - 1.0 / n as f64)).sqrt();
    let sq: Vec<f64> = (0..m)
        .map(|p| (0..n).map(|i| b.at(p, i)[0].powi(2) * grid.dt(i)).sum())
        .collect();
    let mean = sq.iter().sum::<f64>() / m as f64;
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
    // delta method for the square root
    let se = (var / m as f64).sqrt() / (2.0 * mean.sqrt());
    let got = mp_norm(&b, &grid, 2.0).unwrap();
    assert!((got - target).abs() < 3.0 * se, "{got} vs {target} ± {se}");
}

#[test]
fn class_d_functional_of_a_martingale_sits_at_the_horizon() {
    let (_, b) = brownian_field(20_000, 64, 7);
    let v = class_d_detail(&b, &ClassDConfig::default()).unwrap();
    let e_abs = (2.0 / std::f64::consts::PI).sqrt();
    // optional stopping and Jensen: E|B_τ| <= E|B_1| for every τ <= 1
    assert!((v.value - e_abs).abs() < 3.0 * v.standard_error + 0.01, "{v:?}");
    match v.argmax {
        StoppingTime::Deterministic { index } => assert_eq!(index, 64),
        StoppingTime::Hitting { level } => assert!(level > 0.0),
    }
}

#[test]
fn constant_fields_have_their_value_as_every_norm() {
    let grid = TimeGrid::uniform(2.0, 8).unwrap();
    for c in [-3.0, 0.5, 7.0] {
        let y = AdaptedField::constant(16, 9, 1, 1, c);
        for p in [1.0, 2.0, 4.0] {
            assert!((sp_norm(&y, p).unwrap() - c.abs()).abs() < 1e-12);
            // (|c|ᵖ Tᵖ/²)^{1/p}
            assert!((mp_norm(&y, &grid, p).unwrap() - c.abs() * 2f64.sqrt()).abs() < 1e-12);
        }
        let v = class_d_detail(&y, &ClassDConfig::default()).unwrap();
        assert!((v.value - c.abs()).abs() < 1e-12);
        assert_eq!(v.standard_error, 0.0);
    }
}

#[test]
fn sub_unit_exponent_uses_the_plain_moment() {
    let y = AdaptedField::constant(4, 3, 1, 1, 4.0);
    assert!((sp_norm(&y, 0.5).unwrap() - 2.0).abs() < 1e-12);
}
