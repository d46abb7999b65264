use std::sync::Arc;

use proptest::prelude::*;
use zipcast_core::codec::{BackendSpec, CodeLength, CodeLengthModel};
use zipcast_core::forecast::{forecast, marginal_step, point_from_marginal, ForecastRequest};
use zipcast_core::prob::{
    suffix_distribution, MixtureWeights, SymbolSeries, DEFAULT_ENUMERATION_CAP,
};
use zipcast_core::quant::{partition_mixture, quantize, PartitionScheme};

/// Code length = weighted count of each byte value, so suffix order matters
/// only through content.
struct ByteCost(Vec<f64>);

impl CodeLengthModel for ByteCost {
    fn id(&self) -> &str {
        "byte-cost"
    }

    fn code_length(&self, input: &[u8]) -> CodeLength {
        let bits = input
            .iter()
            .map(|&b| self.0[b as usize % self.0.len()])
            .sum();
        CodeLength::new(bits).unwrap()
    }
}

fn ppm() -> Arc<dyn CodeLengthModel> {
    BackendSpec::Ppm { order: 4 }.build().unwrap()
}

#[test]
fn single_depth_single_backend_reduces_to_plain_mixture() {
    let history = vec![
        0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0,
    ];
    let req = ForecastRequest::new(history.clone(), 2, vec![ppm()]).with_depth(1);
    let out = forecast(&req).unwrap();

    let scheme = PartitionScheme::uniform(0.0, 1.0, 1).unwrap();
    let symbols = quantize(&history, &scheme, 1).unwrap().symbols;
    let direct = suffix_distribution(
        &symbols,
        2,
        &[ppm()],
        &MixtureWeights::uniform(1),
        DEFAULT_ENUMERATION_CAP,
    )
    .unwrap();
    for step in 1..=2 {
        let m = marginal_step(&direct, step).unwrap();
        assert_eq!(out.per_step_distributions[step - 1], m);
        assert_eq!(
            out.values[step - 1],
            point_from_marginal(&m, &scheme).unwrap()
        );
    }
}

#[test]
fn binary_pattern_continues_with_10() {
    let history = SymbolSeries::from_digits("00011100011100011", 2).unwrap();
    let backends: Vec<Arc<dyn CodeLengthModel>> =
        vec![ppm(), BackendSpec::Deflate { level: 9 }.build().unwrap()];
    let dist = suffix_distribution(
        &history,
        2,
        &backends,
        &MixtureWeights::uniform(2),
        DEFAULT_ENUMERATION_CAP,
    )
    .unwrap();
    assert_eq!(dist.top_suffix().0, vec![1, 0]);
}

fn weights_strategy(k: usize) -> impl Strategy<Value = MixtureWeights> {
    prop::collection::vec(1u32..10, k).prop_map(|raw| {
        let total: u32 = raw.iter().sum();
        let mut w: Vec<f64> = raw
            .iter()
            .map(|&r| f64::from(r) / f64::from(total))
            .collect();
        let drift: f64 = 1.0 - w.iter().sum::<f64>();
        w[0] += drift;
        MixtureWeights::new(w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_and_marginals_are_normalized(
        history in prop::collection::vec(0u32..3, 0..12),
        costs in prop::collection::vec(0.5f64..12.0, 3),
        h in 1usize..4,
        weights in weights_strategy(2),
    ) {
        let series = SymbolSeries::new(history, 3).unwrap();
        let backends: Vec<Arc<dyn CodeLengthModel>> = vec![Arc::new(ByteCost(costs)), ppm()];
        let dist = suffix_distribution(&series, h, &backends, &weights, DEFAULT_ENUMERATION_CAP).unwrap();
        let total: f64 = dist.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for step in 1..=h {
            let m = marginal_step(&dist, step).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_forecast_lies_in_interval(
        values in prop::collection::vec(-50.0f64..50.0, 2..30),
        depth in 1u32..4,
        h in 1usize..3,
    ) {
        let scheme = PartitionScheme::fit(&values, depth, MixtureWeights::uniform(depth as usize)).unwrap();
        let dist = partition_mixture(
            &values, h, &scheme, &[ppm()], &MixtureWeights::uniform(1), DEFAULT_ENUMERATION_CAP,
        ).unwrap();
        for step in 1..=h {
            let m = marginal_step(&dist, step).unwrap();
            let x = point_from_marginal(&m, &scheme).unwrap();
            prop_assert!(x >= scheme.lower() - 1e-9 && x <= scheme.upper() + 1e-9);
        }
    }

    #[test]
    fn code_lengths_are_deterministic(input in prop::collection::vec(any::<u8>(), 0..300)) {
        for spec in BackendSpec::all_defaults() {
            let b = spec.build().unwrap();
            prop_assert_eq!(b.code_length(&input).bits(), b.code_length(&input).bits());
        }
    }
}
