use mgmoments_core::enumerate::DEFAULT_ENUMERATION_CAP;
use mgmoments_core::mcmc::{run_chain_with, BurnIn};
use mgmoments_core::rng::stream_rng;
use mgmoments_core::*;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn seq(d: &[u32]) -> DegreeSequence {
    DegreeSequence::new(d.to_vec()).unwrap()
}

/// Chain visit counts over the enumerated ensemble and the goodness-of-fit
/// p-value against the model's exact state probabilities.
fn visit_p_value(d: &[u32], model: Model, seed: u64) -> (usize, f64) {
    let d = seq(d);
    let ensemble = enumerate_ensemble(&d, DEFAULT_ENUMERATION_CAP).unwrap();
    let probs = ensemble.probabilities(model);
    let mut visits = vec![0u64; ensemble.len()];
    let mut cfg = ChainConfig::new(model, 100_000);
    cfg.sample_interval = Some(20);
    cfg.burn_in = Some(BurnIn::Steps(1_000));
    cfg.seed = seed;
    run_chain_with(&Multigraph::realise(&d).unwrap(), &cfg, |chain| {
        let k = ensemble.index_of(&chain.to_multigraph()).expect("state outside the ensemble");
        visits[k] += 1;
    })
    .unwrap();
    let s = cfg.samples as f64;
    let stat: f64 = visits
        .iter()
        .zip(&probs)
        .map(|(&o, &p)| (o as f64 - s * p).powi(2) / (s * p))
        .sum();
    if ensemble.len() < 2 {
        return (ensemble.len(), 1.0);
    }
    let dist = ChiSquared::new((ensemble.len() - 1) as f64).unwrap();
    (ensemble.len(), 1.0 - dist.cdf(stat))
}

const INSTANCES: [&[u32]; 4] = [&[2, 2, 2, 2], &[1, 1, 2, 2], &[3, 3, 2, 2], &[2, 2, 2, 2, 2]];

#[test]
fn uniform_chain_visits_states_uniformly() {
    for d in INSTANCES {
        let (states, p) = visit_p_value(d, Model::Uniform, 11);
        assert!(p > 0.01, "{d:?}: {states} states, p = {p}");
    }
}

#[test]
fn configuration_chain_visits_states_by_matching_count() {
    for d in INSTANCES {
        let (states, p) = visit_p_value(d, Model::Configuration, 12);
        assert!(p > 0.01, "{d:?}: {states} states, p = {p}");
    }
}

#[test]
fn identity_residual_shrinks_on_long_configuration_run() {
    let d = seq(&[2, 2, 2, 2]);
    let mut cfg = ChainConfig::new(Model::Configuration, 1_000_000);
    cfg.sample_interval = Some(10);
    cfg.track_row_products = true;
    let run = run_chain(&Multigraph::realise(&d).unwrap(), &cfg).unwrap();
    let r = configuration_identity_residual(&run.accumulator.pair_moments().unwrap(), &d).unwrap();
    assert!(r.undefined.is_empty());
    assert!(r.max_abs < 0.02, "max residual {}", r.max_abs);
}

fn degree_vector() -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(1u32..=6, 4..12).prop_filter_map("not realisable", |mut d| {
        let total: u32 = d.iter().sum();
        if total % 2 == 1 {
            d[0] += 1;
        }
        seq(&d).is_realisable().then_some(d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_step_preserves_degrees_and_symmetry(d in degree_vector(), seed in any::<u64>(), uniform in any::<bool>()) {
        let g = Multigraph::realise(&seq(&d)).unwrap();
        prop_assume!(g.edge_count() >= 2);
        let model = if uniform { Model::Uniform } else { Model::Configuration };
        let mut chain = EdgeSwapChain::new(&g).unwrap();
        let mut rng = stream_rng(seed, 0);
        let n = chain.node_count();
        for _ in 0..500 {
            chain.step(model, &mut rng);
            prop_assert_eq!(chain.degrees(), d.clone());
            prop_assert_eq!(chain.edge_count() as u64, g.edge_count());
            let w = chain.adjacency();
            for i in 0..n {
                prop_assert_eq!(w[i * n + i], 0);
                for j in 0..n {
                    prop_assert_eq!(w[i * n + j], w[j * n + i]);
                }
            }
        }
    }
}
