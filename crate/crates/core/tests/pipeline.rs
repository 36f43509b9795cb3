//! End-to-end checks through the public API.

use anglecs::bayes::expected_costs;
use anglecs::boost::{fit, BoostConfig};
use anglecs::data::{gen_four_class, gen_waveform, substream, Generator};
use anglecs::eval::{sim1_cost, sim2_cost};
use anglecs::{
    bayes_rule, run_experiment, test_cost, Algorithm, ClassDistribution, CostMatrix, DataSource,
    Ensemble, ExperimentSpec,
};

#[test]
fn bayes_rule_with_sim1_costs() {
    let p = ClassDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
    let ec = expected_costs(&sim1_cost(), &p).unwrap();
    for (got, want) in ec.iter().zip([0.7, 0.9, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(bayes_rule(&sim1_cost(), &p).unwrap(), 0);
}

#[test]
fn fitted_ensemble_survives_text_round_trip() {
    let train = gen_four_class(200, 11).unwrap();
    let test = gen_four_class(500, 12).unwrap();
    for alg in [Algorithm::AdaBoost, Algorithm::LogitBoost] {
        let cfg = BoostConfig { rounds: 25, ..Default::default() };
        let ens = fit(alg, &train, &sim2_cost(), &cfg).unwrap();
        let back = Ensemble::parse(&ens.to_string()).unwrap();
        assert_eq!(back.to_string(), ens.to_string());
        for i in 0..test.n() {
            let x = test.x().row(i);
            assert_eq!(ens.f(x).unwrap(), back.f(x).unwrap());
        }
        let pred = back.predict_all(test.x()).unwrap();
        let cost = test_cost(&sim2_cost(), &pred, test.labels()).unwrap();
        assert!(cost < 0.2, "{alg}: test cost {cost}");
    }
}

#[test]
fn boosting_beats_the_constant_classifier() {
    let train = gen_waveform(300, 5).unwrap();
    let test = gen_waveform(2000, 6).unwrap();
    let zo = CostMatrix::zero_one(3).unwrap();
    let cfg = BoostConfig { rounds: 100, ..Default::default() };
    let ens = fit(Algorithm::AdaBoost, &train, &zo, &cfg).unwrap();
    let boosted = test_cost(&zo, &ens.predict_all(test.x()).unwrap(), test.labels()).unwrap();
    let empty = ens.truncated(0);
    let constant = test_cost(&zo, &empty.predict_all(test.x()).unwrap(), test.labels()).unwrap();
    assert!(constant > 0.6);
    assert!(boosted < 0.25, "test error {boosted}");
}

#[test]
fn experiments_are_reproducible_and_seed_sensitive() {
    let spec = |seed| ExperimentSpec {
        source: DataSource::Generator {
            generator: Generator::FourClass,
            n_train: 80,
            n_test: 300,
        },
        algorithm: Algorithm::LogitBoost,
        cost: sim2_cost(),
        rounds: 10,
        replications: 4,
        seed,
        max_leaves: 4,
    };
    let a = run_experiment(&spec(3)).unwrap();
    let b = run_experiment(&spec(3)).unwrap();
    let c = run_experiment(&spec(4)).unwrap();
    assert_eq!(a.costs(), b.costs());
    assert_ne!(a.costs(), c.costs());
    assert_eq!(a.mean().len(), 10);
    assert!(a.failures().is_empty());
}

#[test]
fn substreams_are_independent_of_evaluation_order() {
    use rand::Rng;
    let first: Vec<u64> = (0..3).map(|s| substream(9, s).random()).collect();
    let reversed: Vec<u64> = (0..3).rev().map(|s| substream(9, s).random()).collect();
    assert_eq!(first, reversed.into_iter().rev().collect::<Vec<_>>());
    assert_ne!(first[0], first[1]);
}
