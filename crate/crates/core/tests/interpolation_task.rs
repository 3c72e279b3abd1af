use tddnet::bench::{run_pilot_sweep, EvalOptions, ExperimentConfig, LinkSimulator};
use tddnet::rffront::RfChainConfig;

#[test]
fn learned_predictor_beats_linear_without_rf_mismatch() {
    let cfg = ExperimentConfig {
        rf: RfChainConfig { variance: 0.0, ..RfChainConfig::default() },
        n_train_per_class: 20_000,
        n_val_per_class: 2_000,
        n_test_per_point: 2_000,
        predictor_max_epochs: 60,
        pilot_sweep_spacings: vec![24],
        pilot_sweep_snr_db: 30.0,
        master_seed: 77,
        ..ExperimentConfig::default()
    };
    let sim = LinkSimulator::new(&cfg).unwrap();
    let res = run_pilot_sweep(&sim, EvalOptions::default()).unwrap().result;
    let learned = res.value("TDL-C", 24.0, "proposed", "nmse").unwrap();
    let linear = res.value("TDL-C", 24.0, "linear", "nmse").unwrap();
    assert!(learned < linear, "learned {learned} vs linear {linear}");
}
