use super::dataset::{Dataset, LinkSimulator, SnrPolicy};
use super::metrics::{ErrorAccumulator, SweepResult, SweepRow};
use crate::airlink::{unflatten_csi_f32, PilotCsi};
use crate::baselines::{calibrate_pilots, linear_interp, CalibrationMode, WienerFilter};
use crate::cascade::{
    predictor_config, train_cascade, train_classifier, train_predictor, CascadeData, CascadeLog, CascadeTrainConfig, ClassData, Routing,
    TddnetModel,
};
use crate::chanmodel::ChannelClass;
use crate::neural::{MlpModel, Samples, TrainLog};
use crate::rffront::RfChainSet;
use crate::seed::Domain;
use crate::Result;

/// Link used by the single-link experiments.
pub const DEFAULT_LINK: u64 = 0;
/// Evaluation rows are produced in chunks of this many samples.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Drop receiver noise everywhere (training and test).
    pub no_noise: bool,
    /// Route every sample to its true class predictor.
    pub oracle_classifier: bool,
}

impl EvalOptions {
    fn test_snr(&self, snr_db: f64) -> f64 {
        if self.no_noise {
            f64::INFINITY
        } else {
            snr_db
        }
    }
}

pub fn train_snr_policy(sim: &LinkSimulator, opts: EvalOptions) -> SnrPolicy {
    if opts.no_noise {
        SnrPolicy::Noiseless
    } else {
        SnrPolicy::Uniform { min_db: sim.cfg.train_snr_min_db, max_db: sim.cfg.train_snr_max_db }
    }
}

/// Predictor train/validation sets for one class on one link.
pub fn predictor_data(sim: &LinkSimulator, class: ChannelClass, chains: &RfChainSet, opts: EvalOptions) -> Result<ClassData> {
    let policy = train_snr_policy(sim, opts);
    let cfg = &sim.cfg;
    let train = sim.gen_dataset(class, Domain::Train, 0, cfg.n_train_per_class, policy, DEFAULT_LINK, chains)?;
    let val = sim.gen_dataset(class, Domain::Validation, 0, cfg.n_val_per_class, policy, DEFAULT_LINK, chains)?;
    Ok(ClassData { train: train.to_samples(), val: val.to_samples() })
}

pub fn classifier_data(sim: &LinkSimulator, chains: &RfChainSet, opts: EvalOptions) -> Result<(Samples, Samples)> {
    let policy = train_snr_policy(sim, opts);
    let cfg = &sim.cfg;
    Ok((
        sim.gen_classifier_set(Domain::ClassifierTrain, cfg.n_classifier_train, policy, DEFAULT_LINK, chains)?,
        sim.gen_classifier_set(Domain::ClassifierValidation, cfg.n_classifier_val, policy, DEFAULT_LINK, chains)?,
    ))
}

pub fn train_classifier_for(sim: &LinkSimulator, opts: EvalOptions) -> Result<(MlpModel<f32>, TrainLog)> {
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let (train, val) = classifier_data(sim, &chains, opts)?;
    train_classifier(&sim.grid, &train, &val, &sim.cfg.classifier_train_config())
}

pub fn train_predictor_for(sim: &LinkSimulator, class: ChannelClass, opts: EvalOptions) -> Result<(MlpModel<f32>, TrainLog)> {
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let data = predictor_data(sim, class, &chains, opts)?;
    train_predictor(&sim.grid, &data, &predictor_config(&sim.cfg.predictor_train_config(), class))
}

/// Classifier plus a predictor for every configured class.
pub fn train_all(sim: &LinkSimulator, opts: EvalOptions) -> Result<(TddnetModel, CascadeLog)> {
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let (classifier_train, classifier_val) = classifier_data(sim, &chains, opts)?;
    let predictors = sim.cfg.classes.iter().map(|&c| Ok((c, predictor_data(sim, c, &chains, opts)?))).collect::<Result<Vec<_>>>()?;
    let data = CascadeData { classifier_train, classifier_val, predictors };
    let cfg = CascadeTrainConfig { classifier: sim.cfg.classifier_train_config(), predictor: sim.cfg.predictor_train_config() };
    train_cascade(&sim.grid, &data, &cfg)
}

/// Fresh test samples for one sweep point.
pub fn test_set(sim: &LinkSimulator, class: ChannelClass, point: u64, snr_db: f64, chains: &RfChainSet) -> Result<Dataset> {
    sim.gen_dataset(class, Domain::Test, point, sim.cfg.n_test_per_point, SnrPolicy::Fixed(snr_db), DEFAULT_LINK, chains)
}

fn row(
    sim: &LinkSimulator,
    experiment: &str,
    class: &str,
    x_name: &str,
    x_value: f64,
    method: &str,
    metric: &str,
    value: f64,
    n: u64,
) -> SweepRow {
    SweepRow {
        experiment: experiment.into(),
        class: class.into(),
        x_name: x_name.into(),
        x_value,
        method: method.into(),
        metric: metric.into(),
        value,
        n_samples: n,
        config_hash: sim.cfg.hash(),
        seed: sim.cfg.master_seed,
    }
}

fn push_errors(
    out: &mut SweepResult,
    sim: &LinkSimulator,
    experiment: &str,
    class: ChannelClass,
    x_name: &str,
    x: f64,
    method: &str,
    acc: &ErrorAccumulator,
) -> Result<()> {
    let name = class.to_string();
    out.rows.push(row(sim, experiment, &name, x_name, x, method, "nmse", acc.nmse()?, acc.samples));
    out.rows.push(row(sim, experiment, &name, x_name, x, method, "mse", acc.mse()?, acc.samples));
    Ok(())
}

/// Classifier accuracy per class and pooled, at every grid SNR.
pub fn run_accuracy_sweep(model: &TddnetModel, sim: &LinkSimulator, opts: EvalOptions) -> Result<SweepResult> {
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let mut out = SweepResult::default();
    for (p, &snr) in sim.cfg.snr_grid_db.iter().enumerate() {
        let (mut correct_all, mut total_all) = (0u64, 0u64);
        for &class in &sim.cfg.classes {
            let ds = test_set(sim, class, p as u64, opts.test_snr(snr), &chains)?;
            let mut correct = 0u64;
            for start in (0..ds.len()).step_by(EVAL_CHUNK) {
                let end = (start + EVAL_CHUNK).min(ds.len());
                let x = &ds.inputs[start * sim.input_dim()..end * sim.input_dim()];
                correct += model.classify_batch(x, end - start)?.iter().filter(|&&c| c == class).count() as u64;
            }
            let n = ds.len() as u64;
            out.rows.push(row(sim, "accuracy", &class.to_string(), "snr_db", snr, "classifier", "accuracy", correct as f64 / n as f64, n));
            correct_all += correct;
            total_all += n;
        }
        out.rows.push(row(
            sim,
            "accuracy",
            "all",
            "snr_db",
            snr,
            "classifier",
            "accuracy",
            correct_all as f64 / total_all as f64,
            total_all,
        ));
    }
    Ok(out)
}

/// Linear and Wiener errors on one test set, both without and with oracle
/// calibration. Keys are the method names used in the CSV.
struct BaselineErrors {
    linear: ErrorAccumulator,
    linear_calib: ErrorAccumulator,
    wiener: ErrorAccumulator,
    wiener_calib: ErrorAccumulator,
}

fn baseline_errors(sim: &LinkSimulator, ds: &Dataset, class: ChannelClass, snr_db: f64, chains: &RfChainSet) -> Result<BaselineErrors> {
    let wiener = WienerFilter::new(sim.pdp(class), snr_db, &sim.grid, sim.cfg.scs_hz)?;
    let mut e = BaselineErrors {
        linear: ErrorAccumulator::default(),
        linear_calib: ErrorAccumulator::default(),
        wiener: ErrorAccumulator::default(),
        wiener_calib: ErrorAccumulator::default(),
    };
    for i in 0..ds.len() {
        let csi = PilotCsi { values: unflatten_csi_f32(ds.input(i)), snr_db };
        let truth = unflatten_csi_f32(ds.target(i)).into();
        let cal = calibrate_pilots(&csi, &sim.grid, CalibrationMode::Oracle(chains))?;
        e.linear.add(&linear_interp(&csi, &sim.grid)?, &truth);
        e.linear_calib.add(&linear_interp(&cal, &sim.grid)?, &truth);
        e.wiener.add(&wiener.apply(&csi.values)?, &truth);
        e.wiener_calib.add(&wiener.apply(&cal.values)?, &truth);
    }
    Ok(e)
}

fn predictor_errors(model: &TddnetModel, sim: &LinkSimulator, ds: &Dataset, routing: Routing) -> Result<ErrorAccumulator> {
    let mut acc = ErrorAccumulator::default();
    let (din, dout) = (sim.input_dim(), sim.target_dim());
    for start in (0..ds.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(ds.len());
        let n = end - start;
        let x = &ds.inputs[start * din..end * din];
        let routes = match routing {
            Routing::Oracle(c) => vec![c; n],
            Routing::Learned => model.classify_batch(x, n)?,
        };
        let y = model.predict_batch(x, n, &routes)?;
        acc.add_flat(&y, &ds.targets[start * dout..end * dout], n);
    }
    Ok(acc)
}

/// Cascade, oracle-routed cascade and both baselines per (class, SNR).
pub fn run_mse_sweep(model: &TddnetModel, sim: &LinkSimulator, opts: EvalOptions) -> Result<SweepResult> {
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let mut out = SweepResult::default();
    for &class in &sim.cfg.classes {
        for (p, &snr) in sim.cfg.snr_grid_db.iter().enumerate() {
            let test_snr = opts.test_snr(snr);
            let ds = test_set(sim, class, p as u64, test_snr, &chains)?;
            let learned = if opts.oracle_classifier { Routing::Oracle(class) } else { Routing::Learned };
            let push = |out: &mut SweepResult, method: &str, acc: &ErrorAccumulator| {
                push_errors(out, sim, "mse", class, "snr_db", snr, method, acc)
            };
            push(&mut out, "cascade", &predictor_errors(model, sim, &ds, learned)?)?;
            push(&mut out, "oracle_classifier", &predictor_errors(model, sim, &ds, Routing::Oracle(class))?)?;
            let b = baseline_errors(sim, &ds, class, test_snr, &chains)?;
            push(&mut out, "linear", &b.linear)?;
            push(&mut out, "linear_oracle_calib", &b.linear_calib)?;
            push(&mut out, "wiener", &b.wiener)?;
            push(&mut out, "wiener_oracle_calib", &b.wiener_calib)?;
        }
    }
    Ok(out)
}

/// Result of the pilot-spacing sweep, with the per-spacing predictors.
#[derive(Debug, Clone)]
pub struct PilotSweep {
    pub result: SweepResult,
    pub models: Vec<(usize, MlpModel<f32>, TrainLog)>,
}

/// Retrain the sweep class predictor at every spacing and compare it with
/// the baselines at the sweep SNR. Routing is by the true class.
pub fn run_pilot_sweep(sim: &LinkSimulator, opts: EvalOptions) -> Result<PilotSweep> {
    let class = sim.cfg.pilot_sweep_class;
    let snr = sim.cfg.pilot_sweep_snr_db;
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let mut out = SweepResult::default();
    let mut models = Vec::new();
    for (p, &spacing) in sim.cfg.pilot_sweep_spacings.iter().enumerate() {
        let s = sim.with_spacing(spacing)?;
        let data = predictor_data(&s, class, &chains, opts)?;
        let (net, log) = train_predictor(&s.grid, &data, &predictor_config(&s.cfg.predictor_train_config(), class))?;
        let ds = test_set(&s, class, p as u64, opts.test_snr(snr), &chains)?;
        let mut predictors: [Option<MlpModel<f32>>; ChannelClass::COUNT] = Default::default();
        predictors[class.index()] = Some(net.clone());
        let classifier = MlpModel::zeros(crate::cascade::classifier_spec(s.grid.len()))?;
        let model = TddnetModel::new(classifier, predictors, s.grid.clone())?;
        let x = spacing as f64;
        let push = |out: &mut SweepResult, method: &str, acc: &ErrorAccumulator| {
            push_errors(out, sim, "pilot_spacing", class, "pilot_spacing", x, method, acc)
        };
        push(&mut out, "proposed", &predictor_errors(&model, &s, &ds, Routing::Oracle(class))?)?;
        let b = baseline_errors(&s, &ds, class, opts.test_snr(snr), &chains)?;
        push(&mut out, "linear", &b.linear)?;
        push(&mut out, "linear_oracle_calib", &b.linear_calib)?;
        push(&mut out, "wiener", &b.wiener)?;
        push(&mut out, "wiener_oracle_calib", &b.wiener_calib)?;
        models.push((spacing, net, log));
    }
    Ok(PilotSweep { result: out, models })
}

/// Every class evaluated with the TDL-A predictor and with its own.
pub fn run_mismatch(model: &TddnetModel, sim: &LinkSimulator, opts: EvalOptions) -> Result<SweepResult> {
    let chains = sim.link_chains(DEFAULT_LINK)?;
    let mut out = SweepResult::default();
    for &class in &sim.cfg.classes {
        for (p, &snr) in sim.cfg.snr_grid_db.iter().enumerate() {
            let ds = test_set(sim, class, p as u64, opts.test_snr(snr), &chains)?;
            let mismatched = predictor_errors(model, sim, &ds, Routing::Oracle(ChannelClass::TdlA))?;
            let matched = predictor_errors(model, sim, &ds, Routing::Oracle(class))?;
            push_errors(&mut out, sim, "mismatch", class, "snr_db", snr, "tdl_a_predictor", &mismatched)?;
            push_errors(&mut out, sim, "mismatch", class, "snr_db", snr, "matched_predictor", &matched)?;
        }
    }
    Ok(out)
}
