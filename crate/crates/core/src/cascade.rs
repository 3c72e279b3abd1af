//! Classifier + per-class predictor cascade.
//!
//! The classifier picks a channel class from the flattened uplink pilot
//! estimates; the predictor trained for that class maps the same input to
//! the full-band downlink channel, doing reciprocity calibration and
//! frequency interpolation in one step.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::airlink::{flatten_csi_f32, make_pilot_grid, unflatten_csi_f32, PilotCsi, PilotGrid, FLATTEN_LAYOUT_RE_THEN_IM};
use crate::chanmodel::{ChannelClass, FrequencyResponse};
use crate::neural::{load_model, save_model, train_with_validation, Activation, Loss, MlpModel, MlpSpec, Samples, TrainConfig, TrainLog};
use crate::{Error, Result};

pub const CLASSIFIER_HIDDEN: [usize; 2] = [22, 22];
pub const PREDICTOR_HIDDEN: [usize; 2] = [512, 128];
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CLASSIFIER_FILE: &str = "classifier.mdl";

pub fn predictor_file(class: ChannelClass) -> String {
    format!("predictor_{}.mdl", class.letter())
}

/// `[2 Np, 22, 22, 5]` with tanh, sigmoid, softmax.
pub fn classifier_spec(n_pilots: usize) -> MlpSpec {
    MlpSpec::new(
        vec![2 * n_pilots, CLASSIFIER_HIDDEN[0], CLASSIFIER_HIDDEN[1], ChannelClass::COUNT],
        vec![Activation::Tanh, Activation::Sigmoid, Activation::Softmax],
    )
    .expect("static classifier spec")
}

/// `[2 Np, 512, 128, 2 N]` with tanh, tanh, linear.
pub fn predictor_spec(n_pilots: usize, n_subcarriers: usize) -> MlpSpec {
    MlpSpec::new(
        vec![2 * n_pilots, PREDICTOR_HIDDEN[0], PREDICTOR_HIDDEN[1], 2 * n_subcarriers],
        vec![Activation::Tanh, Activation::Tanh, Activation::Linear],
    )
    .expect("static predictor spec")
}

/// Which predictor handles a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    /// Use the classifier's decision.
    Learned,
    /// Use the given (true) class, ignoring the classifier.
    Oracle(ChannelClass),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TddnetModel {
    pub classifier: MlpModel<f32>,
    /// Indexed by [`ChannelClass::index`]; `None` for an untrained class.
    pub predictors: [Option<MlpModel<f32>>; ChannelClass::COUNT],
    pub grid: PilotGrid,
}

impl TddnetModel {
    pub fn new(classifier: MlpModel<f32>, predictors: [Option<MlpModel<f32>>; ChannelClass::COUNT], grid: PilotGrid) -> Result<Self> {
        let m = TddnetModel { classifier, predictors, grid };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let input = 2 * self.grid.len();
        if self.classifier.input_dim() != input || self.classifier.output_dim() != ChannelClass::COUNT {
            return Err(Error::Usage(format!(
                "classifier is {} -> {}, expected {input} -> {}",
                self.classifier.input_dim(),
                self.classifier.output_dim(),
                ChannelClass::COUNT
            )));
        }
        for (class, p) in ChannelClass::ALL.iter().zip(&self.predictors) {
            if let Some(p) = p {
                if p.input_dim() != input || p.output_dim() != 2 * self.grid.n_subcarriers {
                    return Err(Error::Usage(format!(
                        "{class} predictor is {} -> {}, expected {input} -> {}",
                        p.input_dim(),
                        p.output_dim(),
                        2 * self.grid.n_subcarriers
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn predictor(&self, class: ChannelClass) -> Result<&MlpModel<f32>> {
        self.predictors[class.index()].as_ref().ok_or_else(|| Error::Usage(format!("no trained predictor for {class}")))
    }

    fn check_csi(&self, csi: &PilotCsi) -> Result<()> {
        if csi.values.len() != self.grid.len() {
            return Err(Error::Usage(format!("{} pilot values, model expects {}", csi.values.len(), self.grid.len())));
        }
        Ok(())
    }

    /// Most probable class among those with a trained predictor (all
    /// classes if none is trained), lowest index on ties.
    fn decide(&self, probs: &[f32]) -> ChannelClass {
        let any = self.predictors.iter().any(Option::is_some);
        let masked: Vec<f32> =
            probs.iter().zip(&self.predictors).map(|(&p, m)| if m.is_some() || !any { p } else { f32::NEG_INFINITY }).collect();
        ChannelClass::from_index(argmax(&masked)).expect("five outputs")
    }

    /// Decided class and the classifier's probabilities.
    pub fn classify(&self, csi: &PilotCsi) -> Result<(ChannelClass, Vec<f64>)> {
        self.check_csi(csi)?;
        let probs = self.classifier.forward(&flatten_csi_f32(&csi.values))?;
        Ok((self.decide(&probs), probs.iter().map(|&p| p as f64).collect()))
    }

    /// Classes for a `batch x 2 Np` block of flattened inputs.
    pub fn classify_batch(&self, inputs: &[f32], batch: usize) -> Result<Vec<ChannelClass>> {
        let probs = self.classifier.forward_batch(inputs, batch)?;
        Ok(probs.chunks_exact(ChannelClass::COUNT).map(|p| self.decide(p)).collect())
    }

    pub fn predict_downlink(&self, csi: &PilotCsi, routing: Routing) -> Result<(ChannelClass, FrequencyResponse)> {
        self.check_csi(csi)?;
        let class = match routing {
            Routing::Oracle(c) => c,
            Routing::Learned => self.classify(csi)?.0,
        };
        let out = self.predictor(class)?.forward(&flatten_csi_f32(&csi.values))?;
        Ok((class, FrequencyResponse::new(unflatten_csi_f32(&out))))
    }

    /// Route every row of a flattened batch and return flattened predictions.
    pub fn predict_batch(&self, inputs: &[f32], batch: usize, routes: &[ChannelClass]) -> Result<Vec<f32>> {
        if routes.len() != batch {
            return Err(Error::Usage(format!("{} routes for {batch} samples", routes.len())));
        }
        let in_dim = 2 * self.grid.len();
        let out_dim = 2 * self.grid.n_subcarriers;
        let mut out = vec![0f32; batch * out_dim];
        for class in ChannelClass::ALL {
            let rows: Vec<usize> = (0..batch).filter(|&i| routes[i] == class).collect();
            if rows.is_empty() {
                continue;
            }
            let mut x = Vec::with_capacity(rows.len() * in_dim);
            for &i in &rows {
                x.extend_from_slice(&inputs[i * in_dim..(i + 1) * in_dim]);
            }
            let y = self.predictor(class)?.forward_batch(&x, rows.len())?;
            for (k, &i) in rows.iter().enumerate() {
                out[i * out_dim..(i + 1) * out_dim].copy_from_slice(&y[k * out_dim..(k + 1) * out_dim]);
            }
        }
        Ok(out)
    }

    /// Write `classifier.mdl`, `predictor_{A..E}.mdl` (trained ones) and the
    /// manifest. `extra` lines (training config, seeds) are appended to the
    /// manifest verbatim as `key = value`.
    pub fn save_bundle(&self, dir: impl AsRef<Path>, extra: &[(String, String)]) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_model(&self.classifier, dir.join(CLASSIFIER_FILE))?;
        let mut manifest = String::new();
        let _ = writeln!(manifest, "# tddnet model bundle");
        let _ = writeln!(manifest, "bundle_version = 1");
        let _ = writeln!(manifest, "n_subcarriers = {}", self.grid.n_subcarriers);
        let _ = writeln!(manifest, "pilot_spacing = {}", self.grid.spacing);
        let _ = writeln!(manifest, "n_pilots = {}", self.grid.len());
        let _ = writeln!(manifest, "flatten_layout = {FLATTEN_LAYOUT_RE_THEN_IM} # real block then imaginary block");
        let trained: String = ChannelClass::ALL.iter().filter(|c| self.predictors[c.index()].is_some()).map(|c| c.letter()).collect();
        let _ = writeln!(manifest, "predictors = {trained}");
        for (class, p) in ChannelClass::ALL.iter().zip(&self.predictors) {
            if let Some(p) = p {
                save_model(p, dir.join(predictor_file(*class)))?;
            }
        }
        for (k, v) in extra {
            let _ = writeln!(manifest, "{k} = {v}");
        }
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, manifest).map_err(|e| Error::io(path, e))
    }

    pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let kv = parse_key_values(&text).map_err(|r| Error::load(&path, r))?;
        let get = |k: &str| -> Result<usize> {
            kv.get(k)
                .ok_or_else(|| Error::load(&path, format!("manifest missing {k}")))?
                .parse()
                .map_err(|_| Error::load(&path, format!("manifest field {k} is not an integer")))
        };
        if get("bundle_version")? != 1 {
            return Err(Error::load(&path, "unsupported bundle version"));
        }
        if get("flatten_layout")? != FLATTEN_LAYOUT_RE_THEN_IM as usize {
            return Err(Error::load(&path, "unsupported flatten layout"));
        }
        let grid = make_pilot_grid(get("n_subcarriers")?, get("pilot_spacing")?)?;
        if grid.len() != get("n_pilots")? {
            return Err(Error::load(&path, "pilot count inconsistent with spacing"));
        }
        let classifier = load_model(dir.join(CLASSIFIER_FILE))?;
        let listed = kv.get("predictors").cloned().unwrap_or_default();
        let mut predictors: [Option<MlpModel<f32>>; ChannelClass::COUNT] = Default::default();
        for c in listed.chars().filter(|c| !c.is_whitespace()) {
            let class = ChannelClass::from_letter(c).ok_or_else(|| Error::load(&path, format!("unknown class {c}")))?;
            predictors[class.index()] = Some(load_model(dir.join(predictor_file(class)))?);
        }
        TddnetModel::new(classifier, predictors, grid)
    }
}

/// `key = value` lines, `#` comments (whole-line or trailing).
pub fn parse_key_values(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {k}", i + 1));
        }
    }
    Ok(out)
}

pub(crate) fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Training data for one predictor.
#[derive(Debug, Clone, Default)]
pub struct ClassData {
    pub train: Samples,
    pub val: Samples,
}

/// Everything `train_cascade` needs. Classifier targets are one-hot;
/// predictor targets are the noiseless downlink channel.
#[derive(Debug, Clone)]
pub struct CascadeData {
    pub classifier_train: Samples,
    pub classifier_val: Samples,
    pub predictors: Vec<(ChannelClass, ClassData)>,
}

#[derive(Debug, Clone)]
pub struct CascadeTrainConfig {
    pub classifier: TrainConfig,
    pub predictor: TrainConfig,
}

#[derive(Debug, Clone, Default)]
pub struct CascadeLog {
    pub classifier: TrainLog,
    pub predictors: Vec<(ChannelClass, TrainLog)>,
}

/// Per-class seed offset so predictors do not share initializations.
pub fn predictor_config(base: &TrainConfig, class: ChannelClass) -> TrainConfig {
    TrainConfig { seed: base.seed.wrapping_add(class.index() as u64), ..base.clone() }
}

pub fn train_classifier(grid: &PilotGrid, train: &Samples, val: &Samples, cfg: &TrainConfig) -> Result<(MlpModel<f32>, TrainLog)> {
    train_with_validation(classifier_spec(grid.len()), train, val, Loss::CrossEntropy, cfg)
}

pub fn train_predictor(grid: &PilotGrid, data: &ClassData, cfg: &TrainConfig) -> Result<(MlpModel<f32>, TrainLog)> {
    train_with_validation(predictor_spec(grid.len(), grid.n_subcarriers), &data.train, &data.val, Loss::Mse, cfg)
}

/// Train the classifier and one predictor per listed class, independently.
pub fn train_cascade(grid: &PilotGrid, data: &CascadeData, cfg: &CascadeTrainConfig) -> Result<(TddnetModel, CascadeLog)> {
    if data.predictors.is_empty() {
        return Err(Error::Usage("no predictor datasets".into()));
    }
    for (class, d) in &data.predictors {
        if d.train.is_empty() || d.val.is_empty() {
            return Err(Error::Usage(format!("{class} dataset is empty")));
        }
    }
    let (classifier, classifier_log) = train_classifier(grid, &data.classifier_train, &data.classifier_val, &cfg.classifier)?;
    let mut predictors: [Option<MlpModel<f32>>; ChannelClass::COUNT] = Default::default();
    let mut logs = Vec::new();
    for (class, d) in &data.predictors {
        let (m, log) = train_predictor(grid, d, &predictor_config(&cfg.predictor, *class))?;
        predictors[class.index()] = Some(m);
        logs.push((*class, log));
    }
    let model = TddnetModel::new(classifier, predictors, grid.clone())?;
    Ok((model, CascadeLog { classifier: classifier_log, predictors: logs }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model(n: usize, spacing: usize, seed: u64) -> TddnetModel {
        let grid = make_pilot_grid(n, spacing).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let classifier = MlpModel::init(classifier_spec(grid.len()), &mut r).unwrap();
        let predictors = std::array::from_fn(|_| Some(MlpModel::init(predictor_spec(grid.len(), n), &mut r).unwrap()));
        TddnetModel::new(classifier, predictors, grid).unwrap()
    }

    fn some_csi(np: usize) -> PilotCsi {
        PilotCsi { values: (0..np).map(|i| Complex64::new((i as f64).cos(), (i as f64 * 0.3).sin())).collect(), snr_db: 10.0 }
    }

    #[test]
    fn table_architectures() {
        let c = classifier_spec(11);
        assert_eq!(c.layer_dims, vec![22, 22, 22, 5]);
        assert_eq!(c.activations, vec![Activation::Tanh, Activation::Sigmoid, Activation::Softmax]);
        let p = predictor_spec(11, 256);
        assert_eq!(p.layer_dims, vec![22, 512, 128, 512]);
        assert_eq!(p.activations, vec![Activation::Tanh, Activation::Tanh, Activation::Linear]);
    }

    #[test]
    fn classify_returns_argmax_distribution() {
        let m = small_model(256, 24, 1);
        let (class, probs) = m.classify(&some_csi(11)).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let best = probs.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(probs[class.index()], best);
        assert_eq!(m.classify(&some_csi(11)).unwrap(), (class, probs));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4, 0.0]), 1);
        assert_eq!(argmax(&[0.2; 5]), 0);
    }

    #[test]
    fn routing_skips_untrained_classes() {
        let mut m = small_model(64, 8, 8);
        let (best, _) = m.classify(&some_csi(8)).unwrap();
        m.predictors[best.index()] = None;
        let (class, _) = m.classify(&some_csi(8)).unwrap();
        assert_ne!(class, best);
        assert!(m.predict_downlink(&some_csi(8), Routing::Learned).is_ok());
    }

    #[test]
    fn prediction_has_full_band_length() {
        let m = small_model(256, 24, 2);
        let (_, h) = m.predict_downlink(&some_csi(11), Routing::Learned).unwrap();
        assert_eq!(h.len(), 256);
    }

    #[test]
    fn oracle_routing_ignores_classifier() {
        let a = small_model(64, 8, 3);
        let mut b = a.clone();
        b.classifier = MlpModel::init(classifier_spec(8), &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        for class in ChannelClass::ALL {
            let x = a.predict_downlink(&some_csi(8), Routing::Oracle(class)).unwrap();
            let y = b.predict_downlink(&some_csi(8), Routing::Oracle(class)).unwrap();
            assert_eq!(x, y);
            assert_eq!(x.0, class);
        }
    }

    #[test]
    fn untrained_predictor_is_usage_error() {
        let mut m = small_model(64, 8, 4);
        m.predictors[2] = None;
        let r = m.predict_downlink(&some_csi(8), Routing::Oracle(ChannelClass::TdlC));
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn wrong_pilot_count_rejected() {
        let m = small_model(64, 8, 5);
        assert!(m.classify(&some_csi(7)).is_err());
        assert!(m.predict_downlink(&some_csi(9), Routing::Learned).is_err());
    }

    #[test]
    fn batch_prediction_matches_single() {
        let m = small_model(64, 8, 6);
        let csis: Vec<PilotCsi> = (0..4)
            .map(|k| {
                let mut c = some_csi(8);
                c.values.iter_mut().for_each(|v| *v *= 1.0 + k as f64);
                c
            })
            .collect();
        let flat: Vec<f32> = csis.iter().flat_map(|c| flatten_csi_f32(&c.values)).collect();
        let routes = m.classify_batch(&flat, 4).unwrap();
        let out = m.predict_batch(&flat, 4, &routes).unwrap();
        for (i, c) in csis.iter().enumerate() {
            let (class, h) = m.predict_downlink(c, Routing::Learned).unwrap();
            assert_eq!(class, routes[i]);
            for (a, b) in h.values.iter().zip(unflatten_csi_f32(&out[i * 128..(i + 1) * 128])) {
                assert!((a - b).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn bundle_round_trip() {
        let mut m = small_model(32, 4, 7);
        m.predictors[4] = None;
        let dir = tempfile::tempdir().unwrap();
        m.save_bundle(dir.path(), &[("seed".into(), "7".into())]).unwrap();
        let back = TddnetModel::load_bundle(dir.path()).unwrap();
        assert_eq!(back, m);
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("seed = 7"));
        assert!(manifest.contains("predictors = ABCD"));
    }

    #[test]
    fn key_value_parsing() {
        let kv = parse_key_values("# c\na = 1 # trailing\n b=two \n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two");
        assert!(parse_key_values("novalue").is_err());
        assert!(parse_key_values("a=1\na=2").is_err());
    }

    #[test]
    fn cascade_rejects_empty_class() {
        let grid = make_pilot_grid(16, 4).unwrap();
        let data = CascadeData {
            classifier_train: Samples::new(8, 5),
            classifier_val: Samples::new(8, 5),
            predictors: vec![(ChannelClass::TdlA, ClassData::default())],
        };
        let cfg = CascadeTrainConfig { classifier: TrainConfig::default(), predictor: TrainConfig::default() };
        assert!(matches!(train_cascade(&grid, &data, &cfg), Err(Error::Usage(_))));
    }
}
