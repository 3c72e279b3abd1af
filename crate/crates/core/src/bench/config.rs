use std::fmt::Write as _;
use std::path::Path;

use crate::cascade::parse_key_values;
use crate::chanmodel::{ChannelClass, DEFAULT_DELAY_SPREAD};
use crate::neural::{Optimizer, TrainConfig};
use crate::rffront::RfChainConfig;
use crate::{Error, Result};

/// Every simulation and training knob. The text form is flat
/// `key = value` lines whose keys are the field names.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_subcarriers: usize,
    pub scs_hz: f64,
    pub carrier_hz: f64,
    /// Recorded only; the simulator works on the subcarrier grid.
    pub sample_rate_hz: f64,
    pub ue_speed_kmph: f64,
    pub pilot_spacing: usize,
    pub snr_grid_db: Vec<f64>,
    pub classes: Vec<ChannelClass>,
    pub rf: RfChainConfig,
    pub beta: f64,
    pub tdd_delay_s: f64,
    pub delay_spread_s: f64,
    pub m_aps: usize,
    pub k_ues: usize,
    pub n_train_per_class: usize,
    pub n_val_per_class: usize,
    pub n_classifier_train: usize,
    pub n_classifier_val: usize,
    pub n_test_per_point: usize,
    /// Training SNR is drawn uniformly from this range, per sample.
    pub train_snr_min_db: f64,
    pub train_snr_max_db: f64,
    pub predictor_learning_rate: f64,
    pub predictor_batch_size: usize,
    pub predictor_max_epochs: usize,
    pub predictor_patience: usize,
    pub classifier_learning_rate: f64,
    pub classifier_batch_size: usize,
    pub classifier_max_epochs: usize,
    pub classifier_patience: usize,
    pub pilot_sweep_spacings: Vec<usize>,
    pub pilot_sweep_class: ChannelClass,
    pub pilot_sweep_snr_db: f64,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_subcarriers: 256,
            scs_hz: 30e3,
            carrier_hz: 3.5e9,
            sample_rate_hz: 100e6,
            ue_speed_kmph: 20.0,
            pilot_spacing: 24,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            classes: ChannelClass::ALL.to_vec(),
            rf: RfChainConfig::default(),
            beta: 1.0,
            tdd_delay_s: 5e-4,
            delay_spread_s: DEFAULT_DELAY_SPREAD,
            m_aps: 1,
            k_ues: 1,
            n_train_per_class: 50_000,
            n_val_per_class: 5_000,
            n_classifier_train: 50_000,
            n_classifier_val: 5_000,
            n_test_per_point: 10_000,
            train_snr_min_db: 0.0,
            train_snr_max_db: 30.0,
            predictor_learning_rate: 1e-3,
            predictor_batch_size: 64,
            predictor_max_epochs: 200,
            predictor_patience: 10,
            classifier_learning_rate: 1e-3,
            classifier_batch_size: 64,
            classifier_max_epochs: 200,
            classifier_patience: 10,
            pilot_sweep_spacings: vec![8, 16, 24, 32, 48],
            pilot_sweep_class: ChannelClass::TdlC,
            pilot_sweep_snr_db: 22.0,
            master_seed: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn class(key: &str, v: &str) -> Result<ChannelClass> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: unknown channel class {v:?}")))
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text).map_err(Error::Config)?;
        let mut c = ExperimentConfig::default();
        for (k, v) in &kv {
            let k = k.as_str();
            match k {
                "n_subcarriers" => c.n_subcarriers = num(k, v)?,
                "scs_hz" => c.scs_hz = num(k, v)?,
                "carrier_hz" => c.carrier_hz = num(k, v)?,
                "sample_rate_hz" => c.sample_rate_hz = num(k, v)?,
                "ue_speed_kmph" => c.ue_speed_kmph = num(k, v)?,
                "pilot_spacing" => c.pilot_spacing = num(k, v)?,
                "snr_grid_db" => c.snr_grid_db = list(k, v)?,
                "classes" => c.classes = v.split(',').map(|s| class(k, s)).collect::<Result<_>>()?,
                "rf_mean_gain_re" => c.rf.mean_gain.re = num(k, v)?,
                "rf_mean_gain_im" => c.rf.mean_gain.im = num(k, v)?,
                "rf_variance" => c.rf.variance = num(k, v)?,
                "beta" => c.beta = num(k, v)?,
                "tdd_delay_s" => c.tdd_delay_s = num(k, v)?,
                "delay_spread_s" => c.delay_spread_s = num(k, v)?,
                "m_aps" => c.m_aps = num(k, v)?,
                "k_ues" => c.k_ues = num(k, v)?,
                "n_train_per_class" => c.n_train_per_class = num(k, v)?,
                "n_val_per_class" => c.n_val_per_class = num(k, v)?,
                "n_classifier_train" => c.n_classifier_train = num(k, v)?,
                "n_classifier_val" => c.n_classifier_val = num(k, v)?,
                "n_test_per_point" => c.n_test_per_point = num(k, v)?,
                "train_snr_min_db" => c.train_snr_min_db = num(k, v)?,
                "train_snr_max_db" => c.train_snr_max_db = num(k, v)?,
                "predictor_learning_rate" => c.predictor_learning_rate = num(k, v)?,
                "predictor_batch_size" => c.predictor_batch_size = num(k, v)?,
                "predictor_max_epochs" => c.predictor_max_epochs = num(k, v)?,
                "predictor_patience" => c.predictor_patience = num(k, v)?,
                "classifier_learning_rate" => c.classifier_learning_rate = num(k, v)?,
                "classifier_batch_size" => c.classifier_batch_size = num(k, v)?,
                "classifier_max_epochs" => c.classifier_max_epochs = num(k, v)?,
                "classifier_patience" => c.classifier_patience = num(k, v)?,
                "pilot_sweep_spacings" => c.pilot_sweep_spacings = list(k, v)?,
                "pilot_sweep_class" => c.pilot_sweep_class = class(k, v)?,
                "pilot_sweep_snr_db" => c.pilot_sweep_snr_db = num(k, v)?,
                "master_seed" => c.master_seed = num(k, v)?,
                _ => return Err(Error::Config(format!("unknown key {k:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_text())` gives back the same config.
    pub fn to_text(&self) -> String {
        let letters: Vec<String> = self.classes.iter().map(|c| c.letter().to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_subcarriers", self.n_subcarriers.to_string());
        kv("scs_hz", self.scs_hz.to_string());
        kv("carrier_hz", self.carrier_hz.to_string());
        kv("sample_rate_hz", self.sample_rate_hz.to_string());
        kv("ue_speed_kmph", self.ue_speed_kmph.to_string());
        kv("pilot_spacing", self.pilot_spacing.to_string());
        kv("snr_grid_db", join(&self.snr_grid_db));
        kv("classes", letters.join(", "));
        kv("rf_mean_gain_re", self.rf.mean_gain.re.to_string());
        kv("rf_mean_gain_im", self.rf.mean_gain.im.to_string());
        kv("rf_variance", self.rf.variance.to_string());
        kv("beta", self.beta.to_string());
        kv("tdd_delay_s", self.tdd_delay_s.to_string());
        kv("delay_spread_s", self.delay_spread_s.to_string());
        kv("m_aps", self.m_aps.to_string());
        kv("k_ues", self.k_ues.to_string());
        kv("n_train_per_class", self.n_train_per_class.to_string());
        kv("n_val_per_class", self.n_val_per_class.to_string());
        kv("n_classifier_train", self.n_classifier_train.to_string());
        kv("n_classifier_val", self.n_classifier_val.to_string());
        kv("n_test_per_point", self.n_test_per_point.to_string());
        kv("train_snr_min_db", self.train_snr_min_db.to_string());
        kv("train_snr_max_db", self.train_snr_max_db.to_string());
        kv("predictor_learning_rate", self.predictor_learning_rate.to_string());
        kv("predictor_batch_size", self.predictor_batch_size.to_string());
        kv("predictor_max_epochs", self.predictor_max_epochs.to_string());
        kv("predictor_patience", self.predictor_patience.to_string());
        kv("classifier_learning_rate", self.classifier_learning_rate.to_string());
        kv("classifier_batch_size", self.classifier_batch_size.to_string());
        kv("classifier_max_epochs", self.classifier_max_epochs.to_string());
        kv("classifier_patience", self.classifier_patience.to_string());
        kv("pilot_sweep_spacings", join(&self.pilot_sweep_spacings));
        kv("pilot_sweep_class", self.pilot_sweep_class.letter().to_string());
        kv("pilot_sweep_snr_db", self.pilot_sweep_snr_db.to_string());
        kv("master_seed", self.master_seed.to_string());
        s
    }

    /// CRC32 of the canonical text, as 8 hex digits.
    pub fn hash(&self) -> String {
        format!("{:08x}", crc32fast::hash(self.to_text().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("scs_hz", self.scs_hz),
            ("carrier_hz", self.carrier_hz),
            ("sample_rate_hz", self.sample_rate_hz),
            ("beta", self.beta),
            ("delay_spread_s", self.delay_spread_s),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [("ue_speed_kmph", self.ue_speed_kmph), ("tdd_delay_s", self.tdd_delay_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be >= 0, got {v}")));
            }
        }
        let counts = [
            ("n_subcarriers", self.n_subcarriers),
            ("m_aps", self.m_aps),
            ("k_ues", self.k_ues),
            ("n_train_per_class", self.n_train_per_class),
            ("n_val_per_class", self.n_val_per_class),
            ("n_classifier_train", self.n_classifier_train),
            ("n_classifier_val", self.n_classifier_val),
            ("n_test_per_point", self.n_test_per_point),
            ("predictor_batch_size", self.predictor_batch_size),
            ("classifier_batch_size", self.classifier_batch_size),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{k} must be >= 1")));
            }
        }
        if self.pilot_spacing == 0 || self.pilot_spacing > self.n_subcarriers {
            return Err(Error::Config(format!("pilot_spacing must be in 1..={}", self.n_subcarriers)));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(Error::Config("snr_grid_db must be a nonempty list of numbers".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("classes must not be empty".into()));
        }
        if !(self.train_snr_min_db <= self.train_snr_max_db) {
            return Err(Error::Config("train_snr_min_db must not exceed train_snr_max_db".into()));
        }
        if self.pilot_sweep_spacings.iter().any(|&s| s == 0 || s > self.n_subcarriers) {
            return Err(Error::Config("pilot_sweep_spacings out of range".into()));
        }
        for (k, v) in
            [("predictor_learning_rate", self.predictor_learning_rate), ("classifier_learning_rate", self.classifier_learning_rate)]
        {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        self.rf.validate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn predictor_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.predictor_learning_rate,
            batch_size: self.predictor_batch_size,
            max_epochs: self.predictor_max_epochs,
            optimizer: Optimizer::adam(),
            early_stop_patience: self.predictor_patience,
            seed: self.master_seed ^ 0x7072_6564,
            ..TrainConfig::default()
        }
    }

    pub fn classifier_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.classifier_learning_rate,
            batch_size: self.classifier_batch_size,
            max_epochs: self.classifier_max_epochs,
            optimizer: Optimizer::adam(),
            early_stop_patience: self.classifier_patience,
            seed: self.master_seed ^ 0x636c_6173,
            ..TrainConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_subcarriers, 256);
        assert_eq!(c.scs_hz, 30e3);
        assert_eq!(c.carrier_hz, 3.5e9);
        assert_eq!(c.sample_rate_hz, 1e8);
        assert_eq!(c.ue_speed_kmph, 20.0);
        assert_eq!(c.snr_grid_db.len(), 7);
        assert_eq!(c.classes.len(), 5);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig {
            snr_grid_db: vec![-2.5, 7.25],
            classes: vec![ChannelClass::TdlE, ChannelClass::TdlB],
            ..ExperimentConfig::default()
        };
        c.rf.variance = 0.05;
        c.master_seed = u64::MAX;
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = ExperimentConfig::parse("# small run\npilot_spacing = 8 # comb\nclasses = A, C\n").unwrap();
        assert_eq!(c.pilot_spacing, 8);
        assert_eq!(c.classes, vec![ChannelClass::TdlA, ChannelClass::TdlC]);
        assert_eq!(c.n_subcarriers, 256);
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["bogus = 1", "n_subcarriers = x", "scs_hz = -1", "snr_grid_db = ", "classes = Q", "pilot_spacing = 0"] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = a.clone().with_seed(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 8);
    }
}
