use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tddnet::bench::{
    run_accuracy_sweep, run_mismatch, run_mse_sweep, run_pilot_sweep, save_chains, train_all, train_classifier_for, train_predictor_for,
    train_snr_policy, EvalOptions, ExperimentConfig, LinkSimulator, SweepResult, DEFAULT_LINK,
};
use tddnet::cascade::{classifier_spec, parse_key_values, TddnetModel, MANIFEST_FILE};
use tddnet::chanmodel::ChannelClass;
use tddnet::neural::{save_model, MlpModel, TrainLog};
use tddnet::seed::Domain;

const MODEL_DIR: &str = "model";
const CLASSIFIER_STATUS: &str = "classifier_status";

#[derive(Parser)]
#[command(name = "tddnet", version, about = "Downlink CSI reconstruction benchmark for non-reciprocal TDD links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (`key = value` lines); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct NoiseFlag {
    /// Disable receiver noise in generated samples.
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args, Clone)]
struct ModelArg {
    /// Model bundle directory (default: `<out>/model`).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate per-class train/validation/test datasets and chain sidecars.
    GenData {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
    },
    /// Train the channel-class classifier.
    TrainClassifier {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
    },
    /// Train the predictor of one class.
    TrainPredictor {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
        /// Channel class, `A`..`E` or `TDL-A`..`TDL-E`.
        #[arg(long)]
        class: ChannelClass,
    },
    /// Train the classifier and every configured predictor.
    TrainAll {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
    },
    /// Classifier accuracy against SNR.
    EvalAccuracy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
        #[command(flatten)]
        model: ModelArg,
    },
    /// NMSE/MSE against SNR for the cascade and the baselines.
    EvalMse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
        #[command(flatten)]
        model: ModelArg,
        /// Route with the true class instead of the classifier.
        #[arg(long)]
        oracle_classifier: bool,
    },
    /// NMSE against pilot spacing, retraining the predictor per spacing.
    EvalPilotSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
    },
    /// Every class under the TDL-A predictor versus its matched predictor.
    EvalMismatch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        noise: NoiseFlag,
        #[command(flatten)]
        model: ModelArg,
    },
}

fn setup(common: &Common) -> Result<LinkSimulator> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    write(&common.out.join("config.txt"), &cfg.to_text())?;
    Ok(LinkSimulator::new(&cfg)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_log(path: &Path, logs: &[(String, &TrainLog)]) -> Result<()> {
    let mut text = String::new();
    for (name, log) in logs {
        text.push_str(&format!("# {name}: best epoch {}, stopped early: {}\n", log.best_epoch, log.stopped_early));
        for line in log.lines() {
            text.push_str(&line);
            text.push('\n');
        }
    }
    write(path, &text)
}

fn write_csv(out: &Path, name: &str, result: &SweepResult) -> Result<()> {
    let path = out.join(name);
    result.write_csv(&path)?;
    println!("wrote {} ({} rows)", path.display(), result.rows.len());
    Ok(())
}

fn bundle_extra(sim: &LinkSimulator, classifier_trained: bool) -> Vec<(String, String)> {
    vec![
        ("config_hash".into(), sim.cfg.hash()),
        ("master_seed".into(), sim.cfg.master_seed.to_string()),
        (CLASSIFIER_STATUS.into(), if classifier_trained { "trained" } else { "placeholder" }.into()),
    ]
}

fn classifier_trained(dir: &Path) -> Result<bool> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let kv = parse_key_values(&text).map_err(anyhow::Error::msg)?;
    Ok(kv.get(CLASSIFIER_STATUS).map(String::as_str) == Some("trained"))
}

/// Existing bundle in `dir`, or an empty one with a placeholder classifier.
fn open_bundle(dir: &Path, sim: &LinkSimulator) -> Result<(TddnetModel, bool)> {
    if dir.join(MANIFEST_FILE).exists() {
        let model = TddnetModel::load_bundle(dir)?;
        check_grid(&model, sim)?;
        Ok((model, classifier_trained(dir)?))
    } else {
        let classifier = MlpModel::zeros(classifier_spec(sim.grid.len()))?;
        Ok((TddnetModel::new(classifier, Default::default(), sim.grid.clone())?, false))
    }
}

fn check_grid(model: &TddnetModel, sim: &LinkSimulator) -> Result<()> {
    if model.grid != sim.grid {
        bail!(
            "model was trained for N={} spacing {}, config has N={} spacing {}",
            model.grid.n_subcarriers,
            model.grid.spacing,
            sim.grid.n_subcarriers,
            sim.grid.spacing
        );
    }
    Ok(())
}

fn load_for_eval(common: &Common, model: &ModelArg, sim: &LinkSimulator, needs_classifier: bool) -> Result<TddnetModel> {
    let dir = model.model.clone().unwrap_or_else(|| common.out.join(MODEL_DIR));
    let m = TddnetModel::load_bundle(&dir)?;
    check_grid(&m, sim)?;
    if needs_classifier && !classifier_trained(&dir)? {
        bail!("bundle in {} has no trained classifier; run train-classifier or pass --oracle-classifier", dir.display());
    }
    Ok(m)
}

fn gen_data(common: &Common, no_noise: bool) -> Result<()> {
    let sim = setup(common)?;
    let cfg = &sim.cfg;
    let opts = EvalOptions { no_noise, ..EvalOptions::default() };
    let policy = train_snr_policy(&sim, opts);
    let dir = common.out.join("data");
    fs::create_dir_all(&dir)?;
    let links = (cfg.m_aps * cfg.k_ues) as u64;
    for link in 0..links {
        let chains = sim.link_chains(link)?;
        save_chains(&chains, link, dir.join(format!("rf_link{link}.bin")))?;
        for &class in &cfg.classes {
            for (domain, name, count) in [(Domain::Train, "train", cfg.n_train_per_class), (Domain::Validation, "val", cfg.n_val_per_class)]
            {
                let ds = sim.gen_dataset(class, domain, 0, count, policy, link, &chains)?;
                ds.save(dir.join(format!("link{link}_{name}_{}.tdds", class.letter())))?;
            }
            if link == DEFAULT_LINK {
                for (p, &snr) in cfg.snr_grid_db.iter().enumerate() {
                    let snr = if no_noise { f64::INFINITY } else { snr };
                    let ds = tddnet::bench::test_set(&sim, class, p as u64, snr, &chains)?;
                    ds.save(dir.join(format!("link{link}_test_{}_snr{p}.tdds", class.letter())))?;
                }
            }
        }
    }
    println!("wrote datasets for {links} link(s) to {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData { common, noise } => gen_data(&common, noise.no_noise)?,
        Command::TrainClassifier { common, noise } => {
            let sim = setup(&common)?;
            let opts = EvalOptions { no_noise: noise.no_noise, ..EvalOptions::default() };
            let dir = common.out.join(MODEL_DIR);
            let (mut model, _) = open_bundle(&dir, &sim)?;
            let (classifier, log) = train_classifier_for(&sim, opts)?;
            model.classifier = classifier;
            model.save_bundle(&dir, &bundle_extra(&sim, true))?;
            write_log(&common.out.join("train_classifier.log"), &[("classifier".into(), &log)])?;
            println!("classifier trained (best epoch {}), saved to {}", log.best_epoch, dir.display());
        }
        Command::TrainPredictor { common, noise, class } => {
            let sim = setup(&common)?;
            let opts = EvalOptions { no_noise: noise.no_noise, ..EvalOptions::default() };
            let dir = common.out.join(MODEL_DIR);
            let (mut model, trained) = open_bundle(&dir, &sim)?;
            let (net, log) = train_predictor_for(&sim, class, opts)?;
            model.predictors[class.index()] = Some(net);
            model.save_bundle(&dir, &bundle_extra(&sim, trained))?;
            write_log(&common.out.join(format!("train_predictor_{}.log", class.letter())), &[(class.to_string(), &log)])?;
            println!("{class} predictor trained (best epoch {}), saved to {}", log.best_epoch, dir.display());
        }
        Command::TrainAll { common, noise } => {
            let sim = setup(&common)?;
            let opts = EvalOptions { no_noise: noise.no_noise, ..EvalOptions::default() };
            let dir = common.out.join(MODEL_DIR);
            let (model, log) = train_all(&sim, opts)?;
            model.save_bundle(&dir, &bundle_extra(&sim, true))?;
            let mut logs = vec![("classifier".to_string(), &log.classifier)];
            logs.extend(log.predictors.iter().map(|(c, l)| (c.to_string(), l)));
            write_log(&common.out.join("train_all.log"), &logs)?;
            println!("trained classifier and {} predictor(s), saved to {}", log.predictors.len(), dir.display());
        }
        Command::EvalAccuracy { common, noise, model } => {
            let sim = setup(&common)?;
            let m = load_for_eval(&common, &model, &sim, true)?;
            let opts = EvalOptions { no_noise: noise.no_noise, ..EvalOptions::default() };
            write_csv(&common.out, "accuracy.csv", &run_accuracy_sweep(&m, &sim, opts)?)?;
        }
        Command::EvalMse { common, noise, model, oracle_classifier } => {
            let sim = setup(&common)?;
            let m = load_for_eval(&common, &model, &sim, !oracle_classifier)?;
            let opts = EvalOptions { no_noise: noise.no_noise, oracle_classifier };
            write_csv(&common.out, "mse.csv", &run_mse_sweep(&m, &sim, opts)?)?;
        }
        Command::EvalPilotSweep { common, noise } => {
            let sim = setup(&common)?;
            let opts = EvalOptions { no_noise: noise.no_noise, ..EvalOptions::default() };
            let sweep = run_pilot_sweep(&sim, opts)?;
            let dir = common.out.join("pilot_sweep");
            fs::create_dir_all(&dir)?;
            let class = sim.cfg.pilot_sweep_class;
            let mut logs = Vec::new();
            for (spacing, net, log) in &sweep.models {
                save_model(net, dir.join(format!("predictor_{}_spacing{spacing}.mdl", class.letter())))?;
                logs.push((format!("{class} spacing {spacing}"), log));
            }
            write_log(&common.out.join("pilot_sweep.log"), &logs)?;
            write_csv(&common.out, "pilot_sweep.csv", &sweep.result)?;
        }
        Command::EvalMismatch { common, noise, model } => {
            let sim = setup(&common)?;
            let m = load_for_eval(&common, &model, &sim, false)?;
            let opts = EvalOptions { no_noise: noise.no_noise, ..EvalOptions::default() };
            write_csv(&common.out, "mismatch.csv", &run_mismatch(&m, &sim, opts)?)?;
        }
    }
    Ok(())
}
