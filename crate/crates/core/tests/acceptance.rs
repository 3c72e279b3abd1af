//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use num_complex::Complex64;

use tddnet::airlink::{make_pilot_grid, PilotCsi};
use tddnet::baselines::{linear_interp, wiener_interp, CalibrationMode};
use tddnet::bench::{
    metric_nmse, run_accuracy_sweep, run_mismatch, run_mse_sweep, run_pilot_sweep, train_all, EvalOptions, ExperimentConfig, LinkSimulator,
    SweepResult,
};
use tddnet::chanmodel::{freq_response, load_pdp, realize_channel, ChannelClass, FrequencyResponse, DEFAULT_DELAY_SPREAD};

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: &str, took: Duration) {
        self.total += 1;
        if pass {
            self.passed += 1;
        }
        println!("[{}] {id:>2} {name}: {detail} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, took.as_secs_f64());
    }
}

/// Sizes for a single-core run; the full defaults take hours here.
fn acceptance_config() -> ExperimentConfig {
    ExperimentConfig {
        n_train_per_class: 30_000,
        n_val_per_class: 3_000,
        n_classifier_train: 50_000,
        n_classifier_val: 5_000,
        n_test_per_point: 10_000,
        predictor_max_epochs: 60,
        classifier_max_epochs: 200,
        pilot_sweep_spacings: vec![8, 32],
        master_seed: 20_240_601,
        ..ExperimentConfig::default()
    }
}

fn nmse(r: &SweepResult, class: ChannelClass, x: f64, method: &str) -> f64 {
    r.value(&class.to_string(), x, method, "nmse").unwrap_or_else(|| panic!("no {method} row for {class} at {x}"))
}

fn criterion_1(rep: &mut Report) {
    let t = Instant::now();
    let worst = common::reciprocity_identity(1000, 1);
    let took = t.elapsed();
    rep.line(
        1,
        "reciprocity oracle identity",
        worst < 1e-12 && took < Duration::from_secs(1),
        &format!("max relative error {worst:.2e} over 1000 pairs (< 1e-12, < 1 s)"),
        took,
    );
}

fn criterion_2(rep: &mut Report) {
    let t = Instant::now();
    let norm = common::normalization_error();
    let taps = common::tap_power_deviation(100_000, 2);
    let corr = common::freq_correlation_error(10_000, 2);
    let took = t.elapsed();
    rep.line(
        2,
        "channel statistics",
        norm < 1e-12 && taps < 0.01 && corr < 0.03 && took < Duration::from_secs(60),
        &format!("normalization {norm:.1e} (< 1e-12), tap power {:.2}% (< 1%), freq correlation {corr:.4} (< 0.03)", taps * 100.0),
        took,
    );
}

fn criterion_3(rep: &mut Report) {
    let t = Instant::now();
    let (worst, acts, losses) = common::gradient_check(3);
    let took = t.elapsed();
    rep.line(
        3,
        "gradient correctness",
        worst < 1e-4 && acts.len() == 4 && losses.len() == 2 && took < Duration::from_secs(10),
        &format!("max relative error {worst:.2e} over 20 nets, {} activations, {} losses (< 1e-4)", acts.len(), losses.len()),
        took,
    );
}

fn criterion_9(rep: &mut Report) {
    let t = Instant::now();
    let grid = make_pilot_grid(256, 1).unwrap();
    let mut r = common::rng(9);
    let mut worst: f64 = 0.0;
    for class in ChannelClass::ALL {
        let pdp = load_pdp(class, DEFAULT_DELAY_SPREAD).unwrap();
        for _ in 0..20 {
            let h = freq_response(&realize_channel(&pdp, 1.0, &mut r).unwrap(), &pdp, 256, 30e3).unwrap();
            let csi = PilotCsi { values: h.values.clone(), snr_db: f64::INFINITY };
            let est = wiener_interp(&csi, &pdp, f64::INFINITY, &grid, 30e3, CalibrationMode::None).unwrap();
            worst = worst.max(metric_nmse(&est.response, &h).unwrap());
        }
    }
    let comb = make_pilot_grid(256, 24).unwrap();
    let c = Complex64::new(-0.4, 1.1);
    let flat = linear_interp(&PilotCsi { values: vec![c; comb.len()], snr_db: f64::INFINITY }, &comb).unwrap();
    let flat_err = metric_nmse(&flat, &FrequencyResponse::new(vec![c; 256])).unwrap();
    rep.line(
        9,
        "baseline sanity",
        worst < 1e-6 && flat_err == 0.0,
        &format!("noiseless full-comb Wiener NMSE {worst:.2e} (< 1e-6), linear on flat channel {flat_err:.1e} (exact)"),
        t.elapsed(),
    );
}

fn main() {
    let mut rep = Report { passed: 0, total: 0 };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_9(&mut rep);

    let cfg = acceptance_config();
    let sim = LinkSimulator::new(&cfg).unwrap();
    let opts = EvalOptions::default();
    println!(
        "training cascade: {} + {} samples per predictor, {} + {} for the classifier",
        cfg.n_train_per_class, cfg.n_val_per_class, cfg.n_classifier_train, cfg.n_classifier_val
    );
    let t = Instant::now();
    let (model, log) = train_all(&sim, opts).unwrap();
    let train_time = t.elapsed();
    println!(
        "trained in {:.0} s; classifier best epoch {}, predictors best epochs {:?}",
        train_time.as_secs_f64(),
        log.classifier.best_epoch,
        log.predictors.iter().map(|(c, l)| (c.letter(), l.best_epoch)).collect::<Vec<_>>()
    );

    // 4: 10k pooled test samples per SNR point.
    let t = Instant::now();
    let acc_sim = LinkSimulator::new(&ExperimentConfig { n_test_per_point: 2_000, ..cfg.clone() }).unwrap();
    let acc = run_accuracy_sweep(&model, &acc_sim, opts).unwrap();
    let low = acc.value("all", 0.0, "classifier", "accuracy").unwrap();
    let high = acc.value("all", 30.0, "classifier", "accuracy").unwrap();
    let took = train_time + t.elapsed();
    let per_class: Vec<String> = ChannelClass::ALL
        .iter()
        .map(|c| format!("{}={:.2}", c.letter(), acc.value(&c.to_string(), 30.0, "classifier", "accuracy").unwrap()))
        .collect();
    rep.line(
        4,
        "classifier accuracy",
        low > 0.60 && high >= 0.95 && took < Duration::from_secs(15 * 60),
        &format!(
            "pooled {:.1}% at 0 dB (> 60%), {:.1}% at 30 dB (>= 95%); 30 dB per class {}",
            low * 100.0,
            high * 100.0,
            per_class.join(" ")
        ),
        took,
    );

    let t = Instant::now();
    let mse = run_mse_sweep(&model, &sim, opts).unwrap();
    let mse_time = t.elapsed();

    // 5
    let c = ChannelClass::TdlC;
    let mut ok5 = true;
    let mut parts = Vec::new();
    for snr in [10.0, 20.0, 30.0] {
        let (p, l, w) = (nmse(&mse, c, snr, "cascade"), nmse(&mse, c, snr, "linear"), nmse(&mse, c, snr, "wiener"));
        ok5 &= 2.0 * p <= l && 2.0 * p <= w;
        parts.push(format!("{snr} dB: proposed {p:.4}, linear {l:.4} (x{:.1}), Wiener {w:.4} (x{:.1})", l / p, w / p));
    }
    let took = train_time + mse_time;
    rep.line(5, "sparse-pilot superiority (factor >= 2)", ok5 && took < Duration::from_secs(30 * 60), &parts.join("; "), took);

    // 6
    let t = Instant::now();
    let sweep = run_pilot_sweep(&sim, opts).unwrap().result;
    let took = t.elapsed();
    let s = cfg.pilot_sweep_snr_db;
    let ratio = |m: &str| {
        let a = sweep.value(&c.to_string(), 32.0, m, "nmse").unwrap();
        let b = sweep.value(&c.to_string(), 8.0, m, "nmse").unwrap();
        (a / b, b, a)
    };
    let (pr, p8, p32) = ratio("proposed");
    let (lr, l8, l32) = ratio("linear");
    rep.line(
        6,
        "pilot-spacing robustness",
        pr <= 3.0 && lr >= 5.0 && took < Duration::from_secs(30 * 60),
        &format!("at {s} dB: proposed {p8:.4} -> {p32:.4}, ratio {pr:.2} (<= 3); linear {l8:.4} -> {l32:.4}, ratio {lr:.2} (>= 5)"),
        took,
    );

    // 7
    let t = Instant::now();
    let mm = run_mismatch(&model, &sim, opts).unwrap();
    let took = t.elapsed();
    let mut all_ge = true;
    let mut best_gap: (f64, ChannelClass) = (0.0, ChannelClass::TdlB);
    let mut worst_ratio = f64::INFINITY;
    for &class in &ChannelClass::ALL[1..] {
        for &snr in &cfg.snr_grid_db {
            let r = nmse(&mm, class, snr, "tdl_a_predictor") / nmse(&mm, class, snr, "matched_predictor");
            all_ge &= r >= 1.0;
            worst_ratio = worst_ratio.min(r);
            if snr == 30.0 && r > best_gap.0 {
                best_gap = (r, class);
            }
        }
    }
    rep.line(
        7,
        "mismatch penalty",
        all_ge && best_gap.0 >= 1.2,
        &format!(
            "smallest mismatched/matched ratio {worst_ratio:.2} (>= 1); largest at 30 dB {:.2} for {} (>= 1.2)",
            best_gap.0, best_gap.1
        ),
        took,
    );

    // 8
    let mut ok8 = true;
    let mut worst_gap: f64 = f64::NEG_INFINITY;
    let mut where_gap = String::new();
    let mut violations = Vec::new();
    for class in ChannelClass::ALL {
        for &snr in &cfg.snr_grid_db {
            let (o, k) = (nmse(&mse, class, snr, "oracle_classifier"), nmse(&mse, class, snr, "cascade"));
            if o > k {
                ok8 = false;
                violations.push(format!("{}@{snr}", class.letter()));
            }
            if snr >= 20.0 {
                let gap = (k - o) / o;
                if gap > worst_gap {
                    worst_gap = gap;
                    where_gap = format!("{class} at {snr} dB");
                }
            }
        }
    }
    ok8 &= worst_gap <= 0.10;
    rep.line(
        8,
        "cascade vs oracle",
        ok8,
        &format!(
            "oracle above cascade at {} point(s){}; largest relative gap at >= 20 dB {:.1}% ({where_gap}) (<= 10%)",
            violations.len(),
            if violations.is_empty() { String::new() } else { format!(" [{}]", violations.join(", ")) },
            worst_gap * 100.0
        ),
        mse_time,
    );

    // 10: every sweep twice from the same config and seed, training included.
    let t = Instant::now();
    let small = ExperimentConfig {
        n_train_per_class: 600,
        n_val_per_class: 100,
        n_classifier_train: 600,
        n_classifier_val: 100,
        n_test_per_point: 300,
        predictor_max_epochs: 3,
        classifier_max_epochs: 3,
        pilot_sweep_spacings: vec![16, 32],
        master_seed: 10,
        ..ExperimentConfig::default()
    };
    let run_all = || {
        let sim = LinkSimulator::new(&small).unwrap();
        let (m, _) = train_all(&sim, opts).unwrap();
        [
            run_accuracy_sweep(&m, &sim, opts).unwrap().to_csv(),
            run_mse_sweep(&m, &sim, opts).unwrap().to_csv(),
            run_pilot_sweep(&sim, opts).unwrap().result.to_csv(),
            run_mismatch(&m, &sim, opts).unwrap().to_csv(),
        ]
    };
    let (a, b) = (run_all(), run_all());
    let same = a.iter().zip(&b).filter(|(x, y)| x.as_bytes() == y.as_bytes()).count();
    rep.line(10, "reproducibility", same == 4, &format!("{same}/4 sweep CSVs byte-identical on re-run"), t.elapsed());

    println!("{}/{} criteria passed", rep.passed, rep.total);
    if rep.passed != rep.total {
        std::process::exit(1);
    }
}
