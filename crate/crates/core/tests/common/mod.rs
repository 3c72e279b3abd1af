#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tddnet::chanmodel::{freq_response, load_pdp, realize_channel, ChannelClass, ResponseBasis, DEFAULT_DELAY_SPREAD};
use tddnet::neural::{Activation, Loss, MlpModel, MlpSpec};
use tddnet::rffront::{effective_channel, gen_rf_chains, oracle_reciprocity, Direction, RfChainConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worst `|a - b| / max(|a|, |b|, floor)` over paired values.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

/// Random small network. Even `k` ends in softmax with cross-entropy; odd
/// `k` uses MSE with any output activation.
pub fn random_net(k: usize, r: &mut ChaCha8Rng) -> (MlpModel<f64>, Loss) {
    const HIDDEN: [Activation; 3] = [Activation::Linear, Activation::Tanh, Activation::Sigmoid];
    let depth = r.random_range(1..=3);
    let mut dims = vec![r.random_range(2..=6)];
    let mut acts = Vec::new();
    for _ in 0..depth - 1 {
        dims.push(r.random_range(2..=6));
        acts.push(HIDDEN[r.random_range(0..3)]);
    }
    dims.push(r.random_range(2..=5));
    let loss = if k.is_multiple_of(2) {
        acts.push(Activation::Softmax);
        Loss::CrossEntropy
    } else {
        acts.push([Activation::Linear, Activation::Tanh, Activation::Sigmoid, Activation::Softmax][(k / 2) % 4]);
        Loss::Mse
    };
    let mut net = MlpModel::<f64>::init(MlpSpec::new(dims, acts).unwrap(), r).unwrap();
    // Nonzero biases so their gradients are exercised away from the origin.
    for l in &mut net.layers {
        l.biases.iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
    }
    (net, loss)
}

fn param(m: &mut MlpModel<f64>, layer: usize, which: usize, p: usize) -> &mut f64 {
    if which == 0 {
        &mut m.layers[layer].weights[p]
    } else {
        &mut m.layers[layer].biases[p]
    }
}

/// Backprop against central differences (step 1e-4) on 20 random
/// networks; returns the worst relative error and the activations covered.
pub fn gradient_check(seed: u64) -> (f64, Vec<Activation>, Vec<Loss>) {
    let mut r = rng(seed);
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    let mut acts = Vec::new();
    let mut losses = Vec::new();
    for k in 0..20 {
        let (mut net, loss) = random_net(k, &mut r);
        let batch = 3;
        let x: Vec<f64> = (0..batch * net.input_dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let out = net.output_dim();
        let y: Vec<f64> = match loss {
            Loss::Mse => (0..batch * out).map(|_| r.random_range(-1.0..1.0)).collect(),
            Loss::CrossEntropy => (0..batch)
                .flat_map(|_| {
                    let hot = r.random_range(0..out);
                    (0..out).map(move |j| if j == hot { 1.0 } else { 0.0 })
                })
                .collect(),
        };
        let (_, grads) = net.loss_and_gradients(&x, &y, batch, loss).unwrap();
        for li in 0..net.layers.len() {
            for which in 0..2 {
                let n = if which == 0 { net.layers[li].weights.len() } else { net.layers[li].biases.len() };
                let mut analytic = Vec::with_capacity(n);
                let mut numeric = Vec::with_capacity(n);
                for p in 0..n {
                    let orig = *param(&mut net, li, which, p);
                    *param(&mut net, li, which, p) = orig + eps;
                    let up = net.batch_loss(&x, &y, batch, loss).unwrap();
                    *param(&mut net, li, which, p) = orig - eps;
                    let down = net.batch_loss(&x, &y, batch, loss).unwrap();
                    *param(&mut net, li, which, p) = orig;
                    numeric.push((up - down) / (2.0 * eps));
                    analytic.push(if which == 0 { grads.weights[li][p] } else { grads.biases[li][p] });
                }
                worst = worst.max(max_rel_err(&analytic, &numeric, 1e-6));
            }
            acts.push(net.layers[li].activation);
        }
        losses.push(loss);
    }
    acts.sort_by_key(|a| a.code());
    acts.dedup();
    losses.sort_by_key(|l| *l == Loss::CrossEntropy);
    losses.dedup();
    (worst, acts, losses)
}

/// Worst relative error of `oracle_reciprocity(UL) == DL` over `pairs`
/// random (channel, chains) draws.
pub fn reciprocity_identity(pairs: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 256;
    let scs = 30e3;
    let cfg = RfChainConfig::default();
    let pdps: Vec<_> = ChannelClass::ALL.iter().map(|&c| load_pdp(c, DEFAULT_DELAY_SPREAD).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let pdp = &pdps[i % pdps.len()];
        let g = freq_response(&realize_channel(pdp, 1.0, &mut r).unwrap(), pdp, n, scs).unwrap();
        let chains = gen_rf_chains(&cfg, n, &mut r).unwrap();
        let ul = effective_channel(&g, &chains, Direction::Uplink).unwrap();
        let dl = effective_channel(&g, &chains, Direction::Downlink).unwrap();
        let est = oracle_reciprocity(&ul, &chains).unwrap();
        for (a, b) in est.values.iter().zip(&dl.values) {
            worst = worst.max((a - b).norm() / b.norm().max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Worst `|mean |tap_i|^2 / p_i - 1|` over all taps of all classes.
pub fn tap_power_deviation(draws: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for class in ChannelClass::ALL {
        let pdp = load_pdp(class, DEFAULT_DELAY_SPREAD).unwrap();
        let mut r = rng(seed ^ class.index() as u64);
        let mut acc = vec![0.0; pdp.len()];
        for _ in 0..draws {
            let ch = realize_channel(&pdp, 1.0, &mut r).unwrap();
            for (a, t) in acc.iter_mut().zip(&ch.taps) {
                *a += t.norm_sqr();
            }
        }
        for (a, p) in acc.iter().zip(&pdp.powers) {
            worst = worst.max((a / draws as f64 / p - 1.0).abs());
        }
    }
    worst
}

/// Worst `|sum p_i - 1|` over classes.
pub fn normalization_error() -> f64 {
    ChannelClass::ALL
        .iter()
        .map(|&c| (load_pdp(c, DEFAULT_DELAY_SPREAD).unwrap().powers.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Worst distance between the empirical `E[H(n) H*(n+d)]` and
/// `sum p_i exp(+j 2 pi d scs tau_i)`, relative to the unit channel power.
pub fn freq_correlation_error(realizations: usize, seed: u64) -> f64 {
    let n = 256;
    let scs = 30e3;
    let lags = [1usize, 4, 8, 24, 48, 96];
    let mut worst: f64 = 0.0;
    for class in ChannelClass::ALL {
        let pdp = load_pdp(class, DEFAULT_DELAY_SPREAD).unwrap();
        let basis = ResponseBasis::new(&pdp, n, scs);
        let mut r = rng(seed ^ ((class.index() as u64) << 8));
        let mut acc = vec![Complex64::new(0.0, 0.0); lags.len()];
        for _ in 0..realizations {
            let h = basis.evaluate(&realize_channel(&pdp, 1.0, &mut r).unwrap());
            for (a, &d) in acc.iter_mut().zip(&lags) {
                let s: Complex64 = (0..n - d).map(|k| h.values[k] * h.values[k + d].conj()).sum();
                *a += s / (n - d) as f64;
            }
        }
        for (a, &d) in acc.iter().zip(&lags) {
            let theory: Complex64 = pdp
                .delays
                .iter()
                .zip(&pdp.powers)
                .map(|(t, p)| Complex64::from_polar(*p, 2.0 * std::f64::consts::PI * d as f64 * scs * t))
                .sum();
            worst = worst.max((a / realizations as f64 - theory).norm());
        }
    }
    worst
}
