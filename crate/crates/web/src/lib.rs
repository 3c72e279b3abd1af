//! Browser bindings: channel responses, pilot interpolation and frequency
//! correlation for the five TDL classes.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use tddnet::airlink::{gen_pilot_symbols, ls_estimate, make_pilot_grid, simulate_pilot_rx};
use tddnet::baselines::{freq_correlation, linear_interp, wiener_interp, CalibrationMode};
use tddnet::bench::metric_nmse;
use tddnet::chanmodel::{freq_response, load_pdp, realize_channel, ChannelClass, PowerDelayProfile, DEFAULT_DELAY_SPREAD};

const N_SUBCARRIERS: usize = 256;
const SCS_HZ: f64 = 30e3;

fn profile(class: &str) -> Result<PowerDelayProfile, JsError> {
    let c = class
        .trim()
        .trim_start_matches("TDL-")
        .chars()
        .next()
        .and_then(|c| ChannelClass::from_letter(c.to_ascii_uppercase()))
        .ok_or_else(|| JsError::new(&format!("unknown channel class {class:?}")))?;
    Ok(load_pdp(c, DEFAULT_DELAY_SPREAD)?)
}

fn magnitude_db(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|h| 10.0 * h.norm_sqr().max(1e-30).log10()).collect()
}

/// `|H(n)|^2` in dB over 256 subcarriers for one random realization.
#[wasm_bindgen]
pub fn frequency_response(class: &str, seed: u64) -> Result<Vec<f64>, JsError> {
    let pdp = profile(class)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = freq_response(&realize_channel(&pdp, 1.0, &mut rng)?, &pdp, N_SUBCARRIERS, SCS_HZ)?;
    Ok(magnitude_db(&h.values))
}

/// `|R(d)|` for lags `0..=max_lag` subcarriers.
#[wasm_bindgen]
pub fn correlation_curve(class: &str, max_lag: u32) -> Result<Vec<f64>, JsError> {
    let pdp = profile(class)?;
    Ok((0..=max_lag as i64).map(|d| freq_correlation(&pdp, d, SCS_HZ).norm()).collect())
}

/// One noisy pilot observation interpolated by the linear and Wiener baselines.
#[wasm_bindgen]
pub struct Interpolation {
    truth: Vec<f64>,
    linear: Vec<f64>,
    wiener: Vec<f64>,
    pilots: Vec<u32>,
    linear_nmse: f64,
    wiener_nmse: f64,
}

#[wasm_bindgen]
impl Interpolation {
    #[wasm_bindgen(constructor)]
    pub fn new(class: &str, spacing: u32, snr_db: f64, seed: u64) -> Result<Interpolation, JsError> {
        let pdp = profile(class)?;
        let grid = make_pilot_grid(N_SUBCARRIERS, spacing as usize)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = freq_response(&realize_channel(&pdp, 1.0, &mut rng)?, &pdp, N_SUBCARRIERS, SCS_HZ)?;
        let block = gen_pilot_symbols(&grid, &mut rng);
        let y = simulate_pilot_rx(&h, &block, &grid, snr_db, &mut rng)?;
        let csi = ls_estimate(&y, &block, snr_db)?;
        let lin = linear_interp(&csi, &grid)?;
        let wie = wiener_interp(&csi, &pdp, snr_db, &grid, SCS_HZ, CalibrationMode::None)?.response;
        Ok(Interpolation {
            truth: magnitude_db(&h.values),
            linear: magnitude_db(&lin.values),
            wiener: magnitude_db(&wie.values),
            pilots: grid.indices.iter().map(|&i| i as u32).collect(),
            linear_nmse: metric_nmse(&lin, &h)?,
            wiener_nmse: metric_nmse(&wie, &h)?,
        })
    }

    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    pub fn linear(&self) -> Vec<f64> {
        self.linear.clone()
    }

    pub fn wiener(&self) -> Vec<f64> {
        self.wiener.clone()
    }

    pub fn pilots(&self) -> Vec<u32> {
        self.pilots.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn linear_nmse(&self) -> f64 {
        self.linear_nmse
    }

    #[wasm_bindgen(getter)]
    pub fn wiener_nmse(&self) -> f64 {
        self.wiener_nmse
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_deterministic_and_sized() {
        let a = Interpolation::new("C", 24, 20.0, 5).unwrap();
        let b = Interpolation::new("TDL-C", 24, 20.0, 5).unwrap();
        assert_eq!(a.truth.len(), N_SUBCARRIERS);
        assert_eq!(a.linear, b.linear);
        assert!(a.wiener_nmse < a.linear_nmse);
    }

    #[test]
    fn correlation_starts_at_one() {
        let r = correlation_curve("a", 10).unwrap();
        assert_eq!(r.len(), 11);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!(r.iter().all(|v| *v <= 1.0 + 1e-12));
    }

    #[test]
    fn response_has_full_length() {
        assert_eq!(frequency_response("E", 1).unwrap().len(), N_SUBCARRIERS);
    }
}
