//! Comb-pilot uplink sounding and LS estimation.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::chanmodel::{complex_normal, FrequencyResponse};
use crate::{Error, Result};

/// Pilots at `0, spacing, 2·spacing, ...` below `n_subcarriers`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotGrid {
    pub n_subcarriers: usize,
    pub spacing: usize,
    pub indices: Vec<usize>,
}

impl PilotGrid {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn make_pilot_grid(n_subcarriers: usize, spacing: usize) -> Result<PilotGrid> {
    if spacing < 1 || spacing > n_subcarriers {
        return Err(Error::Usage(format!("pilot spacing {spacing} outside 1..={n_subcarriers}")));
    }
    Ok(PilotGrid { n_subcarriers, spacing, indices: (0..n_subcarriers).step_by(spacing).collect() })
}

/// Known unit-modulus pilot symbols, one per grid index.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    pub symbols: Vec<Complex64>,
    pub seed: u64,
}

/// QPSK pilots `(±1 ± j)/√2`.
pub fn gen_pilot_symbols<R: Rng + ?Sized>(grid: &PilotGrid, rng: &mut R) -> PilotBlock {
    let seed = rng.random();
    let symbols = (0..grid.len())
        .map(|_| {
            let bits: u8 = rng.random_range(0..4);
            let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        })
        .collect();
    PilotBlock { symbols, seed }
}

/// Receive `y(l) = h(l) x(l) + w(l)` at the pilot indices.
///
/// The noise variance is the empirical mean of `|h(l) x(l)|^2` over this
/// block divided by the linear SNR. `snr_db = +inf` disables noise; no
/// random draws are consumed in that case.
pub fn simulate_pilot_rx<R: Rng + ?Sized>(
    h: &FrequencyResponse,
    block: &PilotBlock,
    grid: &PilotGrid,
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if h.len() != grid.n_subcarriers || block.symbols.len() != grid.len() {
        return Err(Error::Usage(format!(
            "channel length {} / {} pilots do not match grid ({} subcarriers, {} pilots)",
            h.len(),
            block.symbols.len(),
            grid.n_subcarriers,
            grid.len()
        )));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Usage(format!("invalid snr {snr_db}")));
    }
    let clean: Vec<Complex64> = grid.indices.iter().zip(&block.symbols).map(|(&l, x)| h.values[l] * x).collect();
    if snr_db == f64::INFINITY {
        return Ok(clean);
    }
    let power = clean.iter().map(|v| v.norm_sqr()).sum::<f64>() / clean.len() as f64;
    let noise_var = power / 10f64.powf(snr_db / 10.0);
    Ok(clean.into_iter().map(|v| v + complex_normal(rng, noise_var)).collect())
}

/// Uplink channel estimates at the pilot positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotCsi {
    pub values: Vec<Complex64>,
    pub snr_db: f64,
}

/// `h(l) = y(l) / x(l)`.
pub fn ls_estimate(y: &[Complex64], block: &PilotBlock, snr_db: f64) -> Result<PilotCsi> {
    if y.len() != block.symbols.len() {
        return Err(Error::Usage(format!("{} observations for {} pilots", y.len(), block.symbols.len())));
    }
    let values = y
        .iter()
        .zip(&block.symbols)
        .map(|(y, x)| if x.norm() < 1e-12 { Err(Error::Estimation(format!("pilot symbol {x} too small to divide by"))) } else { Ok(y / x) })
        .collect::<Result<_>>()?;
    Ok(PilotCsi { values, snr_db })
}

/// Identifier of the flatten layout, stored in model and dataset headers.
pub const FLATTEN_LAYOUT_RE_THEN_IM: u8 = 1;

/// `[re(v_0), ..., re(v_{L-1}), im(v_0), ..., im(v_{L-1})]`.
pub fn flatten_csi(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| v.re).chain(values.iter().map(|v| v.im)).collect()
}

/// Same layout as [`flatten_csi`], narrowed to f32 for network input.
pub fn flatten_csi_f32(values: &[Complex64]) -> Vec<f32> {
    values.iter().map(|v| v.re as f32).chain(values.iter().map(|v| v.im as f32)).collect()
}

/// Inverse of [`flatten_csi`]. Panics on odd length.
pub fn unflatten_csi(flat: &[f64]) -> Vec<Complex64> {
    assert!(flat.len().is_multiple_of(2), "flattened CSI must have even length");
    let (re, im) = flat.split_at(flat.len() / 2);
    re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
}

pub fn unflatten_csi_f32(flat: &[f32]) -> Vec<Complex64> {
    assert!(flat.len().is_multiple_of(2), "flattened CSI must have even length");
    let (re, im) = flat.split_at(flat.len() / 2);
    re.iter().zip(im).map(|(&r, &i)| Complex64::new(r as f64, i as f64)).collect()
}
