//! Classical pilot interpolators used as reference points for the learned
//! predictor.
//!
//! Neither interpolator knows the RF chain gains, so by default they
//! interpolate the raw uplink estimates and carry the non-reciprocity into
//! their downlink estimate. [`CalibrationMode::Oracle`] corrects the pilots
//! with the true chain ratio first.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::airlink::{PilotCsi, PilotGrid};
use crate::chanmodel::{FrequencyResponse, PowerDelayProfile};
use crate::rffront::RfChainSet;
use crate::{Error, Result};

/// Diagonal loading applied when the pilot correlation matrix is singular.
pub const WIENER_FALLBACK_LOADING: f64 = 1e-10;

/// Pivot ratio below which the pilot correlation matrix counts as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub enum CalibrationMode<'a> {
    None,
    /// Multiply pilot estimates by the true `(r_dl t_dl)/(r_ul t_ul)`.
    Oracle(&'a RfChainSet),
}

impl CalibrationMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            CalibrationMode::None => "none",
            CalibrationMode::Oracle(_) => "oracle",
        }
    }
}

pub fn calibrate_pilots(csi: &PilotCsi, grid: &PilotGrid, calib: CalibrationMode<'_>) -> Result<PilotCsi> {
    check_csi(csi, grid)?;
    match calib {
        CalibrationMode::None => Ok(csi.clone()),
        CalibrationMode::Oracle(chains) => {
            if chains.len() != grid.n_subcarriers {
                return Err(Error::Usage(format!("chains cover {} subcarriers, grid {}", chains.len(), grid.n_subcarriers)));
            }
            let values = csi.values.iter().zip(&grid.indices).map(|(v, &l)| v * chains.reciprocity_factor(l)).collect();
            Ok(PilotCsi { values, snr_db: csi.snr_db })
        }
    }
}

fn check_csi(csi: &PilotCsi, grid: &PilotGrid) -> Result<()> {
    if csi.values.len() != grid.len() {
        return Err(Error::Usage(format!("{} pilot values for a {}-pilot grid", csi.values.len(), grid.len())));
    }
    Ok(())
}

/// Piecewise-linear interpolation of real and imaginary parts, with
/// two-point linear extrapolation past the last pilot.
pub fn linear_interp(csi: &PilotCsi, grid: &PilotGrid) -> Result<FrequencyResponse> {
    check_csi(csi, grid)?;
    if grid.len() < 2 {
        return Err(Error::Usage("linear interpolation needs at least two pilots".into()));
    }
    let idx = &grid.indices;
    let v = &csi.values;
    let mut out = Vec::with_capacity(grid.n_subcarriers);
    let mut seg = 0;
    for n in 0..grid.n_subcarriers {
        while seg + 2 < idx.len() && n > idx[seg + 1] {
            seg += 1;
        }
        let (l0, l1) = (idx[seg] as f64, idx[seg + 1] as f64);
        let t = (n as f64 - l0) / (l1 - l0);
        out.push(v[seg] + (v[seg + 1] - v[seg]) * t);
    }
    Ok(out.into())
}

/// `r(delta) = sum_i p_i exp(-j 2 pi delta scs tau_i)`, the correlation
/// `E[H(n + delta) H*(n)]` of a unit-power channel.
pub fn freq_correlation(pdp: &PowerDelayProfile, delta_subcarriers: i64, scs: f64) -> Complex64 {
    pdp.delays.iter().zip(&pdp.powers).map(|(&tau, &p)| Complex64::from_polar(p, -2.0 * PI * delta_subcarriers as f64 * scs * tau)).sum()
}

/// LMMSE interpolation matrix `R_hp (R_pp + sigma^2 I)^-1` for one
/// (profile, SNR, grid), reusable across samples.
#[derive(Debug, Clone)]
pub struct WienerFilter {
    n_subcarriers: usize,
    n_pilots: usize,
    /// `n_subcarriers x n_pilots`, row-major.
    weights: Vec<Complex64>,
    /// Whether the fallback diagonal loading was needed.
    pub regularized: bool,
}

/// Wiener output plus solver metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerEstimate {
    pub response: FrequencyResponse,
    pub regularized: bool,
}

impl WienerFilter {
    /// `snr_db` sets the noise-to-signal ratio `10^(-snr/10)` relative to the
    /// unit-power channel; `+inf` means no noise.
    pub fn new(pdp: &PowerDelayProfile, snr_db: f64, grid: &PilotGrid, scs: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Usage("Wiener interpolation needs at least one pilot".into()));
        }
        if snr_db.is_nan() {
            return Err(Error::Usage("snr is NaN".into()));
        }
        let noise = 10f64.powf(-snr_db / 10.0);
        let np = grid.len();
        let n = grid.n_subcarriers;
        let lags = |a: usize, b: usize| freq_correlation(pdp, a as i64 - b as i64, scs);

        // W = R_hp A^-1  <=>  A^T W^T = R_hp^T
        let build = |loading: f64| {
            let mut a_t = vec![Complex64::new(0.0, 0.0); np * np];
            for i in 0..np {
                for j in 0..np {
                    let mut v = lags(grid.indices[i], grid.indices[j]);
                    if i == j {
                        v += noise + loading;
                    }
                    a_t[j * np + i] = v;
                }
            }
            a_t
        };
        let mut rhs = vec![Complex64::new(0.0, 0.0); np * n];
        for j in 0..np {
            for k in 0..n {
                rhs[j * n + k] = lags(k, grid.indices[j]);
            }
        }
        let (w_t, regularized) = match solve(build(0.0), rhs.clone(), np, n) {
            Some(x) => (x, false),
            None => {
                let x = solve(build(WIENER_FALLBACK_LOADING), rhs, np, n)
                    .ok_or_else(|| Error::Estimation("pilot correlation matrix singular after loading".into()))?;
                (x, true)
            }
        };
        let mut weights = vec![Complex64::new(0.0, 0.0); n * np];
        for j in 0..np {
            for k in 0..n {
                weights[k * np + j] = w_t[j * n + k];
            }
        }
        Ok(WienerFilter { n_subcarriers: n, n_pilots: np, weights, regularized })
    }

    pub fn apply(&self, pilots: &[Complex64]) -> Result<FrequencyResponse> {
        if pilots.len() != self.n_pilots {
            return Err(Error::Usage(format!("{} pilot values for a {}-pilot filter", pilots.len(), self.n_pilots)));
        }
        Ok(self
            .weights
            .chunks_exact(self.n_pilots)
            .map(|row| row.iter().zip(pilots).map(|(w, p)| w * p).sum())
            .collect::<Vec<Complex64>>()
            .into())
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }
}

/// One-shot Wiener interpolation with optional oracle calibration.
pub fn wiener_interp(
    csi: &PilotCsi,
    pdp: &PowerDelayProfile,
    snr_db: f64,
    grid: &PilotGrid,
    scs: f64,
    calib: CalibrationMode<'_>,
) -> Result<WienerEstimate> {
    let pilots = calibrate_pilots(csi, grid, calib)?;
    let filter = WienerFilter::new(pdp, snr_db, grid, scs)?;
    Ok(WienerEstimate { response: filter.apply(&pilots.values)?, regularized: filter.regularized })
}

/// Solve `A X = B` (A: n x n, B: n x m, row-major) by Gaussian elimination
/// with partial pivoting. `None` if a pivot is negligible relative to the
/// largest entry of `A`.
fn solve(mut a: Vec<Complex64>, mut b: Vec<Complex64>, n: usize, m: usize) -> Option<Vec<Complex64>> {
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].norm().total_cmp(&a[y * n + col].norm()))?;
        if !(a[piv * n + col].norm() > SINGULAR_PIVOT_RATIO * scale) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            for k in 0..m {
                b.swap(piv * m + k, col * m + k);
            }
        }
        let inv = a[col * n + col].inv();
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            for k in 0..m {
                let v = b[col * m + k];
                b[row * m + k] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = a[col * n + col].inv();
        for k in 0..m {
            let mut s = b[col * m + k];
            for j in col + 1..n {
                s -= a[col * n + j] * b[j * m + k];
            }
            b[col * m + k] = s * inv;
        }
    }
    Some(b)
}
