//! Per-subcarrier RF chain gains for one AP–UE link.
//!
//! Uplink sees `r_ul * g * t_ul`, downlink sees `r_dl * g * t_dl` over the same
//! physical channel `g`, so the end-to-end channel is not reciprocal unless
//! the chain gains are known.

use num_complex::Complex64;
use rand::Rng;

use crate::chanmodel::{complex_normal, FrequencyResponse};
use crate::{Error, Result};

/// Smallest chain gain magnitude kept by [`gen_rf_chains`].
pub const MIN_CHAIN_GAIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfChainConfig {
    /// Average baseband gain.
    pub mean_gain: Complex64,
    /// Variance of the per-subcarrier gain around the mean.
    pub variance: f64,
}

impl Default for RfChainConfig {
    fn default() -> Self {
        RfChainConfig { mean_gain: Complex64::new(1.0, 0.0), variance: 0.1 }
    }
}

impl RfChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(Error::Config(format!("rf variance must be >= 0, got {}", self.variance)));
        }
        if !(self.mean_gain.norm() > 0.0) || !self.mean_gain.is_finite() {
            return Err(Error::Config(format!("rf mean gain must be nonzero, got {}", self.mean_gain)));
        }
        Ok(())
    }
}

/// Gains of the four chains of one link, one entry per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct RfChainSet {
    /// UE transmit.
    pub t_ul: Vec<Complex64>,
    /// AP receive.
    pub r_ul: Vec<Complex64>,
    /// AP transmit.
    pub t_dl: Vec<Complex64>,
    /// UE receive.
    pub r_dl: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl RfChainSet {
    /// All four chains equal to one.
    pub fn identity(n: usize) -> Self {
        let one = vec![Complex64::new(1.0, 0.0); n];
        RfChainSet { t_ul: one.clone(), r_ul: one.clone(), t_dl: one.clone(), r_dl: one }
    }

    pub fn len(&self) -> usize {
        self.t_ul.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ul.is_empty()
    }

    pub fn vectors(&self) -> [&[Complex64]; 4] {
        [&self.t_ul, &self.r_ul, &self.t_dl, &self.r_dl]
    }

    /// `(r_dl t_dl) / (r_ul t_ul)` at subcarrier `n`.
    pub fn reciprocity_factor(&self, n: usize) -> Complex64 {
        (self.r_dl[n] * self.t_dl[n]) / (self.r_ul[n] * self.t_ul[n])
    }

    /// Sidecar encoding: little-endian f32 pairs (re, im), vectors in the
    /// order t_ul, r_ul, t_dl, r_dl.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * 32);
        for v in self.vectors() {
            for z in v {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8], n: usize) -> Result<Self> {
        if bytes.len() != n * 32 {
            return Err(Error::Usage(format!("rf sidecar: expected {} bytes, got {}", n * 32, bytes.len())));
        }
        let mut vecs = bytes.chunks_exact(8 * n.max(1)).take(4).map(|chunk| {
            chunk
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                    let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                    Complex64::new(re as f64, im as f64)
                })
                .collect::<Vec<_>>()
        });
        let mut next = || vecs.next().unwrap_or_default();
        Ok(RfChainSet { t_ul: next(), r_ul: next(), t_dl: next(), r_dl: next() })
    }

    /// Round every gain through f32, as stored in the sidecar.
    pub fn quantized(&self) -> Self {
        let q = |v: &[Complex64]| v.iter().map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64)).collect();
        RfChainSet { t_ul: q(&self.t_ul), r_ul: q(&self.r_ul), t_dl: q(&self.t_dl), r_dl: q(&self.r_dl) }
    }
}

/// Draw 4·N i.i.d. gains from CN(mean_gain, variance), redrawing any with
/// magnitude below [`MIN_CHAIN_GAIN`].
pub fn gen_rf_chains<R: Rng + ?Sized>(cfg: &RfChainConfig, n_subcarriers: usize, rng: &mut R) -> Result<RfChainSet> {
    cfg.validate()?;
    let mut draw = || {
        (0..n_subcarriers)
            .map(|_| loop {
                let z = cfg.mean_gain + complex_normal(rng, cfg.variance);
                if z.norm() >= MIN_CHAIN_GAIN {
                    break z;
                }
            })
            .collect::<Vec<_>>()
    };
    Ok(RfChainSet { t_ul: draw(), r_ul: draw(), t_dl: draw(), r_dl: draw() })
}

/// End-to-end channel including the chain gains of one direction.
pub fn effective_channel(g: &FrequencyResponse, chains: &RfChainSet, direction: Direction) -> Result<FrequencyResponse> {
    if g.len() != chains.len() {
        return Err(Error::Usage(format!("channel has {} subcarriers, chains {}", g.len(), chains.len())));
    }
    let (r, t) = match direction {
        Direction::Uplink => (&chains.r_ul, &chains.t_ul),
        Direction::Downlink => (&chains.r_dl, &chains.t_dl),
    };
    Ok(g.values.iter().zip(r).zip(t).map(|((g, r), t)| r * g * t).collect::<Vec<_>>().into())
}

/// Exact downlink channel from the uplink one given the true chain gains.
///
/// Ground truth for tests and the baselines' oracle calibration; the learned
/// pipeline never sees chain gains.
pub fn oracle_reciprocity(h_ul: &FrequencyResponse, chains: &RfChainSet) -> Result<FrequencyResponse> {
    if h_ul.len() != chains.len() {
        return Err(Error::Usage(format!("channel has {} subcarriers, chains {}", h_ul.len(), chains.len())));
    }
    if let Some(n) = (0..chains.len()).find(|&n| chains.r_ul[n] * chains.t_ul[n] == Complex64::new(0.0, 0.0)) {
        return Err(Error::Invertibility(format!("uplink chain gain is zero at subcarrier {n}")));
    }
    Ok((0..h_ul.len()).map(|n| chains.reciprocity_factor(n) * h_ul.values[n]).collect::<Vec<_>>().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_response(n: usize, r: &mut ChaCha8Rng) -> FrequencyResponse {
        (0..n).map(|_| complex_normal(r, 1.0)).collect::<Vec<_>>().into()
    }

    #[test]
    fn zero_variance_gives_mean() {
        let g = Complex64::new(0.7, -0.2);
        let c = gen_rf_chains(&RfChainConfig { mean_gain: g, variance: 0.0 }, 32, &mut rng(0)).unwrap();
        for v in c.vectors() {
            assert!(v.iter().all(|z| *z == g));
        }
    }

    #[test]
    fn gain_statistics() {
        let cfg = RfChainConfig { mean_gain: Complex64::new(1.0, 0.0), variance: 0.1 };
        let c = gen_rf_chains(&cfg, 25_000, &mut rng(4)).unwrap();
        let all: Vec<Complex64> = c.vectors().iter().flat_map(|v| v.iter().copied()).collect();
        assert_eq!(all.len(), 100_000);
        let mean: Complex64 = all.iter().sum::<Complex64>() / all.len() as f64;
        let var = all.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / all.len() as f64;
        assert!((mean - 1.0).norm() < 0.01, "mean {mean}");
        assert!((var / 0.1 - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn magnitudes_respect_floor() {
        // Mean zero-ish and wide spread makes tiny draws plausible.
        let cfg = RfChainConfig { mean_gain: Complex64::new(1e-7, 0.0), variance: 1e-10 };
        let c = gen_rf_chains(&cfg, 2000, &mut rng(9)).unwrap();
        for v in c.vectors() {
            assert!(v.iter().all(|z| z.norm() >= MIN_CHAIN_GAIN));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = RfChainConfig { mean_gain: Complex64::new(0.0, 0.0), variance: 0.1 };
        assert!(gen_rf_chains(&bad, 4, &mut rng(0)).is_err());
        let bad = RfChainConfig { mean_gain: Complex64::new(1.0, 0.0), variance: -1.0 };
        assert!(gen_rf_chains(&bad, 4, &mut rng(0)).is_err());
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = RfChainConfig::default();
        assert_eq!(gen_rf_chains(&cfg, 64, &mut rng(2)).unwrap(), gen_rf_chains(&cfg, 64, &mut rng(2)).unwrap());
    }

    #[test]
    fn identity_chains_pass_channel_through() {
        let g = random_response(16, &mut rng(1));
        let id = RfChainSet::identity(16);
        assert_eq!(effective_channel(&g, &id, Direction::Uplink).unwrap(), g);
        assert_eq!(oracle_reciprocity(&g, &id).unwrap(), g);
    }

    #[test]
    fn zero_channel_stays_zero() {
        let mut g = random_response(8, &mut rng(1));
        g.values[3] = Complex64::new(0.0, 0.0);
        let c = gen_rf_chains(&RfChainConfig::default(), 8, &mut rng(2)).unwrap();
        for d in [Direction::Uplink, Direction::Downlink] {
            assert_eq!(effective_channel(&g, &c, d).unwrap().values[3], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn ul_dl_ratio_is_chain_ratio() {
        let mut r = rng(3);
        let g = random_response(64, &mut r);
        let c = gen_rf_chains(&RfChainConfig::default(), 64, &mut r).unwrap();
        let ul = effective_channel(&g, &c, Direction::Uplink).unwrap();
        let dl = effective_channel(&g, &c, Direction::Downlink).unwrap();
        for n in 0..64 {
            let want = (c.r_ul[n] * c.t_ul[n]) / (c.r_dl[n] * c.t_dl[n]);
            let got = ul.values[n] / dl.values[n];
            assert!((got - want).norm() / want.norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_reciprocity_example() {
        let one = Complex64::new(1.0, 0.0);
        let c = RfChainSet { t_ul: vec![one], r_ul: vec![one], t_dl: vec![one * 2.0], r_dl: vec![one] };
        let h = oracle_reciprocity(&vec![Complex64::new(1.0, 1.0)].into(), &c).unwrap();
        assert_eq!(h.values[0], Complex64::new(2.0, 2.0));
    }

    #[test]
    fn zero_chain_is_invertibility_error() {
        let mut c = RfChainSet::identity(4);
        c.t_ul[2] = Complex64::new(0.0, 0.0);
        let h: FrequencyResponse = vec![Complex64::new(1.0, 0.0); 4].into();
        assert!(matches!(oracle_reciprocity(&h, &c), Err(Error::Invertibility(_))));
    }

    #[test]
    fn length_mismatch_is_usage_error() {
        let h: FrequencyResponse = vec![Complex64::new(1.0, 0.0); 4].into();
        let c = RfChainSet::identity(5);
        assert!(matches!(effective_channel(&h, &c, Direction::Uplink), Err(Error::Usage(_))));
        assert!(matches!(oracle_reciprocity(&h, &c), Err(Error::Usage(_))));
    }

    #[test]
    fn sidecar_round_trip() {
        let c = gen_rf_chains(&RfChainConfig::default(), 12, &mut rng(5)).unwrap();
        let bytes = c.to_le_bytes();
        assert_eq!(bytes.len(), 12 * 32);
        assert_eq!(RfChainSet::from_le_bytes(&bytes, 12).unwrap(), c.quantized());
        assert!(RfChainSet::from_le_bytes(&bytes[1..], 12).is_err());
    }
}
