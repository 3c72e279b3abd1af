//! Tapped-delay-line channels for the TDL-A..E classes.
//!
//! Tap tables ship in `data/tdl_pdp_v1.csv` as transcribed from the TDL
//! tables of 3GPP TR 38.901. Delays there are normalized to the RMS delay
//! spread; [`load_pdp`] scales them to a chosen delay spread. Rows sharing a
//! delay (the LOS/diffuse pair of TDL-D/E, and one duplicated delay in TDL-E)
//! are merged into a single tap, which leaves the second-order statistics
//! unchanged.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Shipped tap tables.
pub const PDP_TABLE: &str = include_str!("../data/tdl_pdp_v1.csv");

/// Default RMS delay spread, seconds.
pub const DEFAULT_DELAY_SPREAD: f64 = 100e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelClass {
    TdlA,
    TdlB,
    TdlC,
    TdlD,
    TdlE,
}

impl ChannelClass {
    pub const ALL: [ChannelClass; 5] = [ChannelClass::TdlA, ChannelClass::TdlB, ChannelClass::TdlC, ChannelClass::TdlD, ChannelClass::TdlE];
    /// Number of classes.
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ChannelClass> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn from_letter(c: char) -> Option<ChannelClass> {
        let c = c.to_ascii_uppercase();
        Self::ALL.into_iter().find(|k| k.letter() == c)
    }

    /// TDL-D and TDL-E have a specular first tap.
    pub fn is_los(self) -> bool {
        matches!(self, ChannelClass::TdlD | ChannelClass::TdlE)
    }
}

impl fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TDL-{}", self.letter())
    }
}

impl FromStr for ChannelClass {
    type Err = Error;

    /// Accepts `C`, `TDL-C`, `TDL_C`, `tdlc`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let t = t.strip_prefix("TDL").unwrap_or(&t);
        let t = t.trim_start_matches(['-', '_']);
        let mut chars = t.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => ChannelClass::from_letter(c),
            _ => None,
        }
        .ok_or_else(|| Error::Config(format!("unknown channel class {s:?}")))
    }
}

/// One row of the tap table file.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpRow {
    pub class: ChannelClass,
    pub tap_index: u32,
    pub normalized_delay: f64,
    pub power_db: f64,
    pub k_db: Option<f64>,
}

/// Parse `class,tap_index,normalized_delay,power_db,k_db` records.
pub fn parse_pdp_table(text: &str) -> Result<Vec<PdpRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Config(format!("pdp table line {}: {what}", lineno + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(bad("expected 4 or 5 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        let k_db = match fields.get(4) {
            Some(s) if !s.is_empty() => Some(num(s)?),
            _ => None,
        };
        rows.push(PdpRow {
            class: fields[0].parse()?,
            tap_index: fields[1].parse().map_err(|_| bad("bad tap index"))?,
            normalized_delay: num(fields[2])?,
            power_db: num(fields[3])?,
            k_db,
        });
    }
    Ok(rows)
}

/// Delays and powers of one TDL class at a given delay spread.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub class: ChannelClass,
    /// Seconds, strictly ascending.
    pub delays: Vec<f64>,
    /// Linear power fractions summing to one.
    pub powers: Vec<f64>,
    /// Rician K-factor of tap 0 in dB (TDL-D/E only).
    pub los_k_db: Option<f64>,
}

impl PowerDelayProfile {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Linear K-factor of tap 0, if any.
    pub fn los_k(&self) -> Option<f64> {
        self.los_k_db.map(|k| 10f64.powf(k / 10.0))
    }

    pub fn mean_delay(&self) -> f64 {
        self.delays.iter().zip(&self.powers).map(|(t, p)| t * p).sum()
    }

    pub fn rms_delay_spread(&self) -> f64 {
        let mean = self.mean_delay();
        let second: f64 = self.delays.iter().zip(&self.powers).map(|(t, p)| t * t * p).sum();
        (second - mean * mean).max(0.0).sqrt()
    }
}

/// Load a class from the shipped tables, scaled to `delay_spread` seconds.
pub fn load_pdp(class: ChannelClass, delay_spread: f64) -> Result<PowerDelayProfile> {
    let rows = parse_pdp_table(PDP_TABLE)?;
    pdp_from_rows(&rows, class, delay_spread)
}

pub fn pdp_from_rows(rows: &[PdpRow], class: ChannelClass, delay_spread: f64) -> Result<PowerDelayProfile> {
    if !(delay_spread > 0.0 && delay_spread.is_finite()) {
        return Err(Error::Config(format!("delay spread must be positive, got {delay_spread}")));
    }
    let mut taps: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for row in rows.iter().filter(|r| r.class == class) {
        let p = 10f64.powf(row.power_db / 10.0);
        match taps.iter_mut().find(|t| t.0 == row.normalized_delay) {
            Some(t) => {
                t.1 += p;
                t.2 = t.2.or(row.k_db);
            }
            None => taps.push((row.normalized_delay, p, row.k_db)),
        }
    }
    if taps.is_empty() {
        return Err(Error::Config(format!("no taps for {class}")));
    }
    taps.sort_by(|a, b| a.0.total_cmp(&b.0));
    if taps.iter().skip(1).any(|t| t.2.is_some()) {
        return Err(Error::Config(format!("{class}: K-factor only allowed on the first tap")));
    }
    let los_k_db = taps[0].2;
    if los_k_db.is_some() != class.is_los() {
        return Err(Error::Config(format!("{class}: K-factor presence does not match LOS class")));
    }
    let total: f64 = taps.iter().map(|t| t.1).sum();
    Ok(PowerDelayProfile {
        class,
        delays: taps.iter().map(|t| t.0 * delay_spread).collect(),
        powers: taps.iter().map(|t| t.1 / total).collect(),
        los_k_db,
    })
}

/// Maximum Doppler shift of a moving UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerSpec {
    pub ue_speed: f64,
    pub carrier_hz: f64,
    pub f_d: f64,
}

impl DopplerSpec {
    pub fn new(ue_speed_mps: f64, carrier_hz: f64) -> Self {
        DopplerSpec { ue_speed: ue_speed_mps, carrier_hz, f_d: ue_speed_mps * carrier_hz / SPEED_OF_LIGHT }
    }

    pub fn from_kmph(kmph: f64, carrier_hz: f64) -> Self {
        Self::new(kmph / 3.6, carrier_hz)
    }

    /// Jakes autocorrelation of a diffuse tap at lag `dt`.
    pub fn correlation(&self, dt: f64) -> f64 {
        libm::j0(2.0 * PI * self.f_d * dt)
    }
}

/// Complex tap gains of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Total gain per tap (specular + diffuse).
    pub taps: Vec<Complex64>,
    /// Specular part of tap 0 for LOS classes.
    pub los: Option<Complex64>,
    /// Variance of the diffuse part of each tap, beta * p_i for NLOS taps.
    pub diffuse_var: Vec<f64>,
    pub beta: f64,
    pub time_s: f64,
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draw tap gains with E|tap_i|^2 = beta * p_i.
///
/// For LOS classes tap 0 splits into a specular component of power
/// `beta p_0 K/(K+1)` with uniform random phase and a diffuse component of
/// power `beta p_0/(K+1)`.
pub fn realize_channel<R: Rng + ?Sized>(pdp: &PowerDelayProfile, beta: f64, rng: &mut R) -> Result<ChannelRealization> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Usage(format!("beta must be positive, got {beta}")));
    }
    let mut diffuse_var: Vec<f64> = pdp.powers.iter().map(|p| beta * p).collect();
    let los = pdp.los_k().map(|k| {
        let p0 = diffuse_var[0];
        diffuse_var[0] = p0 / (k + 1.0);
        let phase = rng.random::<f64>() * 2.0 * PI;
        Complex64::from_polar((p0 * k / (k + 1.0)).sqrt(), phase)
    });
    let mut taps: Vec<Complex64> = diffuse_var.iter().map(|&v| complex_normal(rng, v)).collect();
    if let Some(l) = los {
        taps[0] += l;
    }
    Ok(ChannelRealization { taps, los, diffuse_var, beta, time_s: 0.0 })
}

/// Advance a realization by `dt` seconds.
///
/// Diffuse parts follow a first-order Gauss–Markov process with Jakes
/// correlation `J0(2 pi f_d dt)`; the specular part rotates at the maximum
/// Doppler frequency (arrival along the direction of travel).
pub fn evolve_channel<R: Rng + ?Sized>(ch: &ChannelRealization, dt: f64, dop: &DopplerSpec, rng: &mut R) -> Result<ChannelRealization> {
    if !(dt >= 0.0) {
        return Err(Error::Usage(format!("dt must be non-negative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(ch.clone());
    }
    let rho = dop.correlation(dt);
    let innovation = (1.0 - rho * rho).max(0.0).sqrt();
    let los = ch.los.map(|l| l * Complex64::from_polar(1.0, 2.0 * PI * dop.f_d * dt));
    let mut taps: Vec<Complex64> = ch
        .taps
        .iter()
        .zip(&ch.diffuse_var)
        .enumerate()
        .map(|(i, (&tap, &var))| {
            let diffuse = match (i, ch.los) {
                (0, Some(l)) => tap - l,
                _ => tap,
            };
            diffuse * rho + complex_normal(rng, var) * innovation
        })
        .collect();
    if let Some(l) = los {
        taps[0] += l;
    }
    Ok(ChannelRealization { taps, los, diffuse_var: ch.diffuse_var.clone(), beta: ch.beta, time_s: ch.time_s + dt })
}

/// Per-subcarrier channel values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequencyResponse {
    pub values: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn new(values: Vec<Complex64>) -> Self {
        FrequencyResponse { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        FrequencyResponse::new(self.values.iter().map(|v| v * a).collect())
    }
}

impl From<Vec<Complex64>> for FrequencyResponse {
    fn from(values: Vec<Complex64>) -> Self {
        FrequencyResponse { values }
    }
}

/// Precomputed `exp(-j 2 pi n scs tau_i)` for a fixed profile and grid.
#[derive(Debug, Clone)]
pub struct ResponseBasis {
    n_subcarriers: usize,
    /// tap-major, `n_subcarriers` entries per tap
    phasors: Vec<Complex64>,
}

impl ResponseBasis {
    pub fn new(pdp: &PowerDelayProfile, n_subcarriers: usize, scs: f64) -> Self {
        let phasors = pdp
            .delays
            .iter()
            .flat_map(|&tau| (0..n_subcarriers).map(move |n| Complex64::from_polar(1.0, -2.0 * PI * n as f64 * scs * tau)))
            .collect();
        ResponseBasis { n_subcarriers, phasors }
    }

    pub fn n_taps(&self) -> usize {
        self.phasors.len().checked_div(self.n_subcarriers).unwrap_or(0)
    }

    pub fn evaluate(&self, ch: &ChannelRealization) -> FrequencyResponse {
        assert_eq!(ch.taps.len(), self.n_taps(), "realization does not match basis");
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_subcarriers];
        for (tap, row) in ch.taps.iter().zip(self.phasors.chunks_exact(self.n_subcarriers)) {
            for (o, e) in out.iter_mut().zip(row) {
                *o += tap * e;
            }
        }
        FrequencyResponse::new(out)
    }
}

/// `H(n) = sum_i tap_i exp(-j 2 pi n scs tau_i)`, evaluated at the exact tap delays.
pub fn freq_response(ch: &ChannelRealization, pdp: &PowerDelayProfile, n_subcarriers: usize, scs: f64) -> Result<FrequencyResponse> {
    if n_subcarriers == 0 || !(scs > 0.0) {
        return Err(Error::Usage(format!("need N >= 1 and scs > 0, got N={n_subcarriers}, scs={scs}")));
    }
    if ch.taps.len() != pdp.len() {
        return Err(Error::Usage(format!("{} taps but profile has {}", ch.taps.len(), pdp.len())));
    }
    Ok(ResponseBasis::new(pdp, n_subcarriers, scs).evaluate(ch))
}
