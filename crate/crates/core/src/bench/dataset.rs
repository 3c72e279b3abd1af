use std::path::Path;

use rand::Rng;

use super::config::ExperimentConfig;
use crate::airlink::{
    flatten_csi_f32, gen_pilot_symbols, ls_estimate, make_pilot_grid, simulate_pilot_rx, PilotGrid, FLATTEN_LAYOUT_RE_THEN_IM,
};
use crate::chanmodel::{evolve_channel, load_pdp, realize_channel, ChannelClass, DopplerSpec, PowerDelayProfile, ResponseBasis};
use crate::neural::Samples;
use crate::rffront::{effective_channel, gen_rf_chains, Direction, RfChainSet};
use crate::seed::{lane, Domain, StreamKey};
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"TDDS";
pub const DATASET_FORMAT_VERSION: u16 = 1;
pub const CHAINS_MAGIC: &[u8; 4] = b"TDDR";
pub const CHAINS_FORMAT_VERSION: u16 = 1;

/// One training or evaluation record.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSample {
    /// Flattened noisy uplink LS estimates, `2 Np` values.
    pub input: Vec<f32>,
    /// Flattened noiseless downlink channel, `2 N` values.
    pub target: Vec<f32>,
    pub class: ChannelClass,
    pub snr_db: f64,
    pub link_id: u64,
    pub domain: Domain,
}

/// How per-sample pilot SNR is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrPolicy {
    Fixed(f64),
    Uniform { min_db: f64, max_db: f64 },
    Noiseless,
}

impl SnrPolicy {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            SnrPolicy::Fixed(s) => s,
            SnrPolicy::Uniform { min_db, max_db } if max_db > min_db => rng.random_range(min_db..max_db),
            SnrPolicy::Uniform { min_db, .. } => min_db,
            SnrPolicy::Noiseless => f64::INFINITY,
        }
    }
}

/// Stream of sample `index` of (link, sweep point, class) in `domain`.
pub fn sample_key(master: u64, domain: Domain, link_id: u64, point: u64, class: ChannelClass, index: u64) -> StreamKey {
    StreamKey::new(master, domain, (link_id << 24) | ((point & 0xffff) << 8) | class.index() as u64, index)
}

/// Config plus everything derived from it that sample generation reuses.
#[derive(Debug, Clone)]
pub struct LinkSimulator {
    pub cfg: ExperimentConfig,
    pub grid: PilotGrid,
    pub doppler: DopplerSpec,
    pdps: Vec<PowerDelayProfile>,
    bases: Vec<ResponseBasis>,
}

impl LinkSimulator {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let pdps = ChannelClass::ALL.iter().map(|&c| load_pdp(c, cfg.delay_spread_s)).collect::<Result<Vec<_>>>()?;
        let bases = pdps.iter().map(|p| ResponseBasis::new(p, cfg.n_subcarriers, cfg.scs_hz)).collect();
        Ok(LinkSimulator {
            grid: make_pilot_grid(cfg.n_subcarriers, cfg.pilot_spacing)?,
            doppler: DopplerSpec::from_kmph(cfg.ue_speed_kmph, cfg.carrier_hz),
            cfg: cfg.clone(),
            pdps,
            bases,
        })
    }

    /// Same link, different comb.
    pub fn with_spacing(&self, spacing: usize) -> Result<Self> {
        let mut s = self.clone();
        s.grid = make_pilot_grid(self.cfg.n_subcarriers, spacing)?;
        s.cfg.pilot_spacing = spacing;
        Ok(s)
    }

    pub fn pdp(&self, class: ChannelClass) -> &PowerDelayProfile {
        &self.pdps[class.index()]
    }

    pub fn input_dim(&self) -> usize {
        2 * self.grid.len()
    }

    pub fn target_dim(&self) -> usize {
        2 * self.cfg.n_subcarriers
    }

    /// Chains of one logical link, rounded to the precision of the sidecar
    /// file so a reloaded set reproduces samples exactly.
    pub fn link_chains(&self, link_id: u64) -> Result<RfChainSet> {
        let mut rng = StreamKey::new(self.cfg.master_seed, Domain::RfChains, link_id, 0).rng(0);
        Ok(gen_rf_chains(&self.cfg.rf, self.cfg.n_subcarriers, &mut rng)?.quantized())
    }

    /// Channel draw, uplink sounding and LS estimate, then the channel after
    /// the TDD turnaround seen through the downlink chains.
    pub fn gen_sample(&self, class: ChannelClass, snr_db: f64, chains: &RfChainSet, key: StreamKey) -> Result<LinkSample> {
        let basis = &self.bases[class.index()];
        let ch = realize_channel(self.pdp(class), self.cfg.beta, &mut key.rng(lane::CHANNEL))?;
        let h_ul = effective_channel(&basis.evaluate(&ch), chains, Direction::Uplink)?;
        let block = gen_pilot_symbols(&self.grid, &mut key.rng(lane::PILOTS));
        let y = simulate_pilot_rx(&h_ul, &block, &self.grid, snr_db, &mut key.rng(lane::NOISE))?;
        let csi = ls_estimate(&y, &block, snr_db)?;
        let ch_dl = evolve_channel(&ch, self.cfg.tdd_delay_s, &self.doppler, &mut key.rng(lane::EVOLVE))?;
        let h_dl = effective_channel(&basis.evaluate(&ch_dl), chains, Direction::Downlink)?;
        Ok(LinkSample {
            input: flatten_csi_f32(&csi.values),
            target: flatten_csi_f32(&h_dl.values),
            class,
            snr_db,
            link_id: key.a >> 24,
            domain: key.domain,
        })
    }

    /// `count` samples of one class; sample `i` depends only on its key.
    pub fn gen_dataset(
        &self,
        class: ChannelClass,
        domain: Domain,
        point: u64,
        count: usize,
        snr: SnrPolicy,
        link_id: u64,
        chains: &RfChainSet,
    ) -> Result<Dataset> {
        let mut ds = Dataset::new(self, class, domain, link_id);
        for i in 0..count as u64 {
            let key = sample_key(self.cfg.master_seed, domain, link_id, point, class, i);
            let s = snr.draw(&mut key.rng(lane::SNR));
            ds.push(&self.gen_sample(class, s, chains, key)?)?;
        }
        Ok(ds)
    }

    /// Pooled classifier set with one-hot targets; classes cycle through
    /// `cfg.classes` so the label counts differ by at most one.
    pub fn gen_classifier_set(&self, domain: Domain, count: usize, snr: SnrPolicy, link_id: u64, chains: &RfChainSet) -> Result<Samples> {
        let classes = &self.cfg.classes;
        let mut out = Samples::new(self.input_dim(), ChannelClass::COUNT);
        for i in 0..count {
            let class = classes[i % classes.len()];
            let key = sample_key(self.cfg.master_seed, domain, link_id, 0, class, (i / classes.len()) as u64);
            let s = snr.draw(&mut key.rng(lane::SNR));
            let sample = self.gen_sample(class, s, chains, key)?;
            let mut one_hot = [0f32; ChannelClass::COUNT];
            one_hot[class.index()] = 1.0;
            out.push(&sample.input, &one_hot);
        }
        Ok(out)
    }

    /// One dataset per (AP, UE) link, each with its own chains and streams.
    /// Link `m * k_ues + k` of a single-link setup is link 0, identical to
    /// [`gen_dataset`](Self::gen_dataset) with `link_id = 0`.
    pub fn gen_multilink(
        &self,
        class: ChannelClass,
        domain: Domain,
        count: usize,
        snr: SnrPolicy,
        m_aps: usize,
        k_ues: usize,
    ) -> Result<Vec<(RfChainSet, Dataset)>> {
        if m_aps == 0 || k_ues == 0 {
            return Err(Error::Usage("need at least one AP and one UE".into()));
        }
        (0..(m_aps * k_ues) as u64)
            .map(|link| {
                let chains = self.link_chains(link)?;
                let ds = self.gen_dataset(class, domain, 0, count, snr, link, &chains)?;
                Ok((chains, ds))
            })
            .collect()
    }
}

/// Samples of one class from one link, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_subcarriers: usize,
    pub n_pilots: usize,
    pub class: ChannelClass,
    pub domain: Domain,
    pub link_id: u64,
    pub inputs: Vec<f32>,
    pub targets: Vec<f32>,
    pub snr_db: Vec<f32>,
}

impl Dataset {
    pub fn new(sim: &LinkSimulator, class: ChannelClass, domain: Domain, link_id: u64) -> Self {
        Dataset {
            n_subcarriers: sim.cfg.n_subcarriers,
            n_pilots: sim.grid.len(),
            class,
            domain,
            link_id,
            inputs: Vec::new(),
            targets: Vec::new(),
            snr_db: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.snr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snr_db.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * 2 * self.n_pilots..(i + 1) * 2 * self.n_pilots]
    }

    pub fn target(&self, i: usize) -> &[f32] {
        &self.targets[i * 2 * self.n_subcarriers..(i + 1) * 2 * self.n_subcarriers]
    }

    pub fn push(&mut self, s: &LinkSample) -> Result<()> {
        if s.input.len() != 2 * self.n_pilots || s.target.len() != 2 * self.n_subcarriers {
            return Err(Error::Usage("sample dimensions do not match dataset".into()));
        }
        if s.class != self.class || s.domain != self.domain || s.link_id != self.link_id {
            return Err(Error::Usage("sample belongs to a different class, domain or link".into()));
        }
        self.inputs.extend_from_slice(&s.input);
        self.targets.extend_from_slice(&s.target);
        self.snr_db.push(s.snr_db as f32);
        Ok(())
    }

    pub fn to_samples(&self) -> Samples {
        Samples {
            input_dim: 2 * self.n_pilots,
            target_dim: 2 * self.n_subcarriers,
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
        }
    }

    /// Header: magic, version u16, N u32, Np u32, layout u8, class u8,
    /// count u32, domain u8, link u64. Then per record `input ‖ target ‖ snr`
    /// as little-endian f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let rec = 2 * self.n_pilots + 2 * self.n_subcarriers + 1;
        let mut out = Vec::with_capacity(32 + self.len() * rec * 4);
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_subcarriers as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_pilots as u32).to_le_bytes());
        out.push(FLATTEN_LAYOUT_RE_THEN_IM);
        out.push(self.class.index() as u8);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.push(self.domain.tag());
        out.extend_from_slice(&self.link_id.to_le_bytes());
        for i in 0..self.len() {
            for v in self.input(i).iter().chain(self.target(i)).chain(std::iter::once(&self.snr_db[i])) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let err = |r: &str| Error::load(origin, r);
        const HEADER: usize = 4 + 2 + 4 + 4 + 1 + 1 + 4 + 1 + 8;
        if bytes.len() < 4 || &bytes[..4] != DATASET_MAGIC {
            return Err(err("bad magic, not a dataset file"));
        }
        if bytes.len() < HEADER {
            return Err(err("file truncated"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != DATASET_FORMAT_VERSION {
            return Err(err(&format!("unsupported dataset format version {version}")));
        }
        let (n, np) = (u32_at(6), u32_at(10));
        if bytes[14] != FLATTEN_LAYOUT_RE_THEN_IM {
            return Err(err(&format!("unsupported flatten layout {}", bytes[14])));
        }
        let class = ChannelClass::from_index(bytes[15] as usize).ok_or_else(|| err("unknown class"))?;
        let count = u32_at(16);
        let domain = Domain::from_tag(bytes[20]).ok_or_else(|| err("unknown stream domain"))?;
        let link_id = u64::from_le_bytes(bytes[21..29].try_into().unwrap());
        let rec = 2 * np + 2 * n + 1;
        let body = &bytes[HEADER..];
        if body.len() != count * rec * 4 {
            return Err(err(&format!("expected {} record bytes, found {}", count * rec * 4, body.len())));
        }
        let mut ds = Dataset {
            n_subcarriers: n,
            n_pilots: np,
            class,
            domain,
            link_id,
            inputs: Vec::with_capacity(count * 2 * np),
            targets: Vec::with_capacity(count * 2 * n),
            snr_db: Vec::with_capacity(count),
        };
        let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let values: Vec<f32> = values.collect();
        for r in values.chunks_exact(rec) {
            ds.inputs.extend_from_slice(&r[..2 * np]);
            ds.targets.extend_from_slice(&r[2 * np..rec - 1]);
            ds.snr_db.push(r[rec - 1]);
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Sidecar with a link's chain gains: magic, version u16, N u32, link u64,
/// then the gains as written by [`RfChainSet::to_le_bytes`].
pub fn save_chains(chains: &RfChainSet, link_id: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    out.extend_from_slice(CHAINS_MAGIC);
    out.extend_from_slice(&CHAINS_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(chains.len() as u32).to_le_bytes());
    out.extend_from_slice(&link_id.to_le_bytes());
    out.extend_from_slice(&chains.to_le_bytes());
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_chains(path: impl AsRef<Path>) -> Result<(u64, RfChainSet)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 18 || &bytes[..4] != CHAINS_MAGIC {
        return Err(Error::load(path, "not a chain sidecar file"));
    }
    if u16::from_le_bytes([bytes[4], bytes[5]]) != CHAINS_FORMAT_VERSION {
        return Err(Error::load(path, "unsupported chain file version"));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let link = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let chains = RfChainSet::from_le_bytes(&bytes[18..], n).map_err(|e| Error::load(path, e.to_string()))?;
    Ok((link, chains))
}
