//! Counter-based RNG stream derivation.
//!
//! Every random draw in an experiment comes from a [`StreamKey`]: the master
//! seed, a purpose [`Domain`], and two counters (typically link id and sample
//! index). The key is folded through SplitMix64 into a 256-bit ChaCha8 seed,
//! so any sample can be regenerated on its own without replaying the streams
//! that precede it, and disjoint keys never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Train, validation and test data live in
/// different domains so that the sets cannot overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    RfChains = 1,
    Train = 2,
    Validation = 3,
    Test = 4,
    ClassifierTrain = 5,
    ClassifierValidation = 6,
    Shuffle = 7,
    Init = 8,
    Pilots = 9,
}

impl Domain {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Domain> {
        use Domain::*;
        [RfChains, Train, Validation, Test, ClassifierTrain, ClassifierValidation, Shuffle, Init, Pilots]
            .into_iter()
            .find(|d| d.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master: u64,
    pub domain: Domain,
    pub a: u64,
    pub b: u64,
}

impl StreamKey {
    pub fn new(master: u64, domain: Domain, a: u64, b: u64) -> Self {
        StreamKey { master, domain, a, b }
    }

    /// Sub-stream for one purpose inside a sample (channel, noise, ...).
    pub fn rng(&self, lane: u64) -> ChaCha8Rng {
        let mut state = self.master;
        let mut seed = [0u8; 32];
        let words = [self.domain.tag() as u64, self.a, self.b, lane];
        // Absorb all words first so every output word depends on the full key.
        for word in words {
            state = mix(state ^ mix(word.wrapping_add(0xA24B_AED4_963E_E407)));
        }
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Lanes within one sample's key.
pub mod lane {
    pub const CHANNEL: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const PILOTS: u64 = 2;
    pub const SNR: u64 = 3;
    pub const EVOLVE: u64 = 4;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    mix(*state)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let k = StreamKey::new(7, Domain::Train, 3, 9);
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = k.rng(0);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = k.rng(0);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn keys_differing_in_any_field_diverge() {
        let base = StreamKey::new(7, Domain::Train, 3, 9);
        let first = |k: StreamKey, lane| k.rng(lane).random::<u64>();
        let x = first(base, 0);
        assert_ne!(x, first(StreamKey { master: 8, ..base }, 0));
        assert_ne!(x, first(StreamKey { domain: Domain::Test, ..base }, 0));
        assert_ne!(x, first(StreamKey { a: 4, ..base }, 0));
        assert_ne!(x, first(StreamKey { b: 10, ..base }, 0));
        assert_ne!(x, first(base, 1));
    }

    #[test]
    fn domain_tags_round_trip() {
        for t in 0..=255u8 {
            if let Some(d) = Domain::from_tag(t) {
                assert_eq!(d.tag(), t);
            }
        }
        assert_eq!(Domain::from_tag(4), Some(Domain::Test));
    }
}
