//! Event-level simulation of individual atoms and photons.
//!
//! Events are split into fixed-size chunks. Chunk `i` draws from its own ChaCha8
//! stream (`seed`, stream `i`), so tallies depend only on the seed, the chunk size
//! and the event count, never on how many worker threads run the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CountTable, DecayParams, ExcitationParams, Experiment, Hypothesis, PhotonCountTable,
    PhotonParams,
};

/// Random generator handed to per-event closures.
pub type SimRng = ChaCha8Rng;

pub const DEFAULT_CHUNK_SIZE: u64 = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Events per RNG substream.
    pub chunk_size: u64,
    /// Worker threads; 0 uses the global rayon pool. Never affects results.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            chunk_size: DEFAULT_CHUNK_SIZE,
            workers: 0,
        }
    }
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_chunk_size(self, chunk_size: u64) -> Result<Self> {
        if chunk_size == 0 {
            return Err(Error::domain("chunk_size", 0.0, ">= 1"));
        }
        Ok(Self { chunk_size, ..self })
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }

    /// Independent configuration for a sub-task, keyed by `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag)),
            ..*self
        }
    }

    fn chunk_rng(&self, chunk: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        rng
    }

    fn chunks(&self, n: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> + '_ {
        let size = self.chunk_size.max(1);
        let count = usize::try_from(n.div_ceil(size)).expect("chunk count fits in usize");
        (0..count).into_par_iter().map(move |i| {
            let i = i as u64;
            let start = i * size;
            (i, size.min(n - start))
        })
    }

    fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        if self.workers == 0 {
            return op();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(op),
            // Output does not depend on the pool, so the global one is equivalent.
            Err(_) => op(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Runs `n` events and tallies the category index each one returns.
///
/// Panics if `event` returns an index `>= K`.
pub fn tally_events<const K: usize, F>(n: u64, config: &SimConfig, event: F) -> [u64; K]
where
    F: Fn(&mut SimRng) -> usize + Sync,
{
    config.install(|| {
        config
            .chunks(n)
            .map(|(chunk, len)| {
                let mut rng = config.chunk_rng(chunk);
                let mut counts = [0u64; K];
                for _ in 0..len {
                    counts[event(&mut rng)] += 1;
                }
                counts
            })
            .reduce(
                || [0u64; K],
                |mut acc, part| {
                    for (a, p) in acc.iter_mut().zip(part) {
                        *a += p;
                    }
                    acc
                },
            )
    })
}

/// Runs `n` events and returns their outputs in event order.
pub fn collect_events<T, F>(n: u64, config: &SimConfig, event: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng) -> T + Sync,
{
    let parts: Vec<Vec<T>> = config.install(|| {
        config
            .chunks(n)
            .map(|(chunk, len)| {
                let mut rng = config.chunk_rng(chunk);
                (0..len).map(|_| event(&mut rng)).collect()
            })
            .collect()
    });
    parts.into_iter().flatten().collect()
}

/// Inverse-transform draw from an exponential distribution; `rate == 0` never decays.
pub fn sample_exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    if rate == 0.0 {
        return f64::INFINITY;
    }
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

const A1: usize = 0;
const A2: usize = 1;
const B1: usize = 2;
const B2: usize = 3;

pub fn simulate_excitation(
    p: &ExcitationParams,
    h: Hypothesis,
    config: &SimConfig,
) -> Result<CountTable<u64>> {
    h.require_binary(Experiment::Excitation)?;
    let eps = p.epsilon();
    let surv = p.survival();
    let collapse = h == Hypothesis::Ccqi;
    let counts = tally_events::<4, _>(p.n0(), config, |rng| {
        if !rng.random_bool(eps) {
            return A1;
        }
        let excited = rng.random_bool(surv);
        // Which cavity did the exciting is irrelevant by symmetry.
        let at_b = collapse && rng.random_bool(0.5);
        match (at_b, excited) {
            (false, false) => A1,
            (false, true) => A2,
            (true, false) => B1,
            (true, true) => B2,
        }
    });
    Ok(checked(CountTable::from_array(counts), p.n0()))
}

/// Where along the flight path an excited atom decayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayStage {
    BeforeInterferometer,
    InsideInterferometer,
    AfterInterferometer,
    /// Still excited at detection.
    Survived,
}

/// Samples the decay stage of one atom.
///
/// Under [`Hypothesis::ModifiedRate`] the flight is sampled segment by segment
/// with rate `lambda_prime` inside the interferometer; otherwise a single decay
/// time is drawn and classified.
pub fn sample_decay_stage<R: Rng + ?Sized>(
    rng: &mut R,
    p: &DecayParams,
    h: Hypothesis,
) -> DecayStage {
    let (t1, t2, t3) = (p.t1(), p.t2(), p.t3());
    if h == Hypothesis::ModifiedRate {
        if sample_exponential(rng, p.lambda()) < t1 {
            DecayStage::BeforeInterferometer
        } else if sample_exponential(rng, p.lambda_prime()) < t2 {
            DecayStage::InsideInterferometer
        } else if sample_exponential(rng, p.lambda()) < t3 {
            DecayStage::AfterInterferometer
        } else {
            DecayStage::Survived
        }
    } else {
        let t = sample_exponential(rng, p.lambda());
        if t < t1 {
            DecayStage::BeforeInterferometer
        } else if t < t1 + t2 {
            DecayStage::InsideInterferometer
        } else if t < t1 + t2 + t3 {
            DecayStage::AfterInterferometer
        } else {
            DecayStage::Survived
        }
    }
}

pub fn simulate_decay(
    p: &DecayParams,
    h: Hypothesis,
    config: &SimConfig,
) -> Result<CountTable<u64>> {
    let counts = tally_events::<4, _>(p.n0(), config, |rng| match sample_decay_stage(rng, p, h) {
        DecayStage::Survived => A2,
        DecayStage::InsideInterferometer if h == Hypothesis::Ccqi => {
            if rng.random_bool(0.5) {
                B1
            } else {
                A1
            }
        }
        _ => A1,
    });
    Ok(checked(CountTable::from_array(counts), p.n0()))
}

const C1: usize = 0;
const C2: usize = 1;
const LOST: usize = 2;

pub fn simulate_photon(
    p: &PhotonParams,
    h: Hypothesis,
    config: &SimConfig,
) -> Result<PhotonCountTable<u64>> {
    h.require_binary(Experiment::Photon)?;
    let ud = p.recombined();
    let counts = match h {
        Hypothesis::Pos => tally_events::<3, _>(p.n0(), config, |rng| {
            if rng.random_bool(ud) {
                return C1;
            }
            match rng.random_range(0..4u8) {
                0 | 1 => LOST,
                2 => C1,
                _ => C2,
            }
        }),
        _ => tally_events::<3, _>(p.n0(), config, |rng| {
            let device_arm = rng.random_bool(0.5);
            if device_arm && !rng.random_bool(ud) {
                return LOST;
            }
            if rng.random_bool(0.5) {
                C1
            } else {
                C2
            }
        }),
    };
    let table = PhotonCountTable::from_array(counts);
    assert_eq!(table.total(), p.n0(), "photon tallies must sum to n0");
    Ok(table)
}

fn checked(table: CountTable<u64>, n0: u64) -> CountTable<u64> {
    assert_eq!(table.total(), n0, "atom tallies must sum to n0");
    table
}
