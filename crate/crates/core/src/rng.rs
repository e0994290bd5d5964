//! Reproducible random streams.
//!
//! Every randomized computation in the crate draws from a ChaCha8 generator
//! keyed by the user seed. Independent work units (sampler chunks,
//! simulation replications) each get their own 64-bit stream id, so the
//! output never depends on how work is spread across threads.
//!
//! Stream ids are `domain << 56 | index`: the top byte separates the
//! different consumers of one seed, the low 56 bits number the work units.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded alongside every batch of draws.
pub const GENERATOR_ID: &str = "chacha8:key=seed,stream=domain<<56|index";

/// Draws per stream when a sampler splits its work into chunks.
pub const CHUNK: usize = 2048;

/// Consumers of a seed. Each gets a disjoint region of stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Chi2Limit = 1,
    Chi2Oracle = 2,
    MleLimit = 3,
    Replication = 4,
    Regularity = 5,
    CorrelationOracle = 6,
    Calibration = 7,
    Scratch = 8,
}

/// Generator for work unit `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 56));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}

/// Split `count` items into consecutive `(chunk_index, start, len)` ranges of
/// at most [`CHUNK`] items.
pub fn chunks(count: usize) -> impl Iterator<Item = (u64, usize, usize)> {
    (0..count.div_ceil(CHUNK)).map(move |c| {
        let start = c * CHUNK;
        (c as u64, start, CHUNK.min(count - start))
    })
}
