use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that draw randomness from one run seed.
///
/// Each purpose maps to a distinct ChaCha stream, so adding draws for one
/// purpose never shifts the sequence seen by another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Parameter initialization for the n-th tensor.
    Init(u32),
    /// Per-epoch minibatch shuffling.
    Shuffle(u32),
    /// Dataset partitioning.
    Split,
    /// Fixed structure of a synthetic domain (token pattern, signal direction).
    SynthPattern(u32),
    /// Per-sample draws of a synthetic dataset.
    SynthSample(u64),
    /// Free-form draws in tests and tools.
    Aux(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init(n) => 1 << 56 | n as u64,
            Stream::Shuffle(n) => 2 << 56 | n as u64,
            Stream::Split => 3 << 56,
            Stream::SynthPattern(n) => 4 << 56 | n as u64,
            Stream::SynthSample(n) => 5 << 56 | (n & ((1 << 56) - 1)),
            Stream::Aux(n) => 6 << 56 | n as u64,
        }
    }
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.id());
    rng
}
