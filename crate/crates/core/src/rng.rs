//! Seed derivation. One master seed fans out into independent ChaCha streams,
//! so a consumer of one stream never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named substreams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    InitialOpinions,
    DynamicsNoise,
    EnsemblePrior,
    ForecastNoise,
    AnalysisNoise,
    Restart(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::InitialOpinions => 0,
            Stream::DynamicsNoise => 1,
            Stream::EnsemblePrior => 2,
            Stream::ForecastNoise => 3,
            Stream::AnalysisNoise => 4,
            Stream::Restart(k) => 1_000 + u64::from(k),
        }
    }
}

/// Generator for `stream` of `master_seed`.
pub fn substream(master_seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream.id());
    rng
}
