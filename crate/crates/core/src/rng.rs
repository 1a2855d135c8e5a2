//! Reproducible per-trial random streams.
//!
//! Every trial draws from ChaCha8 keyed by the master seed (expanded with
//! `seed_from_u64`) and with the 64-bit stream id set to the trial index.
//! Distinct trial indices therefore select disjoint ChaCha keystreams under the
//! same key, so trials never share random numbers and any trial can be
//! replayed alone, in any order, on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used by every optimizer in this crate.
pub type TrialRng = ChaCha8Rng;

/// Stream for trial `trial_index` under `master_seed`.
pub fn rng_streams(master_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}
