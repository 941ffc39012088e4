//! Counter-based random streams keyed by `(master seed, replica index)`.
//!
//! ChaCha8 is a counter-mode stream cipher: the seed fixes the key and the
//! replica index selects the stream, so replica `i` sees the same numbers no
//! matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

pub fn replica_rng(seed: u64, replica: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}
