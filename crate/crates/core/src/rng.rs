//! Purpose-labelled random substreams.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by the
//! run seed, so the Hawkes realisation and its volumes are identical no matter
//! which injection model later consumes them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Arrivals = 1,
    Volumes = 2,
    PriceOffsets = 3,
    CancelChoice = 4,
}

pub fn substream(seed: u64, purpose: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
