//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha20 stream keyed by
//! the run seed, so adding draws to one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matkit::Matrix;

/// Independent substreams of a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    GroundTruth = 1,
    Ensemble = 2,
    Probes = 3,
    SgdIndices = 4,
    Init = 5,
    QuadData = 6,
    LabelNoise = 7,
}

pub type Rng = ChaCha20Rng;

pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Matrix with i.i.d. standard normal entries, filled in row-major order.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}
