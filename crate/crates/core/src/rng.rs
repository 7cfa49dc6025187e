//! Seeded random streams and complex Gaussian sampling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{CMatrix, CVector, Complex64};

/// What a stream is used for within one trial. Separate purposes never share
/// random words, so adding draws to one cannot shift another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Channels = 0,
    RandomPhases = 1,
    EveRealization = 2,
    Oracle = 3,
    Shard = 4,
}

/// Stream `purpose` of trial `trial` under `master`.
pub fn stream(master: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((trial << 8) | purpose as u64);
    rng
}

/// Independent sub-stream `index` of an existing stream id, for sharded work.
pub fn shard(master: u64, trial: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream((trial << 24) | (index << 8) | Purpose::Shard as u64);
    rng
}

/// One draw of CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng, variance))
}

/// Row-major fill so that dumps and draws agree on ordering.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_normal(rng, variance);
        }
    }
    m
}

/// Unit-modulus vector with phases uniform on [0, 2pi).
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(1.0, t)
    })
}
