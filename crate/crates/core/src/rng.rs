//! Seeded sampling helpers. All randomness in the crate goes through
//! `ChaCha8Rng` so results are reproducible across platforms.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// A point drawn uniformly from the probability simplex (flat Dirichlet).
pub fn dirichlet_flat<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// A uniformly random unit vector whose coordinates sum to zero.
pub fn unit_zero_sum<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        d.iter_mut().for_each(|x| *x -= mean);
        let norm = l2(&d);
        if norm > 1e-9 {
            d.iter_mut().for_each(|x| *x /= norm);
            return d;
        }
    }
}

/// Derived seed for the `index`-th independent stream under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
