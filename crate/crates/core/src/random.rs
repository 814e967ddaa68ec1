//! Seeded generators for test instances.
//!
//! Every random object in the crate is drawn from a `ChaCha8Rng` seeded
//! through [`derive_seed`], so a master seed and an instance index fully
//! determine the instance regardless of evaluation order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::spaces::{DiscreteMeasureSpace, SpaceDescriptor, VectorFunction};

/// SplitMix64 finaliser of `master + index * golden`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vector(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| gaussian(rng))
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Uniformly random unit vector.
pub fn unit_vector(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, len);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Atom weights proportional to `1 + u/2`, `u ~ U[0,1)`, with total mass one.
pub fn random_measure(rng: &mut impl Rng, atoms: usize) -> DiscreteMeasureSpace {
    let raw: Vec<f64> = (0..atoms.max(1)).map(|_| 1.0 + 0.5 * rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    DiscreteMeasureSpace::new(raw.into_iter().map(|w| w / total).collect()).expect("positive weights")
}

/// Sum of three Gaussian bumps with random centres in `[0,1)`, widths in
/// `[0.05, 0.3)` and standard normal amplitudes, sampled at `(s + 1/2)/len`.
pub fn gaussian_mixture(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random::<f64>(), 0.05 + 0.25 * rng.random::<f64>(), gaussian(rng)))
        .collect();
    (0..len)
        .map(|s| {
            let t = (s as f64 + 0.5) / len as f64;
            bumps.iter().map(|(c, w, a)| a * (-((t - c) / w).powi(2) / 2.0).exp()).sum()
        })
        .collect()
}

/// An `n`-component function on `space` whose components are independent
/// Gaussian mixtures, each normalised to unit quasi-norm.
pub fn gaussian_mixture_function(rng: &mut impl Rng, space: &SpaceDescriptor, n: usize) -> VectorFunction {
    let dim = space.dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| loop {
            let row = gaussian_mixture(rng, dim);
            let norm = space.norm(&row).expect("row length matches");
            if norm > 1e-8 && norm.is_finite() {
                break row.iter().map(|v| v / norm).collect();
            }
        })
        .collect();
    VectorFunction::from_rows(space.clone(), &rows).expect("valid components")
}
