//! Deterministic, antipodally symmetric direction sets on the unit sphere.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv_base = 1.0 / base as f64;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base) as f64 * inv_base;
        index /= base;
        inv_base /= base as f64;
    }
    result
}

/// Up to `count` unit vectors in `R^dim`, closed under sign flip and always
/// containing `±e_1, ..., ±e_dim`.
///
/// In two dimensions the remaining directions are equally spaced angles with
/// a seeded offset. In higher dimensions they come from a Halton sequence
/// with a seeded Cranley-Patterson shift, pushed onto the sphere through the
/// inverse normal CDF. The zero-dimensional sphere only has the two points
/// `±1`, so `dim == 1` always yields exactly two directions. An odd `count`
/// is rounded down.
pub fn sample_directions(dim: usize, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if count < 2 * dim {
        return Err(Error::TooFewDirections {
            needed: 2 * dim,
            got: count,
        });
    }
    let mut out = Vec::with_capacity(count);
    fn push_pair(out: &mut Vec<DVector<f64>>, v: DVector<f64>) {
        out.push(-&v);
        out.push(v);
    }
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        push_pair(&mut out, e);
    }
    if dim <= 1 {
        return Ok(out);
    }
    let extra = (count - 2 * dim) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if dim == 2 {
        let offset: f64 = rng.random_range(0.0..1.0);
        for j in 0..extra {
            let theta = PI * (j as f64 + offset) / extra as f64;
            push_pair(&mut out, DVector::from_vec(vec![theta.cos(), theta.sin()]));
        }
    } else if dim <= PRIMES.len() {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut index = 1u64;
        while out.len() < 2 * dim + 2 * extra {
            let v = DVector::from_fn(dim, |c, _| {
                let u = (radical_inverse(index, PRIMES[c]) + shift[c]).fract();
                normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
            });
            index += 1;
            let len = v.norm();
            if len > 1e-8 {
                push_pair(&mut out, v / len);
            }
        }
    } else {
        while out.len() < 2 * dim + 2 * extra {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let len = v.norm();
            if len > 1e-8 {
                push_pair(&mut out, v / len);
            }
        }
    }
    Ok(out)
}
