//! Seeded random instances shared by the subcommands and the acceptance
//! suite.

use nalgebra::DMatrix;
use vecreduce::bilinear::{real_line, BilinearTable, SplitProblem, TwoTermBound};
use vecreduce::linalg::spectral_norm;
use vecreduce::random::{gaussian_matrix, gaussian_mixture_function, random_measure, rng_for};
use vecreduce::spaces::{Exponent, SpaceDescriptor};
use vecreduce::tensor::TensorPair;

use serde::{Deserialize, Serialize};

/// Random split problems, one family per reduction step of the splitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitInstance {
    /// `A0 = B0 = I`, nonnegative diagonal `A1`, `B1`, scalar target.
    Canonical,
    /// `A0 = B0 = I`, general rectangular `A1`, `B1`.
    Rotated,
    /// Invertible `A0`, `B0`.
    Invertible,
    /// Rank-deficient `A0`, `B0`.
    Singular,
}

impl SplitInstance {
    pub const ALL: [SplitInstance; 4] = [
        SplitInstance::Canonical,
        SplitInstance::Rotated,
        SplitInstance::Invertible,
        SplitInstance::Singular,
    ];
}

fn with_norm(mut k: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let s = spectral_norm(&k);
    if s > 0.0 {
        k *= target / s;
    }
    k
}

/// `tau_z = A0^T K0_z B0 + A1^T K1_z B1` with `|K_k,z| <= 0.9`, so that
/// `|tau_z(x, y)|` obeys the two-term bound in every coordinate. The target
/// is `R` for the canonical family and `L^2` of a probability measure on
/// three atoms otherwise, whose norm is dominated by the largest coordinate.
pub fn random_split_problem(kind: SplitInstance, m: usize, n: usize, seed: u64) -> SplitProblem {
    let mut rng = rng_for(seed, 0x5b11);
    let eye = |k: usize| DMatrix::<f64>::identity(k, k);
    let (a0, a1, b0, b1) = match kind {
        SplitInstance::Canonical => {
            let da = DMatrix::from_diagonal(&gaussian_matrix(&mut rng, m, 1).column(0).map(f64::abs));
            let db = DMatrix::from_diagonal(&gaussian_matrix(&mut rng, n, 1).column(0).map(f64::abs));
            (eye(m), da, eye(n), db)
        }
        SplitInstance::Rotated => (eye(m), gaussian_matrix(&mut rng, m + 1, m), eye(n), gaussian_matrix(&mut rng, n, n)),
        SplitInstance::Invertible => {
            let a0 = gaussian_matrix(&mut rng, m, m) + eye(m) * 2.5;
            let b0 = gaussian_matrix(&mut rng, n, n) + eye(n) * 2.5;
            (a0, gaussian_matrix(&mut rng, m, m), b0, gaussian_matrix(&mut rng, n + 1, n))
        }
        SplitInstance::Singular => {
            // rank one less than full; a zero row when the dimension is one
            let rank_a = m.saturating_sub(1).max(1);
            let rank_b = n.saturating_sub(1).max(1);
            let mut a0 = gaussian_matrix(&mut rng, rank_a, m);
            let mut b0 = gaussian_matrix(&mut rng, rank_b, n);
            if m == 1 {
                a0.fill(0.0);
            }
            if n == 1 {
                b0.fill(0.0);
            }
            (a0, gaussian_matrix(&mut rng, m, m), b0, gaussian_matrix(&mut rng, n, n))
        }
    };
    let (target, dz) = match kind {
        SplitInstance::Canonical => (real_line(), 1),
        _ => (SpaceDescriptor::lattice(Exponent::TWO, random_measure(&mut rng, 3)), 3),
    };
    let slices: Vec<DMatrix<f64>> = (0..dz)
        .map(|_| {
            let k0 = with_norm(gaussian_matrix(&mut rng, a0.nrows(), b0.nrows()), 0.9);
            let k1 = with_norm(gaussian_matrix(&mut rng, a1.nrows(), b1.nrows()), 0.9);
            a0.transpose() * k0 * &b0 + a1.transpose() * k1 * &b1
        })
        .collect();
    let table = BilinearTable::from_fn(target, m, n, |i, j| slices.iter().map(|s| s[(i, j)]).collect()).expect("consistent shapes");
    SplitProblem {
        table,
        bound: TwoTermBound::new(a0, a1, b0, b1),
    }
}

/// Gaussian-mixture tensor `x ⊙ y` with `x` in `L^p` and `y` in `L^q` over
/// random probability measures.
pub fn random_tensor(p: Exponent, q: Exponent, n: usize, atoms_x: usize, atoms_y: usize, seed: u64) -> TensorPair {
    let mut rng = rng_for(seed, 0x7e45);
    let xs = SpaceDescriptor::lattice(p, random_measure(&mut rng, atoms_x));
    let ys = SpaceDescriptor::lattice(q, random_measure(&mut rng, atoms_y));
    let x = gaussian_mixture_function(&mut rng, &xs, n);
    let y = gaussian_mixture_function(&mut rng, &ys, n);
    TensorPair::new(x, y).expect("equal lengths")
}

#[cfg(test)]
mod tests {
    use super::*;
    use vecreduce::bilinear::{split_two_term, EpsSchedule, ValidationPairs};

    #[test]
    fn generated_problems_satisfy_their_bound() {
        for kind in SplitInstance::ALL {
            for (m, n) in [(1, 1), (2, 3), (3, 2)] {
                let p = random_split_problem(kind, m, n, 17);
                let r = split_two_term(&p.table, &p.bound, &EpsSchedule::default(), &ValidationPairs::for_dims(m, n, 0));
                assert!(r.is_ok(), "{kind:?} {m}x{n}: {r:?}");
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            random_split_problem(SplitInstance::Singular, 2, 2, 5),
            random_split_problem(SplitInstance::Singular, 2, 2, 5)
        );
        assert_eq!(
            random_tensor(Exponent::ONE, Exponent::TWO, 2, 4, 5, 9),
            random_tensor(Exponent::ONE, Exponent::TWO, 2, 4, 5, 9)
        );
    }
}
