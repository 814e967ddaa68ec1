//! Bilinear operators `R^m x R^n -> Z` with two-term bounds: the splitting
//! `tau = tau_0 + tau_1` with `||tau_k(x, y)|| <~ |A_k x| |B_k y|`, and the
//! bootstrapping of scalar bilinear inequalities to vector-valued ones.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{psd_form, right_singular_system, spectral_norm, symmetric_eigen, symmetric_function};
use crate::random::{rng_for, unit_vector};
use crate::reducing::{reducing_matrix, reducing_product, ReduceOptions, ReducingMatrix, KERNEL_REL_TOL};
use crate::spaces::{matrix_from_rows, matrix_to_rows, DiscreteMeasureSpace, Exponent, SpaceDescriptor, VectorFunction};
use crate::{Error, Result};

/// A bilinear map from coordinate vectors to elements of a target space.
pub trait BilinearOperator {
    fn target(&self) -> &SpaceDescriptor;
    fn apply(&self, f: &[f64], g: &[f64]) -> Result<DVector<f64>>;
}

/// A bilinear operator `R^m x R^n -> Z` stored through the images
/// `tau_ij = tau(e_i, f_j)` of basis pairs.
///
/// Internally one `m x n` slice per coordinate of `Z`, so that
/// `tau(x, y)_z = x^T S_z y`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearTable {
    target: SpaceDescriptor,
    slices: Vec<DMatrix<f64>>,
    m: usize,
    n: usize,
}

impl BilinearTable {
    /// `entries[i * n + j]` holds the coordinates of `tau(e_i, f_j)` in `Z`.
    pub fn new(target: SpaceDescriptor, m: usize, n: usize, entries: &[Vec<f64>]) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput("bilinear table needs m, n >= 1".into()));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                actual: entries.len(),
            });
        }
        let dz = target.dim();
        if let Some(bad) = entries.iter().find(|e| e.len() != dz) {
            return Err(Error::DimensionMismatch {
                expected: dz,
                actual: bad.len(),
            });
        }
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite table entry".into()));
        }
        let slices = (0..dz).map(|z| DMatrix::from_fn(m, n, |i, j| entries[i * n + j][z])).collect();
        Ok(Self { target, slices, m, n })
    }

    pub fn from_fn(target: SpaceDescriptor, m: usize, n: usize, mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        let entries: Vec<Vec<f64>> = (0..m * n).map(|k| f(k / n, k % n)).collect();
        Self::new(target, m, n, &entries)
    }

    /// Table of a scalar bilinear form `x^T T y` with `Z = R`.
    pub fn scalar(t: &DMatrix<f64>) -> Result<Self> {
        Self::from_fn(real_line(), t.nrows(), t.ncols(), |i, j| vec![t[(i, j)]])
    }

    fn from_slices(target: SpaceDescriptor, slices: Vec<DMatrix<f64>>) -> Self {
        let (m, n) = slices.first().map_or((0, 0), |s| s.shape());
        Self { target, slices, m, n }
    }

    pub fn target(&self) -> &SpaceDescriptor {
        &self.target
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.slices.len(), self.slices.iter().map(|s| s[(i, j)]))
    }

    pub fn entries(&self) -> Vec<Vec<f64>> {
        (0..self.m * self.n)
            .map(|k| self.slices.iter().map(|s| s[(k / self.n, k % self.n)]).collect())
            .collect()
    }

    /// Exact bilinear evaluation `sum_ij x_i tau_ij y_j`.
    pub fn apply(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: x.len(),
            });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: y.len(),
            });
        }
        let (x, y) = (DVector::from_column_slice(x), DVector::from_column_slice(y));
        Ok(self.apply_vec(&x, &y))
    }

    fn apply_vec(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.slices.len(), self.slices.iter().map(|s| x.dot(&(s * y))))
    }

    /// `||tau(x, y)||_Z`.
    pub fn norm_at(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.target.norm(self.apply_vec(x, y).as_slice()).expect("table output lives in Z")
    }

    /// The table of `(u, v) -> tau(L u, R v)`.
    pub fn congruence(&self, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        if l.nrows() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: l.nrows(),
            });
        }
        if r.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: r.nrows(),
            });
        }
        let slices = self.slices.iter().map(|s| l.transpose() * s * r).collect();
        Ok(Self::from_slices(self.target.clone(), slices))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.zip_map(b, &f)).collect();
        Self::from_slices(self.target.clone(), slices)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_slices(self.target.clone(), self.slices.iter().map(|s| s * factor).collect())
    }

    /// Largest absolute coordinate over all entries.
    pub fn max_abs(&self) -> f64 {
        self.slices.iter().flat_map(|s| s.iter()).fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// Sum of the diagonal entries, i.e. `tau` evaluated at the identity
    /// tensor `sum_i e_i ⊗ e_i`.
    pub fn trace(&self) -> DVector<f64> {
        let d = self.m.min(self.n);
        DVector::from_iterator(self.slices.len(), self.slices.iter().map(|s| (0..d).map(|i| s[(i, i)]).sum()))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.m, self.n, self.slices.len()) != (other.m, other.n, other.slices.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.m * self.n * self.slices.len(),
                actual: other.m * other.n * other.slices.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl BilinearOperator for BilinearTable {
    fn target(&self) -> &SpaceDescriptor {
        &self.target
    }
    fn apply(&self, f: &[f64], g: &[f64]) -> Result<DVector<f64>> {
        BilinearTable::apply(self, f, g)
    }
}

/// `Z = R` as a one-atom lattice.
pub fn real_line() -> SpaceDescriptor {
    SpaceDescriptor::lattice(Exponent::ONE, DiscreteMeasureSpace::counting(1).expect("one atom"))
}

/// On-disk form of a target space: `{exponent, weights, related_map?}`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub exponent: Exponent,
    pub weights: DiscreteMeasureSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related_map: Option<Vec<Vec<f64>>>,
}

impl TryFrom<SpaceDoc> for SpaceDescriptor {
    type Error = Error;
    fn try_from(doc: SpaceDoc) -> Result<Self> {
        match doc.related_map {
            None => Ok(SpaceDescriptor::lattice(doc.exponent, doc.weights)),
            Some(rows) => SpaceDescriptor::related(doc.exponent, doc.weights, matrix_from_rows(&rows)?),
        }
    }
}

impl From<&SpaceDescriptor> for SpaceDoc {
    fn from(s: &SpaceDescriptor) -> Self {
        SpaceDoc {
            exponent: s.exponent(),
            weights: s.base().clone(),
            related_map: s.related_map().map(matrix_to_rows),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    target: SpaceDoc,
    m: usize,
    n: usize,
    /// Row-major list of the `m * n` images `tau(e_i, f_j)`.
    entries: Vec<Vec<f64>>,
}

impl Serialize for BilinearTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableDoc {
            target: (&self.target).into(),
            m: self.m,
            n: self.n,
            entries: self.entries(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BilinearTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = TableDoc::deserialize(d)?;
        let target = SpaceDescriptor::try_from(doc.target).map_err(serde::de::Error::custom)?;
        BilinearTable::new(target, doc.m, doc.n, &doc.entries).map_err(serde::de::Error::custom)
    }
}

/// Pointwise product `(f, g) -> f g` of functions sampled on the atoms of
/// the target lattice.
#[derive(Clone, Debug)]
pub struct PointwiseProduct {
    target: SpaceDescriptor,
}

impl PointwiseProduct {
    pub fn new(target: SpaceDescriptor) -> Result<Self> {
        if target.related_map().is_some() {
            return Err(Error::InvalidInput("pointwise product needs a plain lattice target".into()));
        }
        Ok(Self { target })
    }
}

impl BilinearOperator for PointwiseProduct {
    fn target(&self) -> &SpaceDescriptor {
        &self.target
    }
    fn apply(&self, f: &[f64], g: &[f64]) -> Result<DVector<f64>> {
        let atoms = self.target.atoms();
        for len in [f.len(), g.len()] {
            if len != atoms {
                return Err(Error::DimensionMismatch {
                    expected: atoms,
                    actual: len,
                });
            }
        }
        Ok(DVector::from_iterator(atoms, f.iter().zip(g).map(|(a, b)| a * b)))
    }
}

/// Integration pairing `(f, g) -> int f g dmu` into `Z = R`.
#[derive(Clone, Debug)]
pub struct Pairing {
    measure: DiscreteMeasureSpace,
    target: SpaceDescriptor,
}

impl Pairing {
    pub fn new(measure: DiscreteMeasureSpace) -> Self {
        Self {
            measure,
            target: real_line(),
        }
    }
}

impl BilinearOperator for Pairing {
    fn target(&self) -> &SpaceDescriptor {
        &self.target
    }
    fn apply(&self, f: &[f64], g: &[f64]) -> Result<DVector<f64>> {
        let atoms = self.measure.atoms();
        for len in [f.len(), g.len()] {
            if len != atoms {
                return Err(Error::DimensionMismatch {
                    expected: atoms,
                    actual: len,
                });
            }
        }
        let v = self.measure.weights().iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum();
        Ok(DVector::from_element(1, v))
    }
}

/// The table `sigma_ij = tau(f_i, g_j)` induced by two vector functions.
pub fn induced_table(op: &dyn BilinearOperator, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<BilinearTable> {
    let rows_f: Vec<Vec<f64>> = f.row_iter().map(|r| r.iter().copied().collect()).collect();
    let rows_g: Vec<Vec<f64>> = g.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut entries = Vec::with_capacity(rows_f.len() * rows_g.len());
    for fi in &rows_f {
        for gj in &rows_g {
            entries.push(op.apply(fi, gj)?.as_slice().to_vec());
        }
    }
    BilinearTable::new(op.target().clone(), rows_f.len(), rows_g.len(), &entries)
}

/// Matrices of a two-term bound
/// `||tau(x, y)|| <= |A0 x| |B0 y| + |A1 x| |B1 y|`. Each `A_k` has `m`
/// columns and each `B_k` has `n` columns; row counts are free.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoTermBound {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
}

impl TwoTermBound {
    pub fn new(a0: DMatrix<f64>, a1: DMatrix<f64>, b0: DMatrix<f64>, b1: DMatrix<f64>) -> Self {
        Self { a0, a1, b0, b1 }
    }

    fn check(&self, m: usize, n: usize) -> Result<()> {
        for a in [&self.a0, &self.a1] {
            if a.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: a.ncols(),
                });
            }
        }
        for b in [&self.b0, &self.b1] {
            if b.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: b.ncols(),
                });
            }
        }
        if [&self.a0, &self.a1, &self.b0, &self.b1]
            .iter()
            .any(|x| x.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("non-finite bound matrix".into()));
        }
        Ok(())
    }

    pub fn rhs(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (&self.a0 * x).norm() * (&self.b0 * y).norm() + (&self.a1 * x).norm() * (&self.b1 * y).norm()
    }
}

/// Unit vectors used to measure domination constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationPairs {
    xs: Vec<DVector<f64>>,
    ys: Vec<DVector<f64>>,
    /// All pairs `(xs[a], ys[b])` when true, otherwise `(xs[a], ys[a])`.
    product: bool,
}

/// Number of random pairs when a dimension exceeds three.
pub const RANDOM_PAIRS: usize = 10_000;

/// Points of the unit sphere in `R^dim` up to sign, for `dim <= 3`.
fn sphere_grid(dim: usize) -> Vec<DVector<f64>> {
    match dim {
        1 => vec![DVector::from_element(1, 1.0)],
        2 => (0..64)
            .map(|j| {
                let t = PI * j as f64 / 64.0;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            // Fibonacci lattice on the upper hemisphere plus the basis
            let count = 128;
            let golden = PI * (3.0 - 5f64.sqrt());
            let mut out: Vec<DVector<f64>> = (0..count)
                .map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect();
            for i in 0..3 {
                let mut e = DVector::zeros(3);
                e[i] = 1.0;
                out.push(e);
            }
            out
        }
    }
}

impl ValidationPairs {
    /// Sphere grids when `m, n <= 3`, otherwise [`RANDOM_PAIRS`] seeded
    /// random unit pairs.
    pub fn for_dims(m: usize, n: usize, seed: u64) -> Self {
        if m <= 3 && n <= 3 {
            Self {
                xs: sphere_grid(m),
                ys: sphere_grid(n),
                product: true,
            }
        } else {
            let mut rng = rng_for(seed, 0x7a1d);
            let xs = (0..RANDOM_PAIRS).map(|_| unit_vector(&mut rng, m)).collect();
            let ys = (0..RANDOM_PAIRS).map(|_| unit_vector(&mut rng, n)).collect();
            Self { xs, ys, product: false }
        }
    }

    pub fn len(&self) -> usize {
        if self.product {
            self.xs.len() * self.ys.len()
        } else {
            self.xs.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.xs.first().map_or(0, |v| v.len()), self.ys.first().map_or(0, |v| v.len()))
    }

    /// `(index into xs, index into ys)` of every pair, in evaluation order.
    fn indices(&self) -> Vec<(usize, usize)> {
        if self.product {
            (0..self.xs.len()).flat_map(|i| (0..self.ys.len()).map(move |j| (i, j))).collect()
        } else {
            (0..self.xs.len()).map(|i| (i, i)).collect()
        }
    }

    /// `f(x) g(y)` for every pair.
    fn products(&self, f: impl Fn(&DVector<f64>) -> f64, g: impl Fn(&DVector<f64>) -> f64) -> Vec<f64> {
        let fx: Vec<f64> = self.xs.iter().map(f).collect();
        let gy: Vec<f64> = self.ys.iter().map(g).collect();
        self.indices().into_iter().map(|(i, j)| fx[i] * gy[j]).collect()
    }
}

impl BilinearTable {
    /// `||tau(x, y)||_Z` for every validation pair, in evaluation order.
    pub fn pair_norms(&self, pairs: &ValidationPairs) -> Vec<f64> {
        let dz = self.slices.len();
        // P_x[z, j] = sum_i x_i S_z[i, j], so that tau(x, y) = P_x y
        let partial = |x: &DVector<f64>| DMatrix::from_fn(dz, self.n, |z, j| self.slices[z].column(j).dot(x));
        let mut v = DVector::zeros(dz);
        let mut out = Vec::with_capacity(pairs.len());
        let mut push = |p: &DMatrix<f64>, y: &DVector<f64>| {
            v.gemv(1.0, p, y, 0.0);
            out.push(self.target.norm(v.as_slice()).expect("table output lives in Z"));
        };
        if pairs.product {
            for x in &pairs.xs {
                let p = partial(x);
                for y in &pairs.ys {
                    push(&p, y);
                }
            }
        } else {
            for (x, y) in pairs.xs.iter().zip(&pairs.ys) {
                push(&partial(x), y);
            }
        }
        out
    }
}

/// `|A0 x| |B0 y| + |A1 x| |B1 y|` for every pair.
fn bound_values(bound: &TwoTermBound, pairs: &ValidationPairs) -> Vec<f64> {
    let first = pairs.products(|x| (&bound.a0 * x).norm(), |y| (&bound.b0 * y).norm());
    let second = pairs.products(|x| (&bound.a1 * x).norm(), |y| (&bound.b1 * y).norm());
    first.iter().zip(&second).map(|(a, b)| a + b).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCase {
    /// `A0 = B0 = I`, `A1`, `B1` diagonal and nonnegative.
    Canonical,
    /// `A0 = B0 = I`, general `A1`, `B1`.
    Rotated,
    /// `A0`, `B0` invertible.
    ChangeOfVariables,
    /// Singular `A0` or `B0`, handled along a regularisation path.
    Regularized,
}

/// Regularisation path for singular `A0`, `B0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    /// Decreasing values of `eps`.
    pub eps: Vec<f64>,
    /// Acceptance threshold for the change between successive limit
    /// estimates, relative to `max(1, max |tau|)`.
    pub delta_conv: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps: (1..=20).map(|l| 2f64.powi(-l)).collect(),
            delta_conv: 1e-7,
        }
    }
}

/// A splitting `tau = tau0 + tau1` with measured domination constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub tau0: BilinearTable,
    pub tau1: BilinearTable,
    /// `max ||tau0(x, y)|| / (|A0 x| |B0 y|)` over the validation pairs.
    pub c0: f64,
    pub c1: f64,
    /// `max |tau - tau0 - tau1|` relative to `max(1, max |tau|)`.
    pub reconstruction_error: f64,
    /// Values of `eps` visited; empty unless the case is `Regularized`.
    pub eps_trace: Vec<f64>,
    /// Change between the last two limit estimates along the path.
    pub eps_changes: Vec<f64>,
    pub case: SplitCase,
    /// Largest `||tau_k(x, y)||` over validation pairs where
    /// `|A_k x| |B_k y|` vanishes; these pairs are excluded from `c_k`.
    pub kernel_leak: f64,
}

/// `max ||tau(x, y)|| / (|A x| |B y|)` over the pairs, and the largest norm on
/// pairs where the denominator vanishes.
fn domination_constant(t: &BilinearTable, a: &DMatrix<f64>, b: &DMatrix<f64>, pairs: &ValidationPairs) -> (f64, f64) {
    let floor = 1e-12 * spectral_norm(a) * spectral_norm(b);
    let dens = pairs.products(|x| (a * x).norm(), |y| (b * y).norm());
    let mut c = 0.0f64;
    let mut leak = 0.0f64;
    for (num, den) in t.pair_norms(pairs).into_iter().zip(dens) {
        if den > floor && den > 0.0 {
            c = c.max(num / den);
        } else {
            leak = leak.max(num);
        }
    }
    (c, leak)
}

/// Case-1 formula in given frames: `tau0_ij = tau_ij / (1 + a_i b_j)`,
/// `tau1_ij = a_i b_j tau_ij / (1 + a_i b_j)`.
fn canonical_tables(t: &BilinearTable, alpha: &[f64], beta: &[f64]) -> (BilinearTable, BilinearTable) {
    let w0 = DMatrix::from_fn(t.m, t.n, |i, j| 1.0 / (1.0 + alpha[i] * beta[j]));
    let w1 = DMatrix::from_fn(t.m, t.n, |i, j| alpha[i] * beta[j] / (1.0 + alpha[i] * beta[j]));
    let s0 = t.slices.iter().map(|s| s.component_mul(&w0)).collect();
    let s1 = t.slices.iter().map(|s| s.component_mul(&w1)).collect();
    (
        BilinearTable::from_slices(t.target.clone(), s0),
        BilinearTable::from_slices(t.target.clone(), s1),
    )
}

fn scale_of(t: &BilinearTable) -> f64 {
    t.max_abs().max(1.0)
}

/// Splits with `A0 = B0 = I`, `A1 = diag(alpha)`, `B1 = diag(beta)` by the
/// explicit formula, then measures the constants on `pairs`.
pub fn split_canonical(t: &BilinearTable, alpha: &[f64], beta: &[f64], pairs: &ValidationPairs) -> Result<SplitResult> {
    if alpha.len() != t.m {
        return Err(Error::DimensionMismatch {
            expected: t.m,
            actual: alpha.len(),
        });
    }
    if beta.len() != t.n {
        return Err(Error::DimensionMismatch {
            expected: t.n,
            actual: beta.len(),
        });
    }
    if alpha.iter().chain(beta).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("alpha and beta must be finite and nonnegative".into()));
    }
    check_pairs(t, pairs)?;
    let (tau0, tau1) = canonical_tables(t, alpha, beta);
    let bound = TwoTermBound::new(
        DMatrix::identity(t.m, t.m),
        DMatrix::from_diagonal(&DVector::from_column_slice(alpha)),
        DMatrix::identity(t.n, t.n),
        DMatrix::from_diagonal(&DVector::from_column_slice(beta)),
    );
    Ok(finish(t, tau0, tau1, &bound, pairs, SplitCase::Canonical, Vec::new(), Vec::new()))
}

fn check_pairs(t: &BilinearTable, pairs: &ValidationPairs) -> Result<()> {
    let (m, n) = pairs.dims();
    if (m, n) != (t.m, t.n) {
        return Err(Error::DimensionMismatch {
            expected: t.m * t.n,
            actual: m * n,
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    t: &BilinearTable,
    tau0: BilinearTable,
    tau1: BilinearTable,
    bound: &TwoTermBound,
    pairs: &ValidationPairs,
    case: SplitCase,
    eps_trace: Vec<f64>,
    eps_changes: Vec<f64>,
) -> SplitResult {
    let residual = t.sub(&tau0).and_then(|r| r.sub(&tau1)).expect("same shapes").max_abs();
    let (c0, leak0) = domination_constant(&tau0, &bound.a0, &bound.b0, pairs);
    let (c1, leak1) = domination_constant(&tau1, &bound.a1, &bound.b1, pairs);
    SplitResult {
        tau0,
        tau1,
        c0,
        c1,
        reconstruction_error: residual / scale_of(t),
        eps_trace,
        eps_changes,
        case,
        kernel_leak: leak0.max(leak1),
    }
}

fn is_identity(a: &DMatrix<f64>) -> bool {
    a.is_square() && crate::linalg::max_abs_diff(a, &DMatrix::identity(a.nrows(), a.ncols())) <= 1e-14
}

fn is_nonnegative_diagonal(a: &DMatrix<f64>) -> bool {
    a.is_square()
        && a.iter()
            .enumerate()
            .all(|(k, v)| if k % a.nrows() == k / a.nrows() { *v >= 0.0 } else { *v == 0.0 })
}

/// Split for invertible PSD `a0`, `b0`: change variables `u = A0 x`,
/// `v = B0 y`, move to the singular frames of `A1 A0^{-1}`, `B1 B0^{-1}`,
/// apply the case-1 formula and map back.
fn split_invertible(
    t: &BilinearTable,
    a0: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    a1: &DMatrix<f64>,
    b1: &DMatrix<f64>,
) -> (BilinearTable, BilinearTable) {
    let a0_inv = symmetric_function(a0, |l| 1.0 / l);
    let b0_inv = symmetric_function(b0, |l| 1.0 / l);
    let (v, alpha) = right_singular_system(&(a1 * &a0_inv));
    let (w, beta) = right_singular_system(&(b1 * &b0_inv));
    let hat = t.congruence(&(&a0_inv * &v), &(&b0_inv * &w)).expect("square frames");
    let (h0, h1) = canonical_tables(&hat, alpha.as_slice(), beta.as_slice());
    let back_l = v.transpose() * a0;
    let back_r = w.transpose() * b0;
    (
        h0.congruence(&back_l, &back_r).expect("square"),
        h1.congruence(&back_l, &back_r).expect("square"),
    )
}

/// Neville extrapolation of `values[k]` (tables at `eps[k]`) to `eps = 0`.
fn extrapolate(eps: &[f64], values: &[BilinearTable]) -> BilinearTable {
    let mut p: Vec<BilinearTable> = values.to_vec();
    let k = p.len();
    for level in 1..k {
        for i in 0..k - level {
            // P_{i..i+level}(0) from P_{i..i+level-1} and P_{i+1..i+level}
            let (xi, xj) = (eps[i], eps[i + level]);
            let a = p[i + 1].scaled(xi / (xi - xj));
            let b = p[i].scaled(-xj / (xi - xj));
            p[i] = a.add(&b).expect("same shape");
        }
    }
    p.swap_remove(0)
}

/// Orthogonal projector onto the range of a PSD matrix.
fn range_projector(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetric_eigen(a);
    let top = eig.eigenvalues.iter().fold(0.0f64, |x, &l| x.max(l));
    let n = a.nrows();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        if top > 0.0 && eig.eigenvalues[i] > KERNEL_REL_TOL * top {
            let v = eig.eigenvectors.column(i);
            p.ger(1.0, &v, &v, 1.0);
        }
    }
    p
}

/// Highest extrapolation order used along the regularisation path.
const EXTRAPOLATION_ORDER: usize = 4;

/// Splits `t` under a two-term bound, following the chain of reductions:
/// replace each matrix by the PSD matrix with the same `|A x|`; if `A0`, `B0`
/// are invertible change variables and use the case-1 formula in singular
/// frames; otherwise regularise `A0`, `B0` by `+eps` on their eigenvalues
/// and pass to the limit `eps -> 0`.
///
/// The limit is located by polynomial extrapolation in `eps` of the split
/// tables along the schedule (the entries are rational in `eps` and bounded,
/// hence analytic at `0`). The path is accepted once two successive limit
/// estimates, or two successive raw tables, agree to `delta_conv`.
pub fn split_two_term(t: &BilinearTable, bound: &TwoTermBound, schedule: &EpsSchedule, pairs: &ValidationPairs) -> Result<SplitResult> {
    bound.check(t.m, t.n)?;
    check_pairs(t, pairs)?;
    split_checked(t, &t.pair_norms(pairs), bound, schedule, pairs)
}

/// [`split_two_term`] with shapes checked and `||tau(x, y)||` already
/// evaluated on the pairs.
fn split_checked(
    t: &BilinearTable,
    norms: &[f64],
    bound: &TwoTermBound,
    schedule: &EpsSchedule,
    pairs: &ValidationPairs,
) -> Result<SplitResult> {
    let worst = norms
        .iter()
        .zip(bound_values(bound, pairs))
        .filter(|(lhs, rhs)| **lhs > rhs * (1.0 + 1e-9) + 1e-300)
        .max_by(|a, b| (a.0 / a.1.max(1e-300)).total_cmp(&(b.0 / b.1.max(1e-300))));
    if let Some((lhs, rhs)) = worst {
        return Err(Error::BoundViolated { lhs: *lhs, rhs });
    }

    let a0 = psd_form(&bound.a0);
    let a1 = psd_form(&bound.a1);
    let b0 = psd_form(&bound.b0);
    let b1 = psd_form(&bound.b1);
    let psd = TwoTermBound::new(a0.clone(), a1.clone(), b0.clone(), b1.clone());

    if is_identity(&bound.a0) && is_identity(&bound.b0) && is_nonnegative_diagonal(&bound.a1) && is_nonnegative_diagonal(&bound.b1) {
        let alpha: Vec<f64> = (0..t.m).map(|i| bound.a1[(i, i)]).collect();
        let beta: Vec<f64> = (0..t.n).map(|j| bound.b1[(j, j)]).collect();
        let (tau0, tau1) = canonical_tables(t, &alpha, &beta);
        return Ok(finish(t, tau0, tau1, &psd, pairs, SplitCase::Canonical, Vec::new(), Vec::new()));
    }

    let invertible = |a: &DMatrix<f64>| {
        let eig = symmetric_eigen(a);
        let top = eig.eigenvalues.max();
        top > 0.0 && eig.eigenvalues.min() > KERNEL_REL_TOL * top
    };
    if invertible(&a0) && invertible(&b0) {
        let case = if is_identity(&bound.a0) && is_identity(&bound.b0) {
            SplitCase::Rotated
        } else {
            SplitCase::ChangeOfVariables
        };
        let (tau0, tau1) = split_invertible(t, &a0, &b0, &a1, &b1);
        return Ok(finish(t, tau0, tau1, &psd, pairs, case, Vec::new(), Vec::new()));
    }

    let ea = symmetric_eigen(&a0);
    let eb = symmetric_eigen(&b0);
    let shifted = |e: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, eps: f64| {
        let vals = e.eigenvalues.map(|l| l.max(0.0) + eps);
        &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose()
    };
    let scale = scale_of(t);
    let mut trace = Vec::new();
    let mut changes = Vec::new();
    let mut raw: Vec<BilinearTable> = Vec::new();
    let mut limits: Vec<BilinearTable> = Vec::new();
    let mut accepted: Option<BilinearTable> = None;
    for &eps in &schedule.eps {
        trace.push(eps);
        let (tau0, _) = split_invertible(t, &shifted(&ea, eps), &shifted(&eb, eps), &a1, &b1);
        raw.push(tau0);
        let k = raw.len();
        let order = (k - 1).min(EXTRAPOLATION_ORDER);
        let limit = extrapolate(&trace[k - 1 - order..], &raw[k - 1 - order..]);
        let mut change = f64::INFINITY;
        if let Some(prev) = limits.last() {
            change = limit.max_abs_diff(prev)? / scale;
            let raw_change = raw[k - 1].max_abs_diff(&raw[k - 2])? / scale;
            if raw_change < schedule.delta_conv && raw_change <= change {
                changes.push(raw_change);
                accepted = Some(raw[k - 1].clone());
                break;
            }
        }
        changes.push(change);
        limits.push(limit);
        if change < schedule.delta_conv && k >= 3 {
            accepted = limits.last().cloned();
            break;
        }
    }
    let Some(tau0) = accepted else {
        let last_change = changes.last().copied().unwrap_or(f64::INFINITY);
        return Err(Error::NotConverged {
            trace: changes,
            last_change,
        });
    };
    // The limit vanishes where |A0 x| |B0 y| does; remove the rounding
    // residue there, and likewise for tau1.
    let tau0 = tau0.congruence(&range_projector(&a0), &range_projector(&b0))?;
    let tau1 = t.sub(&tau0)?.congruence(&range_projector(&a1), &range_projector(&b1))?;
    Ok(finish(t, tau0, tau1, &psd, pairs, SplitCase::Regularized, trace, changes))
}

/// A split problem as read from disk: a table and its two-term bound.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitProblem {
    pub table: BilinearTable,
    pub bound: TwoTermBound,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitProblemDoc {
    table: BilinearTable,
    a0: Vec<Vec<f64>>,
    a1: Vec<Vec<f64>>,
    b0: Vec<Vec<f64>>,
    b1: Vec<Vec<f64>>,
}

impl SplitProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SplitProblemDoc = serde_json::from_str(text)?;
        let bound = TwoTermBound::new(
            matrix_from_rows(&doc.a0)?,
            matrix_from_rows(&doc.a1)?,
            matrix_from_rows(&doc.b0)?,
            matrix_from_rows(&doc.b1)?,
        );
        bound.check(doc.table.m, doc.table.n)?;
        Ok(Self { table: doc.table, bound })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SplitProblemDoc {
            table: self.table.clone(),
            a0: matrix_to_rows(&self.bound.a0),
            a1: matrix_to_rows(&self.bound.a1),
            b0: matrix_to_rows(&self.bound.b0),
            b1: matrix_to_rows(&self.bound.b1),
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub reduce: ReduceOptions,
    pub schedule: EpsSchedule,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            reduce: ReduceOptions::default(),
            schedule: EpsSchedule::default(),
            seed: 0xb007,
        }
    }
}

/// Both sides of `||tau(f, g)||_Z <~ ||tau|| |[f]_X [g]_Y|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleBootstrap {
    pub lhs: f64,
    pub tau_norm: f64,
    pub reducing_product: f64,
    /// `lhs / (tau_norm * reducing_product)`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    /// Relative difference between `tau(f, g)` and its evaluation through
    /// the representation `sum_i tau(([f]^+ f)_i, ([f] g)_i)`.
    pub canonical_residual: f64,
    /// `sum_i ||tau(([f]^+ f)_i, ([f] g)_i)||_Z / (tau_norm * reducing_product)`.
    pub canonical_ratio: Option<f64>,
    pub distortion_f: f64,
    pub distortion_g: f64,
}

/// Checks `||tau(a.f, b.g)|| <= tau_norm ||a.f|| ||b.g||` on the validation
/// pairs, returning the worst violation.
fn check_scalar_bound(sigma: &BilinearTable, f: &VectorFunction, g: &VectorFunction, tau_norm: f64, pairs: &ValidationPairs) -> Result<()> {
    let slack = 1e-12 * sigma.max_abs();
    let rhs = pairs.products(
        |a| f.directional_norm(a.as_slice()).unwrap_or(0.0),
        |b| g.directional_norm(b.as_slice()).unwrap_or(0.0),
    );
    let worst = sigma
        .pair_norms(pairs)
        .into_iter()
        .zip(rhs.into_iter().map(|r| tau_norm * r))
        .find(|(lhs, rhs)| *lhs > rhs * (1.0 + 1e-9) + slack);
    match worst {
        Some((lhs, rhs)) => Err(Error::BoundViolated { lhs, rhs }),
        None => Ok(()),
    }
}

/// Vector-valued single-term bootstrap: evaluates `tau(f, g) = sum_i tau(f_i, g_i)`
/// directly and through the canonical representation, against
/// `tau_norm |[f]_X [g]_Y|`.
pub fn bootstrap_single(
    op: &dyn BilinearOperator,
    f: &VectorFunction,
    g: &VectorFunction,
    tau_norm: f64,
    opts: &BootstrapOptions,
) -> Result<SingleBootstrap> {
    let n = f.len();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    if !(tau_norm >= 0.0 && tau_norm.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tau_norm must be finite and nonnegative, got {tau_norm}"
        )));
    }
    let sigma = induced_table(op, f.components(), g.components())?;
    check_scalar_bound(&sigma, f, g, tau_norm, &ValidationPairs::for_dims(n, n, opts.seed))?;
    let z = op.target();
    let value = sigma.trace();
    let lhs = z.norm(value.as_slice())?;

    let a = reducing_matrix(f, &opts.reduce)?;
    let b = reducing_matrix(g, &opts.reduce)?;
    let rp = reducing_product(&a, &b)?;
    let pinv = crate::linalg::psd_pinv_on(a.matrix(), &a.range_basis());
    let zf = &pinv * f.components();
    let wg = a.matrix() * g.components();
    let mut rebuilt = DVector::zeros(value.len());
    let mut canonical_sum = 0.0;
    for i in 0..n {
        let zi: Vec<f64> = zf.row(i).iter().copied().collect();
        let wi: Vec<f64> = wg.row(i).iter().copied().collect();
        let term = op.apply(&zi, &wi)?;
        canonical_sum += z.norm(term.as_slice())?;
        rebuilt += term;
    }
    let canonical_residual = (&rebuilt - &value).amax() / value.amax().max(f64::MIN_POSITIVE).max(sigma.max_abs());
    let den = tau_norm * rp;
    Ok(SingleBootstrap {
        lhs,
        tau_norm,
        reducing_product: rp,
        ratio: (den > 0.0).then(|| lhs / den),
        canonical_residual,
        canonical_ratio: (den > 0.0).then(|| canonical_sum / den),
        distortion_f: a.distortion(),
        distortion_g: b.distortion(),
    })
}

/// Both sides of the two-term vector inequality
/// `||tau(f, g)|| <~ |[f]_X0 [g]_Y0| + |[f]_X1 [g]_Y1|`, together with the
/// split of the induced form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTermBootstrap {
    pub lhs: f64,
    /// `|[f]_Xk [g]_Yk|` for `k = 0, 1`.
    pub reducing_products: [f64; 2],
    /// Constant of the scalar two-term bound (given, or measured on the
    /// validation pairs).
    pub scalar_constant: f64,
    /// `lhs / (scalar_constant * sum_k reducing_products[k])`.
    pub ratio: Option<f64>,
    /// `||sigma_k(identity)||` of the two split pieces at the identity pair.
    pub term_norms: [f64; 2],
    /// Constant by which the induced form was scaled to satisfy the matrix
    /// bound with the reducing matrices.
    pub matrix_bound_constant: f64,
    pub split: Option<SplitResult>,
}

/// Two-term bootstrap. `f` holds coordinates in the common domain of
/// `x_spaces`, `g` in that of `y_spaces`. With `scalar_constant = None` the
/// constant of the scalar bound is measured on the span of the components.
pub fn bootstrap_two_term(
    op: &dyn BilinearOperator,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    x_spaces: [&SpaceDescriptor; 2],
    y_spaces: [&SpaceDescriptor; 2],
    scalar_constant: Option<f64>,
    opts: &BootstrapOptions,
) -> Result<TwoTermBootstrap> {
    let n = f.nrows();
    if g.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g.nrows(),
        });
    }
    let fk: Vec<VectorFunction> = x_spaces
        .iter()
        .map(|s| VectorFunction::new((*s).clone(), f.clone()))
        .collect::<Result<_>>()?;
    let gk: Vec<VectorFunction> = y_spaces
        .iter()
        .map(|s| VectorFunction::new((*s).clone(), g.clone()))
        .collect::<Result<_>>()?;
    let sigma = induced_table(op, f, g)?;
    let z = op.target();
    let lhs = z.norm(sigma.trace().as_slice())?;
    let pairs = ValidationPairs::for_dims(n, n, opts.seed);

    let norms = sigma.pair_norms(&pairs);
    let scalar_term = |k: usize| {
        pairs.products(
            |a| fk[k].directional_norm(a.as_slice()).unwrap_or(0.0),
            |b| gk[k].directional_norm(b.as_slice()).unwrap_or(0.0),
        )
    };
    let (s0, s1) = (scalar_term(0), scalar_term(1));
    let mut measured = 0.0f64;
    for ((lhs, r0), r1) in norms.iter().zip(&s0).zip(&s1) {
        let rhs = r0 + r1;
        if rhs > 0.0 {
            measured = measured.max(lhs / rhs);
        } else if *lhs > 1e-12 * sigma.max_abs() {
            measured = f64::INFINITY;
        }
    }
    let kappa = match scalar_constant {
        Some(c) => {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "scalar constant must be finite and nonnegative, got {c}"
                )));
            }
            if measured > c * (1.0 + 1e-9) {
                return Err(Error::BoundViolated { lhs: measured, rhs: c });
            }
            c
        }
        None => measured,
    };
    if !kappa.is_finite() {
        return Err(Error::BoundViolated {
            lhs: f64::INFINITY,
            rhs: 0.0,
        });
    }

    // a repeated space gives the same matrix; compute it once
    let pair_of = |v: &[VectorFunction]| -> Result<[ReducingMatrix; 2]> {
        let first = reducing_matrix(&v[0], &opts.reduce)?;
        let second = if v[1].space() == v[0].space() {
            first.clone()
        } else {
            reducing_matrix(&v[1], &opts.reduce)?
        };
        Ok([first, second])
    };
    let [rf0, rf1] = pair_of(&fk)?;
    let [rg0, rg1] = pair_of(&gk)?;
    let reducing = [rf0, rf1, rg0, rg1];
    let rp = [
        reducing_product(&reducing[0], &reducing[2])?,
        reducing_product(&reducing[1], &reducing[3])?,
    ];
    let rhs_total = kappa * (rp[0] + rp[1]);
    let ratio = (rhs_total > 0.0).then(|| lhs / rhs_total);

    if sigma.max_abs() == 0.0 {
        return Ok(TwoTermBootstrap {
            lhs,
            reducing_products: rp,
            scalar_constant: kappa,
            ratio,
            term_norms: [0.0, 0.0],
            matrix_bound_constant: 0.0,
            split: None,
        });
    }

    // sigma obeys a two-term bound with the reducing matrices up to a
    // constant; measure it on the same pairs and normalise it away
    let bound = TwoTermBound::new(
        reducing[0].matrix().clone(),
        reducing[1].matrix().clone(),
        reducing[2].matrix().clone(),
        reducing[3].matrix().clone(),
    );
    let lambda = norms
        .iter()
        .zip(bound_values(&bound, &pairs))
        .filter(|(_, rhs)| *rhs > 0.0)
        .fold(0.0f64, |m, (lhs, rhs)| m.max(lhs / rhs))
        * (1.0 + 1e-8);
    bound.check(n, n)?;
    let scaled_norms: Vec<f64> = norms.iter().map(|v| v / lambda).collect();
    let split = split_checked(&sigma.scaled(1.0 / lambda), &scaled_norms, &bound, &opts.schedule, &pairs)?;
    let term_norms = [
        z.norm(split.tau0.trace().as_slice())? * lambda,
        z.norm(split.tau1.trace().as_slice())? * lambda,
    ];
    Ok(TwoTermBootstrap {
        lhs,
        reducing_products: rp,
        scalar_constant: kappa,
        ratio,
        term_norms,
        matrix_bound_constant: lambda,
        split: Some(split),
    })
}

/// Comparison of `[I]_{X(x)}`, the reducing matrix of the identity tensor in
/// the space `R^n` normed by `u -> ||x . u||_X`, with `[x]_X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// Extremes of `|[I] u| / |[x] u|` over the eigenvectors of both
    /// matrices outside the kernel.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Product of the distortions `c_high / c_low` of the two matrices.
    pub allowed: f64,
    pub kernels_match: bool,
}

pub fn reducing_matrix_identity_check(x: &VectorFunction, opts: &ReduceOptions) -> Result<IdentityCheck> {
    let n = x.len();
    let direct = reducing_matrix(x, opts)?;
    let map = x.lattice_components().transpose();
    let space = SpaceDescriptor::related(x.space().exponent(), x.space().base().clone(), map)?;
    let identity = VectorFunction::new(space, DMatrix::identity(n, n))?;
    let other_opts = ReduceOptions {
        seed: crate::random::derive_seed(opts.seed, 0x1de7),
        ..opts.clone()
    };
    let lifted = reducing_matrix(&identity, &other_opts)?;

    let pa = crate::linalg::projector(direct.kernel_basis(), n);
    let pb = crate::linalg::projector(lifted.kernel_basis(), n);
    let kernels_match = direct.kernel_basis().len() == lifted.kernel_basis().len() && crate::linalg::max_abs_diff(&pa, &pb) < 1e-9;

    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for basis in [direct.range_basis(), lifted.range_basis()] {
        for u in basis {
            let r = (lifted.matrix() * &u).norm() / (direct.matrix() * &u).norm();
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if hi == 0.0 {
        lo = 1.0;
        hi = 1.0;
    }
    Ok(IdentityCheck {
        ratio_min: lo,
        ratio_max: hi,
        allowed: direct.distortion() * lifted.distortion(),
        kernels_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, gaussian_mixture_function, random_measure};

    fn brute_force_ratio(t: &BilinearTable, a: &DMatrix<f64>, b: &DMatrix<f64>, res: usize) -> f64 {
        // m = n = 2: angles over half circles
        let mut best = 0.0f64;
        for i in 0..res {
            for j in 0..res {
                let (s, u) = (PI * i as f64 / res as f64, PI * j as f64 / res as f64);
                let x = DVector::from_vec(vec![s.cos(), s.sin()]);
                let y = DVector::from_vec(vec![u.cos(), u.sin()]);
                let den = (a * &x).norm() * (b * &y).norm();
                if den > 1e-12 {
                    best = best.max(t.norm_at(&x, &y) / den);
                }
            }
        }
        best
    }

    #[test]
    fn apply_basics() {
        let t = BilinearTable::from_fn(real_line(), 2, 3, |i, j| vec![(i * 3 + j) as f64]).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let mut x = vec![0.0; 2];
                let mut y = vec![0.0; 3];
                x[i] = 1.0;
                y[j] = 1.0;
                assert_eq!(t.apply(&x, &y).unwrap()[0], (i * 3 + j) as f64);
            }
        }
        assert_eq!(t.apply(&[0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap()[0], 0.0);
        let (x, xp, y) = ([0.3, -1.2], [2.0, 0.7], [1.0, -0.5, 0.25]);
        let lin = t.apply(&[2.0 * x[0] + xp[0], 2.0 * x[1] + xp[1]], &y).unwrap()[0];
        let parts = 2.0 * t.apply(&x, &y).unwrap()[0] + t.apply(&xp, &y).unwrap()[0];
        assert!((lin - parts).abs() < 1e-12);
        assert!(t.apply(&[1.0], &y).is_err());
    }

    #[test]
    fn table_json_round_trip() {
        let target = SpaceDescriptor::lattice(Exponent::new(0.5).unwrap(), DiscreteMeasureSpace::new(vec![1.0, 2.0]).unwrap());
        let t = BilinearTable::from_fn(target, 2, 2, |i, j| vec![i as f64 + 0.1, j as f64 - 1.0 / 3.0]).unwrap();
        let text = t.to_json().unwrap();
        assert_eq!(BilinearTable::from_json(&text).unwrap(), t);
        assert!(BilinearTable::from_json(r#"{"target":{"exponent":1.0,"weights":[1.0]},"m":1,"n":2,"entries":[[1.0]]}"#).is_err());
    }

    #[test]
    fn canonical_one_by_one() {
        let t = BilinearTable::scalar(&DMatrix::from_element(1, 1, 3.0)).unwrap();
        let r = split_canonical(&t, &[1.0], &[1.0], &ValidationPairs::for_dims(1, 1, 0)).unwrap();
        assert_eq!(r.tau0.entry(0, 0)[0], 1.5);
        assert_eq!(r.tau1.entry(0, 0)[0], 1.5);
        assert_eq!(r.reconstruction_error, 0.0);
    }

    #[test]
    fn canonical_with_zero_weights() {
        let mut rng = rng_for(1, 0);
        let t = BilinearTable::scalar(&gaussian_matrix(&mut rng, 2, 3)).unwrap();
        let r = split_canonical(&t, &[0.0, 0.0], &[1.0, 2.0, 3.0], &ValidationPairs::for_dims(2, 3, 0)).unwrap();
        assert_eq!(r.tau0, t);
        assert_eq!(r.tau1.max_abs(), 0.0);
        assert!(split_canonical(&t, &[-1.0, 0.0], &[1.0, 2.0, 3.0], &ValidationPairs::for_dims(2, 3, 0)).is_err());
    }

    #[test]
    fn canonical_two_by_two_oracle() {
        let alpha = [0.5, 2.0];
        let beta = [1.5, 0.25];
        let t = BilinearTable::scalar(&DMatrix::from_fn(2, 2, |i, j| 1.0 + alpha[i] * beta[j])).unwrap();
        let r = split_canonical(&t, &alpha, &beta, &ValidationPairs::for_dims(2, 2, 0)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.tau0.entry(i, j)[0] - 1.0).abs() < 1e-15);
                assert!((r.tau1.entry(i, j)[0] - alpha[i] * beta[j]).abs() < 1e-15);
            }
        }
        let a1 = DMatrix::from_diagonal(&DVector::from_column_slice(&alpha));
        let b1 = DMatrix::from_diagonal(&DVector::from_column_slice(&beta));
        let c0 = brute_force_ratio(&r.tau0, &DMatrix::identity(2, 2), &DMatrix::identity(2, 2), 400);
        let c1 = brute_force_ratio(&r.tau1, &a1, &b1, 400);
        // all-ones form: sup |sum x_i| |sum y_j| = 2, attained on the grid
        assert!((c0 - 2.0).abs() < 1e-4 && (c1 - 2.0).abs() < 1e-4, "{c0} {c1}");
        assert!(r.c0 <= 2.0 * (1.0 + 1e-6) && r.c1 <= 2.0 * (1.0 + 1e-6));
        assert!((r.c0 - c0).abs() < 1e-2 && (r.c1 - c1).abs() < 1e-2);
    }

    #[test]
    fn identity_bound_keeps_tau() {
        let mut rng = rng_for(2, 0);
        let raw = gaussian_matrix(&mut rng, 3, 2);
        let t = BilinearTable::scalar(&(&raw / spectral_norm(&raw))).unwrap();
        let bound = TwoTermBound::new(
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 3),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
        );
        let r = split_two_term(&t, &bound, &EpsSchedule::default(), &ValidationPairs::for_dims(3, 2, 0)).unwrap();
        assert_eq!(r.case, SplitCase::Canonical);
        assert_eq!(r.tau0, t);
        assert_eq!(r.tau1.max_abs(), 0.0);
    }

    #[test]
    fn scalar_change_of_variables() {
        let (c, a0, b0, a1, b1) = (0.7f64, 2.0, 0.5, 3.0, 0.4);
        let t = BilinearTable::scalar(&DMatrix::from_element(1, 1, c)).unwrap();
        let e = |v: f64| DMatrix::from_element(1, 1, v);
        let bound = TwoTermBound::new(e(a0), e(a1), e(b0), e(b1));
        let r = split_two_term(&t, &bound, &EpsSchedule::default(), &ValidationPairs::for_dims(1, 1, 0)).unwrap();
        assert_eq!(r.case, SplitCase::ChangeOfVariables);
        let total = a0 * b0 + a1 * b1;
        assert!((r.tau0.entry(0, 0)[0] - c * a0 * b0 / total).abs() < 1e-15);
        assert!((r.tau1.entry(0, 0)[0] - c * a1 * b1 / total).abs() < 1e-15);
    }

    #[test]
    fn bound_violation_is_reported() {
        let t = BilinearTable::scalar(&DMatrix::from_element(1, 1, 3.0)).unwrap();
        let e = |v: f64| DMatrix::from_element(1, 1, v);
        let bound = TwoTermBound::new(e(1.0), e(1.0), e(1.0), e(1.0));
        assert!(matches!(
            split_two_term(&t, &bound, &EpsSchedule::default(), &ValidationPairs::for_dims(1, 1, 0)),
            Err(Error::BoundViolated { .. })
        ));
    }

    /// Singular `A0 = diag(1, 0)`: on `e_2` only the second term is
    /// available, so the limit split restricted to `x = e_2` is `(0, tau)`,
    /// while on `x = e_1` it is the 1-dimensional change-of-variables split.
    #[test]
    fn singular_a0_converges_to_reduced_split() {
        let tau = DMatrix::from_row_slice(2, 1, &[0.8, 0.3]);
        let t = BilinearTable::scalar(&tau).unwrap();
        let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let a1 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]));
        let (b0, b1) = (DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.6));
        let bound = TwoTermBound::new(a0, a1, b0, b1);
        let r = split_two_term(&t, &bound, &EpsSchedule::default(), &ValidationPairs::for_dims(2, 1, 0)).unwrap();
        assert_eq!(r.case, SplitCase::Regularized);
        assert!(r.reconstruction_error <= 1e-8);
        // reduced problem on e_1: |0.8| <= 1*1 + 0.5*0.6, split 1 : 0.3
        let expect0 = 0.8 * 1.0 / 1.3;
        assert!((r.tau0.entry(0, 0)[0] - expect0).abs() < 1e-8, "{}", r.tau0.entry(0, 0)[0]);
        assert!(r.tau0.entry(1, 0)[0].abs() < 1e-12);
        assert!((r.tau1.entry(1, 0)[0] - 0.3).abs() < 1e-8);
        assert!(r.c0.is_finite() && r.c1.is_finite());
        // halving the final eps moves nothing beyond the tolerance
        let last = *r.eps_trace.last().unwrap();
        let mut longer = EpsSchedule::default();
        longer.eps.retain(|e| *e >= last);
        longer.eps.push(last / 2.0);
        longer.delta_conv = 0.0;
        let longer_run = split_two_term(&t, &bound, &longer, &ValidationPairs::for_dims(2, 1, 0));
        if let Err(Error::NotConverged { trace, .. }) = longer_run {
            assert!(*trace.last().unwrap() < 10.0 * 1e-7);
        }
    }

    #[test]
    fn random_singular_splits_reconstruct() {
        for seed in 0..20 {
            let mut rng = rng_for(seed, 3);
            let (m, n) = (3, 2);
            // rank-deficient A0, B0 and generic A1, B1
            let a0 = gaussian_matrix(&mut rng, 2, m);
            let b0 = gaussian_matrix(&mut rng, 1, n);
            let a1 = gaussian_matrix(&mut rng, m, m);
            let b1 = gaussian_matrix(&mut rng, n, n);
            let bound = TwoTermBound::new(a0, a1, b0, b1);
            // tau = (A0 x)^T K0 (B0 y) + (A1 x)^T K1 (B1 y) with |K_k| <= 1/2
            let mut k0 = gaussian_matrix(&mut rng, 2, 1);
            k0 /= 2.0 * spectral_norm(&k0);
            let mut k1 = gaussian_matrix(&mut rng, m, n);
            k1 /= 2.0 * spectral_norm(&k1);
            let tau = bound.a0.transpose() * k0 * &bound.b0 + bound.a1.transpose() * k1 * &bound.b1;
            let t = BilinearTable::scalar(&tau).unwrap();
            let r = split_two_term(&t, &bound, &EpsSchedule::default(), &ValidationPairs::for_dims(m, n, 0)).unwrap();
            assert!(r.reconstruction_error <= 1e-8, "seed {seed}: {}", r.reconstruction_error);
            assert!(r.c0.is_finite() && r.c1.is_finite());
        }
    }

    #[test]
    fn pairing_bootstrap_grows_with_dimension() {
        for n in [1usize, 2, 4, 8] {
            let space = SpaceDescriptor::lattice(Exponent::TWO, DiscreteMeasureSpace::counting(n).unwrap());
            let f = VectorFunction::new(space.clone(), DMatrix::identity(n, n)).unwrap();
            let op = Pairing::new(DiscreteMeasureSpace::counting(n).unwrap());
            let rec = bootstrap_single(&op, &f, &f, 1.0, &BootstrapOptions::default()).unwrap();
            assert!((rec.lhs - n as f64).abs() < 1e-12);
            assert!((rec.ratio.unwrap() - n as f64).abs() < 1e-6, "{:?}", rec.ratio);
            assert!(rec.canonical_residual < 1e-10);
        }
    }

    #[test]
    fn single_bootstrap_scalar_case() {
        let mut rng = rng_for(5, 0);
        let base = random_measure(&mut rng, 16);
        let xs = SpaceDescriptor::lattice(Exponent::new(3.0).unwrap(), base.clone());
        let ys = SpaceDescriptor::lattice(Exponent::new(1.5).unwrap(), base.clone());
        let zs = SpaceDescriptor::lattice(Exponent::ONE, base);
        let f = gaussian_mixture_function(&mut rng, &xs, 1);
        let g = gaussian_mixture_function(&mut rng, &ys, 1);
        let op = PointwiseProduct::new(zs).unwrap();
        let rec = bootstrap_single(&op, &f, &g, 1.0, &BootstrapOptions::default()).unwrap();
        let dist = rec.distortion_f * rec.distortion_g;
        assert!(rec.ratio.unwrap() <= dist * dist + 1e-9);
        assert!(rec.ratio.unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn two_term_with_scalar_dimension_is_verbatim() {
        let mut rng = rng_for(6, 0);
        let base = random_measure(&mut rng, 12);
        let x = SpaceDescriptor::lattice(Exponent::TWO, base.clone());
        let z = SpaceDescriptor::lattice(Exponent::ONE, base);
        let f = gaussian_mixture_function(&mut rng, &x, 1);
        let g = gaussian_mixture_function(&mut rng, &x, 1);
        let op = PointwiseProduct::new(z).unwrap();
        // ||fg||_1 <= 1/2 (||f||_2 ||g||_2 + ||f||_2 ||g||_2)
        let rec = bootstrap_two_term(
            &op,
            f.components(),
            g.components(),
            [&x, &x],
            [&x, &x],
            Some(0.5),
            &BootstrapOptions::default(),
        )
        .unwrap();
        assert!(rec.ratio.unwrap() <= 1.0 + 1e-9);
        let single = bootstrap_single(&op, &f, &g, 1.0, &BootstrapOptions::default()).unwrap();
        assert!((rec.ratio.unwrap() - single.ratio.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn two_term_zero_g() {
        let mut rng = rng_for(7, 0);
        let base = random_measure(&mut rng, 8);
        let x = SpaceDescriptor::lattice(Exponent::TWO, base.clone());
        let f = gaussian_mixture_function(&mut rng, &x, 2);
        let op = PointwiseProduct::new(SpaceDescriptor::lattice(Exponent::ONE, base)).unwrap();
        let rec = bootstrap_two_term(
            &op,
            f.components(),
            &DMatrix::zeros(2, 8),
            [&x, &x],
            [&x, &x],
            None,
            &BootstrapOptions::default(),
        )
        .unwrap();
        assert_eq!(rec.lhs, 0.0);
        assert_eq!(rec.reducing_products, [0.0, 0.0]);
        assert_eq!(rec.ratio, None);
    }

    #[test]
    fn identity_check() {
        let mut rng = rng_for(8, 0);
        let base = random_measure(&mut rng, 10);
        let one = gaussian_mixture_function(&mut rng, &SpaceDescriptor::lattice(Exponent::new(0.7).unwrap(), base.clone()), 1);
        let c = reducing_matrix_identity_check(&one, &ReduceOptions::default()).unwrap();
        assert!((c.ratio_max - 1.0).abs() < 1e-6 && (c.ratio_min - 1.0).abs() < 1e-6);

        let two = gaussian_mixture_function(&mut rng, &SpaceDescriptor::lattice(Exponent::TWO, base.clone()), 3);
        let c = reducing_matrix_identity_check(&two, &ReduceOptions::default()).unwrap();
        assert!(c.ratio_max <= 1.05 && c.ratio_min >= 1.0 / 1.05);

        let rows: Vec<Vec<f64>> = two.components().row_iter().map(|r| r.iter().copied().collect()).collect();
        let degenerate = VectorFunction::from_rows(two.space().clone(), &[rows[0].clone(), rows[1].clone(), rows[0].clone()]).unwrap();
        let c = reducing_matrix_identity_check(&degenerate, &ReduceOptions::default()).unwrap();
        assert!(c.kernels_match);
        assert!(c.ratio_max / c.ratio_min <= c.allowed * c.allowed);
    }

    #[test]
    fn split_problem_json() {
        let t = BilinearTable::scalar(&DMatrix::from_element(1, 2, 0.5)).unwrap();
        let e = |r: usize, c: usize| DMatrix::identity(r, c);
        let p = SplitProblem {
            table: t,
            bound: TwoTermBound::new(e(1, 1), e(1, 1), e(2, 2), e(2, 2)),
        };
        let text = p.to_json().unwrap();
        assert_eq!(SplitProblem::from_json(&text).unwrap(), p);
        let bad = text.replace("\"b1\":[[1.0,0.0],[0.0,1.0]]", "\"b1\":[[1.0]]");
        assert!(SplitProblem::from_json(&bad).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        /// With `Z = R` and invertible `A0`, `B0` the split constants depend
        /// only on the dimensions: `C_k <= sqrt(m n)`.
        #[test]
        fn scalar_split_constants_are_dimensional(seed in 0u64..1_000_000, m in 1usize..4, n in 1usize..4) {
            let mut rng = rng_for(seed, 11);
            let a0 = gaussian_matrix(&mut rng, m, m) + DMatrix::identity(m, m) * 3.0;
            let b0 = gaussian_matrix(&mut rng, n, n) + DMatrix::identity(n, n) * 3.0;
            let a1 = gaussian_matrix(&mut rng, m + 1, m);
            let b1 = gaussian_matrix(&mut rng, n, n);
            let bound = TwoTermBound::new(a0, a1, b0, b1);
            let mut k = gaussian_matrix(&mut rng, m, n);
            k /= 2.0 * spectral_norm(&k);
            let mut k1 = gaussian_matrix(&mut rng, m + 1, n);
            k1 /= 2.0 * spectral_norm(&k1);
            let tau = bound.a0.transpose() * k * &bound.b0 + bound.a1.transpose() * k1 * &bound.b1;
            let t = BilinearTable::scalar(&tau).unwrap();
            let r = split_two_term(&t, &bound, &EpsSchedule::default(), &ValidationPairs::for_dims(m, n, 0)).unwrap();
            let cap = ((m * n) as f64).sqrt() * (1.0 + 1e-9);
            proptest::prop_assert!(r.reconstruction_error <= 1e-12);
            proptest::prop_assert!(r.c0 <= cap && r.c1 <= cap, "{} {} cap {}", r.c0, r.c1, cap);
        }
    }
}
