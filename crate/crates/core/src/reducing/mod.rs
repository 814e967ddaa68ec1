//! Reducing matrices: a positive semi-definite `A` with `|A e| ~ ||x . e||_X`.
//!
//! The unit ball `{ e : ||x . e|| <= 1 }` is replaced by a finite set of its
//! boundary points, which are enclosed by a minimum-volume ellipsoid
//! `{ u : |Q u| <= 1 }`. For `p <= 1` and `p = inf` the convex hull of the
//! ball is a polytope; when its candidate vertices are few enough to
//! enumerate they are the point set and the ellipsoid is exact up to the
//! solver tolerance. Otherwise the ball is
//! sampled along a deterministic direction set, and the ellipsoid is refined
//! by adding the boundary points that a local search finds outside it. The
//! result `A = Q` (extended by zero on the kernel of `x`) satisfies
//! `c_low |A e| <= ||x . e|| <= c_high |A e|`, where both constants are
//! re-measured on an independent direction sample. For convex unit balls
//! (`p >= 1`) John's theorem gives `c_high / c_low <= sqrt(n)` up to the
//! solver tolerance.

mod directions;
mod mvee;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{left_kernel_split, spectral_norm, symmetric_eigen};
use crate::spaces::{lattice_norm, matrix_from_rows, matrix_to_rows, Exponent, VectorFunction};
use crate::{Error, Result};

pub use directions::sample_directions;
pub use mvee::{mvee, mvee_from, Ellipsoid};

/// Singular values below this fraction of the largest one span the kernel.
pub const KERNEL_REL_TOL: f64 = 1e-9;

const VALIDATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Refinement only adds boundary points sticking out of the current
/// ellipsoid by more than this relative amount; smaller protrusions change
/// the sandwich constants negligibly but crowd the ellipsoid solver.
const REFINE_GAIN: f64 = 1e-6;

/// Largest number of atom subsets [`kink_directions`] examines.
pub const KINK_BUDGET: usize = 200_000;

/// Default number of sampled directions for vector dimension `n`.
pub fn default_direction_count(n: usize) -> usize {
    (16 * n * n).max(64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceOptions {
    /// Number of sampled directions; `None` means [`default_direction_count`].
    pub directions: Option<usize>,
    /// Relative tolerance of the ellipsoid fit.
    pub tol: f64,
    pub seed: u64,
    /// Maximal number of refinement rounds.
    pub refine_rounds: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self {
            directions: None,
            tol: 1e-9,
            seed: 0x5eed,
            refine_rounds: 12,
        }
    }
}

impl ReduceOptions {
    pub fn with_directions(mut self, count: usize) -> Self {
        self.directions = Some(count);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Ellipsoidal model of the directional quasi-norm `e -> ||x . e||_X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReducingMatrixDoc", into = "ReducingMatrixDoc")]
pub struct ReducingMatrix {
    matrix: DMatrix<f64>,
    kernel_basis: Vec<DVector<f64>>,
    c_low: f64,
    c_high: f64,
    n_directions: usize,
    tol: f64,
}

impl ReducingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Orthonormal basis of `{ e : x . e = 0 }`.
    pub fn kernel_basis(&self) -> &[DVector<f64>] {
        &self.kernel_basis
    }

    pub fn c_low(&self) -> f64 {
        self.c_low
    }

    pub fn c_high(&self) -> f64 {
        self.c_high
    }

    /// Measured distortion `c_high / c_low`.
    pub fn distortion(&self) -> f64 {
        self.c_high / self.c_low
    }

    pub fn n_directions(&self) -> usize {
        self.n_directions
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Orthonormal basis of the orthogonal complement of the kernel.
    pub fn range_basis(&self) -> Vec<DVector<f64>> {
        let eig = symmetric_eigen(&self.matrix);
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l));
        (0..self.dim())
            .filter(|&i| top > 0.0 && eig.eigenvalues[i] > KERNEL_REL_TOL * top)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(self) -> Result<Self> {
        let n = self.matrix.nrows();
        if self.matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.matrix.ncols(),
            });
        }
        if self.matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        let asym = crate::linalg::max_abs_diff(&self.matrix, &self.matrix.transpose());
        if asym > 1e-10 {
            return Err(Error::InvalidInput(format!("matrix is not symmetric (defect {asym:e})")));
        }
        if n > 0 && symmetric_eigen(&self.matrix).eigenvalues.min() < -1e-10 {
            return Err(Error::InvalidInput("matrix has a negative eigenvalue".into()));
        }
        if let Some(k) = self.kernel_basis.iter().find(|k| k.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: k.len(),
            });
        }
        if !(self.c_low > 0.0 && self.c_low.is_finite() && self.c_high.is_finite() && self.c_low <= self.c_high) {
            return Err(Error::InvalidInput(format!(
                "equivalence constants must satisfy 0 < c_low <= c_high < inf, got {} and {}",
                self.c_low, self.c_high
            )));
        }
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReducingMatrixDoc {
    matrix: Vec<Vec<f64>>,
    kernel_basis: Vec<Vec<f64>>,
    c_low: f64,
    c_high: f64,
    n_directions: usize,
    tol: f64,
}

impl TryFrom<ReducingMatrixDoc> for ReducingMatrix {
    type Error = Error;
    fn try_from(doc: ReducingMatrixDoc) -> Result<Self> {
        let matrix = matrix_from_rows(&doc.matrix)?;
        ReducingMatrix {
            matrix,
            kernel_basis: doc.kernel_basis.into_iter().map(DVector::from_vec).collect(),
            c_low: doc.c_low,
            c_high: doc.c_high,
            n_directions: doc.n_directions,
            tol: doc.tol,
        }
        .validate()
    }
}

impl From<ReducingMatrix> for ReducingMatrixDoc {
    fn from(r: ReducingMatrix) -> Self {
        ReducingMatrixDoc {
            matrix: matrix_to_rows(&r.matrix),
            kernel_basis: r.kernel_basis.iter().map(|k| k.iter().copied().collect()).collect(),
            c_low: r.c_low,
            c_high: r.c_high,
            n_directions: r.n_directions,
            tol: r.tol,
        }
    }
}

/// Orthonormal basis of `{ e : x . e = 0 }`, computed from the lattice image
/// of the components with threshold [`KERNEL_REL_TOL`].
pub fn kernel_of(x: &VectorFunction) -> Vec<DVector<f64>> {
    left_kernel_split(&x.lattice_components(), KERNEL_REL_TOL).0
}

const FIT_BITS: i32 = 40;

/// Number of sign cones searched for the upper sandwich constant.
const HIGH_CONES: usize = 32;

fn round_to_fit_bits(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let unit = 2f64.powi(v.abs().log2().floor() as i32 - FIT_BITS);
    (v / unit).round() * unit
}

/// The directional quasi-norm restricted to the complement of the kernel,
/// in coordinates of an orthonormal basis of that complement.
#[derive(Clone)]
struct RestrictedNorm {
    exponent: Exponent,
    weights: Vec<f64>,
    /// `atoms x k`: lattice values of `x . (basis d)` are `map * d`.
    map: DMatrix<f64>,
}

impl RestrictedNorm {
    fn eval(&self, d: &DVector<f64>) -> f64 {
        let values = &self.map * d;
        lattice_norm(self.exponent, &self.weights, values.as_slice())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Unit vector orthogonal to the `k - 1` rows of `b` (a `k-1 x k` matrix),
/// by cofactor expansion; `None` when the rows are dependent.
fn orthogonal_direction(b: &DMatrix<f64>) -> Option<DVector<f64>> {
    let k = b.ncols();
    let v = DVector::from_fn(k, |i, _| {
        let minor = b.clone().remove_column(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    });
    let scale: f64 = b.row_iter().map(|r| r.norm()).product();
    let len = v.norm();
    (len > 1e-10 * scale).then(|| v / len)
}

/// Directions where the unit ball of a finite lattice norm has corners.
///
/// For `p <= 1` these are the directions annihilating `k - 1` atoms: on each
/// cone of fixed atom signs the norm is concave, so the convex hull of the
/// ball is spanned by its boundary points along these rays. For `p = ∞` they
/// are the vertices of the polytope `{ d : |<m_j, d>| <= 1 }`. Empty for
/// `1 < p < ∞`, where the ball is smooth, and when enumeration would exceed
/// [`KINK_BUDGET`] subsets. One direction per sign pair.
fn kink_directions(norm: &RestrictedNorm) -> Vec<DVector<f64>> {
    let k = norm.map.ncols();
    let p = norm.exponent;
    if k < 2 || (p.value() > 1.0 && !p.is_infinite()) {
        return Vec::new();
    }
    let rows: Vec<DVector<f64>> = norm
        .map
        .row_iter()
        .zip(&norm.weights)
        .filter(|(r, w)| (p.is_infinite() || **w > 0.0) && r.norm() > 0.0)
        .map(|(r, _)| r.transpose())
        .collect();
    if p.is_infinite() {
        let subsets = binomial(rows.len(), k).saturating_mul(1 << (k - 1));
        if subsets > KINK_BUDGET {
            return Vec::new();
        }
        let mut out = Vec::new();
        for idx in (0..rows.len()).combinations(k) {
            let b = DMatrix::from_fn(k, k, |i, j| rows[idx[i]][j]);
            let Some(lu) = Some(b.lu()).filter(|lu| lu.determinant().abs() > 1e-12 * idx.iter().map(|&i| rows[i].norm()).product::<f64>())
            else {
                continue;
            };
            for signs in 0..(1usize << (k - 1)) {
                let rhs = DVector::from_fn(k, |i, _| if i > 0 && signs >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 });
                let Some(d) = lu.solve(&rhs) else { continue };
                if rows.iter().all(|r| r.dot(&d).abs() <= 1.0 + 1e-9) {
                    out.push(d.normalize());
                }
            }
        }
        out
    } else {
        if binomial(rows.len(), k - 1) > KINK_BUDGET {
            return Vec::new();
        }
        (0..rows.len())
            .combinations(k - 1)
            .filter_map(|idx| orthogonal_direction(&DMatrix::from_fn(k - 1, k, |i, j| rows[idx[i]][j])))
            .collect()
    }
}

/// Local maximisation of `f` over the unit sphere by pattern search along
/// tangent directions with step halving.
fn sphere_ascent(start: &DVector<f64>, f: &impl Fn(&DVector<f64>) -> f64, budget: usize) -> (DVector<f64>, f64) {
    let k = start.len();
    let mut best = start.normalize();
    let mut best_val = f(&best);
    if k < 2 {
        return (best, best_val);
    }
    let mut step = 0.25;
    let mut evals = 0;
    while step > 1e-10 && evals < budget {
        let tangents = tangent_basis(&best);
        let mut improved = false;
        'search: for t in &tangents {
            for sign in [1.0, -1.0] {
                let cand = (&best + t * (sign * step)).normalize();
                let val = f(&cand);
                evals += 1;
                if val > best_val {
                    best = cand;
                    best_val = val;
                    improved = true;
                    break 'search;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_val)
}

fn tangent_basis(d: &DVector<f64>) -> Vec<DVector<f64>> {
    let k = d.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k - 1);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    for &i in &order {
        if basis.len() == k - 1 {
            break;
        }
        let mut v = DVector::zeros(k);
        v[i] = 1.0;
        v -= d * d[i];
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let len = v.norm();
        if len > 1e-8 {
            basis.push(v / len);
        }
    }
    basis
}

/// Ellipsoid fit on a sampled boundary: the minimum-volume ellipsoid of the
/// boundary points along `count` directions, refined by adding boundary
/// points that a local search finds outside it.
fn fit_sampled(
    norm: &RestrictedNorm,
    k: usize,
    count: usize,
    opts: &ReduceOptions,
    gauge_ratio: &impl Fn(&DMatrix<f64>, &DVector<f64>) -> f64,
) -> Result<Ellipsoid> {
    let dirs = sample_directions(k, count, opts.seed)?;
    let mut points: Vec<DVector<f64>> = dirs
        .iter()
        .filter_map(|d| {
            let v = norm.eval(d);
            (v > 0.0).then(|| d / v)
        })
        .collect();
    let mut ell = mvee(&points, opts.tol)?;
    let starts = (2 * k + 2).min(points.len());
    for _ in 0..opts.refine_rounds {
        if !ell.converged {
            break;
        }
        let gain = REFINE_GAIN.max(10.0 * ell.epsilon);
        let q = ell.shape.clone();
        let mut scored: Vec<(f64, DVector<f64>)> = points
            .iter()
            .step_by(2)
            .map(|p| {
                let d = p.normalize();
                (gauge_ratio(&q, &d), d)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut added = false;
        for (_, d) in scored.into_iter().take(starts) {
            let (best, val) = sphere_ascent(&d, &|c| gauge_ratio(&q, c), 400);
            let fresh = points.iter().step_by(2).all(|p| (p.dot(&best) / p.norm()).abs() < 1.0 - 1e-12);
            if val > 1.0 + gain && fresh {
                let v = norm.eval(&best);
                points.push(&best / v);
                points.push(-&best / v);
                added = true;
            }
        }
        if !added {
            break;
        }
        ell = mvee_from(&points, opts.tol, Some(&ell.weights))?;
    }
    Ok(ell)
}

/// Computes the reducing matrix of `x`.
///
/// If `x . e = 0` for every `e` the result is the zero matrix with full
/// kernel and `c_low = c_high = 1`.
pub fn reducing_matrix(x: &VectorFunction, opts: &ReduceOptions) -> Result<ReducingMatrix> {
    let n = x.len();
    let count = opts.directions.unwrap_or_else(|| default_direction_count(n));
    let lattice = x.lattice_components();
    let (kernel, range) = left_kernel_split(&lattice, KERNEL_REL_TOL);
    if range.is_empty() {
        return Ok(ReducingMatrix {
            matrix: DMatrix::zeros(n, n),
            kernel_basis: kernel,
            c_low: 1.0,
            c_high: 1.0,
            n_directions: count,
            tol: opts.tol,
        });
    }
    let k = range.len();
    let basis = DMatrix::from_columns(&range);
    // The fit runs on data with unit peak entry rounded to FIT_BITS
    // significant bits, so that x and any multiple of it produce the same
    // iteration; the local searches are sensitive to last-bit differences.
    // The constants are measured on the exact data.
    let scale = lattice.amax();
    let exact = RestrictedNorm {
        exponent: x.space().exponent(),
        weights: x.space().weights().to_vec(),
        map: lattice.tr_mul(&basis) / scale,
    };
    let norm = RestrictedNorm {
        map: exact.map.map(round_to_fit_bits),
        ..exact.clone()
    };

    // Boundary points outside the current ellipsoid have gauge ratio > 1.
    let gauge_ratio = |q: &DMatrix<f64>, d: &DVector<f64>| (q * d).norm() / norm.eval(d);
    let kinks = kink_directions(&norm);
    // the corners, when enumerable, span the convex hull of the unit ball
    let corners: Vec<DVector<f64>> = kinks
        .iter()
        .flat_map(|d| {
            let v = norm.eval(d);
            [d / v, -d / v]
        })
        .collect();
    let ell = match mvee(&corners, opts.tol) {
        Ok(ell) if !corners.is_empty() => ell,
        _ => fit_sampled(&norm, k, count, opts, &gauge_ratio)?,
    };

    // Independent measurement of the sandwich constants, polished by local
    // search from the extreme sampled directions.
    let q = &ell.shape;
    let ratio = |d: &DVector<f64>| exact.eval(d) / (q * d).norm();
    let mut measured: Vec<(f64, DVector<f64>)> = sample_directions(k, count, opts.seed ^ VALIDATION_SALT)?
        .into_iter()
        .chain(kinks)
        .map(|d| (ratio(&d), d))
        .collect();
    measured.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut c_low = measured.first().map_or(1.0, |m| m.0);
    let mut c_high = measured.last().map_or(1.0, |m| m.0);
    for (_, d) in measured.iter().take(2) {
        let (_, v) = sphere_ascent(d, &|c| -ratio(c), 400);
        c_low = c_low.min(-v);
    }
    // the ratio is unimodal on each cone of fixed atom signs when p <= 1, so
    // the upper constant is searched from the best direction of several cones
    let mut cones = std::collections::HashSet::new();
    for (_, d) in measured.iter().rev() {
        if cones.len() == HIGH_CONES {
            break;
        }
        let signs: Vec<i8> = (&exact.map * d)
            .iter()
            .map(|v| v.partial_cmp(&0.0).map_or(0, |o| o as i8))
            .collect();
        if cones.insert(signs) {
            let (_, v) = sphere_ascent(d, &ratio, 400);
            c_high = c_high.max(v);
        }
    }

    let matrix = &basis * (q * scale) * basis.transpose();
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(ReducingMatrix {
        matrix,
        kernel_basis: kernel,
        c_low,
        c_high,
        n_directions: count,
        tol: opts.tol,
    })
}

/// `|A B|`, the largest singular value of the product.
pub fn reducing_product(a: &ReducingMatrix, b: &ReducingMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(spectral_norm(&(&a.matrix * &b.matrix)))
}

impl ReducingMatrix {
    /// Wraps an explicit symmetric positive semi-definite matrix, e.g. one
    /// known in closed form. Constants default to one.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let kernel = left_kernel_split(&matrix, KERNEL_REL_TOL).0;
        ReducingMatrix {
            matrix,
            kernel_basis: kernel,
            c_low: 1.0,
            c_high: 1.0,
            n_directions: 0,
            tol: 0.0,
        }
        .validate()
    }
}
