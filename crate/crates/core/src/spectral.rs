//! Fourier multipliers `(-Δ)^{s/2}` and `(I - Δ)^{s/2}` on the periodic grid
//! `(2π Z / N)^d`, band-limited random test functions, and both sides of the
//! scalar and vector Kato-Ponce inequalities.
//!
//! The homogeneous multiplier is set to zero at `ξ = 0`, so it removes the
//! mean of its input.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bilinear::{bootstrap_two_term, BilinearOperator, BootstrapOptions, TwoTermBootstrap};
use crate::random::{gaussian, rng_for};
use crate::spaces::{DiscreteMeasureSpace, Exponent, SpaceDescriptor, VectorFunction};
use crate::tensor::{iterated_norm, Order, TensorPair};
use crate::{Error, Result};

/// Largest points per axis allowed in two dimensions.
pub const MAX_N_2D: usize = 128;

/// Sample points `2π j / N`, `j in 0..N`, in each of `d` axes, with cached
/// transform plans.
#[derive(Clone)]
pub struct PeriodicGrid {
    d: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid").field("d", &self.d).field("n", &self.n).finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        (self.d, self.n) == (other.d, other.n)
    }
}

/// File form of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
}

impl PeriodicGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(d == 1 || d == 2) {
            return Err(Error::InvalidInput(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!("points per axis must be a power of two >= 8, got {n}")));
        }
        if d == 2 && n > MAX_N_2D {
            return Err(Error::InvalidInput(format!(
                "two-dimensional grids take at most {MAX_N_2D} points per axis"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            d,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.d, spec.n)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { d: self.d, n: self.n }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of sample points `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    /// Quadrature weights `(2π / N)^d` on every point.
    pub fn measure(&self) -> DiscreteMeasureSpace {
        DiscreteMeasureSpace::uniform(self.len(), self.spacing().powi(self.d as i32)).expect("positive weight")
    }

    pub fn lattice(&self, p: Exponent) -> SpaceDescriptor {
        SpaceDescriptor::lattice(p, self.measure())
    }

    /// Coordinates of point `idx` (row-major, last axis fastest).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        match self.d {
            1 => vec![h * idx as f64],
            _ => vec![h * (idx / self.n) as f64, h * (idx % self.n) as f64],
        }
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    fn signed_frequency(&self, j: usize) -> f64 {
        if j < self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        }
    }

    /// `|ξ|^2` for the transform coefficient at `idx`.
    fn frequency_sq(&self, idx: usize) -> f64 {
        match self.d {
            1 => self.signed_frequency(idx).powi(2),
            _ => self.signed_frequency(idx / self.n).powi(2) + self.signed_frequency(idx % self.n).powi(2),
        }
    }

    fn transform(&self, buf: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(buf);
        if self.d == 2 {
            let mut t = vec![Complex::new(0.0, 0.0); buf.len()];
            transpose(buf, &mut t, n);
            plan.process(&mut t);
            transpose(&t, buf, n);
        }
    }
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `(-Δ)^{s/2}`, multiplier `|ξ|^s`.
    Homogeneous,
    /// `(I - Δ)^{s/2}`, multiplier `(1 + |ξ|^2)^{s/2}`.
    Inhomogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalOperator {
    pub kind: OperatorKind,
    pub s: f64,
}

impl FractionalOperator {
    pub fn new(kind: OperatorKind, s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("order must be finite and nonnegative, got {s}")));
        }
        Ok(Self { kind, s })
    }

    pub fn multiplier(&self, xi_sq: f64) -> f64 {
        match self.kind {
            OperatorKind::Homogeneous if xi_sq == 0.0 => 0.0,
            OperatorKind::Homogeneous => xi_sq.powf(self.s / 2.0),
            OperatorKind::Inhomogeneous => (1.0 + xi_sq).powf(self.s / 2.0),
        }
    }
}

/// `D f` through the discrete Fourier transform.
pub fn apply_d(op: &FractionalOperator, grid: &PeriodicGrid, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            actual: f.len(),
        });
    }
    let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    grid.transform(&mut buf, &grid.forward);
    for (idx, c) in buf.iter_mut().enumerate() {
        *c *= op.multiplier(grid.frequency_sq(idx));
    }
    grid.transform(&mut buf, &grid.inverse);
    let scale = 1.0 / grid.len() as f64;
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

/// `D` applied to every row.
pub fn apply_d_rows(op: &FractionalOperator, grid: &PeriodicGrid, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(f.nrows(), f.ncols());
    for (i, row) in f.row_iter().enumerate() {
        let v: Vec<f64> = row.iter().copied().collect();
        out.row_mut(i).copy_from_slice(&apply_d(op, grid, &v)?);
    }
    Ok(out)
}

/// The `N^d x N^d` matrix of `D`.
pub fn operator_matrix(op: &FractionalOperator, grid: &PeriodicGrid) -> DMatrix<f64> {
    let len = grid.len();
    let mut m = DMatrix::zeros(len, len);
    let mut e = vec![0.0; len];
    for j in 0..len {
        e[j] = 1.0;
        let col = apply_d(op, grid, &e).expect("grid length");
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    m
}

/// `n` real trigonometric polynomials with standard normal coefficients on
/// the frequencies `|ξ| <= cutoff`, each with unit `L^2` norm.
pub fn random_band_limited(grid: &PeriodicGrid, cutoff: usize, n: usize, seed: u64) -> Result<VectorFunction> {
    if 2 * cutoff >= grid.n() {
        return Err(Error::InvalidInput(format!("cutoff {cutoff} must be below N/2 = {}", grid.n() / 2)));
    }
    let c = cutoff as i64;
    // one representative of each pair ±ξ
    let freqs: Vec<Vec<f64>> = match grid.d() {
        1 => (0..=c).map(|k| vec![k as f64]).collect(),
        _ => (-c..=c)
            .flat_map(|a| (-c..=c).map(move |b| (a, b)))
            .filter(|&(a, b)| a * a + b * b <= c * c && (a > 0 || (a == 0 && b >= 0)))
            .map(|(a, b)| vec![a as f64, b as f64])
            .collect(),
    };
    let points: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let l2 = grid.lattice(Exponent::TWO);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng_for(seed, i as u64);
        let coeffs: Vec<(f64, f64)> = freqs.iter().map(|_| (gaussian(&mut rng), gaussian(&mut rng))).collect();
        let row: Vec<f64> = points
            .iter()
            .map(|x| {
                freqs
                    .iter()
                    .zip(&coeffs)
                    .map(|(xi, (a, b))| {
                        let phase: f64 = xi.iter().zip(x).map(|(k, t)| k * t).sum();
                        a * phase.cos() + b * phase.sin()
                    })
                    .sum()
            })
            .collect();
        let norm = l2.norm(&row)?;
        rows.push(row.iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    VectorFunction::from_rows(l2, &rows)
}

/// Exponents `(p0, q0, p1, q1, r)` of a two-term product estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatoPonceExponents {
    pub p0: Exponent,
    pub q0: Exponent,
    pub p1: Exponent,
    pub q1: Exponent,
    pub r: Exponent,
}

impl KatoPonceExponents {
    /// Checks the Hölder relations and the parameter regime in which the
    /// inequality holds.
    pub fn new(p0: f64, q0: f64, p1: f64, q1: f64, r: f64) -> Result<Self> {
        Ok(Self {
            p0: Exponent::new(p0)?,
            q0: Exponent::new(q0)?,
            p1: Exponent::new(p1)?,
            q1: Exponent::new(q1)?,
            r: Exponent::new(r)?,
        })
    }

    pub fn check(&self, d: usize, s: f64) -> Result<()> {
        for v in [self.p0, self.q0, self.p1, self.q1] {
            if !(v.value() > 1.0) {
                return Err(Error::Regime(format!("p_k and q_k must lie in (1, inf], got {v}")));
            }
        }
        if !(self.r.value() > 0.5 && !self.r.is_infinite()) {
            return Err(Error::Regime(format!("r must be finite and above 1/2, got {}", self.r)));
        }
        for (p, q) in [(self.p0, self.q0), (self.p1, self.q1)] {
            if (p.reciprocal() + q.reciprocal() - self.r.reciprocal()).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("1/{p} + 1/{q} != 1/{}", self.r)));
            }
        }
        let floor = d as f64 * (self.r.reciprocal() - 1.0).max(0.0);
        let even = s > 0.0 && (s / 2.0).fract() == 0.0;
        if !(s > floor || even) {
            return Err(Error::Regime(format!("order {s} must exceed {floor} or be an even integer")));
        }
        Ok(())
    }
}

/// Both sides of the Kato-Ponce estimate for `f . g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatoPonceSides {
    /// `||D(f . g)||_r`.
    pub lhs: f64,
    /// `||D f ⊙ g||_{L^p0(L^q0)} + ||f ⊙ D g||_{L^p1(L^q1)}`.
    pub rhs_vec: f64,
    /// `|| |D f| ||_p0 || |g| ||_q0 + || |f| ||_p1 || |D g| ||_q1` with
    /// Euclidean lengths.
    pub rhs_scalar: f64,
    pub ratio_vec: Option<f64>,
    pub ratio_scalar: Option<f64>,
}

fn pointwise_lengths(c: &DMatrix<f64>) -> Vec<f64> {
    c.column_iter().map(|col| col.norm()).collect()
}

pub fn kato_ponce_sides(
    grid: &PeriodicGrid,
    op: &FractionalOperator,
    exps: &KatoPonceExponents,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<KatoPonceSides> {
    exps.check(grid.d(), op.s)?;
    for m in [f, g] {
        if m.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: m.ncols(),
            });
        }
    }
    if f.nrows() != g.nrows() {
        return Err(Error::DimensionMismatch {
            expected: f.nrows(),
            actual: g.nrows(),
        });
    }
    let dot: Vec<f64> = f.column_iter().zip(g.column_iter()).map(|(a, b)| a.dot(&b)).collect();
    let lhs = grid.lattice(exps.r).norm(&apply_d(op, grid, &dot)?)?;

    let df = apply_d_rows(op, grid, f)?;
    let dg = apply_d_rows(op, grid, g)?;
    let term = |a: &DMatrix<f64>, p: Exponent, b: &DMatrix<f64>, q: Exponent| -> Result<f64> {
        let t = TensorPair::new(
            VectorFunction::new(grid.lattice(p), a.clone())?,
            VectorFunction::new(grid.lattice(q), b.clone())?,
        )?;
        Ok(iterated_norm(&t, Order::XOuter))
    };
    let rhs_vec = term(&df, exps.p0, g, exps.q0)? + term(f, exps.p1, &dg, exps.q1)?;
    let len_norm = |a: &DMatrix<f64>, p: Exponent| grid.lattice(p).lattice_norm(&pointwise_lengths(a));
    let rhs_scalar = len_norm(&df, exps.p0) * len_norm(g, exps.q0) + len_norm(f, exps.p1) * len_norm(&dg, exps.q1);
    Ok(KatoPonceSides {
        lhs,
        rhs_vec,
        rhs_scalar,
        ratio_vec: (rhs_vec > 0.0).then(|| lhs / rhs_vec),
        ratio_scalar: (rhs_scalar > 0.0).then(|| lhs / rhs_scalar),
    })
}

/// `(f, g) -> D(f g)` into `L^r` of the grid.
#[derive(Clone, Debug)]
pub struct FractionalProduct {
    grid: PeriodicGrid,
    op: FractionalOperator,
    target: SpaceDescriptor,
}

impl FractionalProduct {
    pub fn new(grid: PeriodicGrid, op: FractionalOperator, r: Exponent) -> Self {
        let target = grid.lattice(r);
        Self { grid, op, target }
    }
}

impl BilinearOperator for FractionalProduct {
    fn target(&self) -> &SpaceDescriptor {
        &self.target
    }
    fn apply(&self, f: &[f64], g: &[f64]) -> Result<DVector<f64>> {
        if g.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                actual: g.len(),
            });
        }
        let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        Ok(DVector::from_vec(apply_d(&self.op, &self.grid, &prod)?))
    }
}

/// The spaces of the two-term Kato-Ponce estimate with
/// `(A0, B0, A1, B1) = (D, I, I, D)`: `f` lives in `X0 = {f : D f in L^p0}`
/// and `X1 = L^p1`, `g` in `Y0 = L^q0` and `Y1 = {g : D g in L^q1}`.
#[derive(Clone, Debug)]
pub struct KatoPonceSetup {
    grid: PeriodicGrid,
    op: FractionalOperator,
    exps: KatoPonceExponents,
    x: [SpaceDescriptor; 2],
    y: [SpaceDescriptor; 2],
    tau: FractionalProduct,
}

impl KatoPonceSetup {
    pub fn new(grid: &PeriodicGrid, op: &FractionalOperator, exps: &KatoPonceExponents) -> Result<Self> {
        exps.check(grid.d(), op.s)?;
        let d = operator_matrix(op, grid);
        let measure = grid.measure();
        let x0 = SpaceDescriptor::related(exps.p0, measure.clone(), d.clone())?;
        let y1 = SpaceDescriptor::related(exps.q1, measure, d)?;
        Ok(Self {
            grid: grid.clone(),
            op: *op,
            exps: *exps,
            x: [x0, grid.lattice(exps.p1)],
            y: [grid.lattice(exps.q0), y1],
            tau: FractionalProduct::new(grid.clone(), *op, exps.r),
        })
    }

    pub fn sides(&self, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<KatoPonceSides> {
        kato_ponce_sides(&self.grid, &self.op, &self.exps, f, g)
    }

    pub fn bootstrap(&self, f: &DMatrix<f64>, g: &DMatrix<f64>, opts: &BootstrapOptions) -> Result<TwoTermBootstrap> {
        bootstrap_two_term(&self.tau, f, g, [&self.x[0], &self.x[1]], [&self.y[0], &self.y[1]], None, opts)
    }
}

/// Two-term bootstrap of the Kato-Ponce inequality; see [`KatoPonceSetup`].
pub fn kato_ponce_bootstrap(
    grid: &PeriodicGrid,
    op: &FractionalOperator,
    exps: &KatoPonceExponents,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    opts: &BootstrapOptions,
) -> Result<TwoTermBootstrap> {
    KatoPonceSetup::new(grid, op, exps)?.bootstrap(f, g, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng_for;
    use rand::Rng;

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    fn op(kind: OperatorKind, s: f64) -> FractionalOperator {
        FractionalOperator::new(kind, s).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::new(1, 4).is_err());
        assert!(PeriodicGrid::new(1, 24).is_err());
        assert!(PeriodicGrid::new(3, 8).is_err());
        assert!(PeriodicGrid::new(2, 256).is_err());
        let g = PeriodicGrid::new(2, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert!((g.measure().total_mass() - (2.0 * std::f64::consts::PI).powi(2)).abs() < 1e-10);
    }

    #[test]
    fn constants() {
        let grid = PeriodicGrid::new(1, 32).unwrap();
        let f = vec![2.5; 32];
        let out = apply_d(&op(OperatorKind::Inhomogeneous, 1.7), &grid, &f).unwrap();
        assert!(max_rel(&out, &f) < 1e-14);
        let out = apply_d(&op(OperatorKind::Homogeneous, 1.7), &grid, &f).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        for d in [1, 2] {
            let grid = PeriodicGrid::new(d, 64).unwrap();
            for &(k, s) in &[(1.0, 0.5), (3.0, 1.3), (7.0, 2.0), (12.0, 3.7)] {
                let f = grid.sample(|x| (k * x[0]).cos());
                let out = apply_d(&op(OperatorKind::Homogeneous, s), &grid, &f).unwrap();
                let expect: Vec<f64> = f.iter().map(|v| v * f64::powf(k, s)).collect();
                assert!(max_rel(&out, &expect) < 1e-12, "d={d} k={k} s={s}");
            }
        }
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let f = grid.sample(|x| (3.0 * x[0] + 4.0 * x[1]).sin());
        let out = apply_d(&op(OperatorKind::Inhomogeneous, 1.0), &grid, &f).unwrap();
        let expect: Vec<f64> = f.iter().map(|v| v * 26f64.sqrt()).collect();
        assert!(max_rel(&out, &expect) < 1e-12);
    }

    #[test]
    fn laplacian_of_cosine() {
        let grid = PeriodicGrid::new(1, 256).unwrap();
        let f = grid.sample(|x| x[0].cos());
        let out = apply_d(&op(OperatorKind::Homogeneous, 2.0), &grid, &f).unwrap();
        let e = max_rel(&out, &f);
        assert!(e < 1e-11, "{e}");
    }

    #[test]
    fn composition_and_plancherel() {
        let grid = PeriodicGrid::new(1, 256).unwrap();
        let f = random_band_limited(&grid, 40, 1, 9).unwrap();
        let row: Vec<f64> = f.components().row(0).iter().copied().collect();
        for kind in [OperatorKind::Homogeneous, OperatorKind::Inhomogeneous] {
            let twice = apply_d(&op(kind, 0.7), &grid, &apply_d(&op(kind, 1.1), &grid, &row).unwrap()).unwrap();
            let once = apply_d(&op(kind, 1.8), &grid, &row).unwrap();
            assert!(max_rel(&twice, &once) < 1e-9);
        }
        let same = apply_d(&op(OperatorKind::Inhomogeneous, 0.0), &grid, &row).unwrap();
        assert!(max_rel(&same, &row) < 1e-12);
        let l2 = grid.lattice(Exponent::TWO);
        assert!((l2.norm(&same).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_limited_contract() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let a = random_band_limited(&grid, 10, 3, 42).unwrap();
        assert_eq!(a, random_band_limited(&grid, 10, 3, 42).unwrap());
        let l2 = grid.lattice(Exponent::TWO);
        for row in a.components().row_iter() {
            let v: Vec<f64> = row.iter().copied().collect();
            assert!((l2.norm(&v).unwrap() - 1.0).abs() < 1e-10);
        }
        assert!(random_band_limited(&grid, 32, 1, 0).is_err());
        // nothing above the cutoff
        let high = op(OperatorKind::Homogeneous, 2.0);
        let v: Vec<f64> = a.components().row(0).iter().copied().collect();
        let dv = apply_d(&high, &grid, &v).unwrap();
        let energy = |w: &[f64]| l2.norm(w).unwrap();
        assert!(energy(&dv) <= 100.0 * energy(&v) * (1.0 + 1e-12));
        let g2 = PeriodicGrid::new(2, 16).unwrap();
        assert_eq!(random_band_limited(&g2, 3, 2, 1).unwrap().components().ncols(), 256);
    }

    /// `-Δ(fg) = -(f'' g + 2 f' g' + f g'')` for `f = g = cos`, which is
    /// `2 cos(2x)`, evaluated symbolically on the grid.
    #[test]
    fn leibniz_closed_form() {
        let grid = PeriodicGrid::new(1, 256).unwrap();
        let f = grid.sample(|x| x[0].cos());
        let prod: Vec<f64> = f.iter().map(|v| v * v).collect();
        let lap = apply_d(&op(OperatorKind::Homogeneous, 2.0), &grid, &prod).unwrap();
        let leibniz = grid.sample(|x| {
            let (c, s) = (x[0].cos(), x[0].sin());
            -((-c) * c + 2.0 * (-s) * (-s) + c * (-c))
        });
        let e = max_rel(&lap, &leibniz);
        assert!(e < 1e-11, "{e}");
        let exps = KatoPonceExponents::new(2.0, 2.0, 2.0, 2.0, 1.0).unwrap();
        let m = DMatrix::from_row_slice(1, 256, &f);
        let sides = kato_ponce_sides(&grid, &op(OperatorKind::Homogeneous, 2.0), &exps, &m, &m).unwrap();
        let l1 = grid.lattice(Exponent::ONE).norm(&leibniz).unwrap();
        assert!((sides.lhs - l1).abs() < 1e-9 * l1);
        // the grid rule for |2 cos 2x| is only second-order accurate at the kinks
        assert!((sides.lhs - 8.0).abs() < 1e-2, "{}", sides.lhs);
        // ||cos||_2^2 = π on both terms
        assert!((sides.rhs_scalar - 2.0 * std::f64::consts::PI).abs() < 1e-9);
        assert_eq!(sides.rhs_vec, sides.rhs_scalar);
    }

    #[test]
    fn regime_checks() {
        let ok = KatoPonceExponents::new(2.0, 2.0, 4.0, 4.0 / 3.0, 1.0).unwrap();
        assert!(ok.check(1, 0.5).is_ok());
        let bad_relation = KatoPonceExponents {
            r: Exponent::new(1.5).unwrap(),
            ..ok
        };
        assert!(matches!(bad_relation.check(1, 0.5), Err(Error::InvalidInput(_))));
        let low_r = KatoPonceExponents::new(1.5, 1.5, 1.5, 1.5, 0.75).unwrap();
        assert!(matches!(low_r.check(1, 0.2), Err(Error::Regime(_))));
        assert!(low_r.check(1, 0.5).is_ok());
        assert!(low_r.check(2, 2.0).is_ok());
        assert!(matches!(low_r.check(2, 0.5), Err(Error::Regime(_))));
        let p_one = KatoPonceExponents {
            p0: Exponent::ONE,
            q0: Exponent::INFINITY,
            ..ok
        };
        assert!(matches!(p_one.check(1, 1.0), Err(Error::Regime(_))));
        let inf = KatoPonceExponents::new(f64::INFINITY, 2.0, 2.0, f64::INFINITY, 2.0).unwrap();
        assert!(inf.check(1, 1.0).is_ok());
    }

    #[test]
    fn single_component_sides_agree() {
        let grid = PeriodicGrid::new(1, 128).unwrap();
        let exps = KatoPonceExponents::new(3.0, 6.0, 6.0, 3.0, 2.0).unwrap();
        let f = random_band_limited(&grid, 12, 1, 1).unwrap();
        let g = random_band_limited(&grid, 12, 1, 2).unwrap();
        let s = kato_ponce_sides(&grid, &op(OperatorKind::Inhomogeneous, 1.5), &exps, f.components(), g.components()).unwrap();
        assert!((s.rhs_vec - s.rhs_scalar).abs() <= 1e-12 * s.rhs_scalar);
    }

    #[test]
    fn vector_side_never_exceeds_scalar_side() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let exps = KatoPonceExponents::new(2.0, 2.0, 4.0, 4.0 / 3.0, 1.0).unwrap();
        let mut rng = rng_for(3, 0);
        for trial in 0..20 {
            let n = rng.random_range(1..5);
            let f = random_band_limited(&grid, 10, n, 2 * trial).unwrap();
            let g = random_band_limited(&grid, 10, n, 2 * trial + 1).unwrap();
            let s = kato_ponce_sides(&grid, &op(OperatorKind::Homogeneous, 0.8), &exps, f.components(), g.components()).unwrap();
            assert!(s.rhs_vec <= s.rhs_scalar * (1.0 + 1e-9));
        }
    }

    /// Four smooth bumps with disjoint supports: the vector side behaves
    /// like `n^{1/2}` while the scalar side behaves like `n`.
    #[test]
    fn disjoint_bumps_reduce_by_root_n() {
        let grid = PeriodicGrid::new(1, 256).unwrap();
        let n = 4;
        let width = std::f64::consts::PI / 4.0 * 0.9;
        let bump = |x: f64, c: f64| {
            let t = (x - c) / width;
            if t.abs() < 1.0 {
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        };
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = (i as f64 + 0.5) * std::f64::consts::PI / 2.0;
                grid.sample(|x| bump(x[0], c))
            })
            .collect();
        let f = DMatrix::from_fn(n, 256, |i, j| rows[i][j]);
        let exps = KatoPonceExponents::new(2.0, 2.0, 2.0, 2.0, 1.0).unwrap();
        let s = kato_ponce_sides(&grid, &op(OperatorKind::Inhomogeneous, 1.0), &exps, &f, &f).unwrap();
        let reduction = s.rhs_vec / s.rhs_scalar;
        let expect = (n as f64).powf(0.5 - 1.0);
        assert!((reduction / expect - 1.0).abs() < 0.1, "{reduction} vs {expect}");
    }

    #[test]
    fn bootstrap_single_component_matches_scalar_bound() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let exps = KatoPonceExponents::new(2.0, 2.0, 2.0, 2.0, 1.0).unwrap();
        let f = random_band_limited(&grid, 6, 1, 5).unwrap();
        let g = random_band_limited(&grid, 6, 1, 6).unwrap();
        let rec = kato_ponce_bootstrap(
            &grid,
            &op(OperatorKind::Inhomogeneous, 1.0),
            &exps,
            f.components(),
            g.components(),
            &BootstrapOptions::default(),
        )
        .unwrap();
        assert!(rec.ratio.unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn bootstrap_two_components() {
        let grid = PeriodicGrid::new(1, 64).unwrap();
        let exps = KatoPonceExponents::new(2.0, 2.0, 2.0, 2.0, 1.0).unwrap();
        let f = random_band_limited(&grid, 6, 2, 7).unwrap();
        let g = random_band_limited(&grid, 6, 2, 8).unwrap();
        let rec = kato_ponce_bootstrap(
            &grid,
            &op(OperatorKind::Homogeneous, 1.0),
            &exps,
            f.components(),
            g.components(),
            &BootstrapOptions::default(),
        )
        .unwrap();
        let split = rec.split.as_ref().unwrap();
        assert!(split.reconstruction_error <= 1e-8);
        assert!(rec.ratio.unwrap().is_finite());
    }
}
