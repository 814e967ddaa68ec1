//! Norms of tensor dot products `x ⊙ y = sum_i x_i ⊗ y_i` and their
//! comparison with the reducing-matrix quantity `|[x]_X [y]_Y|`.
//!
//! All quantities are computed on the lattice images of the components, so
//! spaces related to a lattice through a map `J` are handled uniformly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{condition_number, psd_pinv_on};
use crate::random::{gaussian, gaussian_matrix, rng_for};
use crate::reducing::{reducing_matrix, reducing_product, ReduceOptions, ReducingMatrix};
use crate::spaces::{lattice_norm, Exponent, SpaceDescriptor, VectorFunction};
use crate::{Error, Result};

/// Representations whose accumulated change-of-basis matrix exceeds this
/// condition number are rejected by the projective search.
pub const CONDITION_CAP: f64 = 1e8;

/// The tensor `x ⊙ y` for `x` in `X ⊗ R^n` and `y` in `Y ⊗ R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorPair {
    x: VectorFunction,
    y: VectorFunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// `X(Y)`: the `Y` norm is taken first, pointwise in `X`'s variable.
    XOuter,
    /// `Y(X)`.
    YOuter,
}

impl TensorPair {
    pub fn new(x: VectorFunction, y: VectorFunction) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &VectorFunction {
        &self.x
    }

    pub fn y(&self) -> &VectorFunction {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Whether the lattice image of `x ⊙ y` vanishes, judged through
    /// `||Cx^T Cy||_F^2 = tr(Gx Gy)` with `Gx = Cx Cx^T`.
    pub fn is_zero(&self) -> bool {
        let cx = self.x.lattice_components();
        let cy = self.y.lattice_components();
        let gx = &*cx * cx.transpose();
        let gy = &*cy * cy.transpose();
        let cross = (&gx * &gy).trace().max(0.0);
        cross <= 1e-28 * gx.trace() * gy.trace()
    }
}

/// Outer-norm of the profile `s -> ||sum_i co[i,s] ci[i,.]||_inner`.
fn iterated(outer: &SpaceDescriptor, co: &DMatrix<f64>, inner: &SpaceDescriptor, ci: &DMatrix<f64>) -> f64 {
    let mut buf = vec![0.0; ci.ncols()];
    let profile: Vec<f64> = co
        .column_iter()
        .map(|c| {
            for (b, col) in buf.iter_mut().zip(ci.column_iter()) {
                *b = c.dot(&col);
            }
            inner.lattice_norm(&buf)
        })
        .collect();
    outer.lattice_norm(&profile)
}

/// Iterated norm `||x ⊙ y||_{X(Y)}` or `||x ⊙ y||_{Y(X)}`, exact on finite atoms.
pub fn iterated_norm(t: &TensorPair, order: Order) -> f64 {
    let cx = t.x.lattice_components();
    let cy = t.y.lattice_components();
    match order {
        Order::XOuter => iterated(t.x.space(), &cx, t.y.space(), &cy),
        Order::YOuter => iterated(t.y.space(), &cy, t.x.space(), &cx),
    }
}

/// A dual element `k` with `int g k dmu = ||g||_p` and dual norm at most one.
fn norming_functional(p: Exponent, weights: &[f64], g: &[f64]) -> Vec<f64> {
    let norm = lattice_norm(p, weights, g);
    if norm == 0.0 {
        return vec![0.0; g.len()];
    }
    if p.is_infinite() {
        let (arg, _) = g
            .iter()
            .enumerate()
            .fold((0, -1.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
        let mut k = vec![0.0; g.len()];
        k[arg] = g[arg].signum() / weights[arg];
        return k;
    }
    let pv = p.value();
    if pv == 1.0 {
        return g.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
    }
    g.iter().map(|v| v.signum() * (v.abs() / norm).powf(pv - 1.0)).collect()
}

/// `a_i = int (C)_i k dmu`.
fn pair_with(c: &DMatrix<f64>, weights: &[f64], k: &[f64]) -> Vec<f64> {
    c.row_iter()
        .map(|r| r.iter().zip(weights).zip(k).map(|((v, w), kk)| v * w * kk).sum())
        .collect()
}

/// `sum_i a_i (C)_i` as lattice values.
fn combine(c: &DMatrix<f64>, a: &[f64]) -> Vec<f64> {
    c.column_iter().map(|col| col.iter().zip(a).map(|(v, ai)| v * ai).sum()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectiveOptions {
    pub restarts: usize,
    /// Also run the dual-ball grid search when the two lattices have at most
    /// six atoms in total.
    pub grid_oracle: bool,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for InjectiveOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            grid_oracle: true,
            seed: 0x1417,
            max_sweeps: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectiveEstimate {
    /// Best value found; a lower bound on the supremum.
    pub value: f64,
    pub alternating: f64,
    pub grid: Option<f64>,
}

struct DualSide<'a> {
    p: Exponent,
    weights: &'a [f64],
    c: DMatrix<f64>,
}

impl DualSide<'_> {
    /// Best value and functional on this side given coefficients `a`.
    fn respond(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let g = combine(&self.c, a);
        (lattice_norm(self.p, self.weights, &g), norming_functional(self.p, self.weights, &g))
    }
}

/// Lower estimate of the injective norm
/// `sup { sum_i <x_i, x*> <y_i, y*> : |x*|, |y*| <= 1 }` by alternating
/// maximisation. Requires both exponents `>= 1`.
pub fn injective_norm(t: &TensorPair, opts: &InjectiveOptions) -> Result<InjectiveEstimate> {
    for p in [t.x.space().exponent(), t.y.space().exponent()] {
        if p.value() < 1.0 {
            return Err(Error::TrivialDual(p.value()));
        }
    }
    let sx = DualSide {
        p: t.x.space().exponent(),
        weights: t.x.space().weights(),
        c: t.x.lattice_components().into_owned(),
    };
    let sy = DualSide {
        p: t.y.space().exponent(),
        weights: t.y.space().weights(),
        c: t.y.lattice_components().into_owned(),
    };
    let n = t.n();

    let run = |start: Vec<f64>| -> f64 {
        // start: coefficients a_i = <x_i, h>
        let mut a = start;
        let mut best = 0.0f64;
        for _ in 0..opts.max_sweeps {
            let (_, k) = sy.respond(&a);
            let b = pair_with(&sy.c, sy.weights, &k);
            let (value, h) = sx.respond(&b);
            a = pair_with(&sx.c, sx.weights, &h);
            let improved = value > best * (1.0 + 1e-14);
            best = best.max(value);
            if !improved {
                break;
            }
        }
        best
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let row: Vec<f64> = sx.c.row(i).iter().copied().collect();
        starts.push(pair_with(&sx.c, sx.weights, &norming_functional(sx.p, sx.weights, &row)));
    }
    let mut rng = rng_for(opts.seed, 0);
    for _ in 0..opts.restarts {
        let g: Vec<f64> = (0..sx.c.ncols()).map(|_| gaussian(&mut rng)).collect();
        starts.push(pair_with(&sx.c, sx.weights, &norming_functional(sx.p, sx.weights, &g)));
    }
    let alternating = starts.into_iter().map(run).fold(0.0f64, f64::max);

    let grid = (opts.grid_oracle && sx.c.ncols() + sy.c.ncols() <= 6).then(|| {
        let (small, other) = if sx.c.ncols() <= sy.c.ncols() { (&sx, &sy) } else { (&sy, &sx) };
        grid_search(small, other)
    });
    let value = grid.map_or(alternating, |g| g.max(alternating));
    Ok(InjectiveEstimate { value, alternating, grid })
}

/// Maximises `h -> ||sum_i <c_i, h> other_i||` over a grid on the boundary of
/// the dual unit ball of `side`. By convexity and symmetry of the objective
/// it suffices to visit the faces `u_c = +1` of the cube, rescaled to the
/// dual unit sphere.
fn grid_search(side: &DualSide<'_>, other: &DualSide<'_>) -> f64 {
    let s = side.c.ncols();
    let res = match s {
        1 => 1,
        2 => 4001,
        _ => 121,
    };
    let dual = side.p.conjugate().expect("exponent >= 1");
    let mut best = 0.0f64;
    let mut u = vec![0.0; s];
    let mut idx = vec![0usize; s.saturating_sub(1)];
    for face in 0..s {
        idx.iter_mut().for_each(|i| *i = 0);
        loop {
            let mut it = idx.iter();
            for (c, uc) in u.iter_mut().enumerate() {
                *uc = if c == face {
                    1.0
                } else if res == 1 {
                    0.0
                } else {
                    -1.0 + 2.0 * *it.next().unwrap() as f64 / (res - 1) as f64
                };
            }
            let scale = lattice_norm(dual, side.weights, &u);
            let h: Vec<f64> = u.iter().map(|v| v / scale).collect();
            let a = pair_with(&side.c, side.weights, &h);
            best = best.max(other.respond(&a).0);
            // odometer over the free coordinates
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < res {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveOptions {
    pub restarts: usize,
    /// Maximal number of sweeps over all shear moves per start.
    pub iters: usize,
    pub seed: u64,
    pub reduce: ReduceOptions,
}

impl Default for ProjectiveOptions {
    fn default() -> Self {
        Self {
            restarts: 2,
            iters: 400,
            seed: 0x9a0e,
            reduce: ReduceOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveEstimate {
    /// Best representation cost found; an upper bound on the infimum.
    pub value: f64,
    /// Cost of the representation `(x, y)` itself.
    pub identity_value: f64,
    /// Cost of the canonical representation `([x]^+ x, [x] y)`.
    pub canonical_value: f64,
}

struct Representation {
    z: DMatrix<f64>,
    w: DMatrix<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    /// Accumulated row operations applied since the start.
    moves: DMatrix<f64>,
}

fn row_norm(space: &SpaceDescriptor, m: &DMatrix<f64>, i: usize) -> f64 {
    let row: Vec<f64> = m.row(i).iter().copied().collect();
    space.lattice_norm(&row)
}

impl Representation {
    fn new(xs: &SpaceDescriptor, ys: &SpaceDescriptor, z: DMatrix<f64>, w: DMatrix<f64>) -> Self {
        let n = z.nrows();
        let a = (0..n).map(|i| row_norm(xs, &z, i)).collect();
        let b = (0..n).map(|i| row_norm(ys, &w, i)).collect();
        Self {
            z,
            w,
            a,
            b,
            moves: DMatrix::identity(n, n),
        }
    }

    fn cost(&self) -> f64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a * b).sum()
    }

    /// Pattern search over shears `z_k += h z_l`, `w_l -= h w_k`, which
    /// leave `sum_i z_i ⊗ w_i` unchanged.
    fn descend(&mut self, xs: &SpaceDescriptor, ys: &SpaceDescriptor, sweeps: usize) {
        let n = self.z.nrows();
        if n < 2 {
            return;
        }
        let mut step = 0.5;
        let mut sweep = 0;
        while step > 1e-8 && sweep < sweeps {
            sweep += 1;
            let mut improved = false;
            for k in 0..n {
                for l in 0..n {
                    if k == l {
                        continue;
                    }
                    let ratio = self.a[k] * self.b[l] / (self.a[l] * self.b[k]);
                    let scale = if ratio.is_finite() && ratio > 0.0 { ratio.sqrt() } else { 1.0 };
                    for sign in [1.0, -1.0] {
                        let h = sign * step * scale;
                        let zk = self.z.row(k) + self.z.row(l) * h;
                        let wl = self.w.row(l) - self.w.row(k) * h;
                        let ak = xs.lattice_norm(zk.transpose().as_slice());
                        let bl = ys.lattice_norm(wl.transpose().as_slice());
                        let old = self.a[k] * self.b[k] + self.a[l] * self.b[l];
                        let new = ak * self.b[k] + self.a[l] * bl;
                        if new < old * (1.0 - 1e-13) {
                            let mut moves = self.moves.clone();
                            let lrow = moves.row(l).clone_owned();
                            let mut krow = moves.row_mut(k);
                            krow += lrow * h;
                            if condition_number(&moves) > CONDITION_CAP {
                                continue;
                            }
                            self.moves = moves;
                            self.z.row_mut(k).copy_from(&zk);
                            self.w.row_mut(l).copy_from(&wl);
                            self.a[k] = ak;
                            self.b[l] = bl;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
}

/// Upper estimate of the length-`n` projective norm
/// `inf sum_i ||(M x)_i||_X ||(M^{-T} y)_i||_Y` over invertible `M`.
pub fn n_projective_norm(t: &TensorPair, opts: &ProjectiveOptions) -> Result<ProjectiveEstimate> {
    let a = reducing_matrix(&t.x, &opts.reduce)?;
    n_projective_with(t, &a, opts)
}

fn n_projective_with(t: &TensorPair, ax: &ReducingMatrix, opts: &ProjectiveOptions) -> Result<ProjectiveEstimate> {
    let (xs, ys) = (t.x.space(), t.y.space());
    let cx = t.x.lattice_components().into_owned();
    let cy = t.y.lattice_components().into_owned();
    let n = t.n();

    let mut identity = Representation::new(xs, ys, cx.clone(), cy.clone());
    let identity_value = identity.cost();
    identity.descend(xs, ys, opts.iters);
    let mut best = identity.cost();

    // Canonical representation: sum_i ([x]^+ x)_i ⊗ ([x] y)_i equals x ⊙ y
    // because x . e = 0 on the kernel of [x].
    let range = ax.range_basis();
    let pinv = psd_pinv_on(ax.matrix(), &range);
    let mut canonical = Representation::new(xs, ys, &pinv * &cx, ax.matrix() * &cy);
    let canonical_value = canonical.cost();
    if range.is_empty() {
        // x = 0 on the lattice side: the tensor vanishes.
        return Ok(ProjectiveEstimate {
            value: 0.0,
            identity_value,
            canonical_value: 0.0,
        });
    }
    canonical.descend(xs, ys, opts.iters);
    best = best.min(canonical.cost());

    let mut rng = rng_for(opts.seed, 1);
    for _ in 0..opts.restarts {
        if n < 2 {
            break;
        }
        let m = DMatrix::identity(n, n) + gaussian_matrix(&mut rng, n, n) * 0.3;
        if condition_number(&m) > CONDITION_CAP {
            continue;
        }
        let Some(inv) = m.clone().try_inverse() else { continue };
        let mut rep = Representation::new(xs, ys, &m * &cx, inv.transpose() * &cy);
        rep.descend(xs, ys, opts.iters);
        best = best.min(rep.cost());
    }
    Ok(ProjectiveEstimate {
        value: best,
        identity_value,
        canonical_value,
    })
}

/// Length-`k` upper bound `k^{1-1/p} mass^{1/p} y_norm` on the projective
/// norm of `1_E ⊗ y` in `L^p ⊗ Y`, obtained by cutting `E` into `k` pieces of
/// equal measure. For `p < 1` it tends to zero as `k` grows.
pub fn projective_collapse_bound(p: f64, k: u64, mass: f64, y_norm: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Regime(format!("collapse bound needs 0 < p < 1, got {p}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("split count must be at least 1".into()));
    }
    if !(mass >= 0.0 && mass.is_finite() && y_norm >= 0.0 && y_norm.is_finite()) {
        return Err(Error::InvalidInput("mass and norm must be finite and nonnegative".into()));
    }
    Ok((k as f64).powf(1.0 - 1.0 / p) * mass.powf(1.0 / p) * y_norm)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub injective: InjectiveOptions,
    pub projective: ProjectiveOptions,
}

/// Every available tensor quantity of one instance and their ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormComparison {
    pub n: usize,
    pub atoms_x: usize,
    pub atoms_y: usize,
    pub p: Exponent,
    pub q: Exponent,
    pub iterated_xy: f64,
    pub iterated_yx: f64,
    pub injective: Option<f64>,
    pub n_projective: f64,
    pub reducing_product: f64,
    /// `|BA|`, recorded next to `|AB|` to expose the symmetry of the scalar.
    pub reducing_product_reversed: f64,
    pub ratios: NormRatios,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormRatios {
    pub iterated_xy_to_reducing: Option<f64>,
    pub iterated_yx_to_reducing: Option<f64>,
    pub projective_to_reducing: Option<f64>,
    pub injective_to_reducing: Option<f64>,
    pub injective_to_projective: Option<f64>,
    pub iterated_xy_to_yx: Option<f64>,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0 && a.is_finite() && b.is_finite()).then(|| a / b)
}

pub fn compare_all(t: &TensorPair, opts: &CompareOptions) -> Result<NormComparison> {
    let (p, q) = (t.x.space().exponent(), t.y.space().exponent());
    let base = NormComparison {
        n: t.n(),
        atoms_x: t.x.space().atoms(),
        atoms_y: t.y.space().atoms(),
        p,
        q,
        iterated_xy: 0.0,
        iterated_yx: 0.0,
        injective: (p.value() >= 1.0 && q.value() >= 1.0).then_some(0.0),
        n_projective: 0.0,
        reducing_product: 0.0,
        reducing_product_reversed: 0.0,
        ratios: NormRatios::default(),
    };
    if t.is_zero() {
        return Ok(base);
    }
    let ax = reducing_matrix(&t.x, &opts.projective.reduce)?;
    let by = reducing_matrix(&t.y, &opts.projective.reduce)?;
    let rp = reducing_product(&ax, &by)?;
    let rp_rev = reducing_product(&by, &ax)?;
    let ixy = iterated_norm(t, Order::XOuter);
    let iyx = iterated_norm(t, Order::YOuter);
    let inj = match base.injective {
        Some(_) => Some(injective_norm(t, &opts.injective)?.value),
        None => None,
    };
    let proj = n_projective_with(t, &ax, &opts.projective)?.value;
    let ratios = NormRatios {
        iterated_xy_to_reducing: ratio(ixy, rp),
        iterated_yx_to_reducing: ratio(iyx, rp),
        projective_to_reducing: ratio(proj, rp),
        injective_to_reducing: inj.and_then(|v| ratio(v, rp)),
        injective_to_projective: inj.and_then(|v| ratio(v, proj)),
        iterated_xy_to_yx: ratio(ixy, iyx),
    };
    Ok(NormComparison {
        iterated_xy: ixy,
        iterated_yx: iyx,
        injective: inj,
        n_projective: proj,
        reducing_product: rp,
        reducing_product_reversed: rp_rev,
        ratios,
        ..base
    })
}
