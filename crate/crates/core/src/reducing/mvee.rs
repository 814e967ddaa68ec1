//! Minimum-volume origin-centred enclosing ellipsoid.
//!
//! Solves the dual problem `max log det sum_j u_j z_j z_j^T` over the simplex
//! with Frank-Wolfe steps plus away steps (Wolfe-Atwood / Todd-Yildirim),
//! which converges linearly rather than at the `O(1/t)` rate of plain
//! Khachiyan iterations. With `M(u) = sum_j u_j z_j z_j^T` and
//! `omega_j = z_j^T M^{-1} z_j`, the ellipsoid
//! `{ z : z^T (k (1 + eps) M)^{-1} z <= 1 }` with `eps = max_j omega_j / k - 1`
//! contains every point and its volume exceeds the optimum by at most a
//! factor `(1 + eps)^{k/2}`.
//!
//! Frank-Wolfe crawls near the optimum on densely sampled smooth bodies and
//! on polytope vertex sets with many points on the optimal ellipsoid. After
//! [`FW_ITERATIONS`] steps the solve switches to a primal-dual interior point
//! method whose Newton systems have only `k (k + 1) / 2` unknowns. The gap actually reached is reported in
//! [`Ellipsoid::epsilon`].

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::symmetric_function;
use crate::{Error, Result};

pub const FW_ITERATIONS: usize = 300;
const IPM_STEPS: usize = 200;
const REFRESH_EVERY: usize = 64;

/// Result of [`mvee`]: the ellipsoid `{ z : |shape z| <= 1 }`.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    /// Symmetric positive definite `k x k` matrix.
    pub shape: DMatrix<f64>,
    /// Final optimality gap `max_j omega_j / k - 1`.
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual weights on the input points.
    pub weights: Vec<f64>,
}

/// `k` columns of `z` chosen greedily by largest residual after projecting
/// out the ones already chosen; a well-conditioned start whose support is
/// tiny, so that away steps need not clear mass from every point.
fn spanning_subset(z: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let mut residual = z.clone();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let (j, _) = residual.column_iter().enumerate().fold(
            (0, -1.0),
            |b, (j, c)| if c.norm_squared() > b.1 { (j, c.norm_squared()) } else { b },
        );
        chosen.push(j);
        let q = residual.column(j).normalize();
        let coeff = q.tr_mul(&residual);
        residual.ger(-1.0, &q, &coeff.transpose(), 1.0);
    }
    chosen
}

/// Minimum-volume origin-centred ellipsoid containing `points`, to relative
/// gap `tol`.
pub fn mvee(points: &[DVector<f64>], tol: f64) -> Result<Ellipsoid> {
    mvee_from(points, tol, None)
}

/// [`mvee`] warm-started from dual weights of an earlier solve. Missing
/// trailing weights (points appended since) start at zero.
pub fn mvee_from(points: &[DVector<f64>], tol: f64, start: Option<&[f64]>) -> Result<Ellipsoid> {
    let Some(first) = points.first() else {
        return Err(Error::RankDeficient { rank: 0, dim: 0 });
    };
    let k = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: p.len(),
        });
    }
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    let z = DMatrix::from_columns(points);
    let sv = z.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let rank = sv.iter().filter(|&&s| s > 1e-12 * top && s > 0.0).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, dim: k });
    }

    let count = points.len();
    let kf = k as f64;
    let mut u = vec![0.0; count];
    let warm = start.filter(|w| w.len() <= count && w.iter().all(|v| *v >= 0.0) && w.iter().sum::<f64>() > 0.0);
    let support = match warm {
        Some(w) => w.iter().filter(|v| **v > 0.0).count(),
        None => 0,
    };
    if let Some(w) = warm.filter(|_| support >= k) {
        let total: f64 = w.iter().sum();
        for (uj, wj) in u.iter_mut().zip(w) {
            *uj = wj / total;
        }
    } else {
        for j in spanning_subset(&z, k) {
            u[j] = 1.0 / kf;
        }
    }
    let moment = |u: &[f64]| {
        let mut m = DMatrix::zeros(k, k);
        for (j, &w) in u.iter().enumerate() {
            if w > 0.0 {
                m.ger(w, &z.column(j), &z.column(j), 1.0);
            }
        }
        m
    };
    let mut omega = vec![0.0; count];
    let mut inv = DMatrix::zeros(k, k);
    let mut stale = true;
    let mut iterations = 0;

    while iterations < FW_ITERATIONS {
        if stale || iterations % REFRESH_EVERY == 0 {
            let chol = Cholesky::new(moment(&u)).ok_or(Error::RankDeficient { rank: k - 1, dim: k })?;
            inv = chol.inverse();
            let w = chol.l().solve_lower_triangular(&z).expect("triangular solve");
            for (j, col) in w.column_iter().enumerate() {
                omega[j] = col.norm_squared();
            }
            stale = false;
        }
        let (jp, wp) = omega
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (j, &o)| if o > b.1 { (j, o) } else { b });
        let (jm, wm) = omega
            .iter()
            .enumerate()
            .filter(|(j, _)| u[*j] > 0.0)
            .fold((0, f64::INFINITY), |b, (j, &o)| if o < b.1 { (j, o) } else { b });
        let eps_plus = wp / kf - 1.0;
        let eps_minus = 1.0 - wm / kf;
        if eps_plus <= tol {
            break;
        }
        iterations += 1;

        let (j, tau, drop_step) = if eps_plus >= eps_minus {
            (jp, (wp - kf) / (kf * (wp - 1.0)), false)
        } else {
            let drop = -u[jm] / (1.0 - u[jm]);
            let tau = if wm > 1.0 { (wm - kf) / (kf * (wm - 1.0)) } else { drop };
            if tau <= drop {
                (jm, drop, true)
            } else {
                (jm, tau, false)
            }
        };
        if !tau.is_finite() || tau == 0.0 {
            break;
        }
        for w in u.iter_mut() {
            *w *= 1.0 - tau;
        }
        u[j] += tau;
        if drop_step {
            // exact removal; rounding would leave a ~1e-17 weight that the
            // next away step picks again
            u[j] = 0.0;
        }
        // Sherman-Morrison update of M^{-1} and of all omega_i for
        // M' = (1 - tau) (M + a z_j z_j^T), a = tau / (1 - tau)
        let a = tau / (1.0 - tau);
        let denom = 1.0 + a * omega[j];
        if denom <= 1e-10 {
            stale = true;
            continue;
        }
        let wz = &inv * z.column(j);
        let c = a / denom;
        let scale = 1.0 / (1.0 - tau);
        let cross = z.tr_mul(&wz);
        for (o, x) in omega.iter_mut().zip(cross.iter()) {
            *o = scale * (*o - c * x * x);
        }
        inv.ger(-c, &wz, &wz, 1.0);
        inv *= scale;
    }

    let gap = |u: &[f64]| -> Result<f64> {
        let chol = Cholesky::new(moment(u)).ok_or(Error::RankDeficient { rank: k - 1, dim: k })?;
        let w = chol.l().solve_lower_triangular(&z).expect("triangular solve");
        Ok(w.column_iter().map(|c| c.norm_squared()).fold(0.0f64, f64::max) / kf - 1.0)
    };
    let mut eps_plus = gap(&u)?;
    if eps_plus > tol {
        let (v, steps) = interior_point(&z, &u, tol, &gap)?;
        iterations += steps;
        let e = gap(&v)?;
        if e < eps_plus {
            u = v;
            eps_plus = e;
        }
    }

    // exact certificate for the final weights
    let scale = kf * (1.0 + eps_plus.max(0.0));
    let mut shape = symmetric_function(&(moment(&u) * scale), |l| 1.0 / l.sqrt());
    let reach = z.column_iter().map(|c| (&shape * c).norm()).fold(0.0f64, f64::max);
    if reach > 0.0 {
        shape /= reach;
    }
    Ok(Ellipsoid {
        shape,
        epsilon: eps_plus.max(0.0),
        iterations,
        converged: eps_plus <= tol,
        weights: u,
    })
}

/// Primal-dual interior point method for `min -log det A` subject to
/// `z_j^T A z_j + s_j = 1`, `s >= 0`, with multipliers `lambda`. Stationarity
/// reads `A^{-1} = sum_j lambda_j z_j z_j^T`, so `lambda / k` are dual
/// weights. Slacks and multipliers are iterated directly; recomputing
/// `s = 1 - z^T A z` would lose the tiny slacks of the touching points to
/// cancellation. Starts from the weights `u` of an earlier solve and returns
/// the best weights seen and the Newton step count.
fn interior_point(z: &DMatrix<f64>, u: &[f64], tol: f64, gap: &dyn Fn(&[f64]) -> Result<f64>) -> Result<(Vec<f64>, usize)> {
    let k = z.nrows();
    let kf = k as f64;
    let count = z.ncols();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|p| (p..k).map(move |q| (p, q))).collect();
    let d = pairs.len();
    // phi_j . a = z_j^T A z_j for a = upper triangle of A
    let phi = DMatrix::from_fn(count, d, |j, r| {
        let (p, q) = pairs[r];
        z[(p, j)] * z[(q, j)] * if p == q { 1.0 } else { 2.0 }
    });
    let to_matrix = |a: &DVector<f64>| {
        let mut m = DMatrix::zeros(k, k);
        for (r, &(p, q)) in pairs.iter().enumerate() {
            m[(p, q)] = a[r];
            m[(q, p)] = a[r];
        }
        m
    };
    let units: Vec<DMatrix<f64>> = (0..d)
        .map(|r| to_matrix(&DVector::from_fn(d, |i, _| if i == r { 1.0 } else { 0.0 })))
        .collect();
    let upper = |m: &DMatrix<f64>| DVector::from_fn(d, |r, _| m[(pairs[r].0, pairs[r].1)]);

    let mut moment = DMatrix::zeros(k, k);
    for (j, &w) in u.iter().enumerate() {
        moment.ger(w * kf, &z.column(j), &z.column(j), 1.0);
    }
    let mut a = upper(&moment.try_inverse().ok_or(Error::RankDeficient { rank: k - 1, dim: k })?);
    let reach = (&phi * &a).max();
    a *= (1.0 - 1e-3) / reach;
    let mut s = (&phi * &a).map(|v| 1.0 - v);
    let mut lambda = DVector::from_fn(count, |j, _| kf * u[j] + 1e-3 / s[j]);

    let mut steps = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    while steps < IPM_STEPS {
        let weights: Vec<f64> = (&lambda / lambda.sum()).iter().copied().collect();
        if let Ok(e) = gap(&weights) {
            let done = e <= tol;
            if best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, weights));
            }
            if done {
                break;
            }
        }
        steps += 1;
        let Some(chol) = Cholesky::new(to_matrix(&a)) else { break };
        let inv = chol.inverse();
        let mu = s.dot(&lambda) / count as f64;
        let target = 0.1 * mu;
        // residuals of stationarity, feasibility and complementarity
        let g0 = DVector::from_fn(d, |r, _| inv.component_mul(&units[r]).sum());
        let r_d = -&g0 + phi.tr_mul(&lambda);
        let r_p = &phi * &a + &s - DVector::from_element(count, 1.0);
        let r_c = lambda.component_mul(&s).add_scalar(-target);
        let ratio = lambda.component_div(&s);
        let bu: Vec<DMatrix<f64>> = units.iter().map(|e| &inv * e * &inv).collect();
        let mut h = DMatrix::from_fn(d, d, |r, c| bu[r].component_mul(&units[c]).sum());
        let scaled = DMatrix::from_fn(count, d, |j, r| phi[(j, r)] * ratio[j]);
        h += phi.tr_mul(&scaled);
        let shifted = &r_p - r_c.component_div(&lambda);
        let rhs = -&r_d - phi.tr_mul(&shifted.component_mul(&ratio));
        let Some(hc) = Cholesky::new(h) else { break };
        let da = hc.solve(&rhs);
        let dl = (&phi * &da + &shifted).component_mul(&ratio);
        let ds = -(&r_c + s.component_mul(&dl)).component_div(&lambda);
        // fraction to the boundary, then keep A positive definite
        let mut step = 1.0f64;
        for (v, dv) in s.iter().zip(ds.iter()).chain(lambda.iter().zip(dl.iter())) {
            if *dv < 0.0 {
                step = step.min(-0.99 * v / dv);
            }
        }
        while step > 1e-12 && Cholesky::new(to_matrix(&(&a + &da * step))).is_none() {
            step *= 0.5;
        }
        a += da * step;
        s += ds * step;
        lambda += dl * step;
    }
    Ok((best.map(|b| b.1).unwrap_or_else(|| u.to_vec()), steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn pts(raw: &[&[f64]]) -> Vec<DVector<f64>> {
        raw.iter().map(|p| DVector::from_column_slice(p)).collect()
    }

    /// Smallest-area origin-centred axis-aligned ellipse containing the points,
    /// by brute force over semi-axes. By symmetry of the examples the optimum
    /// is axis aligned.
    fn diagonal_oracle(points: &[DVector<f64>]) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 1..=4000 {
            let a = i as f64 * 1e-3;
            // smallest b such that every point fits for this a
            let mut b: f64 = 0.0;
            let mut feasible = true;
            for p in points {
                let rest = 1.0 - (p[0] / a).powi(2);
                if rest <= 0.0 {
                    if p[0].abs() > a + 1e-12 || p[1] != 0.0 {
                        feasible = false;
                    }
                    continue;
                }
                b = b.max(p[1].abs() / rest.sqrt());
            }
            if feasible && a * b < best.0 {
                best = (a * b, a, b);
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn unit_cross_gives_identity() {
        let p = pts(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let (a, b) = diagonal_oracle(&p);
        assert!((a - 1.0).abs() < 2e-3 && (b - 1.0).abs() < 2e-3);
        let e = mvee(&p, 1e-12).unwrap();
        assert!(max_abs_diff(&e.shape, &DMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn stretched_cross() {
        let p = pts(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 2.0], &[0.0, -2.0]]);
        let (a, b) = diagonal_oracle(&p);
        assert!((a - 1.0).abs() < 2e-3 && (b - 2.0).abs() < 4e-3);
        let e = mvee(&p, 1e-12).unwrap();
        let oracle = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / a, 1.0 / b]));
        assert!(max_abs_diff(&e.shape, &oracle) < 3e-3);
        // frozen from the oracle: semi-axes (1, 2)
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        assert!(max_abs_diff(&e.shape, &expect) < 1e-10);
    }

    #[test]
    fn interval() {
        let e = mvee(&pts(&[&[3.0], &[-3.0]]), 1e-12).unwrap();
        assert!((e.shape[(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_points() {
        let p = pts(&[&[1.0, 1.0], &[-1.0, -1.0], &[2.0, 2.0]]);
        assert!(matches!(mvee(&p, 1e-9), Err(Error::RankDeficient { rank: 1, dim: 2 })));
    }

    #[test]
    fn points_on_an_ellipse_recover_it() {
        // boundary of { z : |G z| <= 1 } sampled densely
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, 0.5]);
        let ginv = g.clone().try_inverse().unwrap();
        let mut p = Vec::new();
        for j in 0..40 {
            let t = std::f64::consts::PI * j as f64 / 40.0;
            let v = &ginv * DVector::from_vec(vec![t.cos(), t.sin()]);
            p.push(-&v);
            p.push(v);
        }
        let e = mvee(&p, 1e-13).unwrap();
        assert!(e.converged);
        assert!(max_abs_diff(&e.shape, &g) < 1e-9, "{}", e.shape);
    }

    #[test]
    fn contains_all_points() {
        let p = pts(&[
            &[1.0, 0.2, 0.0],
            &[0.1, 1.0, 0.3],
            &[0.0, 0.0, 2.0],
            &[0.5, 0.5, 0.5],
            &[-0.3, 0.9, 0.1],
        ]);
        let mut sym = p.clone();
        sym.extend(p.iter().map(|v| -v));
        let e = mvee(&sym, 1e-10).unwrap();
        for z in &sym {
            assert!((&e.shape * z).norm() <= 1.0 + 1e-12);
        }
    }
}
