//! One function per subcommand. Each returns an [`Outcome`]; failed
//! invariants go to `Outcome::violations`, bad input to `Err`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};
use vecreduce::bilinear::split_two_term;
use vecreduce::bilinear::{
    bootstrap_two_term, BootstrapOptions, EpsSchedule, Pairing, PointwiseProduct, SplitCase, SplitProblem, ValidationPairs,
};
use vecreduce::random::{derive_seed, gaussian_mixture_function, random_measure, rng_for};
use vecreduce::reducing::{reducing_matrix, ReduceOptions};
use vecreduce::spaces::{DiscreteMeasureSpace, Exponent, SpaceDescriptor, VectorFunction};
use vecreduce::spectral::{random_band_limited, FractionalOperator, KatoPonceSetup, PeriodicGrid};
use vecreduce::tensor::{compare_all, iterated_norm, CompareOptions, InjectiveOptions, Order, ProjectiveOptions, TensorPair};

use crate::config::{
    CompareParams, ExampleDimParams, Experiment, ExperimentConfig, HolderParams, KatoPonceParams, ReduceParams, SplitParams, Tolerances,
};
use crate::instances::{random_split_problem, random_tensor};
use crate::output::{cell, envelope, fmt12, num, opt_num, Outcome, Table};
use crate::CliError;

/// Seed of trial `trial` for component count `n`.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    derive_seed(master, ((n as u64) << 32) | trial as u64)
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    match &config.experiment {
        Experiment::ExampleDim(p) => example_dim(p),
        Experiment::VerifyHolder(p) => verify_holder(config, p),
        Experiment::VerifyKatoPonce(p) => verify_kato_ponce(config, p),
        Experiment::CompareNorms(p) => compare_norms(config, p),
        Experiment::Reduce(p) => reduce(config, p),
        Experiment::Split(p) => split(config, p),
    }
}

fn reduce_options(tol: &Tolerances, seed: u64) -> ReduceOptions {
    ReduceOptions {
        tol: tol.mvee,
        seed,
        ..ReduceOptions::default()
    }
}

fn bootstrap_options(tol: &Tolerances, seed: u64) -> BootstrapOptions {
    BootstrapOptions {
        reduce: reduce_options(tol, derive_seed(seed, 1)),
        schedule: EpsSchedule {
            delta_conv: tol.delta_conv,
            ..EpsSchedule::default()
        },
        seed: derive_seed(seed, 2),
    }
}

fn hoelder_related(p: Exponent, q: Exponent, r: Exponent) -> bool {
    (p.reciprocal() + q.reciprocal() - r.reciprocal()).abs() <= 1e-12
}

/// Row of the disjoint-interval example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExampleDimRow {
    pub n: usize,
    pub pairing: f64,
    pub iterated_xy: f64,
    pub iterated_yx: f64,
}

/// `f_i = g_i = 1_{[i-1, i)}` realised as unit atoms: `int f . g = n` while
/// both iterated norms are `n^{1/p}` and `n^{1/q}`.
pub fn example_dim_row(n: usize, p: Exponent, q: Exponent) -> Result<ExampleDimRow, CliError> {
    let measure = DiscreteMeasureSpace::counting(n)?;
    let f = VectorFunction::new(SpaceDescriptor::lattice(p, measure.clone()), DMatrix::identity(n, n))?;
    let g = VectorFunction::new(SpaceDescriptor::lattice(q, measure.clone()), DMatrix::identity(n, n))?;
    let pairing = Pairing::new(measure);
    let mut total = 0.0;
    for i in 0..n {
        let fi: Vec<f64> = f.components().row(i).iter().copied().collect();
        let gi: Vec<f64> = g.components().row(i).iter().copied().collect();
        total += vecreduce::bilinear::BilinearOperator::apply(&pairing, &fi, &gi)?[0];
    }
    let t = TensorPair::new(f, g)?;
    Ok(ExampleDimRow {
        n,
        pairing: total,
        iterated_xy: iterated_norm(&t, Order::XOuter),
        iterated_yx: iterated_norm(&t, Order::YOuter),
    })
}

fn example_dim(params: &ExampleDimParams) -> Result<Outcome, CliError> {
    let (p, q) = (params.p, params.q);
    if (p.reciprocal() + q.reciprocal() - 1.0).abs() > 1e-12 {
        return Err(CliError::Config(format!("example-dim needs 1/p + 1/q = 1, got p = {p}, q = {q}")));
    }
    let mut out = Outcome::new("example-dim");
    let mut table = Table::new(
        "example_dim",
        &["n", "pairing", "iterated_xy", "iterated_yx", "ratio_xy", "ratio_yx"],
    );
    let mut rows = Vec::new();
    for &n in &params.n {
        let r = example_dim_row(n, p, q)?;
        let nf = n as f64;
        let (exy, eyx) = (nf.powf(p.reciprocal()), nf.powf(q.reciprocal()));
        out.check((r.pairing - nf).abs() <= 1e-9, || format!("n = {n}: pairing {} != {n}", r.pairing));
        out.check((r.iterated_xy - exy).abs() <= 1e-9, || {
            format!("n = {n}: iterated X(Y) {} != {exy}", r.iterated_xy)
        });
        out.check((r.iterated_yx - eyx).abs() <= 1e-9, || {
            format!("n = {n}: iterated Y(X) {} != {eyx}", r.iterated_yx)
        });
        table.push(vec![
            n.to_string(),
            fmt12(r.pairing),
            fmt12(r.iterated_xy),
            fmt12(r.iterated_yx),
            fmt12(r.iterated_xy / nf),
            fmt12(r.iterated_yx / nf),
        ]);
        rows.push(json!({
            "n": n,
            "pairing": num(r.pairing),
            "iterated_xy": num(r.iterated_xy),
            "iterated_yx": num(r.iterated_yx),
        }));
    }
    out.summary = json!({"p": p, "q": q, "rows": rows});
    out.tables.push(table);
    Ok(out)
}

/// One vector Hölder trial: both sides through the two-term bootstrap with
/// both terms equal to the scalar bound.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderTrial {
    pub n: usize,
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    /// `||f||_p ||g||_q` computed directly; only for one component.
    pub scalar_rhs: Option<f64>,
    pub reconstruction_error: Option<f64>,
}

pub fn holder_trial(params: &HolderParams, tol: &Tolerances, master: u64, n: usize, trial: usize) -> Result<HolderTrial, CliError> {
    let seed = trial_seed(master, n, trial);
    let mut rng = rng_for(seed, 0);
    let base = random_measure(&mut rng, params.atoms);
    let x = SpaceDescriptor::lattice(params.p, base.clone());
    let y = SpaceDescriptor::lattice(params.q, base.clone());
    let z = SpaceDescriptor::lattice(params.r, base);
    let f = gaussian_mixture_function(&mut rng, &x, n);
    let g = gaussian_mixture_function(&mut rng, &y, n);
    let op = PointwiseProduct::new(z)?;
    // ||fg||_r <= (||f||_p ||g||_q + ||f||_p ||g||_q) / 2
    let rec = bootstrap_two_term(
        &op,
        f.components(),
        g.components(),
        [&x, &x],
        [&y, &y],
        Some(0.5),
        &bootstrap_options(tol, seed),
    )?;
    let scalar_rhs = if n == 1 {
        let fr: Vec<f64> = f.components().row(0).iter().copied().collect();
        let gr: Vec<f64> = g.components().row(0).iter().copied().collect();
        Some(x.norm(&fr)? * y.norm(&gr)?)
    } else {
        None
    };
    Ok(HolderTrial {
        n,
        trial,
        lhs: rec.lhs,
        rhs: rec.scalar_constant * (rec.reducing_products[0] + rec.reducing_products[1]),
        ratio: rec.ratio,
        scalar_rhs,
        reconstruction_error: rec.split.map(|s| s.reconstruction_error),
    })
}

fn verify_holder(config: &ExperimentConfig, params: &HolderParams) -> Result<Outcome, CliError> {
    if !hoelder_related(params.p, params.q, params.r) {
        return Err(CliError::Config(format!(
            "verify-holder needs 1/p + 1/q = 1/r, got {}, {}, {}",
            params.p, params.q, params.r
        )));
    }
    let trials = config.trials();
    let jobs: Vec<(usize, usize)> = params.n.iter().flat_map(|&n| (0..trials).map(move |t| (n, t))).collect();
    let results: Vec<HolderTrial> = jobs
        .par_iter()
        .map(|&(n, t)| holder_trial(params, &config.tolerances, config.seed, n, t))
        .collect::<Result<_, _>>()?;

    let mut out = Outcome::new("verify-holder");
    let mut table = Table::new("verify_holder", &["n", "trial", "lhs", "rhs", "ratio", "reconstruction_error"]);
    let mut per_n = serde_json::Map::new();
    for &n in &params.n {
        let rows: Vec<&HolderTrial> = results.iter().filter(|r| r.n == n).collect();
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
        for r in &rows {
            out.check(r.ratio.is_some_and(f64::is_finite) || r.lhs == 0.0, || {
                format!("n = {n}, trial {}: ratio not finite", r.trial)
            });
            out.check(r.reconstruction_error.is_none_or(|e| e <= 1e-8), || {
                format!("n = {n}, trial {}: split reconstruction too large", r.trial)
            });
            if let Some(scalar) = r.scalar_rhs {
                out.check(
                    (r.rhs - scalar).abs() <= config.tolerances.exact * scalar.max(f64::MIN_POSITIVE),
                    || {
                        format!(
                            "n = 1, trial {}: bootstrap side {} differs from the scalar side {}",
                            r.trial,
                            fmt12(r.rhs),
                            fmt12(scalar)
                        )
                    },
                );
                out.check(r.ratio.is_none_or(|v| v <= 1.0 + config.tolerances.exact), || {
                    format!("n = 1, trial {}: ratio {} exceeds the scalar bound", r.trial, cell(r.ratio))
                });
            }
            table.push(vec![
                n.to_string(),
                r.trial.to_string(),
                fmt12(r.lhs),
                fmt12(r.rhs),
                cell(r.ratio),
                cell(r.reconstruction_error),
            ]);
        }
        per_n.insert(n.to_string(), envelope(&ratios));
    }
    out.summary = json!({"p": params.p, "q": params.q, "r": params.r, "trials": trials, "ratio": per_n});
    out.tables.push(table);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KatoPonceTrial {
    pub n: usize,
    pub trial: usize,
    pub lhs: f64,
    pub rhs_vec: f64,
    pub rhs_scalar: f64,
    pub ratio_vec: Option<f64>,
    pub ratio_scalar: Option<f64>,
    /// `lhs / sum_k |[f]_Xk [g]_Yk|` with the measured scalar constant.
    pub ratio_bootstrap: Option<f64>,
    pub reconstruction_error: Option<f64>,
}

pub fn kato_ponce_trial(
    setup: &KatoPonceSetup,
    grid: &PeriodicGrid,
    params: &KatoPonceParams,
    tol: &Tolerances,
    master: u64,
    n: usize,
    trial: usize,
) -> Result<KatoPonceTrial, CliError> {
    let seed = trial_seed(master, n, trial);
    let f = random_band_limited(grid, params.cutoff, n, derive_seed(seed, 0))?;
    let g = random_band_limited(grid, params.cutoff, n, derive_seed(seed, 1))?;
    let sides = setup.sides(f.components(), g.components())?;
    let (ratio_bootstrap, reconstruction_error) = if params.bootstrap {
        let rec = setup.bootstrap(f.components(), g.components(), &bootstrap_options(tol, seed))?;
        (rec.ratio, rec.split.map(|s| s.reconstruction_error))
    } else {
        (None, None)
    };
    Ok(KatoPonceTrial {
        n,
        trial,
        lhs: sides.lhs,
        rhs_vec: sides.rhs_vec,
        rhs_scalar: sides.rhs_scalar,
        ratio_vec: sides.ratio_vec,
        ratio_scalar: sides.ratio_scalar,
        ratio_bootstrap,
        reconstruction_error,
    })
}

fn verify_kato_ponce(config: &ExperimentConfig, params: &KatoPonceParams) -> Result<Outcome, CliError> {
    let grid = PeriodicGrid::from_spec(params.grid)?;
    let op = FractionalOperator::new(params.kind, params.s)?;
    let setup = KatoPonceSetup::new(&grid, &op, &params.exponents)?;
    let trials = config.trials();
    let jobs: Vec<(usize, usize)> = params.n.iter().flat_map(|&n| (0..trials).map(move |t| (n, t))).collect();
    let results: Vec<KatoPonceTrial> = jobs
        .par_iter()
        .map(|&(n, t)| kato_ponce_trial(&setup, &grid, params, &config.tolerances, config.seed, n, t))
        .collect::<Result<_, _>>()?;

    let exact = config.tolerances.exact;
    let mut out = Outcome::new("verify-kato-ponce");
    let mut table = Table::new(
        "verify_kato_ponce",
        &[
            "n",
            "trial",
            "lhs",
            "rhs_vec",
            "rhs_scalar",
            "ratio_vec",
            "ratio_scalar",
            "ratio_bootstrap",
            "reconstruction_error",
        ],
    );
    let mut per_n = serde_json::Map::new();
    for &n in &params.n {
        let rows: Vec<&KatoPonceTrial> = results.iter().filter(|r| r.n == n).collect();
        for r in &rows {
            out.check(r.rhs_vec <= r.rhs_scalar * (1.0 + exact), || {
                format!("n = {n}, trial {}: vector side exceeds scalar side", r.trial)
            });
            out.check(r.reconstruction_error.is_none_or(|e| e <= 1e-8), || {
                format!("n = {n}, trial {}: split reconstruction too large", r.trial)
            });
            out.check(r.ratio_vec.is_none_or(f64::is_finite), || {
                format!("n = {n}, trial {}: ratio not finite", r.trial)
            });
            if n == 1 {
                let same = match (r.ratio_vec, r.ratio_scalar) {
                    (Some(a), Some(b)) => (a - b).abs() <= exact * b.abs().max(1.0),
                    (a, b) => a == b,
                };
                out.check(same, || format!("n = 1, trial {}: vector and scalar ratios differ", r.trial));
                out.check(r.ratio_bootstrap.is_none_or(|v| v <= 1.0 + exact), || {
                    format!(
                        "n = 1, trial {}: bootstrap ratio {} exceeds the scalar bound",
                        r.trial,
                        cell(r.ratio_bootstrap)
                    )
                });
            }
            table.push(vec![
                n.to_string(),
                r.trial.to_string(),
                fmt12(r.lhs),
                fmt12(r.rhs_vec),
                fmt12(r.rhs_scalar),
                cell(r.ratio_vec),
                cell(r.ratio_scalar),
                cell(r.ratio_bootstrap),
                cell(r.reconstruction_error),
            ]);
        }
        let pick = |f: fn(&KatoPonceTrial) -> Option<f64>| rows.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
        per_n.insert(
            n.to_string(),
            json!({
                "ratio_vec": envelope(&pick(|r| r.ratio_vec)),
                "ratio_scalar": envelope(&pick(|r| r.ratio_scalar)),
                "ratio_bootstrap": envelope(&pick(|r| r.ratio_bootstrap)),
            }),
        );
    }
    out.summary = json!({
        "grid": params.grid,
        "kind": params.kind,
        "s": num(params.s),
        "exponents": params.exponents,
        "trials": trials,
        "ratios": per_n,
    });
    out.tables.push(table);
    Ok(out)
}

fn compare_norms(config: &ExperimentConfig, params: &CompareParams) -> Result<Outcome, CliError> {
    let trials = config.trials();
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(config.seed, params.n, t);
            let pair = random_tensor(params.p, params.q, params.n, params.atoms_x, params.atoms_y, seed);
            let opts = CompareOptions {
                injective: InjectiveOptions {
                    seed: derive_seed(seed, 1),
                    ..InjectiveOptions::default()
                },
                projective: ProjectiveOptions {
                    seed: derive_seed(seed, 2),
                    reduce: reduce_options(&config.tolerances, derive_seed(seed, 3)),
                    ..ProjectiveOptions::default()
                },
            };
            compare_all(&pair, &opts)
        })
        .collect::<Result<_, _>>()?;

    let mut out = Outcome::new("compare-norms");
    let mut table = Table::new(
        "compare_norms",
        &[
            "trial",
            "iterated_xy",
            "iterated_yx",
            "injective",
            "n_projective",
            "reducing_product",
            "reducing_product_reversed",
            "iterated_xy_to_reducing",
            "iterated_yx_to_reducing",
            "projective_to_reducing",
            "injective_to_projective",
        ],
    );
    for (t, c) in results.iter().enumerate() {
        out.check(
            (c.reducing_product - c.reducing_product_reversed).abs() <= 1e-12 * c.reducing_product.max(1e-300),
            || format!("trial {t}: |AB| and |BA| differ"),
        );
        if let Some(inj) = c.injective {
            out.check(inj <= c.n_projective * (1.0 + config.tolerances.estimate), || {
                format!("trial {t}: injective exceeds projective")
            });
        }
        table.push(vec![
            t.to_string(),
            fmt12(c.iterated_xy),
            fmt12(c.iterated_yx),
            cell(c.injective),
            fmt12(c.n_projective),
            fmt12(c.reducing_product),
            fmt12(c.reducing_product_reversed),
            cell(c.ratios.iterated_xy_to_reducing),
            cell(c.ratios.iterated_yx_to_reducing),
            cell(c.ratios.projective_to_reducing),
            cell(c.ratios.injective_to_projective),
        ]);
    }
    let gather = |f: fn(&vecreduce::tensor::NormRatios) -> Option<f64>| -> Value {
        envelope(&results.iter().filter_map(|c| f(&c.ratios)).collect::<Vec<f64>>())
    };
    out.summary = json!({
        "n": params.n,
        "p": params.p,
        "q": params.q,
        "atoms_x": params.atoms_x,
        "atoms_y": params.atoms_y,
        "trials": trials,
        "iterated_xy_to_reducing": gather(|r| r.iterated_xy_to_reducing),
        "iterated_yx_to_reducing": gather(|r| r.iterated_yx_to_reducing),
        "projective_to_reducing": gather(|r| r.projective_to_reducing),
        "injective_to_reducing": gather(|r| r.injective_to_reducing),
        "injective_to_projective": gather(|r| r.injective_to_projective),
    });
    out.tables.push(table);
    Ok(out)
}

fn read_input(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn reduce(config: &ExperimentConfig, params: &ReduceParams) -> Result<Outcome, CliError> {
    let x = match &params.input {
        Some(path) => VectorFunction::from_json(&read_input(path)?)?,
        None => {
            let mut rng = rng_for(config.seed, 0);
            let space = SpaceDescriptor::lattice(params.p, random_measure(&mut rng, params.atoms));
            gaussian_mixture_function(&mut rng, &space, params.n)
        }
    };
    let mut opts = reduce_options(&config.tolerances, derive_seed(config.seed, 1));
    opts.directions = params.directions;
    let a = reducing_matrix(&x, &opts)?;
    let mut out = Outcome::new("reduce");
    let n = x.len();
    let p = x.space().exponent();
    if p.value() >= 1.0 {
        out.check(a.distortion() <= (n as f64).sqrt() * 1.01, || {
            format!("distortion {} exceeds sqrt(n) * 1.01", fmt12(a.distortion()))
        });
    }
    out.check(a.distortion().is_finite(), || "distortion not finite".into());
    out.summary = json!({
        "n": n,
        "p": p,
        "atoms": x.space().atoms(),
        "c_low": num(a.c_low()),
        "c_high": num(a.c_high()),
        "distortion": num(a.distortion()),
        "kernel_dim": a.kernel_basis().len(),
        "directions": a.n_directions(),
    });
    let mut table = Table::new("reducing_matrix", &["row", "col", "value"]);
    for i in 0..n {
        for j in 0..n {
            table.push(vec![i.to_string(), j.to_string(), fmt12(a.matrix()[(i, j)])]);
        }
    }
    out.tables.push(table);
    out.files.push(("vector_function.json".into(), x.to_json()?));
    out.files.push(("reducing_matrix.json".into(), a.to_json()?));
    Ok(out)
}

fn split(config: &ExperimentConfig, params: &SplitParams) -> Result<Outcome, CliError> {
    let problem = match &params.input {
        Some(path) => SplitProblem::from_json(&read_input(path)?)?,
        None => random_split_problem(params.instance, params.m, params.n, config.seed),
    };
    let (m, n) = (problem.table.m(), problem.table.n());
    let schedule = EpsSchedule {
        delta_conv: config.tolerances.delta_conv,
        ..EpsSchedule::default()
    };
    let pairs = ValidationPairs::for_dims(m, n, derive_seed(config.seed, 1));
    let r = split_two_term(&problem.table, &problem.bound, &schedule, &pairs)?;
    let mut out = Outcome::new("split");
    out.check(r.reconstruction_error <= 1e-8, || {
        format!("reconstruction error {} above 1e-8", fmt12(r.reconstruction_error))
    });
    out.check(r.c0.is_finite() && r.c1.is_finite(), || "split constants not finite".into());
    if r.case == SplitCase::Canonical && problem.table.target().dim() == 1 {
        let cap = ((m * n) as f64).sqrt() * (1.0 + config.tolerances.estimate);
        out.check(r.c0 <= cap && r.c1 <= cap, || {
            format!("canonical constants {} {} above sqrt(mn)", fmt12(r.c0), fmt12(r.c1))
        });
    }
    out.summary = json!({
        "m": m,
        "n": n,
        "case": r.case,
        "c0": num(r.c0),
        "c1": num(r.c1),
        "reconstruction_error": num(r.reconstruction_error),
        "kernel_leak": num(r.kernel_leak),
        "eps_levels": r.eps_trace.len(),
        "last_eps_change": opt_num(r.eps_changes.last().copied()),
    });
    for (name, t) in [("tau0", &r.tau0), ("tau1", &r.tau1)] {
        let mut table = Table::new(name, &["i", "j", "coordinate", "value"]);
        for i in 0..m {
            for j in 0..n {
                for (z, v) in t.entry(i, j).iter().enumerate() {
                    table.push(vec![i.to_string(), j.to_string(), z.to_string(), fmt12(*v)]);
                }
            }
        }
        out.tables.push(table);
    }
    out.files.push(("problem.json".into(), problem.to_json()?));
    out.files
        .push(("split.json".into(), serde_json::to_string(&r).map_err(vecreduce::Error::from)?));
    Ok(out)
}
