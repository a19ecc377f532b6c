//! Command execution: dispatch a resolved config, print a digest, and write
//! the JSON/CSV artifacts.

use serde_json::json;

use ustat::constraint::Mode;
use ustat::error::{Error, Result};
use ustat::eval::EvalOptions;
use ustat::moments::{self, MomentOptions, Target};
use ustat::patterns;
use ustat::simulate::{self, RenewalConfig, Side, SimOptions};
use ustat::spectral;
use ustat::model::FiniteDist;
use ustat::Kernel;

use crate::config::{CommandKind, ExperimentConfig, SimulateKind};

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. }
        | Error::DegenerateTarget(_)
        | Error::Overflow
        | Error::NegativeVariance(_)
        | Error::NonpositiveDrift(_)
        | Error::ConditioningImpossible { .. } => 3,
        _ => 2,
    }
}

/// Reals with 17 significant digits; integers exactly.
pub fn fmt17(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

struct Artifacts {
    digest: Vec<String>,
    result: serde_json::Value,
    /// Rows of (group key, statistic name, value).
    csv: Vec<(String, String, String)>,
}

fn moment_options(cfg: &ExperimentConfig) -> MomentOptions {
    let mut o = MomentOptions::default();
    o.seed = cfg.seed;
    if let Some(b) = cfg.budget {
        o.state_budget = b;
    }
    if let Some(t) = cfg.tol {
        o.degeneracy_tolerance = t;
    }
    o
}

fn sim_options(cfg: &ExperimentConfig) -> SimOptions {
    let mut o = SimOptions {
        replicates: cfg.replicates,
        seed: cfg.seed,
        keep_samples: false,
        moments: moment_options(cfg),
        eval: EvalOptions::default(),
    };
    if let Some(b) = cfg.budget {
        o.eval.budget = b;
    }
    o
}

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    let art = match cfg.command {
        CommandKind::Count => run_count(cfg)?,
        CommandKind::Moments => run_moments(cfg)?,
        CommandKind::Degeneracy => run_degeneracy(cfg)?,
        CommandKind::Simulate => run_simulate(cfg)?,
        CommandKind::Renewal => run_renewal(cfg)?,
        CommandKind::Spectral => run_spectral(cfg)?,
    };
    for line in &art.digest {
        println!("{line}");
    }
    if let Some(out) = &cfg.out {
        let write_json = cfg.format.as_deref() != Some("csv");
        let write_csv = cfg.format.as_deref() != Some("json");
        if write_json {
            let doc = json!({ "config": cfg, "result": art.result });
            let path = format!("{out}.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap())
                .map_err(|e| Error::InvalidInput(format!("cannot write {path}: {e}")))?;
        }
        if write_csv {
            let mut csv = String::from("group,statistic,value\n");
            for (g, k, v) in &art.csv {
                csv.push_str(&format!("{g},{k},{v}\n"));
            }
            let path = format!("{out}.csv");
            std::fs::write(&path, csv)
                .map_err(|e| Error::InvalidInput(format!("cannot write {path}: {e}")))?;
        }
    }
    Ok(())
}

fn run_count(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (kernel, constraint, mode, _) = cfg.resolve_statistic()?;
    let xs = cfg.resolve_input(&kernel)?;
    let opts = EvalOptions {
        budget: cfg.budget.unwrap_or(1_000_000_000),
        bigint: true,
    };
    let count = match (&kernel, &xs) {
        (Kernel::Word { word, .. }, ustat::ObsSeq::Symbols { data, .. }) => {
            patterns::count_word_dp(word, &constraint, data, mode)?
        }
        (Kernel::PermPattern { pattern }, _) => {
            patterns::count_perm_pattern(pattern, &constraint, &xs, mode, &opts)?
        }
        _ => {
            let v = match mode {
                Mode::Bounded => ustat::eval::u_stat_constrained(&kernel, &constraint, &xs, &opts)?,
                Mode::Exact => {
                    ustat::eval::u_stat_exactly_constrained(&kernel, &constraint, &xs, &opts)?
                }
            };
            v.to_big().ok_or_else(|| {
                Error::InvalidInput("count requested for a non-integer kernel".into())
            })?
        }
    };
    Ok(Artifacts {
        digest: vec![count.to_string()],
        result: json!({ "n": xs.len(), "count": count.to_string() }),
        csv: vec![(
            xs.len().to_string(),
            "count".to_string(),
            count.to_string(),
        )],
    })
}

fn resolve_for_moments(
    cfg: &ExperimentConfig,
) -> Result<(Kernel, ustat::Constraint, Mode, ustat::SequenceModel)> {
    let (kernel, constraint, mode, fallback) = cfg.resolve_statistic()?;
    let fallback = fallback.or(match kernel.domain() {
        ustat::Domain::RealOrder => Some(ustat::SequenceModel::IidUniform01),
        ustat::Domain::Finite(2) => Some(ustat::SequenceModel::iid_uniform_binary()),
        ustat::Domain::Finite(a) => Some(ustat::SequenceModel::IidFinite {
            dist: FiniteDist::uniform(a),
        }),
    });
    let model = cfg.resolve_model(fallback)?;
    Ok((kernel, constraint, mode, model))
}

fn run_moments(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (kernel, constraint, mode, model) = resolve_for_moments(cfg)?;
    let report = moments::sigma2(
        &kernel,
        Target::Constrained(&constraint, mode),
        &model,
        &moment_options(cfg),
    )?;
    let digest = vec![
        format!("mu                {}", fmt17(report.mu)),
        format!("mu_exact          {}", fmt17(report.mu_exact_constrained.value)),
        format!("mu_constrained    {}", fmt17(report.mu_constrained.value)),
        format!("sigma2            {}", fmt17(report.sigma2)),
        format!("blocks            {}", report.block_count),
        format!("verdict           {:?}", report.verdict),
    ];
    let mut csv = vec![
        ("moments".into(), "mu".into(), fmt17(report.mu)),
        (
            "moments".into(),
            "mu_constrained".into(),
            fmt17(report.mu_constrained.value),
        ),
        ("moments".into(), "sigma2".into(), fmt17(report.sigma2)),
    ];
    for (i, row) in report.b_matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            csv.push(("b_matrix".into(), format!("b_{i}{j}"), fmt17(*v)));
        }
    }
    Ok(Artifacts {
        digest,
        result: serde_json::to_value(&report).unwrap(),
        csv,
    })
}

fn run_degeneracy(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (kernel, constraint, mode, model) = resolve_for_moments(cfg)?;
    let opts = moment_options(cfg);
    let report = moments::sigma2(&kernel, Target::Constrained(&constraint, mode), &model, &opts)?;
    let verdict = moments::degeneracy_test(&report, opts.degeneracy_tolerance);
    let digest = vec![
        format!("verdict           {verdict:?}"),
        format!("max |b_ij|        {}", fmt17(report.b_matrix_max_abs)),
        format!("sigma2            {}", fmt17(report.sigma2)),
    ];
    let mut csv = vec![
        ("degeneracy".into(), "verdict".into(), format!("{verdict:?}")),
        (
            "degeneracy".into(),
            "max_abs_b".into(),
            fmt17(report.b_matrix_max_abs),
        ),
    ];
    for (i, row) in report.b_matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            csv.push(("b_matrix".into(), format!("b_{i}{j}"), fmt17(*v)));
        }
    }
    Ok(Artifacts {
        digest,
        result: json!({ "verdict": verdict, "report": report }),
        csv,
    })
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (kernel, constraint, mode, model) = resolve_for_moments(cfg)?;
    let opt = sim_options(cfg);
    let kind = cfg.simulate_kind.unwrap_or(SimulateKind::Clt);
    match kind {
        SimulateKind::Clt | SimulateKind::Degenerate => {
            let n_grid = cfg
                .n_grid
                .clone()
                .ok_or_else(|| Error::InvalidInput("--n-grid is required".into()))?;
            let summary = match kind {
                SimulateKind::Clt => {
                    simulate::mc_clt(&kernel, &constraint, mode, &model, &n_grid, &opt)?
                }
                _ => simulate::mc_degenerate(
                    &kernel,
                    &constraint,
                    mode,
                    &model,
                    &n_grid,
                    cfg.rescale_exponent,
                    &opt,
                )?,
            };
            let mut digest = vec![format!(
                "sigma2 {}  blocks {}  replicates {}",
                fmt17(summary.sigma2),
                summary.block_count,
                summary.replicates
            )];
            let mut csv = Vec::new();
            for run in &summary.per_n {
                digest.push(format!(
                    "n {:>8}  mean {}  variance {}  d_K {}",
                    run.n,
                    fmt17(run.stats.mean),
                    fmt17(run.stats.variance),
                    run.kolmogorov.map_or("-".into(), fmt17),
                ));
                let g = run.n.to_string();
                csv.push((g.clone(), "mean".into(), fmt17(run.stats.mean)));
                csv.push((g.clone(), "mean_se".into(), fmt17(run.stats.mean_se)));
                csv.push((g.clone(), "variance".into(), fmt17(run.stats.variance)));
                csv.push((g.clone(), "variance_se".into(), fmt17(run.stats.variance_se)));
                csv.push((g.clone(), "moment4".into(), fmt17(run.stats.moment4)));
                if let Some(dk) = run.kolmogorov {
                    csv.push((g.clone(), "kolmogorov".into(), fmt17(dk)));
                }
            }
            Ok(Artifacts {
                digest,
                result: serde_json::to_value(&summary).unwrap(),
                csv,
            })
        }
        SimulateKind::Functional => {
            let n = cfg
                .n
                .ok_or_else(|| Error::InvalidInput("--n is required for functional runs".into()))?;
            let t_grid = cfg
                .t_grid
                .clone()
                .ok_or_else(|| Error::InvalidInput("--t-grid is required".into()))?;
            let summary =
                simulate::functional_paths(&kernel, &constraint, mode, &model, n, &t_grid, &opt)?;
            let mut digest = vec![format!(
                "sigma2 {}  n {}  replicates {}",
                fmt17(summary.sigma2),
                summary.n,
                summary.replicates
            )];
            let mut csv = Vec::new();
            for run in &summary.per_t {
                digest.push(format!(
                    "t {:.4}  variance {}  target {}",
                    run.t,
                    fmt17(run.stats.variance),
                    fmt17(run.target_variance)
                ));
                let g = format!("t={}", run.t);
                csv.push((g.clone(), "variance".into(), fmt17(run.stats.variance)));
                csv.push((g.clone(), "variance_se".into(), fmt17(run.stats.variance_se)));
                csv.push((g.clone(), "target_variance".into(), fmt17(run.target_variance)));
            }
            Ok(Artifacts {
                digest,
                result: serde_json::to_value(&summary).unwrap(),
                csv,
            })
        }
    }
}

fn run_renewal(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (kernel, constraint, mode, model) = resolve_for_moments(cfg)?;
    let x_grid = cfg
        .x_grid
        .clone()
        .ok_or_else(|| Error::InvalidInput("--x-grid is required".into()))?;
    let step = match &cfg.step {
        Some(spec) => spec.build()?.0,
        None => {
            return Err(Error::InvalidInput(
                "a step function is required (--step-letter)".into(),
            ))
        }
    };
    let side = match cfg.side.as_deref() {
        None | Some("minus") => Side::Minus,
        Some("plus") => Side::Plus,
        Some(other) => {
            return Err(Error::InvalidInput(format!("unknown side '{other}'")));
        }
    };
    let rc = RenewalConfig {
        h: step,
        side,
        conditioned: cfg.conditioned,
        margin: None,
    };
    let opt = sim_options(cfg);
    let summary = simulate::mc_renewal(&kernel, &constraint, mode, &model, &rc, &x_grid, &opt)?;
    let mut digest = vec![format!(
        "nu {}  mu_coeff {}  blocks {}",
        fmt17(summary.nu),
        fmt17(summary.mu_coeff),
        summary.block_count
    )];
    let mut csv = Vec::new();
    for run in &summary.per_x {
        digest.push(format!(
            "x {:>8}  mean {}  gamma2 {}  sandwich_violations {}",
            run.x,
            fmt17(run.stats.mean),
            fmt17(run.stats.variance),
            run.sandwich_violations
        ));
        let g = format!("x={}", run.x);
        csv.push((g.clone(), "mean".into(), fmt17(run.stats.mean)));
        csv.push((g.clone(), "mean_se".into(), fmt17(run.stats.mean_se)));
        csv.push((g.clone(), "gamma2".into(), fmt17(run.stats.variance)));
        csv.push((g.clone(), "gamma2_se".into(), fmt17(run.stats.variance_se)));
        csv.push((
            g.clone(),
            "sandwich_violations".into(),
            run.sandwich_violations.to_string(),
        ));
    }
    Ok(Artifacts {
        digest,
        result: serde_json::to_value(&summary).unwrap(),
        csv,
    })
}

fn run_spectral(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let (kernel, _, _, model) = resolve_for_moments(cfg)?;
    let dist = match &model {
        ustat::SequenceModel::IidFinite { dist } => dist.clone(),
        _ => {
            return Err(Error::InvalidInput(
                "spectral diagnostics need an independent finite model".into(),
            ))
        }
    };
    let basis = spectral::FunctionSpaceBasis::new(&dist, kernel.arity())?;
    let tol = cfg.tol.unwrap_or(1e-10);
    let order = basis.degeneracy_order(&kernel, tol)?;
    let norms = basis.level_norms2(&kernel)?;
    let dims: Vec<usize> = (0..=kernel.arity()).map(|k| basis.level_dimension(k)).collect();
    let mut digest = vec![
        format!("degeneracy_order  {order:?}"),
        format!(
            "level_norms2      [{}]",
            norms.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(", ")
        ),
        format!("level_dims        {dims:?}"),
    ];
    let mut csv: Vec<(String, String, String)> = norms
        .iter()
        .enumerate()
        .map(|(k, &v)| ("level_norm2".to_string(), format!("k={k}"), fmt17(v)))
        .collect();
    let mut result = json!({
        "degeneracy_order": order,
        "level_norms2": norms,
        "level_dimensions": dims,
    });
    if let Some(grid) = cfg.grid {
        let count = cfg.eigen_count.unwrap_or(6);
        let eigs = spectral::e4_operator_eigs(grid, count);
        digest.push(format!(
            "eigenvalues       [{}]",
            eigs.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(", ")
        ));
        for (i, &e) in eigs.iter().enumerate() {
            csv.push(("eigenvalue".into(), format!("rank={i}"), fmt17(e)));
        }
        result["eigenvalues"] = serde_json::to_value(&eigs).unwrap();
    }
    if let Some(s) = cfg.mgf_s {
        let check = spectral::e4_limit_mgf_check(
            cfg.replicates,
            cfg.seed,
            cfg.truncation.unwrap_or(200),
            s,
        );
        digest.push(format!(
            "mgf({})           empirical {} analytic {} se {}",
            s,
            fmt17(check.empirical),
            fmt17(check.analytic),
            fmt17(check.se)
        ));
        csv.push(("mgf".into(), "empirical".into(), fmt17(check.empirical)));
        csv.push(("mgf".into(), "analytic".into(), fmt17(check.analytic)));
        result["mgf"] = serde_json::to_value(&check).unwrap();
    }
    Ok(Artifacts {
        digest,
        result,
        csv,
    })
}
