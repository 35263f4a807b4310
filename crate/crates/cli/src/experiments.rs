//! The experiment runners. Each returns in-memory tables; nothing here
//! touches the filesystem.

use bqstab::bq::GramSystem;
use bqstab::chebyshev::{shifted_pair_det, total_positivity_probe, ProbeLayout, SINGULAR_THRESHOLD};
use bqstab::geometry::{fill_distance, fill_distance_for, separation_radius};
use bqstab::linalg::Matrix;
use bqstab::optimize::optimize_points;
use bqstab::{analyze_weights, BqProblem, Design, Kernel, Measure, OptimizerConfig, Real, Smoothness, F384};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{DesignSource, ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};
use crate::output::{num, opt, Table};

/// Gram systems whose 1-norm condition number exceeds this are flagged as
/// beyond double precision.
pub const ILL_CONDITIONED: f64 = 1e15;

/// Tables produced by one run plus the number of rows that failed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub failed_rows: usize,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Seed of the `run`-th repetition at size `n`. Distinct tasks get distinct
/// streams, and the mapping does not depend on how work is scheduled.
pub fn task_seed(base: u64, n: usize, run: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((n as u64) << 32) ^ run as u64
}

/// Runs a resolved configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.kind()? {
        ExperimentKind::Fig2Optimal2d => fig2(cfg),
        ExperimentKind::Fig3RandomPositivity => fig3(cfg),
        ExperimentKind::Fig4Runge => fig4(cfg),
        ExperimentKind::Fig5MaternRandom => fig5(cfg),
        ExperimentKind::Sec45Singularity => sec45(cfg),
        ExperimentKind::Custom => custom(cfg),
    }
}

fn problem<T: Real>(cfg: &ExperimentConfig) -> Result<BqProblem<T>> {
    let missing = || CliError::Config("kernel and measure must be resolved".into());
    let kernel = Kernel::from_config(cfg.kernel.as_ref().ok_or_else(missing)?)?;
    let measure = Measure::from_config(cfg.measure.as_ref().ok_or_else(missing)?)?;
    Ok(BqProblem::new(kernel, measure)?)
}

fn seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn status(e: &impl std::fmt::Display) -> String {
    // Commas would break the CSV layout.
    e.to_string().replace(',', ";")
}

fn fig2(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = problem::<f64>(cfg)?;
    let jitter = cfg.jitter.unwrap_or(bqstab::bq::OPTIMIZATION_JITTER);
    let opt_cfg =
        OptimizerConfig { restarts: cfg.restarts.unwrap_or(20), jitter, seed: seed(cfg), ..OptimizerConfig::default() };
    let d = p.measure().dim();
    let sizes = cfg.sizes();
    let results: Vec<_> = sizes.par_iter().map(|&n| optimize_points(&p, n, &opt_cfg)).collect();

    let mut summary = Table::new(
        "fig2_summary",
        &[
            "n",
            "weight_sum",
            "weight_sum_jittered",
            "n_positive",
            "n_negative",
            "max_abs_gradient",
            "variance",
            "converged",
            "status",
        ],
    );
    let mut header = vec!["n".to_string(), "index".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.push("weight".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut points = Table::new("fig2_points", &header);
    let mut failed = 0;
    for (&n, res) in sizes.iter().zip(results) {
        let res = match res {
            Ok(r) => r,
            Err(e) => {
                failed += 1;
                let mut row = vec![n.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(status(&e));
                summary.push(row);
                continue;
            }
        };
        let r = analyze_weights(&res.rule.weights);
        let jittered = p.weights(&res.design, jitter).map(|w| w.iter().sum::<f64>()).ok();
        summary.push(vec![
            n.to_string(),
            num(r.weight_sum),
            opt(jittered),
            r.n_positive.to_string(),
            r.n_negative.to_string(),
            num(res.gradient.max_abs),
            num(res.rule.variance),
            res.converged.to_string(),
            "ok".into(),
        ]);
        for (i, (x, w)) in res.design.points().zip(&res.rule.weights).enumerate() {
            let mut row = vec![n.to_string(), i.to_string()];
            row.extend(x.iter().map(|&c| num(c)));
            row.push(num(*w));
            points.push(row);
        }
    }
    Ok(RunOutput { tables: vec![summary, points], failed_rows: failed })
}

fn fig3(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = problem::<f64>(cfg)?;
    let runs = cfg.runs.unwrap_or(50);
    let sizes = cfg.sizes();
    let tasks: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..runs).map(move |r| (n, r))).collect();
    let results: Vec<Result<bqstab::DiagnosticsReport<f64>>> = tasks
        .par_iter()
        .map(|&(n, run)| {
            let x = p.measure().sample(n, task_seed(seed(cfg), n, run))?;
            Ok(analyze_weights(&p.weights(&x, 0.0)?))
        })
        .collect();

    let mut per_run =
        Table::new("fig3_runs", &["n", "run", "n_positive", "n_negative", "n_zero", "proportion_positive", "status"]);
    let mut summary = Table::new("fig3_summary", &["n", "runs", "mean_proportion", "min_proportion", "failed_runs"]);
    let mut failed = 0;
    for (chunk_tasks, chunk) in tasks.chunks(runs).zip(results.chunks(runs)) {
        let n = chunk_tasks[0].0;
        let mut props = Vec::with_capacity(runs);
        for (&(_, run), res) in chunk_tasks.iter().zip(chunk) {
            match res {
                Ok(r) => {
                    props.push(r.proportion_positive());
                    per_run.push(vec![
                        n.to_string(),
                        run.to_string(),
                        r.n_positive.to_string(),
                        r.n_negative.to_string(),
                        r.n_zero.to_string(),
                        num(r.proportion_positive()),
                        "ok".into(),
                    ]);
                }
                Err(e) => {
                    failed += 1;
                    per_run.push(vec![
                        n.to_string(),
                        run.to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        status(e),
                    ]);
                }
            }
        }
        let mean = if props.is_empty() { f64::NAN } else { props.iter().sum::<f64>() / props.len() as f64 };
        let min = props.iter().copied().fold(f64::NAN, f64::min);
        summary.push(vec![
            n.to_string(),
            props.len().to_string(),
            num(mean),
            num(min),
            (runs - props.len()).to_string(),
        ]);
    }
    Ok(RunOutput { tables: vec![summary, per_run], failed_rows: failed })
}

/// `||K||_1 ||K^{-1}||_1` of the unjittered Gram matrix.
pub fn condition_number<T: Real>(kernel: &Kernel<T>, design: &Design<T>) -> Result<T> {
    let system = GramSystem::new(kernel, design, T::zero())?;
    let n = design.len();
    let gram = Matrix::from_fn(n, n, |i, j| kernel.eval(design.point(i), design.point(j)).unwrap_or(T::zero()));
    let col_norm = |cols: &[Vec<T>]| cols.iter().map(|c| c.iter().map(|v| v.abs()).sum::<T>()).fold(T::zero(), T::max);
    let gram_cols: Vec<Vec<T>> = (0..n).map(|j| (0..n).map(|i| gram[(i, j)]).collect()).collect();
    let inverse_cols: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            system.solve(&e)
        })
        .collect();
    Ok(col_norm(&gram_cols) * col_norm(&inverse_cols))
}

/// Stability constant and weight sum for equispaced interior points.
fn equispaced_stability<T: Real>(l: f64, n: usize, measure: &Measure<f64>) -> Result<(T, T, Option<T>)> {
    let m: Measure<T> = Measure::from_config(&measure.to_config())?;
    let kernel = Kernel::gaussian(T::lit(l), 1)?;
    let p = BqProblem::new(kernel.clone(), m.clone())?;
    let x = m.equispaced(n, false)?;
    let r = analyze_weights(&p.weights(&x, T::zero())?);
    let cond = condition_number(&kernel, &x).ok();
    Ok((r.stability_constant, r.weight_sum, cond))
}

fn fig4(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let measure = Measure::<f64>::from_config(cfg.measure.as_ref().expect("resolved measure"))?;
    let ls = cfg.lengthscales.clone().unwrap_or_else(|| vec![0.2, 0.4, 0.8]);
    let tasks: Vec<(f64, usize)> = ls.iter().flat_map(|&l| cfg.sizes().into_iter().map(move |n| (l, n))).collect();
    let rows: Vec<(Vec<String>, bool)> = tasks
        .par_iter()
        .map(|&(l, n)| {
            let wide = equispaced_stability::<F384>(l, n, &measure);
            let double = equispaced_stability::<f64>(l, n, &measure);
            let (lambda, sum, cond, ok) = match &wide {
                Ok((a, s, c)) => (a.as_f64(), s.as_f64(), c.map(|c| c.as_f64()), true),
                Err(_) => (f64::NAN, f64::NAN, None, false),
            };
            let (lambda_f64, sum_f64, f64_status) = match &double {
                Ok((a, s, _)) => (*a, *s, "ok".to_string()),
                Err(e) => (f64::NAN, f64::NAN, status(e)),
            };
            let flag = cond.is_none_or(|c| c > ILL_CONDITIONED);
            let row_status = match &wide {
                Ok(_) => "ok".to_string(),
                Err(e) => status(e),
            };
            (
                vec![
                    num(l),
                    n.to_string(),
                    num(lambda),
                    num(sum),
                    num(lambda_f64),
                    num(sum_f64),
                    opt(cond),
                    flag.to_string(),
                    f64_status,
                    row_status,
                ],
                ok,
            )
        })
        .collect();
    let mut table = Table::new(
        "fig4_stability",
        &[
            "lengthscale",
            "n",
            "lambda",
            "weight_sum",
            "lambda_f64",
            "weight_sum_f64",
            "condition_number",
            "ill_conditioned",
            "f64_status",
            "status",
        ],
    );
    let mut failed = 0;
    for (row, ok) in rows {
        failed += usize::from(!ok);
        table.push(row);
    }
    Ok(RunOutput { tables: vec![table], failed_rows: failed })
}

/// One random design of the stability sweep.
#[derive(Clone, Debug)]
struct RandomRun {
    design: Design<f64>,
    weights: Vec<f64>,
    /// `"f64"`, or `"f384"` when the double-precision factorisation failed.
    precision: &'static str,
}

fn solve_with_fallback(p: &BqProblem<f64>, x: &Design<f64>) -> Result<(Vec<f64>, &'static str)> {
    match p.weights(x, 0.0) {
        Ok(w) => Ok((w, "f64")),
        Err(_) => {
            let wide: BqProblem<F384> =
                BqProblem::new(p.kernel().cast(), Measure::from_config(&p.measure().to_config())?)?;
            let w = wide.weights(&x.cast(), F384::lit(0.0))?;
            Ok((w.into_iter().map(|v| v.as_f64()).collect(), "f384"))
        }
    }
}

fn fig5(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = problem::<f64>(cfg)?;
    let runs = cfg.runs.unwrap_or(100);
    let sizes = cfg.sizes();
    let tasks: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..runs).map(move |r| (n, r))).collect();
    let results: Vec<Result<RandomRun>> = tasks
        .par_iter()
        .map(|&(n, run)| {
            let design = p.measure().sample(n, task_seed(seed(cfg), n, run))?;
            let (weights, precision) = solve_with_fallback(&p, &design)?;
            Ok(RandomRun { design, weights, precision })
        })
        .collect();

    let mut per_run = Table::new(
        "fig5_runs",
        &[
            "n",
            "run",
            "lambda",
            "weight_sum",
            "n_negative",
            "max_abs_weight",
            "fill_distance",
            "separation_radius",
            "mesh_ratio",
            "stability_bound",
            "precision",
            "status",
        ],
    );
    let mut summary =
        Table::new("fig5_summary", &["n", "runs", "mean_lambda", "max_lambda", "max_lambda_run", "failed_runs"]);
    let mut failed = 0;
    let mut worst: Option<(f64, usize, usize, &RandomRun)> = None;
    for (chunk_tasks, chunk) in tasks.chunks(runs).zip(results.chunks(runs)) {
        let n = chunk_tasks[0].0;
        let mut lambdas: Vec<(f64, usize)> = Vec::with_capacity(runs);
        for (&(_, run), res) in chunk_tasks.iter().zip(chunk) {
            let rr = match res {
                Ok(rr) => rr,
                Err(e) => {
                    failed += 1;
                    let mut row = vec![n.to_string(), run.to_string()];
                    row.extend(std::iter::repeat_n(String::new(), 9));
                    row.push(status(e));
                    per_run.push(row);
                    continue;
                }
            };
            let r = analyze_weights(&rr.weights);
            let (h, q) = match &p.measure() {
                Measure::UniformBox(b) => (fill_distance(&rr.design, b, 0).ok(), separation_radius(&rr.design).ok()),
                _ => (None, None),
            };
            let ratio = h.zip(q).map(|(h, q)| h / q);
            let bound = ratio.zip(h).map(|(m, h)| m.powf(1.5) * h.sqrt());
            let max_w = rr.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
            per_run.push(vec![
                n.to_string(),
                run.to_string(),
                num(r.stability_constant),
                num(r.weight_sum),
                r.n_negative.to_string(),
                num(max_w),
                opt(h),
                opt(q),
                opt(ratio),
                opt(bound),
                rr.precision.into(),
                "ok".into(),
            ]);
            lambdas.push((r.stability_constant, run));
            if worst.is_none_or(|(l, ..)| r.stability_constant > l) {
                worst = Some((r.stability_constant, n, run, rr));
            }
        }
        let mean = lambdas.iter().map(|l| l.0).sum::<f64>() / lambdas.len().max(1) as f64;
        let (max, arg) = lambdas
            .iter()
            .fold((f64::NAN, None), |(m, a), &(l, r)| if m.is_nan() || l > m { (l, Some(r)) } else { (m, a) });
        summary.push(vec![
            n.to_string(),
            lambdas.len().to_string(),
            if lambdas.is_empty() { String::new() } else { num(mean) },
            num(max),
            arg.map_or_else(String::new, |r| r.to_string()),
            (runs - lambdas.len()).to_string(),
        ]);
    }
    let mut worst_table = Table::new("fig5_max_run", &["n", "run", "index", "x", "weight"]);
    if let Some((_, n, run, rr)) = worst {
        for (i, (x, w)) in rr.design.points().zip(&rr.weights).enumerate() {
            worst_table.push(vec![n.to_string(), run.to_string(), i.to_string(), num(x[0]), num(*w)]);
        }
    }
    Ok(RunOutput { tables: vec![summary, per_run, worst_table], failed_rows: failed })
}

fn sec45(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let trials = cfg.trials.unwrap_or(100);
    let base = seed(cfg);

    let exponential = Kernel::<f64>::matern(Smoothness::Half, 1.0, 1)?;
    let mut shifted = Table::new("sec45_shifted", &["trial", "x1", "x2", "h", "normalized_det", "singular"]);
    let mut shifted_min = f64::INFINITY;
    let mut shifted_flags = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        rng.set_stream(trial as u64);
        let x1: f64 = rng.random_range(0.0..1.0);
        let x2: f64 = rng.random_range(x1..1.0);
        let h = (x2 - x1) + rng.random_range(0.0..1.0);
        let det = shifted_pair_det(&exponential, x1, x2, h)?;
        let flag = det < SINGULAR_THRESHOLD;
        shifted_min = shifted_min.min(det);
        shifted_flags += usize::from(flag);
        shifted.push(vec![trial.to_string(), num(x1), num(x2), num(h), num(det), flag.to_string()]);
    }

    let constructions: [(&str, Kernel<f64>, usize, ProbeLayout); 5] = [
        ("gaussian_mixed", Kernel::gaussian(1.0, 1)?, 3, ProbeLayout::Mixed { lo: 0.0, hi: 1.0 }),
        ("hardy_mixed", Kernel::hardy(1.0)?, 3, ProbeLayout::Mixed { lo: 0.0, hi: 1.0 }),
        (
            "matern12_separated",
            Kernel::matern(Smoothness::Half, 1.0, 1)?,
            2,
            ProbeLayout::Separated { lo: 0.0, mid: 0.5, hi: 1.0 },
        ),
        (
            "matern32_separated",
            Kernel::matern(Smoothness::ThreeHalves, 0.5, 1)?,
            3,
            ProbeLayout::Separated { lo: 0.0, mid: 0.5, hi: 1.0 },
        ),
        (
            "matern32_separated_pair",
            Kernel::matern(Smoothness::ThreeHalves, 0.5, 1)?,
            2,
            ProbeLayout::Separated { lo: 0.0, mid: 0.5, hi: 1.0 },
        ),
    ];
    let mut probes = Table::new("sec45_probes", &["construction", "trial", "min_normalized_det", "flag"]);
    let mut summary =
        Table::new("sec45_summary", &["construction", "n", "trials", "singular_count", "min_normalized_det"]);
    summary.push(vec![
        "matern12_shifted_pair".into(),
        "2".into(),
        trials.to_string(),
        shifted_flags.to_string(),
        num(shifted_min),
    ]);
    for (name, kernel, n, layout) in constructions {
        let report = total_positivity_probe(&kernel, n, trials, base, layout, 0.0)?;
        for row in &report.rows {
            probes.push(vec![name.into(), row.trial.to_string(), num(row.min_normalized_det), row.flag.to_string()]);
        }
        summary.push(vec![
            name.into(),
            n.to_string(),
            trials.to_string(),
            report.singular_count.to_string(),
            num(report.min_normalized_det),
        ]);
    }
    Ok(RunOutput { tables: vec![summary, shifted, probes], failed_rows: 0 })
}

fn custom(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = problem::<f64>(cfg)?;
    let runs = cfg.runs.unwrap_or(1);
    let jitter = cfg.jitter.unwrap_or(0.0);
    let source = cfg.design.unwrap_or(DesignSource::Random);
    let resolution = cfg.grid_resolution.unwrap_or(101);
    let tasks: Vec<(usize, usize)> = cfg.sizes().iter().flat_map(|&n| (0..runs).map(move |r| (n, r))).collect();
    let rows: Vec<(Vec<String>, bool)> = tasks
        .par_iter()
        .map(|&(n, run)| {
            let design = match source {
                DesignSource::Random => p.measure().sample(n, task_seed(seed(cfg), n, run)),
                DesignSource::Equispaced => p.measure().equispaced(n, false),
            };
            let res = design.and_then(|x| {
                let w = p.weights(&x, jitter)?;
                let h = fill_distance_for(&x, p.measure(), resolution).ok();
                let q = separation_radius(&x).ok();
                Ok((analyze_weights(&w), h, q))
            });
            let mut row = vec![n.to_string(), run.to_string()];
            match res {
                Ok((r, h, q)) => {
                    row.extend([
                        num(r.stability_constant),
                        num(r.weight_sum),
                        num(r.sum_gap),
                        r.n_positive.to_string(),
                        r.n_negative.to_string(),
                        opt(h),
                        opt(q),
                        opt(h.zip(q).map(|(h, q)| h / q)),
                        "ok".into(),
                    ]);
                    (row, true)
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), 8));
                    row.push(status(&e));
                    (row, false)
                }
            }
        })
        .collect();
    let mut table = Table::new(
        "custom_diagnostics",
        &[
            "n",
            "run",
            "lambda",
            "weight_sum",
            "sum_gap",
            "n_positive",
            "n_negative",
            "fill_distance",
            "separation_radius",
            "mesh_ratio",
            "status",
        ],
    );
    let mut failed = 0;
    for (row, ok) in rows {
        failed += usize::from(!ok);
        table.push(row);
    }
    Ok(RunOutput { tables: vec![table], failed_rows: failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolved(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap().resolve(false).unwrap()
    }

    #[test]
    fn task_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for n in 1..50 {
            for r in 0..50 {
                assert!(seen.insert(task_seed(3, n, r)));
            }
        }
    }

    #[test]
    fn condition_number_of_identity_gram() {
        let k = Kernel::gaussian(1e-3, 1).unwrap();
        let x = Design::from_nodes(&[0.0, 1.0, 2.0]).unwrap();
        assert!((condition_number(&k, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_runge_sweep() {
        let out =
            run_experiment(&resolved(r#"{"experiment": "fig4_runge", "lengthscales": [0.8], "n_values": [2, 10]}"#))
                .unwrap();
        let t = out.table("fig4_stability").unwrap();
        let lambda = t.numbers("lambda");
        assert_eq!(lambda.len(), 2);
        assert!((lambda[1] - 12.195_858_621_7).abs() < 1e-6);
        assert_eq!(out.failed_rows, 0);
    }

    #[test]
    fn custom_brownian_rows() {
        let out = run_experiment(&resolved(
            r#"{"experiment": "custom", "kernel": {"family": "brownian", "dim": 1},
                "measure": {"kind": "uniform_box", "dim": 1, "lower": [0.0], "upper": [1.0]},
                "n_values": [3, 5], "runs": 2}"#,
        ))
        .unwrap();
        let t = out.table("custom_diagnostics").unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.numbers("n_negative").iter().all(|&v| v == 0.0));
    }

    #[test]
    fn probes_flag_only_the_degenerate_constructions() {
        let out = run_experiment(&resolved(r#"{"experiment": "sec45_singularity", "trials": 20}"#)).unwrap();
        let s = out.table("sec45_summary").unwrap();
        let counts = s.numbers("singular_count");
        let names: Vec<&str> = s.rows.iter().map(|r| r[0].as_str()).collect();
        let count = |name: &str| counts[names.iter().position(|&n| n == name).unwrap()];
        assert_eq!(count("matern12_shifted_pair"), 20.0);
        assert_eq!(count("matern12_separated"), 20.0);
        assert_eq!(count("matern32_separated"), 20.0);
        assert_eq!(count("matern32_separated_pair"), 0.0);
        assert_eq!(count("gaussian_mixed"), 0.0);
        assert_eq!(count("hardy_mixed"), 0.0);
    }
}
