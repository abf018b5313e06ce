//! Single-run experiments: spiral and two-state trajectories, and the chain
//! runs compared against their exact fixed points.

use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig};
use super::output::{csv_document, fmt_f64, write_atomic};
use super::runner::{run_chain_cell, Cell, Runner};
use crate::env::{chain_true_values, ChainMRP};
use crate::error::{Error, Result};
use crate::oracle::{chain_fixed_point, rmse};
use crate::td::Method;

/// One logged point of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub method: Method,
    pub step: u64,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub rows: Vec<TrajectoryRow>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn first(&self) -> &TrajectoryRow {
        &self.rows[0]
    }

    pub fn last(&self) -> &TrajectoryRow {
        self.rows.last().expect("trajectories start with the initial row")
    }
}

/// Runs every configured method once (first λ, first α, trial 0).
pub fn trajectories(config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    if config.experiment.episodic() {
        return Err(Error::config(format!(
            "{} has no step trajectory",
            config.experiment
        )));
    }
    let runner = Runner::new(config.clone())?;
    let log_every = config.log_every;
    config
        .methods
        .par_iter()
        .map(|&method| {
            let cell = Cell {
                method,
                lambda_index: 0,
                alpha_index: 0,
                trial: 0,
            };
            let mut rows = Vec::new();
            let diverged = runner.run_cell(&cell, &mut |s| {
                rows.push(TrajectoryRow {
                    method,
                    step: (s.index * log_every).min(config.steps),
                    weights: s.weights.to_vec(),
                    values: s.values.to_vec(),
                    diverged: s.diverged,
                })
            })?;
            Ok(Trajectory {
                method,
                rows,
                diverged,
            })
        })
        .collect()
}

fn trajectory_csv(trajs: &[Trajectory], weight_cols: &[&str], value_cols: &[&str]) -> String {
    let header = ["method", "step"]
        .iter()
        .chain(weight_cols)
        .chain(value_cols)
        .chain(&["diverged"])
        .copied()
        .collect::<Vec<_>>()
        .join(",");
    let rows = trajs.iter().flat_map(|t| &t.rows).map(|r| {
        let mut fields = vec![r.method.to_string(), r.step.to_string()];
        fields.extend(r.weights.iter().chain(&r.values).map(|x| fmt_f64(*x)));
        fields.push(r.diverged.to_string());
        fields.join(",")
    });
    csv_document(&header, rows)
}

fn expect(config: &ExperimentConfig, experiment: Experiment) -> Result<()> {
    if config.experiment == experiment {
        Ok(())
    } else {
        Err(Error::config(format!(
            "expected a {experiment} config, got {}",
            config.experiment
        )))
    }
}

/// Writes `spiral.csv` with columns method, step, w, v1, v2, v3, diverged.
pub fn run_spiral(config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    expect(config, Experiment::Spiral)?;
    let trajs = trajectories(config)?;
    let body = trajectory_csv(&trajs, &["w"], &["v1", "v2", "v3"]);
    write_atomic(&config.output_dir.join("spiral.csv"), body.as_bytes())?;
    Ok(trajs)
}

/// Writes `yu.csv` with columns method, step, w1, w2, v1, v2, diverged.
pub fn run_yu(config: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    expect(config, Experiment::Yu)?;
    let trajs = trajectories(config)?;
    let body = trajectory_csv(&trajs, &["w1", "w2"], &["v1", "v2"]);
    write_atomic(&config.output_dir.join("yu.csv"), body.as_bytes())?;
    Ok(trajs)
}

/// One chain run compared with its exact fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    pub case: u8,
    pub method: Method,
    pub lambda: f64,
    pub weight: f64,
    pub oracle_weight: f64,
    pub episodes: u64,
    pub converged: bool,
    pub diverged: bool,
    /// RMSE of the learned values against the true values.
    pub rmse: f64,
}

pub const CHAIN_HEADER: &str = "case,method,lambda,state,learned_value,true_value";
pub const CHAIN_SUMMARY_HEADER: &str =
    "case,method,lambda,weight,oracle_weight,episodes,converged,diverged,rmse";

/// Runs every case × method × λ with the first α until the convergence
/// criterion holds or `episodes` is exhausted.
pub fn chain_results(config: &ExperimentConfig) -> Result<Vec<ChainResult>> {
    expect(config, Experiment::Bertsekas)?;
    config.validate()?;
    let alpha = config.alphas[0];
    let mut jobs: Vec<(ChainMRP, Method, f64)> = Vec::new();
    for chain in config.chains()? {
        for &method in &config.methods {
            for &lambda in &config.lambdas {
                jobs.push((chain, method, lambda));
            }
        }
    }
    jobs.par_iter()
        .map(|&(chain, method, lambda)| {
            let end = run_chain_cell(config, &chain, method, lambda, alpha, config.episodes, true, &mut |_| {})?;
            let oracle = chain_fixed_point(&chain, lambda, method)?;
            let learned: Vec<f64> = (1..=chain.n).map(|s| end.weight * s as f64).collect();
            Ok(ChainResult {
                case: chain.reward_case.number(),
                method,
                lambda,
                weight: end.weight,
                oracle_weight: oracle.weights[0],
                episodes: end.episodes,
                converged: end.converged_at.is_some(),
                diverged: end.diverged,
                rmse: if end.diverged { f64::NAN } else { rmse(&learned, &chain_true_values(&chain))? },
            })
        })
        .collect()
}

/// Writes `bertsekas.csv` (learned and true value per state) and
/// `bertsekas_summary.csv` (final weight against the oracle). A run that
/// exhausts its budget is reported, not fatal.
pub fn run_bertsekas(config: &ExperimentConfig) -> Result<Vec<ChainResult>> {
    let results = chain_results(config)?;
    let chains = config.chains()?;
    let mut rows = Vec::new();
    for r in &results {
        let chain = chains
            .iter()
            .find(|c| c.reward_case.number() == r.case)
            .expect("case comes from the config");
        for (i, truth) in chain_true_values(chain).iter().enumerate() {
            let s = i + 1;
            rows.push(format!(
                "{},{},{},{},{},{}",
                r.case,
                r.method,
                fmt_f64(r.lambda),
                s,
                fmt_f64(r.weight * s as f64),
                fmt_f64(*truth)
            ));
        }
    }
    let dir = &config.output_dir;
    write_atomic(&dir.join("bertsekas.csv"), csv_document(CHAIN_HEADER, rows).as_bytes())?;
    let summary = results.iter().map(|r| {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            r.case,
            r.method,
            fmt_f64(r.lambda),
            fmt_f64(r.weight),
            fmt_f64(r.oracle_weight),
            r.episodes,
            r.converged,
            r.diverged,
            if r.rmse.is_nan() { String::new() } else { fmt_f64(r.rmse) }
        )
    });
    write_atomic(
        &dir.join("bertsekas_summary.csv"),
        csv_document(CHAIN_SUMMARY_HEADER, summary).as_bytes(),
    )?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(experiment: Experiment, dir: &std::path::Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(experiment);
        c.output_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn spiral_starts_at_initial_weight() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(Experiment::Spiral, dir.path());
        c.steps = 1_000;
        let t = run_spiral(&c).unwrap();
        assert_eq!(t.len(), 2);
        for tr in &t {
            assert_eq!(tr.first().weights, vec![-10.0]);
            assert_eq!(tr.first().step, 0);
            assert_eq!(tr.last().step, 1_000);
            assert_eq!(tr.rows.len(), 11);
        }
        let csv = std::fs::read_to_string(dir.path().join("spiral.csv")).unwrap();
        assert!(csv.starts_with("method,step,w,v1,v2,v3,diverged\n"));
        assert_eq!(csv.lines().count(), 23);
    }

    #[test]
    fn yu_td_trips_the_flag_with_a_low_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(Experiment::Yu, dir.path());
        c.alphas = vec![1e-3];
        c.steps = 200_000;
        c.log_every = 1_000;
        let t = run_yu(&c).unwrap();
        let td = t.iter().find(|t| t.method == Method::Td).unwrap();
        assert_eq!(td.first().weights, vec![1e4, 1e4]);
        assert!(td.diverged && td.last().diverged);
        let etd = t.iter().find(|t| t.method == Method::Etd).unwrap();
        assert!(!etd.diverged);
    }

    #[test]
    fn chain_runs_report_each_combination() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(Experiment::Bertsekas, dir.path());
        c.alphas = vec![1e-4];
        c.episodes = 300;
        let r = run_bertsekas(&c).unwrap();
        assert_eq!(r.len(), 8);
        let csv = std::fs::read_to_string(dir.path().join("bertsekas.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 8 * 50);
        let td1 = r.iter().find(|x| x.case == 1 && x.method == Method::Td && x.lambda == 1.0).unwrap();
        let etd1 = r.iter().find(|x| x.case == 1 && x.method == Method::Etd && x.lambda == 1.0).unwrap();
        assert_eq!(td1.weight, etd1.weight);
    }

    #[test]
    fn wrong_experiment_is_a_config_error() {
        let c = ExperimentConfig::defaults(Experiment::Yu);
        assert!(run_spiral(&c).unwrap_err().is_config_error());
    }
}
