//! Learning loops for every experiment, seeded per cell, plus the parallel
//! sweep and its AUC aggregation.
//!
//! # Random streams
//!
//! Cell `(λ index, α index, trial)` draws from ChaCha8 seeded with
//! `base_seed` on stream `(λ index << 48) | (α index << 32) | trial`.
//! The method is deliberately not part of the stream id: TD and ETD cells
//! with matching indices see the same random numbers, so at λ = 1 they
//! produce identical runs. The evaluation set uses stream `u64::MAX`.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig};
use super::output::{csv_document, write_atomic, write_atomic_with, RunRecord, SummaryRecord, RUN_HEADER, SUMMARY_HEADER};
use crate::env::{
    chain_true_values, energy_policy, mc_start, mc_step, spiral_step, two_state_step, ChainMRP,
    McOutcome, TaskDescriptor, MC_STEP_CAP,
};
use crate::error::{Error, Result};
use crate::funcapprox::{chain_feature, yu_feature, SpiralApproximator, TileCodingConfig};
use crate::oracle::{rmse, EvalSet};
use crate::td::{norm, LearnerState, Method, TransitionSample};

static CANCELLED: AtomicBool = AtomicBool::new(false);

/// Asks every running cell to stop at its next measurement point.
pub fn request_cancel() {
    CANCELLED.store(true, Ordering::SeqCst);
}

fn check_cancel() -> Result<()> {
    if CANCELLED.load(Ordering::Relaxed) {
        Err(Error::Interrupted)
    } else {
        Ok(())
    }
}

pub const EVAL_STREAM: u64 = u64::MAX;

pub fn cell_stream(lambda_index: usize, alpha_index: usize, trial: u32) -> u64 {
    ((lambda_index as u64) << 48) | ((alpha_index as u64) << 32) | u64::from(trial)
}

pub fn stream_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

/// One (method, λ, α, trial) combination, addressed by grid indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub lambda_index: usize,
    pub alpha_index: usize,
    pub trial: u32,
}

/// Learner state at a measurement point. Index 0 is the initial state;
/// index `k` follows the `k`-th episode (episodic tasks) or the `k`-th block
/// of `log_every` steps (continuing tasks).
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub index: u64,
    pub weights: &'a [f64],
    pub values: &'a [f64],
    pub measurement: f64,
    pub diverged: bool,
}

/// Prepared inputs shared by every cell of a config.
pub struct Runner {
    pub config: ExperimentConfig,
    task: Task,
}

enum Task {
    Spiral(SpiralApproximator),
    Chain(ChainMRP),
    Yu,
    MountainCar {
        coder: TileCodingConfig,
        eval: EvalSet,
        eval_active: Vec<Vec<usize>>,
    },
}

impl Runner {
    /// Validates the config and prepares shared inputs. For Mountain Car the
    /// evaluation set is read from `eval.path` or sampled on the reserved stream.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let task = match config.experiment {
            Experiment::Spiral => Task::Spiral(config.spiral_approximator()?),
            Experiment::Bertsekas => Task::Chain(config.chains()?[0]),
            Experiment::Yu => Task::Yu,
            Experiment::MountainCar => {
                let eval = match &config.eval.path {
                    Some(p) => EvalSet::read_csv(p)?,
                    None => build_eval_set(&config)?,
                };
                Self::mountain_car(config.tile_coding()?, eval)?
            }
        };
        Ok(Runner { config, task })
    }

    /// Uses the given evaluation set instead of reading or sampling one.
    pub fn with_eval_set(config: ExperimentConfig, eval: EvalSet) -> Result<Self> {
        config.validate()?;
        if config.experiment != Experiment::MountainCar {
            return Err(Error::config("evaluation sets only apply to mountain_car"));
        }
        let task = Self::mountain_car(config.tile_coding()?, eval)?;
        Ok(Runner { config, task })
    }

    fn mountain_car(coder: TileCodingConfig, eval: EvalSet) -> Result<Task> {
        let eval_active = eval
            .states
            .iter()
            .map(|s| coder.active(&s.as_array()))
            .collect::<Result<_>>()?;
        Ok(Task::MountainCar {
            coder,
            eval,
            eval_active,
        })
    }

    pub fn eval_set(&self) -> Option<&EvalSet> {
        match &self.task {
            Task::MountainCar { eval, .. } => Some(eval),
            _ => None,
        }
    }

    /// The chain this runner uses (first entry of `env.cases`).
    pub fn chain(&self) -> Option<&ChainMRP> {
        match &self.task {
            Task::Chain(c) => Some(c),
            _ => None,
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let c = &self.config;
        let mut cells = Vec::new();
        for &method in &c.methods {
            for lambda_index in 0..c.lambdas.len() {
                for alpha_index in 0..c.alphas.len() {
                    for trial in 0..c.trials {
                        cells.push(Cell {
                            method,
                            lambda_index,
                            alpha_index,
                            trial,
                        });
                    }
                }
            }
        }
        cells
    }

    /// λ reported for a cell; `None` where λ is state-dependent.
    pub fn cell_lambda(&self, cell: &Cell) -> Option<f64> {
        match self.config.experiment {
            Experiment::Yu => None,
            _ => Some(self.config.lambdas[cell.lambda_index]),
        }
    }

    /// Runs one cell, reporting every measurement point to `observe`.
    /// Returns whether the run was stopped by the divergence guard.
    pub fn run_cell(&self, cell: &Cell, observe: &mut dyn FnMut(&Snapshot<'_>)) -> Result<bool> {
        let cfg = &self.config;
        let lambda = cfg.lambdas[cell.lambda_index];
        let alpha = cfg.alphas[cell.alpha_index];
        let mut rng = stream_rng(cfg.base_seed, cell_stream(cell.lambda_index, cell.alpha_index, cell.trial));
        match &self.task {
            Task::Spiral(approx) => run_spiral_cell(cfg, approx, cell.method, lambda, alpha, &mut rng, observe),
            Task::Chain(chain) => {
                run_chain_cell(cfg, chain, cell.method, lambda, alpha, cfg.episodes, false, observe)
                    .map(|end| end.diverged)
            }
            Task::Yu => run_yu_cell(cfg, cell.method, alpha, &mut rng, observe),
            Task::MountainCar {
                coder,
                eval,
                eval_active,
            } => run_mc_cell(cfg, coder, eval, eval_active, cell.method, lambda, alpha, &mut rng, observe),
        }
    }

    /// Runs one cell and keeps its per-episode measurements.
    pub fn run_outcome(&self, cell: &Cell) -> Result<RunOutcome> {
        let mut measurements = Vec::new();
        let diverged = self.run_cell(cell, &mut |s| {
            if s.index > 0 && !s.diverged {
                measurements.push(s.measurement);
            }
        })?;
        Ok(RunOutcome {
            cell: *cell,
            measurements,
            diverged,
        })
    }

    pub fn records(&self, outcome: &RunOutcome) -> Vec<RunRecord> {
        let cfg = &self.config;
        let base = RunRecord {
            experiment: cfg.experiment.as_str(),
            method: outcome.cell.method,
            lambda: self.cell_lambda(&outcome.cell),
            alpha: cfg.alphas[outcome.cell.alpha_index],
            trial: outcome.cell.trial,
            episode: 0,
            measurement: None,
            diverged: false,
        };
        let mut out: Vec<RunRecord> = outcome
            .measurements
            .iter()
            .enumerate()
            .map(|(i, &m)| RunRecord {
                episode: i as u64 + 1,
                measurement: Some(m),
                ..base.clone()
            })
            .collect();
        if outcome.diverged {
            out.push(RunRecord {
                episode: outcome.measurements.len() as u64 + 1,
                diverged: true,
                ..base
            });
        }
        out
    }
}

fn build_eval_set(cfg: &ExperimentConfig) -> Result<EvalSet> {
    let mut rng = stream_rng(cfg.base_seed, EVAL_STREAM);
    EvalSet::build(
        energy_policy,
        cfg.eval.total_steps,
        cfg.eval.discard_fraction,
        cfg.eval.count,
        &mut rng,
    )
}

/// Measurements of one finished (or diverged) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub cell: Cell,
    pub measurements: Vec<f64>,
    pub diverged: bool,
}

impl RunOutcome {
    /// Mean of the per-episode measurements.
    pub fn auc(&self) -> Option<f64> {
        if self.diverged || self.measurements.is_empty() {
            None
        } else {
            Some(self.measurements.iter().sum::<f64>() / self.measurements.len() as f64)
        }
    }
}

/// Mean and population standard deviation of per-trial AUCs.
pub fn aggregate_aucs(aucs: &[f64]) -> Option<(f64, f64)> {
    if aucs.is_empty() {
        return None;
    }
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let var = aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub struct SweepResult {
    pub summaries: Vec<SummaryRecord>,
    pub outcomes: Vec<RunOutcome>,
}

impl SweepResult {
    pub fn summary(&self, method: Method, lambda: f64, alpha: f64) -> Option<&SummaryRecord> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.lambda == Some(lambda) && s.alpha == alpha)
    }

    /// The cell with the lowest AUC mean for this method and λ.
    pub fn best(&self, method: Method, lambda: f64) -> Option<&SummaryRecord> {
        self.summaries
            .iter()
            .filter(|s| s.method == method && s.lambda == Some(lambda) && s.auc_mean.is_some())
            .min_by(|a, b| a.auc_mean.partial_cmp(&b.auc_mean).expect("finite AUC"))
    }
}

/// Runs every cell in parallel and aggregates AUCs per (method, λ, α).
pub fn sweep(runner: &Runner) -> Result<SweepResult> {
    let cells = runner.cells();
    let outcomes = cells
        .par_iter()
        .map(|c| runner.run_outcome(c))
        .collect::<Result<Vec<_>>>()?;
    let cfg = &runner.config;
    let mut summaries = Vec::new();
    for group in outcomes.chunks(cfg.trials as usize) {
        let first = &group[0];
        let aucs: Vec<f64> = group.iter().filter_map(RunOutcome::auc).collect();
        let stats = aggregate_aucs(&aucs);
        summaries.push(SummaryRecord {
            experiment: cfg.experiment.as_str(),
            method: first.cell.method,
            lambda: runner.cell_lambda(&first.cell),
            alpha: cfg.alphas[first.cell.alpha_index],
            auc_mean: stats.map(|s| s.0),
            auc_se: stats.map(|s| s.1),
            trials_used: aucs.len() as u32,
            diverged_count: group.iter().filter(|o| o.diverged).count() as u32,
        });
    }
    Ok(SweepResult { summaries, outcomes })
}

/// [`sweep`] plus `summary.csv`, `runs.csv` (when `write_runs`) and, for
/// Mountain Car with a freshly sampled evaluation set, `eval_set.csv`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let runner = Runner::new(config.clone())?;
    let result = sweep(&runner)?;
    let dir = &config.output_dir;
    if let (Some(eval), None) = (runner.eval_set(), &config.eval.path) {
        eval.write_csv(&dir.join("eval_set.csv"))?;
    }
    write_atomic(
        &dir.join("summary.csv"),
        csv_document(SUMMARY_HEADER, result.summaries.iter().map(SummaryRecord::csv_row)).as_bytes(),
    )?;
    if config.write_runs {
        write_atomic_with(&dir.join("runs.csv"), |w| {
            writeln!(w, "{RUN_HEADER}")?;
            for o in &result.outcomes {
                for r in runner.records(o) {
                    writeln!(w, "{}", r.csv_row())?;
                }
            }
            Ok(())
        })?;
    }
    Ok(result)
}

/// Runs one cell of `config` from scratch and returns its records.
pub fn run_single(
    config: &ExperimentConfig,
    method: Method,
    lambda_index: usize,
    alpha_index: usize,
    trial: u32,
) -> Result<Vec<RunRecord>> {
    if lambda_index >= config.lambdas.len() || alpha_index >= config.alphas.len() || trial >= config.trials {
        return Err(Error::config("cell index outside the configured grid"));
    }
    let runner = Runner::new(config.clone())?;
    let outcome = runner.run_outcome(&Cell {
        method,
        lambda_index,
        alpha_index,
        trial,
    })?;
    Ok(runner.records(&outcome))
}

pub fn output_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn diverged(state: &LearnerState, threshold: f64) -> bool {
    let n = state.weight_norm();
    !(n <= threshold)
}

fn zero_rmse(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

fn run_spiral_cell(
    cfg: &ExperimentConfig,
    approx: &SpiralApproximator,
    method: Method,
    lambda: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    observe: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<bool> {
    let task = TaskDescriptor::spiral(cfg.env.gamma, lambda);
    let mut st = LearnerState::new(cfg.env.w0.clone());
    let mut s: usize = rng.gen_range(1..=3);
    st.begin_episode(task.interest.at(s))?;
    let mut values = approx.value(st.weights[0])?;
    observe(&Snapshot {
        index: 0,
        weights: &st.weights,
        values: &values,
        measurement: zero_rmse(&values),
        diverged: false,
    });
    for t in 1..=cfg.steps {
        let grad = approx.gradient(st.weights[0])?;
        let (next, reward) = spiral_step(s, cfg.env.topology, rng)?;
        let sample = TransitionSample {
            phi_t: &grad[s - 1..s],
            value_t: values[s - 1],
            reward,
            phi_next: &grad[next - 1..next],
            value_next: values[next - 1],
            gamma_t: task.gamma.at(s),
            gamma_next: task.gamma.at(next),
            lambda_t: task.lambda.at(s),
            interest_t: task.interest.at(s),
        };
        st.step(method, &sample, alpha)?;
        s = next;
        let blown = diverged(&st, cfg.divergence_threshold);
        if !blown {
            values = approx.value(st.weights[0])?;
        }
        let blown = blown || values.iter().any(|v| !v.is_finite());
        if blown || t % cfg.log_every == 0 {
            check_cancel()?;
            observe(&Snapshot {
                index: t.div_ceil(cfg.log_every),
                weights: &st.weights,
                values: &values,
                measurement: zero_rmse(&values),
                diverged: blown,
            });
        }
        if blown {
            return Ok(true);
        }
    }
    Ok(false)
}

fn run_yu_cell(
    cfg: &ExperimentConfig,
    method: Method,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    observe: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<bool> {
    let task = TaskDescriptor {
        gamma: crate::env::Schedule::Constant(cfg.env.gamma),
        ..TaskDescriptor::yu()
    };
    let x = [yu_feature(1)?, yu_feature(2)?];
    let mut st = LearnerState::new(cfg.env.w0.clone());
    let mut s: usize = rng.gen_range(1..=2);
    st.begin_episode(task.interest.at(s))?;
    let predict = |w: &[f64]| [x[0][0] * w[0] + x[0][1] * w[1], x[1][0] * w[0] + x[1][1] * w[1]];
    let values = predict(&st.weights);
    observe(&Snapshot {
        index: 0,
        weights: &st.weights,
        values: &values,
        measurement: zero_rmse(&values),
        diverged: false,
    });
    for t in 1..=cfg.steps {
        let (next, reward) = two_state_step(s)?;
        let (phi, phi_next) = (&x[s - 1], &x[next - 1]);
        let sample = TransitionSample {
            phi_t: phi,
            value_t: phi[0] * st.weights[0] + phi[1] * st.weights[1],
            reward,
            phi_next,
            value_next: phi_next[0] * st.weights[0] + phi_next[1] * st.weights[1],
            gamma_t: task.gamma.at(s),
            gamma_next: task.gamma.at(next),
            lambda_t: task.lambda.at(s),
            interest_t: task.interest.at(s),
        };
        st.step(method, &sample, alpha)?;
        s = next;
        let blown = diverged(&st, cfg.divergence_threshold);
        if blown || t % cfg.log_every == 0 {
            check_cancel()?;
            let values = predict(&st.weights);
            observe(&Snapshot {
                index: t.div_ceil(cfg.log_every),
                weights: &st.weights,
                values: &values,
                measurement: zero_rmse(&values),
                diverged: blown,
            });
        }
        if blown {
            return Ok(true);
        }
    }
    Ok(false)
}

/// How a chain run ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainRunEnd {
    pub diverged: bool,
    /// Episode at which the convergence criterion was met.
    pub converged_at: Option<u64>,
    pub episodes: u64,
    pub weight: f64,
}

/// Window over which episode-to-episode weight changes are averaged.
pub const CONVERGENCE_WINDOW: usize = 100;
/// Mean |Δw| over the window below which a chain run counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;

/// Runs chain episodes. With `stop_when_converged`, stops once the mean
/// absolute per-episode weight change over the last 100 episodes is below
/// 1e-8.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_cell(
    cfg: &ExperimentConfig,
    chain: &ChainMRP,
    method: Method,
    lambda: f64,
    alpha: f64,
    max_episodes: u64,
    stop_when_converged: bool,
    observe: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<ChainRunEnd> {
    let task = TaskDescriptor::chain(lambda);
    let truth = chain_true_values(chain);
    let n = chain.n;
    let mut st = LearnerState::new(cfg.env.w0.clone());
    let mut values = vec![0.0; n];
    let fill = |w: f64, values: &mut [f64]| {
        for (i, v) in values.iter_mut().enumerate() {
            *v = w * (i + 1) as f64;
        }
    };
    fill(st.weights[0], &mut values);
    observe(&Snapshot {
        index: 0,
        weights: &st.weights,
        values: &values,
        measurement: rmse(&values, &truth)?,
        diverged: false,
    });
    let mut changes = std::collections::VecDeque::with_capacity(CONVERGENCE_WINDOW);
    let mut change_sum = 0.0;
    let mut converged_at = None;
    let mut episodes = 0;
    for episode in 1..=max_episodes {
        episodes = episode;
        let before = st.weights[0];
        st.begin_episode(task.interest.at(n))?;
        let mut blown = false;
        for s in (1..=n).rev() {
            let next = if s > 1 { Some(s - 1) } else { None };
            let x = [chain_feature(Some(s), n)?];
            let x_next = [chain_feature(next, n)?];
            let w = st.weights[0];
            let sample = TransitionSample {
                phi_t: &x,
                value_t: w * x[0],
                reward: chain.reward(s),
                phi_next: &x_next,
                value_next: w * x_next[0],
                gamma_t: task.gamma.at(s),
                gamma_next: next.map_or(0.0, |t| task.gamma.at(t)),
                lambda_t: task.lambda.at(s),
                interest_t: task.interest.at(s),
            };
            st.step(method, &sample, alpha)?;
            if diverged(&st, cfg.divergence_threshold) {
                blown = true;
                break;
            }
        }
        if episode % 1000 == 0 || blown {
            check_cancel()?;
        }
        fill(st.weights[0], &mut values);
        observe(&Snapshot {
            index: episode,
            weights: &st.weights,
            values: &values,
            measurement: if blown { f64::NAN } else { rmse(&values, &truth)? },
            diverged: blown,
        });
        if blown {
            return Ok(ChainRunEnd {
                diverged: true,
                converged_at: None,
                episodes,
                weight: st.weights[0],
            });
        }
        let change = (st.weights[0] - before).abs();
        changes.push_back(change);
        change_sum += change;
        if changes.len() > CONVERGENCE_WINDOW {
            change_sum -= changes.pop_front().expect("non-empty");
        }
        if converged_at.is_none()
            && changes.len() == CONVERGENCE_WINDOW
            && changes.iter().sum::<f64>() / (CONVERGENCE_WINDOW as f64) < CONVERGENCE_TOL
        {
            converged_at = Some(episode);
            if stop_when_converged {
                break;
            }
        }
    }
    let _ = change_sum;
    Ok(ChainRunEnd {
        diverged: false,
        converged_at,
        episodes,
        weight: st.weights[0],
    })
}

#[allow(clippy::too_many_arguments)]
fn run_mc_cell(
    cfg: &ExperimentConfig,
    coder: &TileCodingConfig,
    eval: &EvalSet,
    eval_active: &[Vec<usize>],
    method: Method,
    lambda: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    observe: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<bool> {
    let task = TaskDescriptor::mountain_car(lambda);
    let step_size = alpha / coder.num_tilings as f64;
    let d = coder.num_features();
    let mut st = LearnerState::zeros(d);
    let mut phi = vec![0.0; d];
    let mut phi_next = vec![0.0; d];
    let mut active = Vec::with_capacity(coder.num_tilings);
    let mut active_next = Vec::with_capacity(coder.num_tilings);
    let mut values = vec![0.0; eval.len()];

    let evaluate = |w: &[f64], values: &mut [f64]| -> Result<f64> {
        for (v, idx) in values.iter_mut().zip(eval_active) {
            *v = idx.iter().map(|&i| w[i]).sum();
        }
        rmse(values, &eval.true_values)
    };
    let m0 = evaluate(&st.weights, &mut values)?;
    observe(&Snapshot {
        index: 0,
        weights: &st.weights,
        values: &values,
        measurement: m0,
        diverged: false,
    });

    for episode in 1..=cfg.episodes {
        check_cancel()?;
        let mut state = mc_start(rng);
        st.begin_episode(task.interest.at(0))?;
        coder.active_into(&state.as_array(), &mut active)?;
        for &i in &active {
            phi[i] = 1.0;
        }
        let mut blown = false;
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps > MC_STEP_CAP {
                return Err(Error::StepCap(MC_STEP_CAP));
            }
            let (outcome, reward) = mc_step(&state, energy_policy(&state))?;
            let value_t: f64 = active.iter().map(|&i| st.weights[i]).sum();
            let (value_next, gamma_next, next_state) = match outcome {
                McOutcome::Continue(n) => {
                    coder.active_into(&n.as_array(), &mut active_next)?;
                    for &i in &active_next {
                        phi_next[i] = 1.0;
                    }
                    let v: f64 = active_next.iter().map(|&i| st.weights[i]).sum();
                    (v, task.gamma.at(0), Some(n))
                }
                McOutcome::Terminal => {
                    active_next.clear();
                    (0.0, 0.0, None)
                }
            };
            let sample = TransitionSample {
                phi_t: &phi,
                value_t,
                reward,
                phi_next: &phi_next,
                value_next,
                gamma_t: task.gamma.at(0),
                gamma_next,
                lambda_t: task.lambda.at(0),
                interest_t: task.interest.at(0),
            };
            st.step(method, &sample, step_size)?;
            for &i in &active {
                phi[i] = 0.0;
            }
            std::mem::swap(&mut phi, &mut phi_next);
            std::mem::swap(&mut active, &mut active_next);
            if !(norm(&st.weights) <= cfg.divergence_threshold) {
                blown = true;
                break;
            }
            match next_state {
                Some(n) => state = n,
                None => break,
            }
        }
        for &i in &active {
            phi[i] = 0.0;
        }
        active.clear();
        let measurement = if blown { f64::NAN } else { evaluate(&st.weights, &mut values)? };
        observe(&Snapshot {
            index: episode,
            weights: &st.weights,
            values: &values,
            measurement,
            diverged: blown,
        });
        if blown {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_aggregation_examples() {
        assert_eq!(aggregate_aucs(&[2.5]), Some((2.5, 0.0)));
        assert_eq!(aggregate_aucs(&[1.0, 3.0]), Some((2.0, 1.0)));
        assert_eq!(aggregate_aucs(&[]), None);
        let a = aggregate_aucs(&[0.3, 1.7, 2.2, 0.9]).unwrap();
        let b = aggregate_aucs(&[2.2, 0.9, 0.3, 1.7]).unwrap();
        assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
    }

    #[test]
    fn constant_series_auc() {
        let o = RunOutcome {
            cell: Cell {
                method: Method::Td,
                lambda_index: 0,
                alpha_index: 0,
                trial: 0,
            },
            measurements: vec![0.7; 25],
            diverged: false,
        };
        assert!((o.auc().unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(RunOutcome { diverged: true, ..o }.auc(), None);
    }

    #[test]
    fn streams_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for l in 0..4 {
            for a in 0..12 {
                for t in 0..30 {
                    assert!(seen.insert(cell_stream(l, a, t)));
                }
            }
        }
        assert!(!seen.contains(&EVAL_STREAM));
        let x: u64 = stream_rng(0, 1).gen();
        let y: u64 = stream_rng(0, 2).gen();
        assert_ne!(x, y);
    }
}
