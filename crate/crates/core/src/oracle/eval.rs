use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::env::{mc_start, mc_step, McOutcome, MountainCarState, MC_STEP_CAP};
use crate::error::{Error, Result};
use crate::harness::output::{fmt_f64, write_atomic};

/// Root-mean-square difference between predictions and true values.
pub fn rmse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::config("rmse of an empty evaluation set"));
    }
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "rmse inputs",
            expected: truth.len(),
            found: predictions.len(),
        });
    }
    let sse: f64 = predictions.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Mountain Car states with their true values under the evaluated policy.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSet {
    pub states: Vec<MountainCarState>,
    pub true_values: Vec<f64>,
}

impl EvalSet {
    pub fn new(states: Vec<MountainCarState>, true_values: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::config("evaluation set is empty"));
        }
        if states.len() != true_values.len() {
            return Err(Error::DimensionMismatch {
                what: "evaluation set",
                expected: states.len(),
                found: true_values.len(),
            });
        }
        if true_values.iter().any(|v| !(v.is_finite() && *v <= 0.0)) {
            return Err(Error::config("evaluation-set true values must be finite and ≤ 0"));
        }
        Ok(EvalSet { states, true_values })
    }

    /// Samples states from the policy's on-policy distribution and computes
    /// their true values by rollout.
    pub fn build<R: Rng + ?Sized>(
        policy: impl Fn(&MountainCarState) -> i8,
        total_steps: u64,
        discard_fraction: f64,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let states = sample_eval_states(&policy, total_steps, discard_fraction, count, rng)?;
        let values = rollout_true_values(&policy, &states)?;
        Self::new(states, values)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn rmse(&self, predict: impl Fn(&MountainCarState) -> f64) -> Result<f64> {
        let predictions: Vec<f64> = self.states.iter().map(predict).collect();
        rmse(&predictions, &self.true_values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut body = String::from("position,velocity,true_value\n");
        for (s, v) in self.states.iter().zip(&self.true_values) {
            body.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(s.position),
                fmt_f64(s.velocity),
                fmt_f64(*v)
            ));
        }
        write_atomic(path, body.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let malformed = |detail: String| Error::MalformedCsv {
            path: path.to_path_buf(),
            detail,
        };
        let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
        let headers = reader.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["position", "velocity", "true_value"] {
            return Err(malformed(format!("unexpected header {headers:?}")));
        }
        let mut states = Vec::new();
        let mut values = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let field = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(format!("row {}: `{}` is not a number", line + 1, &record[i])))
            };
            states.push(MountainCarState::new(field(0)?, field(1)?)?);
            values.push(field(2)?);
        }
        Self::new(states, values)
    }
}

/// Runs `policy` for `total_steps` steps (restarting episodes on
/// termination), keeps the final `1 − discard_fraction` of the visited
/// states, and draws `count` of them uniformly without replacement.
pub fn sample_eval_states<R: Rng + ?Sized>(
    policy: impl Fn(&MountainCarState) -> i8,
    total_steps: u64,
    discard_fraction: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<MountainCarState>> {
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::config(format!("discard_fraction {discard_fraction} not in [0, 1)")));
    }
    let discarded = (total_steps as f64 * discard_fraction).floor() as u64;
    let retained = total_steps - discarded;
    if count == 0 || count as u64 > retained {
        return Err(Error::config(format!(
            "cannot sample {count} evaluation states from {retained} retained steps"
        )));
    }
    let mut picks: Vec<u64> = index::sample(rng, retained as usize, count)
        .into_iter()
        .map(|i| discarded + i as u64)
        .collect();
    picks.sort_unstable();

    let mut chosen = Vec::with_capacity(count);
    let mut next_pick = picks.iter().peekable();
    let mut state = mc_start(rng);
    let mut episode_steps = 0u64;
    for t in 0..total_steps {
        if next_pick.peek() == Some(&&t) {
            chosen.push(state);
            next_pick.next();
            if next_pick.peek().is_none() {
                break;
            }
        }
        episode_steps += 1;
        if episode_steps > MC_STEP_CAP {
            return Err(Error::StepCap(MC_STEP_CAP));
        }
        match mc_step(&state, policy(&state))?.0 {
            McOutcome::Continue(next) => state = next,
            McOutcome::Terminal => {
                state = mc_start(rng);
                episode_steps = 0;
            }
        }
    }
    Ok(chosen)
}

/// Value of each state as minus its number of steps to termination.
pub fn rollout_true_values(
    policy: impl Fn(&MountainCarState) -> i8,
    states: &[MountainCarState],
) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|start| {
            let mut state = *start;
            let mut ret = 0.0;
            for _ in 0..MC_STEP_CAP {
                let (outcome, reward) = mc_step(&state, policy(&state))?;
                ret += reward;
                match outcome {
                    McOutcome::Continue(next) => state = next,
                    McOutcome::Terminal => return Ok(ret),
                }
            }
            Err(Error::StepCap(MC_STEP_CAP))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::energy_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rmse_examples() {
        let t = [1.0, -2.0, 3.0];
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        let shifted: Vec<f64> = t.iter().map(|v| v - 0.75).collect();
        assert!((rmse(&shifted, &t).unwrap() - 0.75).abs() < 1e-15);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn rmse_permutation_invariant() {
        let p = [0.5, 1.5, -2.0, 7.0];
        let t = [0.0, 1.0, 2.0, 3.0];
        let a = rmse(&p, &t).unwrap();
        let b = rmse(&[7.0, -2.0, 0.5, 1.5], &[3.0, 2.0, 0.0, 1.0]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn one_step_from_goal() {
        let s = MountainCarState::new(0.49, 0.07).unwrap();
        assert_eq!(rollout_true_values(energy_policy, &[s]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn rollouts_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states: Vec<_> = (0..20).map(|_| mc_start(&mut rng)).collect();
        let a = rollout_true_values(energy_policy, &states).unwrap();
        let b = rollout_true_values(energy_policy, &states).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| *v < -50.0));
    }

    #[test]
    fn sampling_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_eval_states(energy_policy, 2_000, 0.5, 100, &mut rng).unwrap();
        assert_eq!(s.len(), 100);
        let all = sample_eval_states(energy_policy, 2_000, 0.5, 1_000, &mut rng).unwrap();
        assert_eq!(all.len(), 1_000);
        assert!(sample_eval_states(energy_policy, 2_000, 0.5, 1_001, &mut rng).is_err());
    }

    #[test]
    fn exhaustive_sample_is_the_retained_trajectory() {
        // With count = retained, the sample is every retained visited state,
        // in visiting order, so consecutive entries follow the dynamics.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sample_eval_states(energy_policy, 400, 0.5, 200, &mut rng).unwrap();
        let mut follows = 0;
        for w in s.windows(2) {
            if let (McOutcome::Continue(n), _) = mc_step(&w[0], energy_policy(&w[0])).unwrap() {
                if n == w[1] {
                    follows += 1;
                }
            }
        }
        assert!(follows >= 197, "{follows}");
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = EvalSet::build(energy_policy, 5_000, 0.5, 30, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        set.write_csv(&path).unwrap();
        assert_eq!(EvalSet::read_csv(&path).unwrap(), set);
        std::fs::write(&path, "position,velocity\n0,0\n").unwrap();
        assert!(EvalSet::read_csv(&path).is_err());
    }
}
