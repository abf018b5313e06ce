//! Experiment configuration: a TOML document layered over per-experiment
//! defaults, with `key=value` overrides on top. Unknown keys, and keys the
//! selected experiment does not use, are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::env::{ChainMRP, RewardCase, SpiralTopology};
use crate::error::{Error, Result};
use crate::funcapprox::{SpiralApproximator, TileCodingConfig};
use crate::td::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spiral,
    Bertsekas,
    Yu,
    MountainCar,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Spiral,
        Experiment::Bertsekas,
        Experiment::Yu,
        Experiment::MountainCar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Spiral => "spiral",
            Experiment::Bertsekas => "bertsekas",
            Experiment::Yu => "yu",
            Experiment::MountainCar => "mountain_car",
        }
    }

    pub fn episodic(self) -> bool {
        matches!(self, Experiment::Bertsekas | Experiment::MountainCar)
    }

    /// Every key this experiment honors, dotted for nested tables.
    pub fn keys(self) -> &'static [&'static str] {
        const COMMON: [&str; 8] = [
            "experiment",
            "methods",
            "alphas",
            "trials",
            "base_seed",
            "output_dir",
            "divergence_threshold",
            "write_runs",
        ];
        match self {
            Experiment::Spiral => &[
                COMMON[0], COMMON[1], COMMON[2], COMMON[3], COMMON[4], COMMON[5], COMMON[6],
                COMMON[7], "lambdas", "steps", "log_every", "env.gamma", "env.epsilon",
                "env.topology", "env.v_zero", "env.w0",
            ],
            Experiment::Bertsekas => &[
                COMMON[0], COMMON[1], COMMON[2], COMMON[3], COMMON[4], COMMON[5], COMMON[6],
                COMMON[7], "lambdas", "episodes", "env.n", "env.cases", "env.w0",
            ],
            Experiment::Yu => &[
                COMMON[0], COMMON[1], COMMON[2], COMMON[3], COMMON[4], COMMON[5], COMMON[6],
                COMMON[7], "steps", "log_every", "env.gamma", "env.w0",
            ],
            Experiment::MountainCar => &[
                COMMON[0], COMMON[1], COMMON[2], COMMON[3], COMMON[4], COMMON[5], COMMON[6],
                COMMON[7], "lambdas", "episodes", "env.tilings", "env.tiles", "env.bounds",
                "eval.path", "eval.total_steps", "eval.discard_fraction", "eval.count",
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s || e.as_str().replace('_', "-") == s)
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub topology: SpiralTopology,
    pub v_zero: [f64; 3],
    /// Initial weights.
    pub w0: Vec<f64>,
    pub n: usize,
    pub cases: Vec<u8>,
    pub tilings: usize,
    pub tiles: usize,
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalParams {
    /// Existing evaluation-set CSV; sampled and written to the output
    /// directory when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub total_steps: u64,
    pub discard_fraction: f64,
    pub count: usize,
}

/// Full declarative description of a run or sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub methods: Vec<Method>,
    pub lambdas: Vec<f64>,
    /// For Mountain Car each value is divided by the number of tilings.
    pub alphas: Vec<f64>,
    pub trials: u32,
    /// Episodic tasks: episodes per run (for the chain, the convergence budget).
    pub episodes: u64,
    /// Continuing tasks: steps per run.
    pub steps: u64,
    /// Continuing tasks: steps between measurements.
    pub log_every: u64,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub divergence_threshold: f64,
    pub write_runs: bool,
    pub env: EnvParams,
    pub eval: EvalParams,
}

/// Log-spaced so both methods have stable cells: ETD's emphasis grows with
/// episode length, which pushes its usable range about 30× below TD's.
pub const MOUNTAIN_CAR_ALPHAS: [f64; 13] = [
    0.002, 0.003, 0.005, 0.007, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0,
];

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let env = EnvParams {
            gamma: 0.9,
            epsilon: 0.05,
            topology: SpiralTopology::TwoOthers,
            v_zero: [10.0, 10.0, -20.0],
            w0: vec![0.0],
            n: 50,
            cases: vec![1, 2],
            tilings: 8,
            tiles: 8,
            bounds: vec![[-1.2, 0.5], [-0.07, 0.07]],
        };
        let eval = EvalParams {
            path: None,
            total_steps: 200_000,
            discard_fraction: 0.5,
            count: 100,
        };
        let base = ExperimentConfig {
            experiment,
            methods: Method::ALL.to_vec(),
            lambdas: vec![0.0],
            alphas: vec![1e-3],
            trials: 1,
            episodes: 1,
            steps: 1,
            log_every: 1,
            base_seed: 0,
            output_dir: PathBuf::from("out").join(experiment.as_str()),
            divergence_threshold: 1e8,
            write_runs: true,
            env,
            eval,
        };
        match experiment {
            Experiment::Spiral => ExperimentConfig {
                steps: 200_000,
                log_every: 100,
                env: EnvParams {
                    w0: vec![-10.0],
                    ..base.env
                },
                ..base
            },
            Experiment::Bertsekas => ExperimentConfig {
                lambdas: vec![0.0, 1.0],
                alphas: vec![1e-6],
                episodes: 200_000,
                ..base
            },
            Experiment::Yu => ExperimentConfig {
                alphas: vec![1e-6],
                steps: 50_000_000,
                log_every: 50_000,
                divergence_threshold: 1e5,
                env: EnvParams {
                    gamma: 0.95,
                    w0: vec![1e4, 1e4],
                    ..base.env
                },
                ..base
            },
            Experiment::MountainCar => ExperimentConfig {
                lambdas: vec![0.0, 0.4, 0.9],
                alphas: MOUNTAIN_CAR_ALPHAS.to_vec(),
                trials: 10,
                episodes: 2_000,
                ..base
            },
        }
    }

    /// Loads defaults for the experiment, then the optional file, then overrides.
    ///
    /// `experiment` is the subcommand's experiment, if any; a file that names
    /// a different one is rejected.
    pub fn load(
        experiment: Option<Experiment>,
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                text.parse::<Table>()
                    .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        let named = match file.get("experiment") {
            Some(Value::String(s)) => Some(s.parse::<Experiment>()?),
            Some(other) => return Err(Error::config(format!("`experiment` must be a string, got {other}"))),
            None => None,
        };
        let experiment = match (experiment, named) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::config(format!(
                    "config file is for `{b}` but the command runs `{a}`"
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(Error::config("no experiment given (set `experiment` in the config file)"))
            }
        };

        let allowed = experiment.keys();
        let mut keys = Vec::new();
        collect_keys(&file, "", &mut keys);
        for key in keys.iter().map(String::as_str).chain(overrides.iter().map(|(k, _)| k.as_str())) {
            if !allowed.contains(&key) {
                return Err(Error::config(format!(
                    "unknown key `{key}` for experiment `{experiment}` (accepted: {})",
                    allowed.join(", ")
                )));
            }
        }

        let mut merged = Value::try_from(Self::defaults(experiment))
            .map_err(|e| Error::config(e.to_string()))?;
        let root = merged.as_table_mut().expect("config serializes to a table");
        merge(root, file);
        for (key, raw) in overrides {
            set_dotted(root, key, parse_override(raw));
        }
        let cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.methods.is_empty() || self.lambdas.is_empty() || self.alphas.is_empty() {
            return bad("methods, lambdas and alphas must be non-empty".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return bad(format!("lambda {l} not in [0, 1]"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return bad(format!("alpha {a} must be > 0"));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.divergence_threshold > 0.0) {
            return bad("divergence_threshold must be positive".into());
        }
        if self.experiment.episodic() {
            if self.episodes == 0 {
                return bad("episodes must be positive".into());
            }
        } else if self.steps == 0 || self.log_every == 0 {
            return bad("steps and log_every must be positive".into());
        }
        let need_dim = |d: usize| -> Result<()> {
            if self.env.w0.len() == d {
                Ok(())
            } else {
                Err(Error::config(format!("env.w0 must have {d} entries")))
            }
        };
        match self.experiment {
            Experiment::Spiral => {
                need_dim(1)?;
                if !(0.0..=1.0).contains(&self.env.gamma) {
                    return bad(format!("env.gamma {} not in [0, 1]", self.env.gamma));
                }
                self.spiral_approximator()?;
            }
            Experiment::Bertsekas => {
                need_dim(1)?;
                self.chains()?;
            }
            Experiment::Yu => {
                need_dim(2)?;
                if !(0.0..=1.0).contains(&self.env.gamma) {
                    return bad(format!("env.gamma {} not in [0, 1]", self.env.gamma));
                }
            }
            Experiment::MountainCar => {
                self.tile_coding()?;
                if self.eval.count == 0 {
                    return bad("eval.count must be positive".into());
                }
                if !(0.0..1.0).contains(&self.eval.discard_fraction) {
                    return bad("eval.discard_fraction must be in [0, 1)".into());
                }
            }
        }
        Ok(())
    }

    pub fn spiral_approximator(&self) -> Result<SpiralApproximator> {
        SpiralApproximator::new(self.env.epsilon, self.env.v_zero)
    }

    pub fn chains(&self) -> Result<Vec<ChainMRP>> {
        if self.env.cases.is_empty() {
            return Err(Error::config("env.cases must be non-empty"));
        }
        self.env
            .cases
            .iter()
            .map(|&c| ChainMRP::new(self.env.n, RewardCase::from_number(c)?))
            .collect()
    }

    pub fn tile_coding(&self) -> Result<TileCodingConfig> {
        TileCodingConfig::uniform(self.env.tilings, self.env.tiles, &self.env.bounds)
    }
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_override(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn collect_keys(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) if prefix.is_empty() && (k == "env" || k == "eval") => {
                collect_keys(t, &key, out)
            }
            _ => out.push(key),
        }
    }
}

fn merge(dst: &mut Table, src: Table) {
    for (k, v) in src {
        match (dst.get_mut(&k), v) {
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s),
            (_, v) => {
                dst.insert(k, v);
            }
        }
    }
}

fn set_dotted(root: &mut Table, key: &str, value: Value) {
    match key.split_once('.') {
        Some((head, rest)) => {
            let entry = root
                .entry(head.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = entry {
                set_dotted(t, rest, value);
            }
        }
        None => {
            root.insert(key.to_string(), value);
        }
    }
}
