use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etdlab::env::energy_policy;
use etdlab::harness::config::parse_assignment;
use etdlab::harness::output::fmt_f64;
use etdlab::harness::runner::{stream_rng, EVAL_STREAM};
use etdlab::harness::{self, Experiment, ExperimentConfig, PlotSpec, SummaryRecord, WORKERS_ENV};
use etdlab::oracle::{chain_fixed_point, continuing_fixed_point, AveragingOptions, EvalSet, MrpSpec};
use etdlab::td::Method;
use etdlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "etdlab",
    version,
    about = "TD(λ) and Emphatic TD(λ) policy-evaluation experiments",
    after_help = "Worker threads default to the number of cores; set ETD_LAB_WORKERS to override.\n\
                  Exit status: 0 success, 2 configuration error, 3 runtime fault."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-state spiral: TD(0) and ETD(0) weight and value trajectories.
    #[command(after_help = key_help(Experiment::Spiral))]
    Spiral(RunArgs),
    /// 50-state chain: learned values against true values, per case, method and λ.
    #[command(after_help = key_help(Experiment::Bertsekas))]
    Bertsekas(RunArgs),
    /// Two-state counterexample: TD diverges, ETD shrinks towards zero.
    #[command(after_help = key_help(Experiment::Yu))]
    Yu(RunArgs),
    /// Mountain Car prediction sweep over λ, α and trials.
    #[command(name = "mountain-car", after_help = key_help(Experiment::MountainCar))]
    MountainCar(RunArgs),
    /// Parameter sweep for any experiment (AUC summary per method, λ and α).
    #[command(after_help = all_keys_help())]
    Sweep {
        /// spiral, bertsekas, yu or mountain_car; may instead come from the config file.
        #[arg(long)]
        experiment: Option<Experiment>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exact fixed points and stability diagnosis.
    Oracle {
        /// bertsekas, yu or mountain_car
        #[arg(long)]
        experiment: Experiment,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Renders a CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML config file; keys as listed below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (base_seed, default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Methods, comma separated (td, etd).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// λ values, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Step sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    /// Any schema key, e.g. `--set env.gamma=0.8`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Column with symmetric error-bar half-widths.
    #[arg(long)]
    err: Option<String>,
    /// Columns that split rows into series, comma separated.
    #[arg(long, value_delimiter = ',')]
    group_by: Vec<String>,
    #[arg(long, default_value = "")]
    title: String,
    #[arg(long)]
    log_x: bool,
    /// SVG path; defaults to the CSV path with an .svg extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn key_help(e: Experiment) -> String {
    format!("Config keys (file or --set):\n  {}", e.keys().join("\n  "))
}

fn all_keys_help() -> String {
    Experiment::ALL
        .iter()
        .map(|&e| format!("{e}:\n  {}", e.keys().join("\n  ")))
        .collect::<Vec<_>>()
        .join("\n")
}

fn float_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", parts.join(", "))
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut o = Vec::new();
        if let Some(out) = &self.out {
            o.push(("output_dir".into(), toml_string(&out.to_string_lossy())));
        }
        if let Some(seed) = self.seed {
            o.push(("base_seed".into(), seed.to_string()));
        }
        if !self.method.is_empty() {
            let m: Vec<String> = self.method.iter().map(|m| format!("\"{m}\"")).collect();
            o.push(("methods".into(), format!("[{}]", m.join(", "))));
        }
        if !self.lambda.is_empty() {
            o.push(("lambdas".into(), float_list(&self.lambda)));
        }
        if !self.alpha.is_empty() {
            o.push(("alphas".into(), float_list(&self.alpha)));
        }
        if let Some(e) = self.episodes {
            o.push(("episodes".into(), e.to_string()));
        }
        if let Some(t) = self.trials {
            o.push(("trials".into(), t.to_string()));
        }
        for s in &self.set {
            o.push(parse_assignment(s)?);
        }
        Ok(o)
    }

    fn load(&self, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
        ExperimentConfig::load(experiment, self.config.as_deref(), &self.overrides()?)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into())
}

fn print_summaries(summaries: &[SummaryRecord]) {
    for s in summaries {
        println!(
            "{} {} lambda={} alpha={:.6e} auc={} sd={} trials_used={} diverged={}",
            s.experiment,
            s.method,
            s.lambda.map(|l| l.to_string()).unwrap_or_else(|| "state-dependent".into()),
            s.alpha,
            opt(s.auc_mean),
            opt(s.auc_se),
            s.trials_used,
            s.diverged_count
        );
    }
}

fn run_trajectories(config: &ExperimentConfig) -> Result<()> {
    let trajs = match config.experiment {
        Experiment::Spiral => harness::run_spiral(config)?,
        _ => harness::run_yu(config)?,
    };
    for t in &trajs {
        let last = t.last();
        let w: Vec<String> = last.weights.iter().map(|x| format!("{x:.6e}")).collect();
        let v: Vec<String> = last.values.iter().map(|x| format!("{x:.6e}")).collect();
        println!(
            "{} {} step={} w=[{}] v=[{}] diverged={}",
            config.experiment,
            t.method,
            last.step,
            w.join(", "),
            v.join(", "),
            t.diverged
        );
    }
    println!("wrote {}", config.output_dir.join(format!("{}.csv", config.experiment)).display());
    Ok(())
}

fn run_chain(config: &ExperimentConfig) -> Result<()> {
    for r in harness::run_bertsekas(config)? {
        println!(
            "bertsekas case={} {} lambda={} w={:.8} oracle={:.8} episodes={} converged={} diverged={}",
            r.case, r.method, r.lambda, r.weight, r.oracle_weight, r.episodes, r.converged, r.diverged
        );
    }
    println!("wrote {}", config.output_dir.join("bertsekas.csv").display());
    Ok(())
}

fn run_oracle(experiment: Experiment, config: &ExperimentConfig) -> Result<()> {
    match experiment {
        Experiment::Bertsekas => {
            for chain in config.chains()? {
                for &method in &config.methods {
                    for &lambda in &config.lambdas {
                        let fp = chain_fixed_point(&chain, lambda, method)?;
                        println!(
                            "case={} {} lambda={} A={} b={} w*={}",
                            chain.reward_case.number(),
                            method,
                            lambda,
                            fmt_f64(fp.a_matrix[(0, 0)]),
                            fmt_f64(fp.b_vector[0]),
                            fmt_f64(fp.weights[0])
                        );
                    }
                }
            }
        }
        Experiment::Yu => {
            let spec = MrpSpec {
                gamma: vec![config.env.gamma; 2],
                ..MrpSpec::yu()
            };
            let opts = AveragingOptions {
                seed: config.base_seed,
                ..AveragingOptions::default()
            };
            for &method in &config.methods {
                let fp = continuing_fixed_point(&spec, method, &opts)?;
                let eig: Vec<String> = fp
                    .eigenvalues
                    .iter()
                    .map(|(re, im)| format!("{re:.4}{im:+.4}i"))
                    .collect();
                println!(
                    "yu {} stability={:?} eigenvalues(A)=[{}] stationary=[{:.6}, {:.6}] w*={:?} se={:.2e}",
                    method,
                    fp.stability,
                    eig.join(", "),
                    fp.stationary[0],
                    fp.stationary[1],
                    fp.solution.as_ref().map(|s| s.weights.clone()),
                    fp.standard_error
                );
            }
        }
        Experiment::MountainCar => {
            let mut rng = stream_rng(config.base_seed, EVAL_STREAM);
            let eval = EvalSet::build(
                energy_policy,
                config.eval.total_steps,
                config.eval.discard_fraction,
                config.eval.count,
                &mut rng,
            )?;
            let path = config.output_dir.join("eval_set.csv");
            eval.write_csv(&path)?;
            let n = eval.len() as f64;
            let mean = eval.true_values.iter().sum::<f64>() / n;
            let min = eval.true_values.iter().copied().fold(f64::INFINITY, f64::min);
            println!(
                "mountain_car eval states={} mean_true_value={mean:.3} min_true_value={min} wrote {}",
                eval.len(),
                path.display()
            );
        }
        Experiment::Spiral => {
            return Err(Error::Config(
                "oracle supports bertsekas, yu and mountain_car".into(),
            ))
        }
    }
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<()> {
    let spec = PlotSpec {
        x: args.x.clone(),
        y: args.y.clone(),
        err: args.err.clone(),
        group_by: args.group_by.clone(),
        title: args.title.clone(),
        log_x: args.log_x,
    };
    let out = args.out.clone().unwrap_or_else(|| args.csv.with_extension("svg"));
    harness::emit_plot(&args.csv, &spec, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn sweep(config: &ExperimentConfig) -> Result<()> {
    let result = harness::run_sweep(config)?;
    print_summaries(&result.summaries);
    println!("wrote {}", Path::new(&config.output_dir).join("summary.csv").display());
    Ok(())
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}=`{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Spiral(a) => run_trajectories(&a.load(Some(Experiment::Spiral))?),
        Command::Yu(a) => run_trajectories(&a.load(Some(Experiment::Yu))?),
        Command::Bertsekas(a) => run_chain(&a.load(Some(Experiment::Bertsekas))?),
        Command::MountainCar(a) => sweep(&a.load(Some(Experiment::MountainCar))?),
        Command::Sweep { experiment, run } => sweep(&run.load(experiment)?),
        Command::Oracle { experiment, run } => run_oracle(experiment, &run.load(Some(experiment))?),
        Command::Plot(p) => plot(&p),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = ctrlc::set_handler(|| {
        eprintln!("interrupt received; stopping outstanding cells");
        harness::request_cancel();
    }) {
        eprintln!("warning: cannot install interrupt handler: {e}");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
