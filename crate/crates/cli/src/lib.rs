//! Command-line front end: loads a scenario, runs the requested evaluation
//! and writes CSV tables (or JSON for decisions).
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage, schema
//! and IO errors.

pub mod table;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use borrowkit::decisions::RuleSpec;
use borrowkit::design::{
    evaluate_fixed, sweep_sample_size_weight, sweep_sampling_prior, sweep_weight, SweepRow,
};
use borrowkit::distributions::{EndpointModel, Observation};
use borrowkit::oc::{monte_carlo_power, PowerFunction};
use borrowkit::scenario::{Scenario, BUILTIN_NAMES};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "borrowkit", version, about = "Compromise Bayes/frequentist decisions with historical borrowing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file, or a built-in name (paper-normal, paper-binomial).
    #[arg(long)]
    pub scenario: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply every rule to one observation.
    Decide {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Sample size of the observation.
        #[arg(long)]
        n: u64,
        /// Sample mean (normal) or number of successes (binomial).
        #[arg(long)]
        obs: f64,
        /// Borrowing weight for rules that take one.
        #[arg(long)]
        w: Option<f64>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Operating characteristics of every rule at fixed sample sizes.
    Oc {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Sample size; the scenario's n grid when omitted.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        w: Option<f64>,
        /// Print JSON instead of CSV.
        #[arg(long)]
        json: bool,
        /// Cross-check each level against this many simulated trials.
        #[arg(long, value_name = "REPS")]
        mc_check: Option<u64>,
        /// Seed for the simulation cross-check.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Minimum sample size reaching the target expected power.
    Samplesize {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Single weight; the scenario's w grid when omitted.
        #[arg(long)]
        w: Option<f64>,
    },
    /// Operating characteristics across the weight grid.
    SweepW {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Operating characteristics across the sampling-prior grid.
    SweepSampling {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Write the tables behind one figure, one CSV per panel.
    Reproduce {
        figure: Figure,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    S1,
    S2,
    S3,
}

impl Figure {
    pub fn id(self) -> &'static str {
        match self {
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::S1 => "s1",
            Self::S2 => "s2",
            Self::S3 => "s3",
        }
    }

    fn scenario(self) -> &'static str {
        match self {
            Self::Fig2 | Self::Fig3 | Self::Fig4 => "paper-normal",
            Self::S1 | Self::S2 | Self::S3 => "paper-binomial",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(borrowkit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Compute(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "{m}"),
            Self::Compute(e) => write!(f, "computation failed: {e}"),
        }
    }
}

impl From<borrowkit::Error> for CliError {
    fn from(e: borrowkit::Error) -> Self {
        match e {
            borrowkit::Error::Config(m) => Self::Usage(format!("invalid scenario: {m}")),
            other => Self::Compute(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// Reads a scenario file, falling back to the built-in scenarios by name.
pub fn load_scenario(spec: &str) -> CliResult<Scenario> {
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        return Ok(Scenario::from_json(&text)?);
    }
    match Scenario::builtin(spec) {
        Some(s) => Ok(s?),
        None => Err(CliError::Usage(format!(
            "{spec}: no such file, and not a built-in scenario ({})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn check_weight(w: Option<f64>) -> CliResult<()> {
    match w {
        Some(w) if !(0.0..=1.0).contains(&w) => Err(CliError::Usage(format!("--w must lie in [0,1], got {w}"))),
        _ => Ok(()),
    }
}

fn apply_weight(rules: &[RuleSpec], w: Option<f64>) -> Vec<RuleSpec> {
    rules.iter().map(|r| w.map_or_else(|| r.clone(), |w| r.with_weight(w))).collect()
}

struct Sink<'a> {
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn emit(&mut self, out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
        match out {
            Some(path) => fs::write(path, bytes).map_err(|e| io_error(path, e)),
            None => self.stdout.write_all(bytes).map_err(|e| CliError::Usage(format!("stdout: {e}"))),
        }
    }
}

fn csv_bytes(rows: &[SweepRow]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    table::write_csv(&mut buf, rows).map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    Ok(buf)
}

#[derive(Serialize)]
struct DecisionOut<'a> {
    rule: &'a str,
    reject: bool,
    posterior_prob_null: f64,
    threshold_used: f64,
    weight_used: f64,
}

#[derive(Serialize)]
struct OcOut<'a> {
    rule: &'a str,
    w: Option<f64>,
    n: u64,
    sampling_mean: f64,
    type_one_error: f64,
    expected_power: f64,
    integrated_risk: f64,
    rsl: Option<f64>,
}

fn observation(model: &EndpointModel, obs: f64) -> CliResult<Observation> {
    match model {
        EndpointModel::Normal { .. } => Ok(Observation::SampleMean(obs)),
        EndpointModel::Binomial if obs >= 0.0 && obs.fract() == 0.0 => Ok(Observation::Successes(obs as u64)),
        EndpointModel::Binomial => Err(CliError::Usage(format!("--obs must be a count for the binomial endpoint, got {obs}"))),
    }
}

fn cmd_decide(sink: &mut Sink<'_>, common: &ScenarioArgs, n: u64, obs: f64, w: Option<f64>, json: bool) -> CliResult<()> {
    check_weight(w)?;
    let s = load_scenario(&common.scenario)?;
    let obs = observation(s.model(), obs)?;
    let mut decisions = Vec::new();
    for spec in apply_weight(&s.rules, w) {
        let rule = s.context.instantiate(&spec, n)?;
        decisions.push((spec.label.clone(), rule.decide(&obs)?));
    }
    let text = if json {
        let out: Vec<DecisionOut<'_>> = decisions
            .iter()
            .map(|(rule, d)| DecisionOut {
                rule,
                reject: d.reject,
                posterior_prob_null: d.posterior_prob_null,
                threshold_used: d.threshold_used,
                weight_used: d.weight_used,
            })
            .collect();
        serde_json::to_string_pretty(&out).expect("decisions serialize") + "\n"
    } else {
        let width = decisions.iter().map(|(r, _)| r.len()).max().unwrap_or(4).max(4);
        let mut t = format!("{:<width$}  {:<6}  {:>19}  {:>10}  {:>10}\n", "rule", "reject", "posterior_prob_null", "threshold", "weight");
        for (rule, d) in &decisions {
            t += &format!(
                "{rule:<width$}  {:<6}  {:>19}  {:>10}  {:>10}\n",
                d.reject,
                table::fmt_g(d.posterior_prob_null),
                table::fmt_g(d.threshold_used),
                table::fmt_g(d.weight_used)
            );
        }
        t
    };
    sink.emit(common.out.as_deref(), text.as_bytes())
}

fn restrict_n(s: &mut Scenario, n: Option<u64>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        s.n_grid = vec![n];
    }
    Ok(())
}

struct OcArgs<'a> {
    common: &'a ScenarioArgs,
    n: Option<u64>,
    w: Option<f64>,
    json: bool,
    mc_check: Option<u64>,
    seed: u64,
}

fn cmd_oc(sink: &mut Sink<'_>, stderr: &mut dyn Write, a: OcArgs<'_>) -> CliResult<()> {
    check_weight(a.w)?;
    let mut s = load_scenario(&a.common.scenario)?;
    restrict_n(&mut s, a.n)?;
    s.rules = apply_weight(&s.rules, a.w);
    let rows = evaluate_fixed(&s)?.rows;
    let bytes = if a.json {
        let out: Vec<OcOut<'_>> = rows
            .iter()
            .map(|r| OcOut {
                rule: &r.rule,
                w: r.w,
                n: r.n,
                sampling_mean: r.sampling_mean,
                type_one_error: r.type_one_error,
                expected_power: r.expected_power,
                integrated_risk: r.integrated_risk,
                rsl: r.rsl,
            })
            .collect();
        (serde_json::to_string_pretty(&out).expect("reports serialize") + "\n").into_bytes()
    } else {
        csv_bytes(&rows)?
    };
    sink.emit(a.common.out.as_deref(), &bytes)?;
    if let Some(reps) = a.mc_check {
        if reps == 0 {
            return Err(CliError::Usage("--mc-check needs at least one replicate".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let theta0 = s.hypothesis().theta0();
        for &n in &s.n_grid {
            for spec in &s.rules {
                let rule = s.context.instantiate(spec, n)?;
                let exact = PowerFunction::new(&rule)?.power(theta0)?;
                let (sim, se) = monte_carlo_power(&rule, theta0, reps, &mut rng)?;
                let _ = writeln!(
                    stderr,
                    "mc-check {} n={n}: power at theta0 exact {} simulated {} (se {})",
                    spec.label,
                    table::fmt_g(exact),
                    table::fmt_g(sim),
                    table::fmt_g(se)
                );
            }
        }
    }
    Ok(())
}

fn warn_not_found(stderr: &mut dyn Write, s: &Scenario, rows: &[SweepRow]) {
    for r in rows {
        if let Some(size) = r.min_n {
            if size.n.is_none() {
                let w = r.w.map_or(String::new(), |w| format!(" w={}", table::fmt_g(w)));
                let _ = writeln!(
                    stderr,
                    "warning: {}{w} sampling_mean={} does not reach expected power {} by n_max={} (reaches {})",
                    r.rule,
                    table::fmt_g(r.sampling_mean),
                    table::fmt_g(s.target_expected_power),
                    s.n_max,
                    table::fmt_g(size.expected_power)
                );
            }
        }
    }
}

fn cmd_samplesize(sink: &mut Sink<'_>, stderr: &mut dyn Write, common: &ScenarioArgs, w: Option<f64>) -> CliResult<()> {
    check_weight(w)?;
    let mut s = load_scenario(&common.scenario)?;
    if let Some(w) = w {
        s.w_grid = vec![w];
    }
    let rows = sweep_sample_size_weight(&s)?.rows;
    warn_not_found(stderr, &s, &rows);
    sink.emit(common.out.as_deref(), &csv_bytes(&rows)?)
}

fn cmd_sweep_w(sink: &mut Sink<'_>, common: &ScenarioArgs, n: Option<u64>) -> CliResult<()> {
    let mut s = load_scenario(&common.scenario)?;
    restrict_n(&mut s, n)?;
    let rows = sweep_weight(&s)?.rows;
    sink.emit(common.out.as_deref(), &csv_bytes(&rows)?)
}

fn cmd_sweep_sampling(sink: &mut Sink<'_>, stderr: &mut dyn Write, common: &ScenarioArgs, n: Option<u64>) -> CliResult<()> {
    let mut s = load_scenario(&common.scenario)?;
    restrict_n(&mut s, n)?;
    let sweep = sweep_sampling_prior(&s)?;
    warn_not_found(stderr, &s, &sweep.at_min_n.rows);
    let mut rows = sweep.fixed_n.rows;
    rows.extend(sweep.at_min_n.rows);
    sink.emit(common.out.as_deref(), &csv_bytes(&rows)?)
}

/// Panel tables of one figure as `(file name, rows)`.
pub fn figure_tables(figure: Figure) -> CliResult<Vec<(String, Vec<SweepRow>)>> {
    let s = load_scenario(figure.scenario())?;
    let id = figure.id();
    let per_n = |rows: &[SweepRow], panels: &[&str]| {
        let mut out = Vec::new();
        for &n in &s.n_grid {
            let subset: Vec<SweepRow> = rows.iter().filter(|r| r.n == n).cloned().collect();
            for p in panels {
                out.push((format!("{id}_{p}_n{n}.csv"), subset.clone()));
            }
        }
        out
    };
    Ok(match figure {
        Figure::Fig2 | Figure::S1 => per_n(&sweep_weight(&s)?.rows, &["rsl", "type1", "power"]),
        Figure::Fig4 | Figure::S3 => per_n(&sweep_sampling_prior(&s)?.fixed_n.rows, &["risk", "type1", "power"]),
        Figure::Fig3 | Figure::S2 => {
            let by_w = sweep_sample_size_weight(&s)?.rows;
            let by_sampling = sweep_sampling_prior(&s)?.at_min_n.rows;
            let mut out = Vec::new();
            for p in ["minn_w", "type1_w", "power_w"] {
                out.push((format!("{id}_{p}.csv"), by_w.clone()));
            }
            for p in ["minn_sampling", "type1_sampling", "power_sampling"] {
                out.push((format!("{id}_{p}.csv"), by_sampling.clone()));
            }
            out
        }
    })
}

fn cmd_reproduce(stdout: &mut dyn Write, stderr: &mut dyn Write, figure: Figure, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let tables = figure_tables(figure)?;
    let s = load_scenario(figure.scenario())?;
    for (name, rows) in &tables {
        if name.contains("minn") {
            warn_not_found(stderr, &s, rows);
        }
        let path = dir.join(name);
        fs::write(&path, csv_bytes(rows)?).map_err(|e| io_error(&path, e))?;
        let _ = writeln!(stdout, "{}", path.display());
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    let result = {
        let mut sink = Sink { stdout: &mut *stdout };
        match &cli.command {
            Command::Decide { common, n, obs, w, json } => cmd_decide(&mut sink, common, *n, *obs, *w, *json),
            Command::Oc { common, n, w, json, mc_check, seed } => cmd_oc(
                &mut sink,
                stderr,
                OcArgs { common, n: *n, w: *w, json: *json, mc_check: *mc_check, seed: *seed },
            ),
            Command::Samplesize { common, w } => cmd_samplesize(&mut sink, stderr, common, *w),
            Command::SweepW { common, n } => cmd_sweep_w(&mut sink, common, *n),
            Command::SweepSampling { common, n } => cmd_sweep_sampling(&mut sink, stderr, common, *n),
            Command::Reproduce { figure, out } => cmd_reproduce(sink.stdout, stderr, *figure, out),
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

