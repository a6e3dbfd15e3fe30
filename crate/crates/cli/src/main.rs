use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hybridsim::cases::{self, CaseId, RateProfile};
use hybridsim::dsl::{self, FsLoader};
use hybridsim::engine::{
    run_replication, write_firings_csv, write_samples_csv, EngineConfig, FIRINGS_HEADER, SAMPLES_HEADER,
};
use hybridsim::kernel::{assemble_system, SystemModel, Value};
use hybridsim::metrics::{self, LanguageProfile};
use hybridsim::montecarlo::{self, ExperimentError, ExperimentSpec};

/// Stochastic hybrid system simulation and model maintainability metrics.
#[derive(Parser)]
#[command(name = "hybridsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replication and write its firings and samples.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Sample grid step; 0 disables sampling.
        #[arg(long, default_value_t = 0.1)]
        grid: f64,
        /// Random stream of the replication.
        #[arg(long, default_value_t = 0)]
        run_index: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run independent replications and write aggregate statistics.
    Experiment {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Sample grid step for trajectory envelopes; 0 disables them.
        #[arg(long, default_value_t = 0.0)]
        grid: f64,
        /// Time fraction of a state predicate, as `name=expr`
        /// (e.g. `nok=active(heater.Function.NOK)`).
        #[arg(long, value_name = "NAME=EXPR")]
        observe: Vec<String>,
        /// Cluster end states on these `instance.Automaton` prefixes only.
        #[arg(long, value_name = "INSTANCE.AUTOMATON")]
        cluster_on: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// LOC, Halstead, cyclomatic complexity and MI per file.
    Metrics {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        profile: ProfileArgs,
        /// Also print one row per unit.
        #[arg(long)]
        units: bool,
    },
    /// Line diff and RLOC between two versions.
    Diff {
        old: PathBuf,
        new: PathBuf,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Comparison tables over the six shipped cases.
    Report {
        /// Directory holding case0.model ... case2a.model.
        #[arg(long, default_value = "cases")]
        cases: PathBuf,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model file.
    model: PathBuf,
    /// Parameter override `instance.param=value`; repeatable.
    #[arg(long = "set", value_name = "INSTANCE.PARAM=VALUE")]
    overrides: Vec<String>,
    /// Heater rates for the shipped cases.
    #[arg(long, value_enum, default_value_t = Rates::Text)]
    rates: Rates,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rates {
    /// Rates written in the model files.
    Text,
    /// Rates behind the published trajectory figures.
    Figure,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Integration step.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

#[derive(Args)]
struct ProfileArgs {
    /// Profile name or path; `HYBRIDSIM_PROFILE_PATH` adds search directories.
    #[arg(long, default_value = "model-dsl")]
    profile: String,
}

/// Errors split by exit code.
enum Failure {
    /// Bad input: unreadable or invalid model, profile or arguments.
    Input(anyhow::Error),
    /// The run itself failed.
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed reader (`| head`) is not a failure.
        Err(Failure::Runtime(e)) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            model,
            run,
            grid,
            run_index,
            out,
        } => {
            let m = load(&model)?;
            let config = engine_config(&run, grid)?;
            let trace = run_replication(&m, &config, run_index).context("simulation failed")?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_file(&out.join("firings.csv"), |w| {
                writeln!(w, "{FIRINGS_HEADER}")?;
                write_firings_csv(w, &m, run_index as usize, &trace)
            })?;
            write_file(&out.join("samples.csv"), |w| {
                writeln!(w, "{SAMPLES_HEADER}")?;
                write_samples_csv(w, run_index as usize, &trace)
            })?;
            println!(
                "{} firings, {} samples, end state {}",
                trace.firings.len(),
                trace.samples.len(),
                trace.end_state_signature.join(" ")
            );
        }
        Command::Experiment {
            model,
            run,
            runs,
            grid,
            observe,
            cluster_on,
            out,
        } => {
            let m = load(&model)?;
            let mut spec = ExperimentSpec::new(runs, engine_config(&run, grid)?);
            for o in &observe {
                let (name, expr) = o
                    .split_once('=')
                    .ok_or_else(|| input(anyhow!("--observe expects NAME=EXPR, got `{o}`")))?;
                let expr = dsl::parse_expr(expr).map_err(|e| input(anyhow!("--observe {name}: {e}")))?;
                spec = spec.observe(name.trim(), expr);
            }
            if !cluster_on.is_empty() {
                spec.cluster_projection = Some(cluster_on);
            }
            let result = montecarlo::run_experiment(&m, &spec).map_err(|e| match e {
                ExperimentError::Replication { .. } => Failure::Runtime(e.into()),
                _ => input(e),
            })?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_file(&out.join("results.csv"), |w| montecarlo::write_results_csv(w, &result))?;
            write_file(&out.join("clusters.csv"), |w| montecarlo::write_clusters_csv(w, &result))?;
            if !result.trajectories.is_empty() {
                write_file(&out.join("trajectories.csv"), |w| {
                    montecarlo::write_trajectories_csv(w, &result)
                })?;
            }
            let stdout = io::stdout();
            let mut w = stdout.lock();
            for (name, e) in &result.observed {
                writeln!(w, "{name}: {:.6} ± {:.6} ({} runs)", e.mean, e.stderr, e.runs)?;
            }
            writeln!(w, "{} end-state clusters", result.clusters.len())?;
        }
        Command::Metrics { files, profile, units } => {
            let p = profile_of(&profile)?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            writeln!(w, "{}", metrics::FILE_METRICS_HEADER)?;
            let mut unit_rows = Vec::new();
            for f in &files {
                let text = read(f)?;
                let m = metrics::measure(&text, &p).map_err(|e| input(anyhow!("{}: {e}", f.display())))?;
                for warning in &m.warnings {
                    eprintln!("warning: {}: {warning}", f.display());
                }
                metrics::write_file_metrics(&mut w, &f.display().to_string(), &m)?;
                for u in m.units {
                    unit_rows.push((f.display().to_string(), u));
                }
            }
            if units {
                writeln!(w)?;
                writeln!(w, "file,unit,loc,cc,volume,mi_raw,mi_normalized")?;
                for (f, u) in unit_rows {
                    writeln!(
                        w,
                        "{f},{},{},{},{:.4},{:.4},{:.2}",
                        u.name, u.loc, u.cc, u.halstead.volume, u.mi_raw, u.mi_normalized
                    )?;
                }
            }
        }
        Command::Diff { old, new, profile } => {
            let p = profile_of(&profile)?;
            let (a, b) = (read(&old)?, read(&new)?);
            let d = metrics::diff_versions(&a, &b, &p);
            let target = metrics::classify_lines(&b, &p).code;
            let ratio = metrics::rloc(&d, target).map_err(input)?;
            println!("same,modified,added,removed,loc_target,rloc_percent");
            println!(
                "{},{},{},{},{},{:.2}",
                d.same, d.modified, d.added, d.removed, target, ratio
            );
        }
        Command::Report { cases, profile, out } => {
            let p = profile_of(&profile)?;
            let sets = metrics::load_case_sets(&cases).map_err(input)?;
            let report = metrics::report_experiment(&sets, &p).map_err(input)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (name, contents) in metrics::report_tables(&report) {
                fs::write(out.join(name), contents).with_context(|| format!("writing {name}"))?;
            }
            for pair in &report.pairs {
                println!("RLOC {} -> {}: {:.2}%", pair.from, pair.to, pair.rloc);
            }
        }
    }
    Ok(())
}

fn engine_config(run: &RunArgs, grid: f64) -> Result<EngineConfig, Failure> {
    let config = EngineConfig::default()
        .with_horizon(run.horizon)
        .with_step(run.step)
        .with_seed(run.seed)
        .with_sample_step((grid > 0.0).then_some(grid));
    config.validate().map_err(input)?;
    Ok(config)
}

fn load(args: &ModelArgs) -> Result<SystemModel, Failure> {
    let path = &args.model;
    if !path.is_file() {
        return Err(input(anyhow!("{}: no such model file", path.display())));
    }
    let files = dsl::file_set(&FsLoader, path).map_err(input)?;
    let mut parts = dsl::elaborate_parts(&files).map_err(input)?;
    if let Rates::Figure = args.rates {
        let case = CaseId::from_str(&path.to_string_lossy())
            .map_err(|_| input(anyhow!("--rates figure applies only to the shipped cases")))?;
        for (h, l, m) in RateProfile::Figure.rates(case) {
            cases::override_argument(&mut parts, h, "lambda", Value::Num(l)).map_err(input)?;
            cases::override_argument(&mut parts, h, "mu", Value::Num(m)).map_err(input)?;
        }
    }
    for o in &args.overrides {
        let (target, value) = o
            .split_once('=')
            .ok_or_else(|| input(anyhow!("--set expects INSTANCE.PARAM=VALUE, got `{o}`")))?;
        let (inst, param) = target
            .split_once('.')
            .ok_or_else(|| input(anyhow!("--set expects INSTANCE.PARAM=VALUE, got `{o}`")))?;
        let value = match value.trim() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            v => Value::Num(v.parse().map_err(|_| input(anyhow!("--set {target}: `{v}` is not a number")))?),
        };
        cases::override_argument(&mut parts, inst.trim(), param.trim(), value).map_err(input)?;
    }
    assemble_system(parts).map_err(|e| input(anyhow!("{}: {e}", path.display())))
}

fn profile_of(args: &ProfileArgs) -> Result<LanguageProfile, Failure> {
    metrics::resolve_profile(&args.profile, &metrics::search_path()).map_err(input)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(anyhow!("{}: {e}", path.display())))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|()| w.flush()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
