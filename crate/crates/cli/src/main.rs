use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bubblelab::innovation_model as inno;
use bubblelab::io::{self, RunConfig};
use bubblelab::sim_engine::{self, run_monte_carlo, McConfig, ModelConfig, SimError};
use bubblelab::toy_model as toy;
use bubblelab::{InnovationError, ToyError, ValidationError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bubblelab", version, about = "Stochastic bubbles under unbalanced growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Land (endowment) economy.
    #[command(subcommand)]
    Toy(ToyCommand),
    /// Variety-expansion economy.
    #[command(subcommand)]
    Innovation(InnovationCommand),
    /// Whether an exponent triple admits balanced growth.
    Uzawa {
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long, allow_negative_numbers = true)]
        psi: f64,
        #[arg(long, allow_negative_numbers = true)]
        rho: f64,
    },
    /// Replicated runs over random collapse dates.
    Montecarlo {
        #[command(flatten)]
        run: RunArgs,
        /// Model to replicate; required when the config has both sections.
        #[arg(long, value_enum)]
        model: Option<ModelChoice>,
        #[arg(long)]
        replications: Option<u64>,
        /// Worker threads (0 = all cores); overrides BUBBLELAB_THREADS.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write each replication's collapse date.
        #[arg(long)]
        dump_replications: bool,
    },
    /// Check every parameter section of a config.
    Validate {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum ToyCommand {
    /// Price path with per-date bubble decomposition.
    Simulate(RunArgs),
    /// Long-run ratios and the bubble conditions.
    Limits(RunArgs),
    /// Fundamental/bubble split along the path and the terminal-term limit.
    Decompose(RunArgs),
}

#[derive(Subcommand)]
enum InnovationCommand {
    /// Equilibrium path along a drawn (or all-unbalanced) regime sequence.
    Simulate(RunArgs),
    /// Balanced-growth-path values.
    Bgp(RunArgs),
    /// Limits of a persistent unbalanced regime.
    Asymptotics(RunArgs),
    /// Compare growth before and after a collapse at date T.
    Collapse {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "T", value_name = "T")]
        collapse: usize,
    },
    /// Post-collapse GDP at a fixed date across collapse dates.
    Prop3 {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "T-list", value_name = "T,...", value_delimiter = ',', required = true)]
        collapse_dates: Vec<usize>,
        #[arg(long, default_value_t = 40)]
        t_star: usize,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory; data, config echo and manifest are written here.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModelChoice {
    Toy,
    Innovation,
}

/// Failure split by exit code: bad input (2) versus a run that went wrong (1).
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        if is_input_error(&e) {
            Failure::Input(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        if cause.is::<ValidationError>() {
            return true;
        }
        if let Some(io_err) = cause.downcast_ref::<io::IoError>() {
            return matches!(
                io_err,
                io::IoError::ReadConfig { .. } | io::IoError::ParseConfig { .. } | io::IoError::MissingSection(_)
            );
        }
        // every innovation error is a parameter or date the caller chose
        if cause.is::<InnovationError>() {
            return true;
        }
        if let Some(sim_err) = cause.downcast_ref::<SimError>() {
            return !matches!(sim_err, SimError::Pool(_) | SimError::Toy(_));
        }
        matches!(cause.downcast_ref::<ToyError>(), Some(ToyError::WrongRegime(_) | ToyError::MissingSecondAsset | ToyError::InfeasibleSplit(_)))
    })
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Toy(ToyCommand::Simulate(run)) => toy_simulate(&run),
        Command::Toy(ToyCommand::Limits(run)) => toy_limits(&run),
        Command::Toy(ToyCommand::Decompose(run)) => toy_decompose(&run),
        Command::Innovation(InnovationCommand::Simulate(run)) => innovation_simulate(&run),
        Command::Innovation(InnovationCommand::Bgp(run)) => {
            let (config, params) = innovation_config(&run)?;
            report(&run, &config, "innovation bgp", "bgp", &inno::bgp_solution(&params))
        }
        Command::Innovation(InnovationCommand::Asymptotics(run)) => {
            let (config, params) = innovation_config(&run)?;
            let asym = inno::asymptotics_ug(&params)?;
            report(&run, &config, "innovation asymptotics", "asymptotics", &asym)
        }
        Command::Innovation(InnovationCommand::Collapse { run, collapse }) => {
            let (config, params) = innovation_config(&run)?;
            let horizon = config.simulation.horizon.max(collapse + 1);
            let cmp = inno::collapse_comparisons(&params, collapse, horizon)?;
            report(&run, &config, "innovation collapse", "collapse", &cmp)
        }
        Command::Innovation(InnovationCommand::Prop3 {
            run,
            collapse_dates,
            t_star,
        }) => {
            let (config, params) = innovation_config(&run)?;
            let rows = inno::prop3_gdp_monotonicity(&params, &collapse_dates, t_star)?;
            let rows: Vec<_> = rows.into_iter().map(|(t, gdp)| json!({ "T": t, "gdp": gdp })).collect();
            report(&run, &config, "innovation prop3", "prop3", &rows)
        }
        Command::Uzawa { phi, psi, rho } => {
            let r = inno::uzawa_check(phi, psi, rho);
            println!("balanced={}", r.balanced);
            if let Some(formula) = r.g_y_formula {
                println!("{formula}");
            }
            Ok(())
        }
        Command::Montecarlo {
            run,
            model,
            replications,
            threads,
            dump_replications,
        } => montecarlo(&run, model, replications, threads, dump_replications),
        Command::Validate { run } => validate(&run),
    }
}

fn load(run: &RunArgs) -> Result<RunConfig, Failure> {
    let mut config = io::load_config(&run.config)?;
    if let Some(seed) = run.seed {
        config.simulation.seed = seed;
    }
    if let Some(horizon) = run.horizon {
        config.simulation.horizon = horizon;
    }
    Ok(config)
}

fn toy_config(run: &RunArgs) -> Result<(RunConfig, bubblelab::ToyParams), Failure> {
    let config = load(run)?;
    let params = config.toy()?.clone();
    bubblelab::validate_toy(&params)?;
    Ok((config, params))
}

fn innovation_config(run: &RunArgs) -> Result<(RunConfig, bubblelab::InnovationParams), Failure> {
    let config = load(run)?;
    let params = config.innovation()?.clone();
    bubblelab::validate_innovation(&params)?;
    Ok((config, params))
}

fn emit(run: &RunArgs, config: &RunConfig, command: &str, files: Vec<(String, String)>) -> Outcome {
    let written = io::write_run(&run.out, command, config, &files)
        .with_context(|| format!("writing outputs to {}", run.out.display()))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

/// Small structured result: JSON always goes to stdout; `--format csv`
/// flattens a top-level object or array of objects to a table.
fn report<T: serde::Serialize>(run: &RunArgs, config: &RunConfig, command: &str, stem: &str, value: &T) -> Outcome {
    let json_text = io::to_json(value)?;
    print!("{json_text}");
    let file = match run.format {
        Format::Json => (format!("{stem}.json"), json_text),
        Format::Csv => (format!("{stem}.csv"), json_to_csv(&serde_json::to_value(value)?)?),
    };
    let written = io::write_run(&run.out, command, config, &[file])
        .with_context(|| format!("writing outputs to {}", run.out.display()))?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn json_to_csv(value: &serde_json::Value) -> anyhow::Result<String> {
    use serde_json::Value;
    let rows: Vec<&serde_json::Map<String, Value>> = match value {
        Value::Object(map) => vec![map],
        Value::Array(items) => items.iter().filter_map(Value::as_object).collect(),
        _ => anyhow::bail!("result is not tabular"),
    };
    let header: Vec<&String> = rows.first().map(|r| r.keys().collect()).unwrap_or_default();
    let cell = |v: Option<&Value>| match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::Number(n)) => n.as_f64().map(io::format_sig).unwrap_or_else(|| n.to_string()),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(header.iter().map(|k| cell(row.get(*k))))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn data_file(run: &RunArgs, stem: &str, csv: impl FnOnce() -> Result<String, Failure>, json: impl FnOnce() -> Result<String, Failure>) -> Result<(String, String), Failure> {
    Ok(match run.format {
        Format::Csv => (format!("{stem}.csv"), csv()?),
        Format::Json => (format!("{stem}.json"), json()?),
    })
}

fn toy_simulate(run: &RunArgs) -> Outcome {
    let (config, params) = toy_config(run)?;
    let path = io::run_path(params.pi, &config.simulation);
    let rows = io::toy_rows(&params, &path, &config.simulation)?;
    let file = data_file(
        run,
        "toy",
        || Ok(io::csv_string(|buf| io::write_toy_csv(buf, &rows))?),
        || {
            let points: Vec<_> = rows
                .iter()
                .map(|r| json!({ "point": r.point, "decomposition": r.decomposition }))
                .collect();
            Ok(io::to_json(&points)?)
        },
    )?;
    emit(run, &config, "toy simulate", vec![file])
}

fn toy_limits(run: &RunArgs) -> Outcome {
    let (config, params) = toy_config(run)?;
    let limits = toy::limit_ratios(&params);
    let conditions = toy::conditions_abc(&params);
    let value = json!({
        "v_over_d_limit": limits.v_over_d_limit,
        "p_over_d_diverges": limits.p_over_d_diverges,
        "r_ug_limit": limits.r_ug_limit,
        "condition_a": conditions.a,
        "condition_b": conditions.b,
        "condition_c": conditions.c,
        "bubble_predicted": conditions.bubble_predicted,
        "bubble_fraction_t0": toy::bubble_fraction(&params, 0),
    });
    report(run, &config, "toy limits", "limits", &value)
}

fn toy_decompose(run: &RunArgs) -> Outcome {
    let (config, params) = toy_config(run)?;
    let path = io::run_path(params.pi, &config.simulation);
    let tol = config.simulation.tolerance;
    let rows = toy::toy_path(&params, &path)
        .iter()
        .map(|pt| {
            let d = toy::decompose_within(&params, pt.t, pt.regime, tol, 10_000_000)?;
            let terminal = if pt.regime == bubblelab::Regime::Unbalanced {
                Some(toy::bubble_via_terminal(&params, pt.t, d.horizon_n)?.limit)
            } else {
                None
            };
            Ok(json!({
                "t": pt.t,
                "regime": pt.regime.label(),
                "P": d.price,
                "V": d.fundamental,
                "B": d.bubble,
                "tail_bound": d.tail_bound,
                "horizon_N": d.horizon_n,
                "terminal_limit": terminal,
            }))
        })
        .collect::<Result<Vec<_>, ToyError>>()?;
    let file = data_file(run, "decompose", || Ok(json_to_csv(&serde_json::Value::Array(rows.clone()))?), || Ok(io::to_json(&rows)?))?;
    emit(run, &config, "toy decompose", vec![file])
}

fn innovation_simulate(run: &RunArgs) -> Outcome {
    let (config, params) = innovation_config(run)?;
    let path = io::run_path(params.pi, &config.simulation);
    let points = inno::simulate(&params, &path);
    let file = data_file(
        run,
        "innovation",
        || Ok(io::csv_string(|buf| io::write_innovation_csv(buf, &points))?),
        || Ok(io::to_json(&points)?),
    )?;
    emit(run, &config, "innovation simulate", vec![file])
}

fn montecarlo(run: &RunArgs, choice: Option<ModelChoice>, replications: Option<u64>, threads: Option<usize>, dump: bool) -> Outcome {
    let config = load(run)?;
    let model = match (choice, &config.toy, &config.innovation) {
        (Some(ModelChoice::Toy), _, _) | (None, Some(_), None) => {
            let p = config.toy()?.clone();
            bubblelab::validate_toy(&p)?;
            ModelConfig::Toy(p)
        }
        (Some(ModelChoice::Innovation), _, _) | (None, None, Some(_)) => {
            let p = config.innovation()?.clone();
            bubblelab::validate_innovation(&p)?;
            ModelConfig::Innovation(p)
        }
        (None, None, None) => return Err(Failure::Input(anyhow::anyhow!("config has neither a `toy` nor an `innovation` section"))),
        (None, Some(_), Some(_)) => return Err(Failure::Input(anyhow::anyhow!("config has both models; pass --model"))),
    };
    let sim = &config.simulation;
    let mut mc = McConfig::new(model, sim.horizon, replications.unwrap_or(sim.replications), sim.seed);
    mc.event_window = sim.event_window;
    mc.threads = threads;
    let summary = run_monte_carlo(&mc)?;
    let mut files = vec![("summary.json".to_string(), io::to_json(&summary)?)];
    if dump {
        let dates = sim_engine::collapse_dates(mc.model.pi(), mc.horizon, mc.replications, mc.seed);
        let mut text = String::from("replication,T\n");
        for (i, date) in dates.iter().enumerate() {
            let t = date.map(|t| t.to_string()).unwrap_or_default();
            text.push_str(&format!("{i},{t}\n"));
        }
        files.push(("replications.csv".to_string(), text));
    }
    emit(run, &config, "montecarlo", files)
}

fn validate(run: &RunArgs) -> Outcome {
    let config = load(run)?;
    if config.toy.is_none() && config.innovation.is_none() {
        return Err(Failure::Input(anyhow::anyhow!("{}: no parameter sections", run.config.display())));
    }
    let mut problems = Vec::new();
    if let Some(p) = &config.toy {
        match bubblelab::validate_toy(p) {
            Ok(_) => {
                let c = toy::conditions_abc(p);
                println!("toy: ok (bubble conditions a={} b={} c={})", c.a, c.b, c.c);
            }
            Err(e) => problems.push(format!("toy: {e}")),
        }
    }
    if let Some(p) = &config.innovation {
        match bubblelab::validate_innovation(p) {
            Ok(report) => println!("innovation: ok {}", serde_json::to_string(&report)?),
            Err(e) => problems.push(format!("innovation: {e}")),
        }
    }
    println!("config_hash={}", config.hash());
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Input(anyhow::anyhow!("{}", problems.join("\n"))))
    }
}
