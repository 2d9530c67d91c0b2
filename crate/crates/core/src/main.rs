use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sfplan::config::AppConfig;
use sfplan::evaluator::{self, EvaluationSettings};
use sfplan::linksim::{self, Schedule};
use sfplan::phy::{EnvironmentClass, EnvironmentModel, SpreadingFactor};
use sfplan::report;
use sfplan::scenarios::{self, ScenarioGrid};
use sfplan::selector::{self, ScenarioSpec, SelectionResult};
use sfplan::trace::TraceKind;
use sfplan::Error;

/// Fixed spreading-factor planner for single-channel mobile LoRa gateways.
#[derive(Debug, Parser)]
#[command(name = "sfplan", version)]
struct Cli {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run seed; overrides the config file.
    #[arg(long, global = true, env = "SFPLAN_SEED")]
    seed: Option<u64>,

    /// Worker threads for multi-scenario commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pick the fixed SF for one scenario and print the decision trace.
    Select(SelectArgs),
    /// Simulate packet delivery for one scenario.
    Simulate(SimulateArgs),
    /// Write the scenario grid as CSV.
    Generate(GenerateArgs),
    /// Compare predicted SFs against brute-force simulation.
    Validate(ValidateArgs),
    /// Compare the planned SF against the dynamic baseline on mobile scenarios.
    Compare(CompareArgs),
    /// Rebuild summary and plots from an existing report.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Single-scenario key-value file; flags below override its values.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,

    /// Planning (farthest) distance, m.
    #[arg(long, required_unless_present = "scenario")]
    distance: Option<f64>,

    /// Peak gateway speed, m/s.
    #[arg(long)]
    speed: Option<f64>,

    /// Payload size, bytes.
    #[arg(long)]
    payload: Option<usize>,

    /// Packets per hour.
    #[arg(long)]
    rate: Option<f64>,

    /// Minimum effective data rate, bits/s.
    #[arg(long)]
    throughput: Option<f64>,

    /// Environment preset: open-los, semi-rural-los, coastal-los, obstructed-los.
    #[arg(long)]
    environment: Option<EnvironmentClass>,

    /// Mobility pattern: fixed, linear-pass, out-and-back.
    #[arg(long)]
    trace: Option<TraceKind>,

    /// Required link margin, dB.
    #[arg(long)]
    fade_margin: Option<f64>,
}

impl ScenarioArgs {
    fn resolve(&self, config: &mut AppConfig) -> Result<ScenarioSpec, Error> {
        if let Some(fm) = self.fade_margin {
            config.selector.fade_margin = fm;
        }
        let mut spec = match &self.scenario {
            Some(path) => scenarios::load_scenario_file(path, &config.region)?,
            None => ScenarioSpec {
                environment: config.environment.clone(),
                region: config.region.clone(),
                ..ScenarioSpec::new("cli", 0.0, 0.0, 20, 60.0, EnvironmentModel::default())
            },
        };
        if let Some(d) = self.distance {
            spec.distance = d;
        }
        if let Some(v) = self.speed {
            spec.speed = v;
            spec.trace = TraceKind::for_speed(v);
        }
        if let Some(p) = self.payload {
            spec.payload_bytes = p;
        }
        if let Some(r) = self.rate {
            spec.packets_per_hour = r;
        }
        if self.throughput.is_some() {
            spec.required_throughput = self.throughput;
        }
        if let Some(env) = self.environment {
            spec.environment = EnvironmentModel::preset(env);
        }
        if let Some(t) = self.trace {
            spec.trace = t;
        }
        spec.validate()?;
        config.selector.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,

    /// Print the result as JSON.
    #[arg(long)]
    json: bool,

    /// When no SF is feasible, fall back to the one with the largest margin.
    #[arg(long)]
    relaxed: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,

    /// SF to simulate (7-12) or `all`.
    #[arg(long, default_value = "all")]
    sf: SfChoice,

    /// Packets per run; overrides the config file.
    #[arg(long)]
    packets: Option<usize>,

    /// Also run the dynamic baseline.
    #[arg(long)]
    dynamic: bool,

    /// Directory for outcomes.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum SfChoice {
    All,
    One(SpreadingFactor),
}

impl std::str::FromStr for SfChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s.eq_ignore_ascii_case("all") {
            Ok(Self::All)
        } else {
            s.parse().map(Self::One)
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Use the built-in 672-scenario axes, ignoring the config's grid section.
    #[arg(long)]
    default_grid: bool,

    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Scenario CSV; defaults to the generated grid.
    #[arg(long, value_name = "FILE")]
    scenarios: Option<PathBuf>,

    /// Directory for report.csv, confusion.csv, summary.txt and plots.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Packets per (scenario, SF) run; overrides the config file.
    #[arg(long)]
    packets: Option<usize>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Scenario CSV; defaults to the generated grid.
    #[arg(long, value_name = "FILE")]
    scenarios: Option<PathBuf>,

    /// Directory for comparison.csv and pdr_compare.svg.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Packets per run; overrides the config file.
    #[arg(long)]
    packets: Option<usize>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding report.csv.
    #[arg(long, default_value = "out")]
    from: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::NoFeasibleSf(_)) => {
            eprintln!("error: {e}");
            eprintln!("hint: rerun `select` with --relaxed to get the best-margin fallback");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(path) => AppConfig::load(path)?,
        None => AppConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("--jobs: {e}")))?;
    }
    let out = io::stdout();
    let mut out = out.lock();
    match cli.command {
        Command::Select(args) => cmd_select(&mut out, args, config),
        Command::Simulate(args) => cmd_simulate(&mut out, args, config),
        Command::Generate(args) => cmd_generate(&mut out, args, &config),
        Command::Validate(args) => cmd_validate(&mut out, args, config),
        Command::Compare(args) => cmd_compare(&mut out, args, config),
        Command::Report(args) => cmd_report(&mut out, &args.from),
    }
}

fn cmd_select(out: &mut impl Write, args: SelectArgs, mut config: AppConfig) -> Result<(), Error> {
    let spec = args.scenario.resolve(&mut config)?;
    let mut options = config.selector;
    options.relaxed |= args.relaxed;
    let result = selector::select_sf(&spec, &config.radio, &config.weights, &options)?;
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &result)?;
        writeln!(out)?;
    } else {
        print_selection(out, &result)?;
    }
    Ok(())
}

fn print_selection(out: &mut impl Write, r: &SelectionResult) -> io::Result<()> {
    writeln!(
        out,
        "{:<5} {:>10} {:>10} {:>10} {:>10} {:>11} {:>7}  status",
        "SF", "toa_ms", "rate_bps", "energy_J/h", "margin_dB", "airtime_s/h", "score"
    )?;
    for e in &r.evaluations {
        let score = r
            .scores
            .get(&e.sf)
            .map(|s| format!("{:.4}", s.total))
            .unwrap_or_else(|| "-".into());
        let status = if e.excluded {
            let reasons: Vec<&str> = e.exclusion_reasons.iter().map(|x| x.label()).collect();
            format!("excluded: {}", reasons.join(", "))
        } else if e.sf == r.chosen {
            "chosen".into()
        } else {
            "feasible".into()
        };
        writeln!(
            out,
            "{:<5} {:>10.3} {:>10.1} {:>10.3} {:>10.2} {:>11.2} {:>7}  {status}",
            e.sf.to_string(),
            e.toa * 1e3,
            e.data_rate,
            e.energy,
            e.link_margin,
            e.hourly_airtime,
            score
        )?;
    }
    writeln!(out)?;
    for line in &r.decision_trace {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn cmd_simulate(
    out: &mut impl Write,
    args: SimulateArgs,
    mut config: AppConfig,
) -> Result<(), Error> {
    let spec = args.scenario.resolve(&mut config)?;
    if let Some(n) = args.packets {
        config.simulator.n_packets = n;
    }
    config.simulator.validate()?;
    let spec = config.simulator.apply(&spec);
    let n = config.simulator.packets_for(&spec);
    let schedule = Schedule::for_scenario(&spec, n)?;
    let trace = linksim::scenario_trace(&spec, schedule.horizon())?;
    let seed = config.seed;

    let (outcomes, best) = match args.sf {
        SfChoice::All => {
            let r = linksim::brute_force_best_sf(&spec, &config.radio, &trace, seed, n)?;
            (r.outcomes, Some(r.best))
        }
        SfChoice::One(sf) => (
            vec![linksim::simulate_link(
                &spec,
                sf,
                &config.radio,
                &trace,
                seed,
                n,
            )?],
            None,
        ),
    };
    writeln!(
        out,
        "{:<5} {:>6} {:>9} {:>7} {:>10}",
        "SF", "sent", "delivered", "pdr", "airtime_s"
    )?;
    for o in &outcomes {
        writeln!(
            out,
            "{:<5} {:>6} {:>9} {:>7.4} {:>10.3}",
            o.sf.to_string(),
            o.packets_sent,
            o.packets_delivered,
            o.pdr,
            o.airtime_used
        )?;
    }
    if let Some(best) = best {
        writeln!(out, "best {best}")?;
    }
    if args.dynamic {
        let d = linksim::simulate_dynamic_protocol(
            &spec,
            &config.radio,
            &config.dynamic,
            &trace,
            seed,
            n,
        )?;
        writeln!(
            out,
            "dynamic sent={} delivered={} pdr={:.4} airtime_s={:.3}",
            d.packets_sent, d.packets_delivered, d.pdr, d.airtime_used
        )?;
    }
    if let Some(dir) = args.out_dir {
        fs::create_dir_all(&dir)?;
        let rows: Vec<(&str, &linksim::SimOutcome)> =
            outcomes.iter().map(|o| (spec.id.as_str(), o)).collect();
        let path = dir.join("outcomes.csv");
        linksim::write_outcomes_csv(fs::File::create(&path)?, &rows)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn grid_specs(config: &AppConfig, default_grid: bool) -> Result<Vec<ScenarioSpec>, Error> {
    let grid = if default_grid {
        ScenarioGrid {
            region: config.region.clone(),
            ..ScenarioGrid::default()
        }
    } else {
        config.scenario_grid()
    };
    scenarios::generate_grid(&grid, config.seed)
}

fn load_or_generate(path: Option<&Path>, config: &AppConfig) -> Result<Vec<ScenarioSpec>, Error> {
    match path {
        Some(p) => scenarios::load_scenarios(p),
        None => grid_specs(config, false),
    }
}

fn cmd_generate(out: &mut impl Write, args: GenerateArgs, config: &AppConfig) -> Result<(), Error> {
    let specs = grid_specs(config, args.default_grid)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    scenarios::save_scenarios(&specs, &args.out)?;
    writeln!(
        out,
        "wrote {} scenarios to {}",
        specs.len(),
        args.out.display()
    )?;
    Ok(())
}

fn settings(config: &mut AppConfig, packets: Option<usize>) -> Result<EvaluationSettings, Error> {
    if let Some(n) = packets {
        config.simulator.n_packets = n;
    }
    let s = config.evaluation_settings();
    s.validate()?;
    Ok(s)
}

fn cmd_validate(
    out: &mut impl Write,
    args: ValidateArgs,
    mut config: AppConfig,
) -> Result<(), Error> {
    let specs = load_or_generate(args.scenarios.as_deref(), &config)?;
    let settings = settings(&mut config, args.packets)?;
    let report = evaluator::validate(&specs, &settings, config.seed)?;
    report::write_validation(&args.out_dir, &report)?;
    write!(out, "{}", report::Summary::from_report(&report).text())?;
    if !report.infeasible_ids.is_empty() {
        writeln!(out, "infeasible_ids={}", report.infeasible_ids.join(" "))?;
    }
    writeln!(out, "wrote reports to {}", args.out_dir.display())?;
    Ok(())
}

fn cmd_compare(
    out: &mut impl Write,
    args: CompareArgs,
    mut config: AppConfig,
) -> Result<(), Error> {
    let specs = load_or_generate(args.scenarios.as_deref(), &config)?;
    let settings = settings(&mut config, args.packets)?;
    let table =
        evaluator::compare_static_vs_dynamic(&specs, &settings, &config.dynamic, config.seed)?;
    report::write_comparison(&args.out_dir, &table)?;
    write!(out, "{}", report::comparison_text(&table))?;
    writeln!(out, "wrote comparison to {}", args.out_dir.display())?;
    Ok(())
}

fn cmd_report(out: &mut impl Write, dir: &Path) -> Result<(), Error> {
    let (summary, paths) = report::rebuild_from_dir(dir)?;
    write!(out, "{}", summary.text())?;
    for p in paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}
