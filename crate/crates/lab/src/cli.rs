//! Command-line front end. `main` only forwards to [`run`], so tests can
//! drive commands in-process.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use trustgame_core::inference::ParameterGrid;
use trustgame_core::planner::{RolloutPartner, Schedule};
use trustgame_core::simulator::{GameRecord, TrajectoryStats};
use trustgame_core::{AgentSpec, PlannerConfig, Role};

use crate::config::ExperimentConfig;
use crate::io::{self, FitReport, RecordSet};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::parallel::Runner;
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "trustgame", version, about = "Plan, simulate and fit the ten-round trust task")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "TRUSTGAME_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play one dyad and write its record.
    Simulate(SimulateArgs),
    /// Play pairings repeatedly and write records plus trajectory exports.
    Batch(BatchArgs),
    /// Fit recorded games on the parameter grid.
    Fit(FitArgs),
    /// Generate records for every grid pairing, fit them and tabulate.
    Confusion(ConfusionArgs),
    /// First-action runtime and discrepancy against a high-budget reference.
    Bench(BenchArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Write CSV exports of record files, or ingest raw experiment data.
    Export(ExportArgs),
    /// Rerun the command recorded in a manifest and check its outputs.
    Replay(ReplayArgs),
}

/// Planner settings. Unset flags keep the defaults (or the values of an
/// experiment config).
#[derive(Debug, Clone, Default, Args)]
pub struct PlannerArgs {
    /// Simulations for the first decision (n).
    #[arg(short = 'n', long = "simulations")]
    pub simulations: Option<u32>,
    /// SoftUCT exploration constant (c).
    #[arg(short = 'c', long = "exploration")]
    pub exploration: Option<f64>,
    /// Probability of a uniformly random rollout action.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Share of the round budget given to nested partner searches.
    #[arg(long)]
    pub nested_fraction: Option<f64>,
    /// Share of the round budget spent on constant-strategy pre-search.
    #[arg(long)]
    pub presearch_fraction: Option<f64>,
    /// Budget schedule over rounds: linear or constant.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<Schedule>,
    /// Partner model used in rollouts: model or reactive.
    #[arg(long, value_parser = parse_rollout_partner)]
    pub rollout_partner: Option<RolloutPartner>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Softmax temperature (β) applied to every agent given on the command line.
    #[arg(long)]
    pub beta: Option<f64>,
}

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown schedule {s:?} (linear, constant)"))
}

fn parse_rollout_partner(s: &str) -> Result<RolloutPartner, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown rollout partner {s:?} (model, reactive)"))
}

fn parse_spec(s: &str) -> Result<AgentSpec, String> {
    s.parse::<AgentSpec>().map_err(|e| e.to_string())
}

impl PlannerArgs {
    pub fn resolve(&self, base: PlannerConfig) -> anyhow::Result<PlannerConfig> {
        let mut c = base;
        if let Some(v) = self.simulations {
            c.simulations = v;
        }
        if let Some(v) = self.exploration {
            c.exploration = v;
        }
        if let Some(v) = self.epsilon {
            c.rollout_epsilon = v;
        }
        if let Some(v) = self.nested_fraction {
            c.nested_fraction = v;
        }
        if let Some(v) = self.presearch_fraction {
            c.presearch_fraction = v;
        }
        if let Some(v) = self.schedule {
            c.schedule = v;
        }
        if let Some(v) = self.rollout_partner {
            c.rollout_partner = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn spec(&self, spec: AgentSpec) -> anyhow::Result<AgentSpec> {
        Ok(match self.beta {
            Some(b) => spec.with_beta(b)?,
            None => spec,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Investor as investor:k,alpha,P.
    #[arg(long, value_parser = parse_spec)]
    pub investor: AgentSpec,
    /// Trustee as trustee:k,alpha,P.
    #[arg(long, value_parser = parse_spec)]
    pub trustee: AgentSpec,
    #[arg(long)]
    pub dyad_id: Option<String>,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    /// Experiment config; replaces --investor/--trustee/--repetitions.
    #[arg(long, conflicts_with_all = ["investor", "trustee", "repetitions"])]
    pub config: Option<PathBuf>,
    /// Investors, paired in order with the trustees.
    #[arg(long, value_parser = parse_spec)]
    pub investor: Vec<AgentSpec>,
    #[arg(long, value_parser = parse_spec)]
    pub trustee: Vec<AgentSpec>,
    #[arg(short, long)]
    pub repetitions: Option<usize>,
    /// Output directory; defaults to the config's output directory.
    #[arg(short, long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Restrict the grid to these cells (repeatable). A role without any
    /// listed cell keeps its full grid.
    #[arg(long = "cell", value_parser = parse_spec)]
    pub cells: Vec<AgentSpec>,
}

impl GridArgs {
    fn grid(&self, planner: &PlannerArgs) -> anyhow::Result<ParameterGrid> {
        let mut grid = ParameterGrid::full();
        for role in [Role::Investor, Role::Trustee] {
            let listed: Vec<AgentSpec> = self
                .cells
                .iter()
                .filter(|c| c.role == role)
                .map(|c| planner.spec(*c))
                .collect::<anyhow::Result<_>>()?;
            if listed.is_empty() {
                if planner.beta.is_some() {
                    let cells = grid.cells(role).iter().map(|c| planner.spec(*c)).collect::<anyhow::Result<_>>()?;
                    set_cells(&mut grid, role, cells);
                }
                continue;
            }
            set_cells(&mut grid, role, listed);
        }
        Ok(grid)
    }
}

fn set_cells(grid: &mut ParameterGrid, role: Role, cells: Vec<AgentSpec>) {
    match role {
        Role::Investor => grid.investor = cells,
        Role::Trustee => grid.trustee = cells,
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// A record or record set.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConfusionArgs {
    /// Records generated per grid pairing.
    #[arg(short, long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Agent whose first action is measured.
    #[arg(long, value_parser = parse_spec, default_value = "investor:2,1,7")]
    pub agent: AgentSpec,
    #[arg(long, value_delimiter = ',', default_values_t = [1000u32, 5000, 25000])]
    pub budgets: Vec<u32>,
    #[arg(long, default_value_t = 200_000)]
    pub reference_budget: u32,
    /// Independent runs per budget.
    #[arg(long, default_value_t = 20)]
    pub subjects: usize,
    /// Reference runs, averaged into the reference distribution.
    #[arg(long, default_value_t = 1)]
    pub reference_runs: usize,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "TRUSTGAME_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "TRUSTGAME_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Default simulation budget for session agents.
    #[arg(short = 'n', long = "simulations", default_value_t = service::DEFAULT_SESSION_BUDGET)]
    pub simulations: u32,
    /// Seconds of inactivity before a session is dropped.
    #[arg(long, default_value_t = service::DEFAULT_IDLE_TTL.as_secs())]
    pub idle_ttl: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(subcommand)]
    pub what: ExportKind,
}

#[derive(Debug, Clone, Subcommand)]
pub enum ExportKind {
    /// Per-round action means: trajectories.csv.
    Trajectories(ExportRecords),
    /// Mean posterior over the partner's guilt: posteriors.csv.
    Posteriors(ExportRecords),
    /// Total gains per record: gains.csv.
    Gains(ExportRecords),
    /// Ranked fit cells of a fit report file: fits.csv.
    Fits(ExportFits),
    /// Raw `dyadId,round,investedAmount,returnedAmount` rows to records.json.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ExportRecords {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExportFits {
    #[arg(long)]
    pub fits: PathBuf,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(short, long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Parses `args` (without the program name) and runs the command.
pub fn run(args: Vec<String>) -> anyhow::Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("trustgame".to_string()).chain(args.iter().cloned()))?;
    execute(cli, args)
}

/// Like [`run`] but lets clap print help and version text and exit.
pub fn run_from_env() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    execute(cli, args)
}

fn execute(cli: Cli, args: Vec<String>) -> anyhow::Result<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Simulate(a) => simulate(a, args),
        Command::Batch(a) => batch(a, args, workers),
        Command::Fit(a) => fit(a, args, workers),
        Command::Confusion(a) => confusion(a, args, workers),
        Command::Bench(a) => bench(a, args, workers),
        Command::Serve(a) => serve(a),
        Command::Export(a) => export(a, args),
        Command::Replay(a) => replay(a),
    }
}

fn simulate(a: SimulateArgs, args: Vec<String>) -> anyhow::Result<()> {
    let cfg = a.planner.resolve(PlannerConfig::default())?;
    let (inv, tr) = (a.planner.spec(a.investor)?, a.planner.spec(a.trustee)?);
    let mut record = trustgame_core::simulator::play_dyad(&inv, &tr, &cfg, cfg.seed)?;
    record.dyad_id = a.dyad_id.clone();
    io::save_record(&a.out_dir.join("record.json"), &record)?;
    let mut m = Manifest::new(
        "simulate",
        args,
        json!({"investor": inv, "trustee": tr, "dyadId": a.dyad_id, "planner": cfg}),
        Some(&cfg),
    );
    m.output(&a.out_dir, "record.json", true)?;
    finish(&m, &a.out_dir)
}

fn trajectory_groups(records: Vec<GameRecord>) -> anyhow::Result<Vec<(String, TrajectoryStats)>> {
    RecordSet::new(records)
        .pairings()
        .into_iter()
        .map(|(label, rs)| Ok((label, TrajectoryStats::from_records(&rs)?)))
        .collect()
}

fn batch(a: BatchArgs, args: Vec<String>, workers: Option<usize>) -> anyhow::Result<()> {
    let mut inputs = Vec::new();
    let (pairs, reps, cfg, dir) = match &a.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            inputs.push(path.clone());
            let dir = a.out_dir.clone().unwrap_or_else(|| c.output.dir.clone());
            (c.pairs(), c.repetitions, a.planner.resolve(c.planner)?, dir)
        }
        None => {
            if a.investor.is_empty() || a.investor.len() != a.trustee.len() {
                bail!("give one --trustee per --investor (or an experiment --config)");
            }
            let pairs = a
                .investor
                .iter()
                .zip(&a.trustee)
                .map(|(i, t)| Ok((a.planner.spec(*i)?, a.planner.spec(*t)?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let dir = a.out_dir.clone().context("--out-dir is required without --config")?;
            (pairs, a.repetitions.unwrap_or(1), a.planner.resolve(PlannerConfig::default())?, dir)
        }
    };
    for (i, t) in &pairs {
        if i.role != Role::Investor || t.role != Role::Trustee {
            bail!("pairing {i} / {t}: roles must be investor then trustee");
        }
    }
    let mut runner = Runner::new(workers)?;
    let groups = runner.batch(&pairs, reps, &cfg)?;
    let records: Vec<GameRecord> = groups.into_iter().flatten().collect();
    io::save_records(&dir.join("records.json"), &records)?;
    let stats = trajectory_groups(records.clone())?;
    io::export_trajectories(&dir.join("trajectories.csv"), &stats)?;
    io::export_posteriors(&dir.join("posteriors.csv"), &stats)?;
    io::export_gains(&dir.join("gains.csv"), &RecordSet::new(records).pairings())?;

    let pairings: Vec<_> = pairs.iter().map(|(i, t)| json!({"investor": i, "trustee": t})).collect();
    let mut m = Manifest::new(
        "batch",
        args,
        json!({"pairings": pairings, "repetitions": reps, "planner": cfg}),
        Some(&cfg),
    );
    for p in &inputs {
        m.input(p)?;
    }
    for f in ["records.json", "trajectories.csv", "posteriors.csv", "gains.csv"] {
        m.output(&dir, f, true)?;
    }
    finish(&m, &dir)
}

fn fit(a: FitArgs, args: Vec<String>, workers: Option<usize>) -> anyhow::Result<()> {
    let cfg = a.planner.resolve(PlannerConfig::default())?;
    let grid = a.grid.grid(&a.planner)?;
    let records = io::load_records(&a.records)?;
    let mut runner = Runner::new(workers)?;
    let reports: Vec<FitReport> = if records.len() == 1 {
        vec![FitReport::new(&records[0], runner.fit(&records[0], &grid, &cfg)?)]
    } else {
        let fits = runner.fit_many(&records, &grid, &cfg)?;
        records.iter().zip(fits).map(|(r, f)| FitReport::new(r, f)).collect()
    };
    io::save_fit_reports(&a.out_dir.join("fits.json"), &reports)?;
    io::export_fit_csv(&a.out_dir.join("fits.csv"), &reports)?;
    let mut m = Manifest::new("fit", args, json!({"grid": grid_json(&grid), "planner": cfg}), Some(&cfg));
    m.input(&a.records)?;
    m.output(&a.out_dir, "fits.json", true)?;
    m.output(&a.out_dir, "fits.csv", true)?;
    finish(&m, &a.out_dir)
}

fn grid_json(grid: &ParameterGrid) -> serde_json::Value {
    json!({"investor": grid.investor, "trustee": grid.trustee})
}

fn confusion(a: ConfusionArgs, args: Vec<String>, workers: Option<usize>) -> anyhow::Result<()> {
    let cfg = a.planner.resolve(PlannerConfig::default())?;
    let grid = a.grid.grid(&a.planner)?;
    let mut runner = Runner::new(workers)?;
    let (matrices, fitted) = runner.confusion(&grid, a.repetitions, &cfg)?;
    io::export_confusion_csv(&a.out_dir.join("confusion.csv"), &matrices)?;
    io::write_json(&a.out_dir.join("confusion.json"), &json!({"matrices": matrices, "fitted": fitted}))?;
    let mut m = Manifest::new(
        "confusion",
        args,
        json!({"grid": grid_json(&grid), "repetitions": a.repetitions, "planner": cfg}),
        Some(&cfg),
    );
    m.output(&a.out_dir, "confusion.csv", true)?;
    m.output(&a.out_dir, "confusion.json", true)?;
    finish(&m, &a.out_dir)
}

fn bench(a: BenchArgs, args: Vec<String>, workers: Option<usize>) -> anyhow::Result<()> {
    let cfg = a.planner.resolve(PlannerConfig::default())?;
    let agent = a.planner.spec(a.agent)?;
    let mut runner = Runner::new(workers)?;
    let report = runner.convergence(&agent, &a.budgets, a.reference_budget, a.subjects, a.reference_runs, &cfg)?;
    let dir = &a.out_dir;
    io::export_runtime_csv(&dir.join("runtime.csv"), &report)?;
    io::export_discrepancy_csv(&dir.join("discrepancy.csv"), &report)?;
    io::export_convergence_csv(&dir.join("convergence.csv"), &report)?;
    io::write_json(&dir.join("bench.json"), &report)?;
    let mut m = Manifest::new(
        "bench",
        args,
        json!({
            "agent": agent,
            "budgets": a.budgets,
            "referenceBudget": a.reference_budget,
            "subjects": a.subjects,
            "referenceRuns": a.reference_runs,
            "planner": cfg,
        }),
        Some(&cfg),
    );
    m.output(dir, "runtime.csv", false)?;
    m.output(dir, "discrepancy.csv", true)?;
    m.output(dir, "convergence.csv", true)?;
    m.output(dir, "bench.json", false)?;
    finish(&m, dir)
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", a.host, a.port))?;
    let config = ServiceConfig {
        default_simulations: a.simulations,
        idle_ttl: Duration::from_secs(a.idle_ttl),
    };
    PlannerConfig::with_simulations(a.simulations).validate()?;
    tokio::runtime::Runtime::new()?.block_on(service::serve(addr, config))
}

fn export(a: ExportArgs, args: Vec<String>) -> anyhow::Result<()> {
    let (input, dir, name) = match &a.what {
        ExportKind::Trajectories(e) => (&e.records, &e.out_dir, "trajectories.csv"),
        ExportKind::Posteriors(e) => (&e.records, &e.out_dir, "posteriors.csv"),
        ExportKind::Gains(e) => (&e.records, &e.out_dir, "gains.csv"),
        ExportKind::Fits(e) => (&e.fits, &e.out_dir, "fits.csv"),
        ExportKind::Ingest(e) => (&e.csv, &e.out_dir, "records.json"),
    };
    let path = dir.join(name);
    let mut extra = None;
    match &a.what {
        ExportKind::Trajectories(_) => io::export_trajectories(&path, &trajectory_groups(io::load_records(input)?)?)?,
        ExportKind::Posteriors(_) => io::export_posteriors(&path, &trajectory_groups(io::load_records(input)?)?)?,
        ExportKind::Gains(_) => io::export_gains(&path, &RecordSet::new(io::load_records(input)?).pairings())?,
        ExportKind::Fits(_) => io::export_fit_csv(&path, &io::load_fit_reports(input)?)?,
        ExportKind::Ingest(_) => {
            let report = io::ingest_csv(input)?;
            for r in &report.rejected {
                eprintln!("rejected dyad {}: {}", r.dyad_id, r.reason);
            }
            io::save_records(&path, &report.records)?;
            io::write_json(&dir.join("rejected.json"), &report.rejected)?;
            extra = Some("rejected.json");
        }
    }
    let kind = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_string();
    let mut m = Manifest::new("export", args, json!({"kind": kind}), None);
    m.input(input)?;
    m.output(dir, name, true)?;
    if let Some(f) = extra {
        m.output(dir, f, true)?;
    }
    finish(&m, dir)
}

fn replay(a: ReplayArgs) -> anyhow::Result<()> {
    let old = Manifest::load(&a.manifest)?;
    if old.command == "replay" {
        bail!("{}: a replay manifest cannot be replayed", a.manifest.display());
    }
    for i in &old.inputs {
        let now = io::file_sha256(Path::new(&i.path))?;
        if now != i.sha256 {
            bail!("input {} changed since the recorded run", i.path);
        }
    }
    run(old.args.clone())?;
    let dir = a.manifest.parent().unwrap_or(Path::new("."));
    let new = Manifest::load(&dir.join(MANIFEST_FILE))?;
    if new.config_digest != old.config_digest {
        bail!("replayed settings differ from the recorded run");
    }
    let bad = old.mismatches(&new);
    if !bad.is_empty() {
        bail!("outputs differ from the recorded run: {}", bad.join(", "));
    }
    eprintln!("replay of {} reproduced {} outputs", old.command, old.outputs.len());
    Ok(())
}

fn finish(m: &Manifest, dir: &Path) -> anyhow::Result<()> {
    let path = m.write(dir)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
