//! Command-line entry points: single runs, seeded batch ablations, scenario
//! generation and report aggregation.
//!
//! Exit codes: 0 on success (a scenario whose agents did not all arrive is
//! still a success), 1 on parse or validation errors, 2 on runtime failures.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{run, ExecMode, PlannerVariant, RunConfig, RunResult};
use crate::world::{load_scenario, presets, Scenario};

/// Caps the number of worker threads used by `batch`.
pub const THREADS_ENV: &str = "HOMOPLAN_THREADS";

/// File written by `batch` inside the output directory.
pub const RUNS_CSV: &str = "runs.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub planner: PlannerVariant,
    pub replan: bool,
}

impl Arm {
    pub fn config(&self, timeout: Option<f64>) -> RunConfig {
        let mut cfg = RunConfig {
            planner: self.planner,
            replan: self.replan,
            ..RunConfig::default()
        };
        if let Some(t) = timeout {
            cfg.timeout = t;
        }
        cfg
    }

    pub fn label(&self) -> String {
        self.config(None).arm()
    }
}

/// A batch: every arm on every scenario, `repetitions` times. Relative paths
/// are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    /// Preset instantiated once per seed.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Scenario files, run in addition to the preset seeds.
    #[serde(default)]
    pub files: Vec<PathBuf>,
    pub arms: Vec<Arm>,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub output: PathBuf,
    /// Simulated seconds per run; the run default when absent.
    #[serde(default)]
    pub timeout: Option<f64>,
}

fn one() -> usize {
    1
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::validation("batch", "at least one arm is required"));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::validation("batch", "seeds must be distinct"));
        }
        if self.preset.is_some() != !self.seeds.is_empty() {
            return Err(Error::validation(
                "batch",
                "a preset needs seeds and seeds need a preset",
            ));
        }
        if self.seeds.is_empty() && self.files.is_empty() {
            return Err(Error::validation(
                "batch",
                "no scenarios: give a preset with seeds or files",
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::validation("batch", "repetitions must be at least 1"));
        }
        if let Some(t) = self.timeout {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::validation("batch", format!("timeout must be positive, got {t}")));
            }
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        for f in &mut self.files {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
    }
}

/// One line of the batch CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub seed: Option<u64>,
    pub repetition: usize,
    pub arm: String,
    pub agents: usize,
    pub reached: usize,
    pub success: bool,
    pub swarm_rate: f64,
    /// Latest arrival time, when every agent arrived.
    pub makespan: Option<f64>,
    /// Sum of the distances travelled by all agents, m.
    pub total_length: f64,
    pub replans: usize,
    pub min_distance: f64,
    pub violations: usize,
    pub soft_solves: usize,
    pub fallback_solves: usize,
    pub plan_max_ms: f64,
    pub mpc_max_ms: f64,
}

impl RunRow {
    pub fn new(scenario: &str, seed: Option<u64>, repetition: usize, r: &RunResult) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            repetition,
            arm: r.arm.clone(),
            agents: r.agents.len(),
            reached: r.agents.iter().filter(|a| a.reached).count(),
            success: r.success,
            swarm_rate: r.swarm_rate,
            makespan: r.makespan,
            total_length: r.agents.iter().map(|a| a.length).sum(),
            replans: r.replans,
            min_distance: r.safety.min_distance,
            violations: r.safety.violation_count,
            soft_solves: r.soft_solves,
            fallback_solves: r.fallback_solves,
            plan_max_ms: r.plan_timing.max_ms,
            mpc_max_ms: r.mpc_timing.max_ms,
        }
    }
}

/// Per-arm summary of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub arm: String,
    pub runs: usize,
    /// Fraction of runs in which every agent arrived.
    pub scenario_rate: f64,
    /// Fraction of arrived agents, averaged over runs.
    pub swarm_rate: f64,
    /// Over successful runs only; absent when there are none.
    pub avg_total_length: Option<f64>,
    pub avg_max_time: Option<f64>,
}

/// Groups rows by arm, in order of first appearance.
pub fn aggregate(rows: &[RunRow]) -> Vec<ArmMetrics> {
    let mut arms: Vec<&str> = Vec::new();
    for r in rows {
        if !arms.contains(&r.arm.as_str()) {
            arms.push(&r.arm);
        }
    }
    arms.into_iter()
        .map(|arm| {
            let mine: Vec<&RunRow> = rows.iter().filter(|r| r.arm == arm).collect();
            let ok: Vec<&RunRow> = mine.iter().copied().filter(|r| r.success).collect();
            let n = mine.len() as f64;
            let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
            ArmMetrics {
                arm: arm.to_string(),
                runs: mine.len(),
                scenario_rate: ok.len() as f64 / n,
                swarm_rate: mine.iter().map(|r| r.swarm_rate).sum::<f64>() / n,
                avg_total_length: mean(ok.iter().map(|r| r.total_length).collect()),
                avg_max_time: mean(ok.iter().filter_map(|r| r.makespan).collect()),
            }
        })
        .collect()
}

pub fn render_table(metrics: &[ArmMetrics]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
    let rows: Vec<[String; 6]> = metrics
        .iter()
        .map(|m| {
            [
                m.arm.clone(),
                m.runs.to_string(),
                format!("{:.1}%", 100.0 * m.scenario_rate),
                format!("{:.1}%", 100.0 * m.swarm_rate),
                opt(m.avg_total_length),
                opt(m.avg_max_time),
            ]
        })
        .collect();
    let header = [
        "arm",
        "runs",
        "scenario success",
        "swarm success",
        "avg total length (m)",
        "avg max time (s)",
    ];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(k, (c, w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header);
    for r in &rows {
        line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

pub fn write_rows(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<RunRow>, _>>()?;
    Ok(rows)
}

/// Every row of every `.csv` file in `dir`, files in name order.
pub fn read_dir_rows(dir: &Path) -> Result<Vec<RunRow>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_rows(f)?);
    }
    Ok(rows)
}

/// Worker count for batches: `HOMOPLAN_THREADS` if set, else the number of
/// available cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

struct Job {
    scenario: usize,
    arm: Arm,
    repetition: usize,
}

/// Scenarios of a batch with their labels and seeds.
pub fn batch_scenarios(cfg: &BatchConfig) -> Result<Vec<(String, Option<u64>, Scenario)>> {
    let mut out = Vec::new();
    if let Some(preset) = &cfg.preset {
        for &seed in &cfg.seeds {
            out.push((preset.clone(), Some(seed), presets::by_name(preset, seed)?));
        }
    }
    for f in &cfg.files {
        let text = read_file(f)?;
        let label = f
            .file_stem()
            .map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
        out.push((label, None, load_scenario(&text)?));
    }
    Ok(out)
}

/// Runs every job of the batch on `threads` workers. Rows come back in job
/// order regardless of scheduling.
pub fn run_batch(
    cfg: &BatchConfig,
    scenarios: &[(String, Option<u64>, Scenario)],
    threads: usize,
) -> Result<Vec<RunRow>> {
    let mut jobs = Vec::new();
    for scenario in 0..scenarios.len() {
        for &arm in &cfg.arms {
            for repetition in 0..cfg.repetitions {
                jobs.push(Job {
                    scenario,
                    arm,
                    repetition,
                });
            }
        }
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunRow>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let (label, seed, scenario) = &scenarios[job.scenario];
                let row = run(scenario, &job.arm.config(cfg.timeout))
                    .map(|out| RunRow::new(label, *seed, job.repetition, &out.result));
                slots.lock().expect("slot lock")[k] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "homoplan", version, about = "Homotopy-aware multi-agent trajectory planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and print its result as JSON.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        replan: Toggle,
        #[arg(long, value_enum, default_value = "homotopy")]
        planner: PlannerVariant,
        /// Write the JSON-lines trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Simulated seconds before the run stops.
        #[arg(long)]
        timeout: Option<f64>,
        /// One thread per agent instead of the lockstep scheduler.
        #[arg(long)]
        concurrent: bool,
    },
    /// Run every arm on every scenario of a batch config and write runs.csv.
    Batch { config: PathBuf },
    /// Write a preset scenario.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "dense6x6")]
        preset: String,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Aggregate the CSV files of a directory into a metrics table.
    Report { dir: PathBuf },
}

enum Failure {
    Input(Error),
    Runtime(Error),
}

trait Stage<T> {
    fn input(self) -> std::result::Result<T, Failure>;
    fn runtime(self) -> std::result::Result<T, Failure>;
}

impl<T, E: Into<Error>> Stage<T> for std::result::Result<T, E> {
    fn input(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn runtime(self) -> std::result::Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Run {
            scenario,
            replan,
            planner,
            trace,
            timeout,
            concurrent,
        } => {
            let text = read_file(&scenario).input()?;
            let scenario = load_scenario(&text).input()?;
            let mut cfg = Arm {
                planner,
                replan: matches!(replan, Toggle::On),
            }
            .config(timeout);
            if concurrent {
                cfg.mode = ExecMode::Concurrent;
            }
            let out = run(&scenario, &cfg).runtime()?;
            if let Some(path) = trace {
                let file = fs::File::create(path).runtime()?;
                out.trace.write_jsonl(std::io::BufWriter::new(file)).runtime()?;
            }
            let json = serde_json::to_string_pretty(&out.result).runtime()?;
            emit(&format!("{json}\n"));
        }
        Command::Batch { config } => {
            let text = read_file(&config).input()?;
            let mut cfg: BatchConfig = serde_json::from_str(&text).input()?;
            cfg.validate().input()?;
            cfg.resolve(config.parent().unwrap_or(Path::new(".")));
            let scenarios = batch_scenarios(&cfg).input()?;
            let rows = run_batch(&cfg, &scenarios, thread_count()).runtime()?;
            fs::create_dir_all(&cfg.output).runtime()?;
            write_rows(&cfg.output.join(RUNS_CSV), &rows).runtime()?;
            let recorded = serde_json::to_string_pretty(&cfg).runtime()?;
            fs::write(cfg.output.join("batch.json"), recorded).runtime()?;
            emit(&render_table(&aggregate(&rows)));
        }
        Command::Gen { seed, preset, output } => {
            let json = presets::by_name(&preset, seed).input()?.to_json();
            match output {
                Some(path) => fs::write(path, json).runtime()?,
                None => emit(&format!("{json}\n")),
            }
        }
        Command::Report { dir } => {
            let rows = read_dir_rows(&dir).input()?;
            if rows.is_empty() {
                return Err(Failure::Input(Error::validation(
                    "report",
                    format!("no runs found in {}", dir.display()),
                )));
            }
            emit(&render_table(&aggregate(&rows)));
        }
    }
    Ok(())
}
