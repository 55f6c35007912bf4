//! `capsac` command line: solve, generate, benchmark, export and oracle checks.

pub mod commands;
pub mod gen;
pub mod records;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use capsac::enumdecomp::MilpFlags;
use capsac::model::parse_seconds;
use capsac::vns::Neighborhoods;
use capsac::{Execution, Instance};
use clap::{Args, Parser, Subcommand};

use commands::{Candidates, Method, SolveOptions, Sweep};

#[derive(Debug, Parser)]
#[command(name = "capsac", version, about = "Covering-assignment solvers for drone swarms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and write the solution.
    Solve(SolveArgs),
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Run a manifest of instances and write one CSV row per line.
    Bench(BenchArgs),
    /// Write the mixed-integer model in LP format.
    ExportMilp(ExportArgs),
    /// Exhaustive optimum of a tiny instance.
    Oracle(OracleArgs),
}

fn seconds(text: &str) -> Result<f64, String> {
    parse_seconds(text).ok_or_else(|| format!("expected seconds or `inf`, got {text:?}"))
}

fn duration(text: &str) -> Result<Duration, String> {
    let s: f64 = text.parse().map_err(|e| format!("{e}"))?;
    Duration::try_from_secs_f64(s).map_err(|e| format!("{e}"))
}

/// Overrides applied on top of the instance file.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub sigma: Option<usize>,
    /// Transfer delay limit in seconds, or `inf`.
    #[arg(long, value_parser = seconds)]
    pub t_hat: Option<f64>,
}

impl InstanceArgs {
    pub fn load(&self) -> Result<Instance> {
        let mut inst = capsac::load_instance(&self.instance)
            .with_context(|| format!("loading instance {}", self.instance.display()))?;
        if let Some(s) = self.sigma {
            inst = inst.with_sigma(s)?;
        }
        if let Some(t) = self.t_hat {
            inst = inst.with_t_hat(t)?;
        }
        Ok(inst)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Seconds per VNS run, or per decomposition iteration.
    #[arg(long, value_parser = duration)]
    pub time_limit_s: Option<Duration>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Comma-separated subset of n1,n2,n3.
    #[arg(long, default_value = "n1,n2,n3")]
    pub neighborhoods: Neighborhoods,
    /// Shaking iterations per VNS run.
    #[arg(long)]
    pub max_iters: Option<u64>,
    /// Stop a VNS run once a feasible makespan at or below this is found.
    #[arg(long)]
    pub target: Option<f64>,
    /// Widen the decomposition interval until every sub-region is a candidate.
    #[arg(long)]
    pub exhaustive: bool,
    /// Branch-and-bound nodes per decomposition iteration.
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long)]
    pub sequential: bool,
    /// Leave the time column empty so the CSV is byte-stable.
    #[arg(long)]
    pub omit_timing: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

impl SearchArgs {
    pub fn options(&self, method: Method) -> Result<SolveOptions> {
        if self.runs == 0 {
            bail!("--runs must be positive");
        }
        Ok(SolveOptions {
            method,
            time_limit: self.time_limit_s,
            seed: self.seed,
            runs: self.runs,
            neighborhoods: self.neighborhoods,
            max_iterations: self.max_iters,
            target: self.target,
            exhaustive: self.exhaustive,
            node_limit: self.node_limit,
            execution: execution(self.sequential),
            omit_timing: self.omit_timing,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// vns or decomp.
    #[arg(long, default_value = "vns")]
    pub method: Method,
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Solution JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append the run row to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Reference makespan for the deviation column.
    #[arg(long)]
    pub reference: Option<f64>,
    /// Write the partition tree of the best VNS state here.
    #[arg(long)]
    pub tree_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 4)]
    pub photos: usize,
    #[arg(long, default_value_t = 2)]
    pub drones: usize,
    #[arg(long, default_value_t = 100)]
    pub capable_pct: u32,
    /// Per-photo λ drawn uniformly from [0.5, 1.5] times --lambda-s.
    #[arg(long, conflicts_with = "unweighted")]
    pub weighted: bool,
    #[arg(long)]
    pub unweighted: bool,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_s: f64,
    #[arg(long, default_value_t = 5.0)]
    pub mu_mb: f64,
    /// ROWSxCOLS.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub capacity_mbps: f64,
    #[arg(long, default_value_t = 1)]
    pub sigma: usize,
    #[arg(long, value_parser = seconds, default_value = "inf")]
    pub t_hat: f64,
    /// Instance JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GenArgs {
    pub fn spec(&self) -> Result<gen::GenSpec> {
        Ok(gen::GenSpec {
            photos: self.photos,
            drones: self.drones,
            capable_pct: self.capable_pct,
            weighted: self.weighted,
            lambda_s: self.lambda_s,
            mu_mb: self.mu_mb,
            grid: self.grid.as_deref().map(gen::parse_grid).transpose()?,
            seed: self.seed,
            capacity_mbps: self.capacity_mbps,
            sigma: self.sigma,
            t_hat: self.t_hat,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// CSV with columns instance,method,sigma[,t_hat_s][,reference].
    pub manifest: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep the delay limit downward instead of solving each line once.
    #[arg(long, requires = "t_hat_from")]
    pub sensitivity: bool,
    #[arg(long)]
    pub t_hat_from: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub t_hat_to: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// `all`, or `LO,HI` to keep sub-regions with LO..=HI photos.
    #[arg(long, default_value = "all")]
    pub candidates: Candidates,
    /// Require every capable drone to process at least one sub-region.
    #[arg(long)]
    pub per_drone_coverage: bool,
    /// LP path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also dump the sub-region catalog here.
    #[arg(long)]
    pub catalog_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Also print the optimum as a function of the delay limit.
    #[arg(long)]
    pub pareto: bool,
    /// Solution JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Feasible,
    Infeasible,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Feasible => 0,
            Status::Infeasible => 2,
        }
    }
}

/// Exit code for a failed command.
pub const ERROR_EXIT: i32 = 1;

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn status(feasible: bool) -> Status {
    if feasible {
        Status::Feasible
    } else {
        Status::Infeasible
    }
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Solve(a) => {
            let inst = a.instance.load()?;
            let fallback = a.instance.instance.display().to_string();
            let label = commands::instance_label(&inst, &fallback);
            let opts = a.search.options(a.method)?;
            let out = commands::solve(&inst, &label, &opts)?;
            if let Some(sol) = &out.solution {
                emit(a.out.as_deref(), &sol.to_json())?;
            } else {
                log::warn!("no feasible solution found");
            }
            if let Some(path) = &a.tree_out {
                match &out.tree_dump {
                    Some(t) => emit(Some(path), t)?,
                    None => log::warn!("--tree-out only applies to vns"),
                }
            }
            let record = out.record.clone().with_reference(a.reference);
            if let Some(path) = &a.csv {
                records::append_records(path, &[record])?;
            }
            Ok(status(out.feasible()))
        }
        Command::Gen(a) => {
            let inst = gen::generate(&a.spec()?)?;
            emit(a.out.as_deref(), &inst.to_json())?;
            Ok(Status::Feasible)
        }
        Command::Bench(a) => {
            let entries = commands::read_manifest(&a.manifest)?;
            let base = a.manifest.parent().unwrap_or(Path::new("."));
            let opts = a.search.options(Method::Vns)?;
            let rows = if a.sensitivity {
                let sweep = Sweep {
                    from: a.t_hat_from.expect("clap enforces --t-hat-from"),
                    to: a.t_hat_to,
                    step: a.step,
                };
                commands::sensitivity(&entries, base, sweep, &opts)?
            } else {
                commands::bench(&entries, base, &opts)?
            };
            let mut buf = Vec::new();
            records::write_records(&mut buf, &rows, true)?;
            emit(a.out.as_deref(), &String::from_utf8(buf)?)?;
            Ok(Status::Feasible)
        }
        Command::ExportMilp(a) => {
            let inst = a.instance.load()?;
            let flags = MilpFlags {
                per_drone_coverage: a.per_drone_coverage,
            };
            let export = commands::export_milp(&inst, &a.candidates, flags)?;
            if let Some(p) = &a.catalog_csv {
                emit(Some(p), &export.catalog_csv)?;
            }
            emit(a.out.as_deref(), &export.lp)?;
            Ok(Status::Feasible)
        }
        Command::Oracle(a) => {
            let inst = a.instance.load()?;
            let out = commands::run_oracle(&inst, a.pareto, execution(a.sequential))?;
            match &out.result.solution {
                Some(sol) => emit(a.out.as_deref(), &sol.to_json())?,
                None => log::warn!("no feasible solution exists"),
            }
            if let Some(front) = &out.front {
                emit(None, &commands::front_csv(front))?;
            }
            Ok(status(out.result.optimum.is_some()))
        }
    }
}
