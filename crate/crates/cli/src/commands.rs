//! Subcommand bodies, callable without going through argument parsing.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use capsac::enumdecomp::{self, Budget, DecompConfig, DecompOutcome, MilpFlags};
use capsac::model::parse_seconds;
use capsac::oracle;
use capsac::vns::{self, Neighborhood, Neighborhoods, VnsConfig};
use capsac::{Execution, GeoSums, Instance, Solution};
use serde::Deserialize;

use crate::records::{format_t_hat, round2, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Vns,
    Decomp,
}

impl std::str::FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "vns" => Ok(Method::Vns),
            "decomp" => Ok(Method::Decomp),
            other => bail!("unknown method {other:?}, expected vns or decomp"),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Vns => "vns",
            Method::Decomp => "decomp",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: Method,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub runs: usize,
    pub neighborhoods: Neighborhoods,
    pub max_iterations: Option<u64>,
    pub target: Option<f64>,
    pub exhaustive: bool,
    pub node_limit: Option<u64>,
    pub execution: Execution,
    pub omit_timing: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::Vns,
            time_limit: None,
            seed: 0,
            runs: 1,
            neighborhoods: Neighborhoods::all(),
            max_iterations: None,
            target: None,
            exhaustive: false,
            node_limit: None,
            execution: Execution::default(),
            omit_timing: false,
        }
    }
}

const DEFAULT_VNS_TIME: Duration = Duration::from_secs(1);

pub struct SolveOutput {
    /// Best solution found; for decomposition, `None` when nothing feasible
    /// was found.
    pub solution: Option<Solution>,
    pub record: RunRecord,
    /// Partition tree of the best VNS state.
    pub tree_dump: Option<String>,
    pub decomposition: Option<DecompOutcome>,
}

impl SolveOutput {
    pub fn feasible(&self) -> bool {
        self.record.feasible
    }
}

/// Warnings for neighborhoods that cannot act at this reliability level.
pub fn neighborhood_warnings(neighborhoods: Neighborhoods, sigma: usize) -> Vec<String> {
    let mut out = Vec::new();
    if neighborhoods.contains(Neighborhood::Transfer)
        && !neighborhoods.active(Neighborhood::Transfer, sigma)
    {
        out.push(format!("n1 inactive at sigma={sigma}"));
    }
    out
}

pub fn instance_label(inst: &Instance, fallback: &str) -> String {
    inst.name().map(str::to_string).unwrap_or_else(|| fallback.to_string())
}

pub fn solve(inst: &Instance, label: &str, opts: &SolveOptions) -> Result<SolveOutput> {
    let base = RunRecord {
        instance: label.to_string(),
        method: opts.method.to_string(),
        sigma: inst.sigma(),
        t_hat_s: format_t_hat(inst.t_hat()),
        seed: opts.seed,
        runs: opts.runs,
        best_t_max: None,
        avg_t_max: None,
        avg_time_s: None,
        feasible: false,
        n_lo: None,
        n_hi: None,
        reference: None,
        deviation_pct: None,
    };
    match opts.method {
        Method::Vns => {
            for w in neighborhood_warnings(opts.neighborhoods, inst.sigma()) {
                log::warn!("{w}");
            }
            let cfg = VnsConfig {
                time_limit: opts.time_limit.unwrap_or(DEFAULT_VNS_TIME),
                seed: opts.seed,
                neighborhoods: opts.neighborhoods,
                runs: opts.runs,
                max_iterations: opts.max_iterations,
                target: opts.target,
                execution: opts.execution,
            };
            let report = vns::vns_solve_report(inst, &cfg)?;
            let feasible_runs: Vec<f64> = report
                .runs
                .iter()
                .filter(|r| r.feasible)
                .map(|r| r.best_t_max)
                .collect();
            let avg_t_max = (!feasible_runs.is_empty())
                .then(|| round2(feasible_runs.iter().sum::<f64>() / feasible_runs.len() as f64));
            let avg_time = report.runs.iter().map(|r| r.time_to_best.as_secs_f64()).sum::<f64>()
                / report.runs.len() as f64;
            let feasible = report.solution.feasible;
            let record = RunRecord {
                best_t_max: feasible.then_some(report.solution.makespan),
                avg_t_max,
                avg_time_s: (!opts.omit_timing).then_some(avg_time),
                feasible,
                ..base
            };
            Ok(SolveOutput {
                tree_dump: Some(report.best.tree.to_string()),
                solution: Some(report.solution),
                record,
                decomposition: None,
            })
        }
        Method::Decomp => {
            let cfg = DecompConfig {
                exhaustive: opts.exhaustive,
                budget: Budget {
                    max_nodes: opts.node_limit,
                    time_limit: opts.time_limit,
                },
            };
            let started = Instant::now();
            let outcome = enumdecomp::decompose_solve(inst, &cfg);
            let elapsed = started.elapsed().as_secs_f64();
            if let Some((lo, hi)) = outcome.final_interval {
                log::info!("final interval [{lo},{hi}]");
            }
            let t = outcome.solution.as_ref().map(|s| s.makespan);
            let record = RunRecord {
                best_t_max: t,
                avg_t_max: t,
                avg_time_s: (!opts.omit_timing).then_some(elapsed),
                feasible: t.is_some(),
                n_lo: outcome.final_interval.map(|i| i.0),
                n_hi: outcome.final_interval.map(|i| i.1),
                ..base
            };
            Ok(SolveOutput {
                solution: outcome.solution.clone(),
                record,
                tree_dump: None,
                decomposition: Some(outcome),
            })
        }
    }
}

/// One manifest line: an instance file (relative to the manifest), a method,
/// a reliability level, a delay limit and an optional reference makespan.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestEntry {
    pub instance: String,
    pub method: String,
    pub sigma: usize,
    #[serde(default)]
    pub t_hat_s: Option<String>,
    #[serde(default)]
    pub reference: Option<f64>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    parse_manifest(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

struct Job {
    inst: Instance,
    label: String,
    method: Method,
    reference: Option<f64>,
}

fn prepare(entry: &ManifestEntry, base_dir: &Path) -> Result<Job> {
    let path: PathBuf = base_dir.join(&entry.instance);
    let inst = capsac::load_instance(&path)
        .with_context(|| format!("loading instance {}", path.display()))?;
    let mut inst = inst.with_sigma(entry.sigma)?;
    if let Some(t) = entry.t_hat_s.as_deref().filter(|t| !t.is_empty()) {
        let t = parse_seconds(t).with_context(|| format!("bad t_hat_s {t:?}"))?;
        inst = inst.with_t_hat(t)?;
    }
    Ok(Job {
        label: instance_label(&inst, &entry.instance),
        inst,
        method: entry.method.parse()?,
        reference: entry.reference,
    })
}

/// Runs every manifest line, one worker per line; rows come back in manifest
/// order.
pub fn bench(entries: &[ManifestEntry], base_dir: &Path, opts: &SolveOptions) -> Result<Vec<RunRecord>> {
    let jobs = entries
        .iter()
        .map(|e| prepare(e, base_dir))
        .collect::<Result<Vec<_>>>()?;
    let results = capsac::par::map_collect(opts.execution, &jobs, |job| {
        let o = SolveOptions {
            method: job.method,
            ..opts.clone()
        };
        solve(&job.inst, &job.label, &o).map(|out| out.record.with_reference(job.reference))
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Sweep {
    /// Delay limits from `from` down to `to` inclusive.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.from.is_finite() || !self.to.is_finite() || self.to > self.from {
            bail!("sweep needs finite from >= to and a positive step");
        }
        let n = ((self.from - self.to) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.from - i as f64 * self.step).collect())
    }
}

/// Delay-limit sensitivity: for every manifest line, one unconstrained row
/// followed by one row per swept limit. Deviations are measured against the
/// line's reference, or against the unconstrained result when none is given.
pub fn sensitivity(
    entries: &[ManifestEntry],
    base_dir: &Path,
    sweep: Sweep,
    opts: &SolveOptions,
) -> Result<Vec<RunRecord>> {
    let limits = sweep.values()?;
    let mut out = Vec::new();
    for entry in entries {
        let job = prepare(entry, base_dir)?;
        let o = SolveOptions {
            method: job.method,
            ..opts.clone()
        };
        let free_inst = job.inst.with_t_hat(f64::INFINITY)?;
        let free = solve(&free_inst, &job.label, &o)?.record;
        let reference = job.reference.or(free.best_t_max);
        out.push(free.with_reference(reference));
        let rows = capsac::par::map_collect(opts.execution, &limits, |&t| -> Result<RunRecord> {
            let inst = job.inst.with_t_hat(t)?;
            Ok(solve(&inst, &job.label, &o)?.record.with_reference(reference))
        });
        for r in rows {
            out.push(r?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidates {
    All,
    /// Sub-regions whose cardinality lies in `[lo, hi]`.
    Cardinality(usize, usize),
}

impl std::str::FromStr for Candidates {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Candidates::All);
        }
        let Some((lo, hi)) = s.split_once(',') else {
            bail!("candidates must be `all` or `LO,HI`");
        };
        Ok(Candidates::Cardinality(lo.trim().parse()?, hi.trim().parse()?))
    }
}

pub struct MilpExport {
    pub lp: String,
    pub catalog_csv: String,
}

pub fn export_milp(inst: &Instance, candidates: &Candidates, flags: MilpFlags) -> Result<MilpExport> {
    let geo = GeoSums::build(inst);
    let catalog = enumdecomp::enumerate_rects(inst, &geo);
    let chosen: Vec<usize> = match *candidates {
        Candidates::All => (0..catalog.len()).collect(),
        Candidates::Cardinality(lo, hi) => catalog
            .omega
            .iter()
            .filter(|&&n| lo <= n && n <= hi)
            .flat_map(|&n| catalog.with_cardinality(n).iter().copied())
            .collect(),
    };
    if chosen.is_empty() {
        bail!("no candidate sub-regions selected");
    }
    Ok(MilpExport {
        lp: enumdecomp::export_milp(inst, &geo, &catalog, &chosen, flags),
        catalog_csv: catalog.to_csv(),
    })
}

pub struct OracleOutput {
    pub result: oracle::OracleResult,
    pub front: Option<Vec<(f64, f64)>>,
}

pub fn run_oracle(inst: &Instance, with_front: bool, exec: Execution) -> Result<OracleOutput> {
    let result = oracle::brute_force_opt_with(inst, exec)?;
    let front = if with_front {
        Some(oracle::pareto_front(inst)?)
    } else {
        None
    };
    Ok(OracleOutput { result, front })
}

pub fn front_csv(front: &[(f64, f64)]) -> String {
    let mut s = String::from("required_t_hat_s,t_max\n");
    for (t, v) in front {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use capsac::testing::t4;

    fn quick(method: Method) -> SolveOptions {
        SolveOptions {
            method,
            max_iterations: Some(50),
            time_limit: Some(Duration::from_secs(5)),
            omit_timing: true,
            ..Default::default()
        }
    }

    #[test]
    fn vns_on_t4() {
        let out = solve(&t4(), "T4", &quick(Method::Vns)).unwrap();
        assert_eq!(out.record.best_t_max, Some(20.0));
        assert!(out.feasible());
        assert!(out.tree_dump.unwrap().starts_with("n0 d0"));
    }

    #[test]
    fn decomp_on_t4_ends_in_the_domino_interval() {
        let out = solve(&t4(), "T4", &quick(Method::Decomp)).unwrap();
        assert_eq!(out.record.best_t_max, Some(20.0));
        assert_eq!((out.record.n_lo, out.record.n_hi), (Some(2), Some(2)));
    }

    #[test]
    fn transfer_warning_at_sigma_one() {
        let only = Neighborhoods::none().with(Neighborhood::Transfer, true);
        assert_eq!(neighborhood_warnings(only, 1), vec!["n1 inactive at sigma=1"]);
        assert!(neighborhood_warnings(only, 2).is_empty());
        assert!(neighborhood_warnings(Neighborhoods::none(), 1).is_empty());
    }

    #[test]
    fn manifest_parsing() {
        assert!(parse_manifest("").unwrap().is_empty());
        assert!(parse_manifest("instance,method,sigma,t_hat_s,reference\n").unwrap().is_empty());
        let m = parse_manifest("instance,method,sigma,t_hat_s,reference\nt4.json, vns ,2,inf,\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].method, "vns");
        assert_eq!(m[0].t_hat_s.as_deref(), Some("inf"));
        assert_eq!(m[0].reference, None);
        assert!(parse_manifest("instance,method,sigma\nx,vns,two\n").is_err());
    }

    #[test]
    fn sweep_values() {
        let s = Sweep { from: 3.0, to: 1.0, step: 1.0 };
        assert_eq!(s.values().unwrap(), vec![3.0, 2.0, 1.0]);
        assert!(Sweep { from: 1.0, to: 3.0, step: 1.0 }.values().is_err());
        assert!(Sweep { from: 3.0, to: 1.0, step: 0.0 }.values().is_err());
    }

    #[test]
    fn candidate_selection() {
        let all = export_milp(&t4(), &Candidates::All, MilpFlags::default()).unwrap();
        assert!(all.lp.contains("o_8"));
        let dominoes = export_milp(&t4(), &"2,2".parse().unwrap(), MilpFlags::default()).unwrap();
        assert!(!dominoes.lp.contains("o_8 "));
        assert!(export_milp(&t4(), &"3,3".parse().unwrap(), MilpFlags::default()).is_err());
        assert_eq!(all.catalog_csv.lines().count(), 10);
    }
}
