//! Variable neighborhood search over (partition tree, assignment) states.
//!
//! Three neighborhoods are explored by first-improvement local search inside
//! a variable neighborhood descent: moving one assignment of a busiest drone
//! to another drone (transfer), exchanging assignments between a busiest
//! drone and another drone (swap), and moving the splitting hyperplanes
//! around leaves processed by a busiest drone (hyperplane). Diversification
//! regrows a random sub-tree at a depth chosen by the shaking step `k`.

pub mod eval;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geosum::GeoSums;
use crate::model::{DemandDelay, Instance, Rect, Solution};
use crate::par::{self, Execution};
use crate::ptree::{HyperplaneMove, PartitionTree, TreeError};
use eval::{strictly_less, Evaluation, Evaluator, MmfMemo};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VnsError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("unknown neighborhood {0:?} (expected n1, n2 or n3)")]
    UnknownNeighborhood(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Neighborhood {
    Transfer,
    Swap,
    Hyperplane,
}

impl Neighborhood {
    pub const ALL: [Neighborhood; 3] = [
        Neighborhood::Transfer,
        Neighborhood::Swap,
        Neighborhood::Hyperplane,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Neighborhood::Transfer => "n1",
            Neighborhood::Swap => "n2",
            Neighborhood::Hyperplane => "n3",
        }
    }
}

/// Enabled subset of the three neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighborhoods([bool; 3]);

impl Neighborhoods {
    pub fn all() -> Self {
        Self([true; 3])
    }

    pub fn none() -> Self {
        Self([false; 3])
    }

    pub fn with(mut self, n: Neighborhood, on: bool) -> Self {
        self.0[n as usize] = on;
        self
    }

    pub fn contains(&self, n: Neighborhood) -> bool {
        self.0[n as usize]
    }

    /// Transfer moves cannot help when every region has exactly one drone
    /// and every drone exactly one region.
    pub fn active(&self, n: Neighborhood, sigma: usize) -> bool {
        self.contains(n) && !(n == Neighborhood::Transfer && sigma == 1)
    }
}

impl Default for Neighborhoods {
    fn default() -> Self {
        Self::all()
    }
}

impl FromStr for Neighborhoods {
    type Err = VnsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Self::none();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let n = match part.to_ascii_lowercase().as_str() {
                "n1" => Neighborhood::Transfer,
                "n2" => Neighborhood::Swap,
                "n3" => Neighborhood::Hyperplane,
                _ => return Err(VnsError::UnknownNeighborhood(part.to_string())),
            };
            out = out.with(n, true);
        }
        Ok(out)
    }
}

impl fmt::Display for Neighborhoods {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = Neighborhood::ALL
            .iter()
            .filter(|&&n| self.contains(n))
            .map(|n| n.label())
            .collect();
        f.write_str(&labels.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct VnsConfig {
    pub time_limit: Duration,
    pub seed: u64,
    pub neighborhoods: Neighborhoods,
    /// Independent runs seeded `seed, seed + 1, ...`; the best is returned.
    pub runs: usize,
    /// Cap on shaking iterations per run.
    pub max_iterations: Option<u64>,
    /// Stop a run once a feasible state reaches this makespan.
    pub target: Option<f64>,
    pub execution: Execution,
}

impl Default for VnsConfig {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(1),
            seed: 0,
            neighborhoods: Neighborhoods::all(),
            runs: 1,
            max_iterations: None,
            target: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub tree: PartitionTree,
    /// Dense drone indices per leaf, ascending, in leaf order.
    pub assignment: Vec<Vec<usize>>,
    pub eval: Evaluation,
}

impl SearchState {
    pub fn regions(&self) -> Vec<Rect> {
        self.tree.leaf_rects()
    }

    pub fn to_solution(&self, inst: &Instance) -> Solution {
        Solution {
            regions: self.regions(),
            assignment: self
                .assignment
                .iter()
                .map(|ds| ds.iter().map(|&d| inst.drone_id(d)).collect())
                .collect(),
            makespan: self.eval.t_max,
            delays: self
                .eval
                .demands
                .iter()
                .map(|d| DemandDelay {
                    from: inst.drone_id(d.from),
                    to: inst.drone_id(d.to),
                    seconds: d.delay,
                })
                .collect(),
            feasible: self.eval.delay_feasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    /// Replace `from` by `to` on one leaf.
    Transfer { leaf: usize, from: usize, to: usize },
    /// `a` leaves leaf `leaf_a` for `leaf_b`, `b` goes the other way.
    Swap {
        leaf_a: usize,
        a: usize,
        leaf_b: usize,
        b: usize,
    },
    Hyperplane(HyperplaneMove),
}

fn region_counts(inst: &Instance, assignment: &[Vec<usize>]) -> Vec<usize> {
    let mut counts = vec![0; inst.drones().len()];
    for ds in assignment {
        for &d in ds {
            counts[d] += 1;
        }
    }
    counts
}

/// All moves of neighborhood `n` from `state`, in scan order: leaves in leaf
/// order, drones by id, hyperplane moves by (node pre-order, axis, index).
pub fn neighbors(
    inst: &Instance,
    geo: &GeoSums,
    state: &SearchState,
    n: Neighborhood,
) -> Vec<Move> {
    let d_max = &state.eval.d_max;
    let in_max = |d: usize| d_max.binary_search(&d).is_ok();
    let a = &state.assignment;
    let mut out = Vec::new();
    match n {
        Neighborhood::Transfer => {
            let counts = region_counts(inst, a);
            for (leaf, ds) in a.iter().enumerate() {
                for &d in ds.iter().filter(|&&d| in_max(d) && counts[d] >= 2) {
                    for &e in inst.capable() {
                        if !in_max(e) && !ds.contains(&e) {
                            out.push(Move::Transfer { leaf, from: d, to: e });
                        }
                    }
                }
            }
        }
        Neighborhood::Swap => {
            for (leaf_a, da) in a.iter().enumerate() {
                for &x in da.iter().filter(|&&d| in_max(d)) {
                    for (leaf_b, db) in a.iter().enumerate() {
                        if leaf_b == leaf_a || db.contains(&x) {
                            continue;
                        }
                        for &y in db {
                            if !in_max(y) && !da.contains(&y) {
                                out.push(Move::Swap {
                                    leaf_a,
                                    a: x,
                                    leaf_b,
                                    b: y,
                                });
                            }
                        }
                    }
                }
            }
        }
        Neighborhood::Hyperplane => {
            let tree = &state.tree;
            let mut parents: Vec<usize> = tree
                .leaves()
                .iter()
                .zip(a)
                .filter(|(_, ds)| ds.iter().any(|&d| in_max(d)))
                .filter_map(|(&leaf, _)| tree.node(leaf).parent)
                .collect();
            parents.sort_unstable();
            parents.dedup();
            let mut seen = std::collections::HashSet::new();
            for p in parents {
                for mv in tree.enumerate_hyperplane_moves(geo, p) {
                    if seen.insert((mv.target, mv.to)) {
                        out.push(Move::Hyperplane(mv));
                    }
                }
            }
        }
    }
    out
}

fn replace(ds: &mut [usize], from: usize, to: usize) {
    let i = ds.iter().position(|&d| d == from).expect("drone on leaf");
    ds[i] = to;
    ds.sort_unstable();
}

/// The tree and assignment reached by `mv`; evaluation is left to the caller.
pub fn apply_move(
    geo: &GeoSums,
    tree: &PartitionTree,
    assignment: &[Vec<usize>],
    mv: &Move,
) -> Result<(PartitionTree, Vec<Vec<usize>>), TreeError> {
    let mut a = assignment.to_vec();
    match *mv {
        Move::Transfer { leaf, from, to } => {
            replace(&mut a[leaf], from, to);
            Ok((tree.clone(), a))
        }
        Move::Swap {
            leaf_a,
            a: x,
            leaf_b,
            b: y,
        } => {
            replace(&mut a[leaf_a], x, y);
            replace(&mut a[leaf_b], y, x);
            Ok((tree.clone(), a))
        }
        Move::Hyperplane(ref hm) => Ok((tree.apply_hyperplane_move(geo, hm)?, a)),
    }
}

/// Regrows a random sub-tree rooted at depth `D(T) - k`, or the nearest
/// shallower depth holding a non-leaf. Leaf order under the sub-tree is
/// positional, so the assignment carries over unchanged.
pub fn shake<R: Rng + ?Sized>(
    geo: &GeoSums,
    tree: &PartitionTree,
    k: usize,
    rng: &mut R,
) -> Result<PartitionTree, TreeError> {
    let mut depth = tree.depth().saturating_sub(k);
    loop {
        let nodes = tree.non_leaves_at_depth(depth);
        if let Some(&node) = nodes.choose(rng) {
            return tree.reconstruct_subtree(geo, node, rng);
        }
        if depth == 0 {
            return Err(TreeError::LeafNode(tree.root()));
        }
        depth -= 1;
    }
}

/// Random tree, `sigma` random distinct drones per leaf, then repair so that
/// every capable drone has a leaf.
pub fn random_assignment<R: Rng + ?Sized>(inst: &Instance, leaves: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let capable = inst.capable();
    let mut a: Vec<Vec<usize>> = (0..leaves)
        .map(|_| {
            let mut ds: Vec<usize> = index::sample(rng, capable.len(), inst.sigma())
                .into_iter()
                .map(|i| capable[i])
                .collect();
            ds.sort_unstable();
            ds
        })
        .collect();
    loop {
        let counts = region_counts(inst, &a);
        let Some(&empty) = capable.iter().find(|&&d| counts[d] == 0) else {
            break;
        };
        let slots: Vec<(usize, usize)> = a
            .iter()
            .enumerate()
            .flat_map(|(leaf, ds)| ds.iter().map(move |&d| (leaf, d)))
            .filter(|&(_, d)| counts[d] >= 2)
            .collect();
        let &(leaf, d) = slots
            .choose(rng)
            .expect("some drone holds two slots while another holds none");
        replace(&mut a[leaf], d, empty);
    }
    a
}

/// Checks the search invariants: leaf count, photo partition, reliability
/// and per-drone coverage.
pub fn check_state(inst: &Instance, geo: &GeoSums, tree: &PartitionTree, assignment: &[Vec<usize>]) -> Vec<String> {
    let mut out = tree.check(geo);
    if tree.leaves().len() != inst.m() {
        out.push(format!("{} leaves, expected {}", tree.leaves().len(), inst.m()));
    }
    if assignment.len() != tree.leaves().len() {
        out.push(format!(
            "{} assignment entries for {} leaves",
            assignment.len(),
            tree.leaves().len()
        ));
        return out;
    }
    for (i, ds) in assignment.iter().enumerate() {
        let mut sorted = ds.clone();
        sorted.dedup();
        if sorted.len() != ds.len() || ds.windows(2).any(|w| w[0] >= w[1]) {
            out.push(format!("leaf {i} drones not strictly ascending"));
        }
        if ds.len() < inst.sigma() {
            out.push(format!("leaf {i} has {} < σ={} drones", ds.len(), inst.sigma()));
        }
        if ds.iter().any(|&d| !inst.drones()[d].capable) {
            out.push(format!("leaf {i} assigned to a non-capable drone"));
        }
    }
    let counts = region_counts(inst, assignment);
    for &d in inst.capable() {
        if counts[d] == 0 {
            out.push(format!("drone {} has no region", inst.drone_id(d)));
        }
    }
    out
}

/// One search thread: evaluator, memo and stopping rules.
pub struct Search<'a> {
    ev: Evaluator<'a>,
    neighborhoods: Neighborhoods,
    pub memo: MmfMemo,
    deadline: Option<Instant>,
    pub evaluations: u64,
}

impl<'a> Search<'a> {
    pub fn new(inst: &'a Instance, geo: &'a GeoSums, neighborhoods: Neighborhoods) -> Self {
        Self {
            ev: Evaluator::new(inst, geo),
            neighborhoods,
            memo: MmfMemo::new(),
            deadline: None,
            evaluations: 0,
        }
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn evaluate(&mut self, tree: PartitionTree, assignment: Vec<Vec<usize>>) -> SearchState {
        self.evaluations += 1;
        let eval = self
            .ev
            .evaluate(&tree.leaf_rects(), &assignment, Some(&mut self.memo));
        SearchState {
            tree,
            assignment,
            eval,
        }
    }

    pub fn initial_state<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SearchState, TreeError> {
        let inst = self.ev.instance();
        let tree = PartitionTree::random(self.ev.geo(), inst.m(), rng)?;
        let assignment = random_assignment(inst, tree.leaves().len(), rng);
        Ok(self.evaluate(tree, assignment))
    }

    /// First-improvement descent in one neighborhood.
    pub fn local_search(&mut self, mut state: SearchState, n: Neighborhood) -> SearchState {
        let (inst, geo) = (self.ev.instance(), self.ev.geo());
        'outer: loop {
            if self.expired() {
                return state;
            }
            for mv in neighbors(inst, geo, &state, n) {
                let (tree, assignment) =
                    apply_move(geo, &state.tree, &state.assignment, &mv).expect("fresh move applies");
                if state.eval.delay_feasible {
                    let t = self.ev.makespan(&tree.leaf_rects(), &assignment);
                    if !strictly_less(t, state.eval.t_max) {
                        continue;
                    }
                }
                let candidate = self.evaluate(tree, assignment);
                if candidate.eval.improves_on(&state.eval) {
                    state = candidate;
                    continue 'outer;
                }
            }
            return state;
        }
    }

    /// Variable neighborhood descent over the active neighborhoods.
    pub fn vnd(&mut self, mut state: SearchState) -> SearchState {
        let sigma = self.ev.instance().sigma();
        let start = if sigma > 1 { 0 } else { 1 };
        let mut t = start;
        while t < Neighborhood::ALL.len() {
            let n = Neighborhood::ALL[t];
            if !self.neighborhoods.active(n, sigma) {
                t += 1;
                continue;
            }
            let next = self.local_search(state.clone(), n);
            if next.eval.improves_on(&state.eval) {
                state = next;
                t = start;
            } else {
                t += 1;
            }
            if self.expired() {
                break;
            }
        }
        state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub seed: u64,
    pub best_t_max: f64,
    pub feasible: bool,
    pub time_to_best: Duration,
    pub elapsed: Duration,
    pub iterations: u64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnsReport {
    pub solution: Solution,
    pub best: SearchState,
    pub best_run: usize,
    pub runs: Vec<RunStats>,
}

fn reached(state: &SearchState, bound: Option<f64>) -> bool {
    state.eval.delay_feasible && bound.is_some_and(|b| !strictly_less(b, state.eval.t_max))
}

/// One seeded VNS run.
pub fn vns_run(inst: &Instance, geo: &GeoSums, cfg: &VnsConfig, seed: u64) -> Result<(SearchState, RunStats), VnsError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut search = Search::new(inst, geo, cfg.neighborhoods).with_deadline(started + cfg.time_limit);
    let lb = crate::model::lower_bound(inst);
    let initial = search.initial_state(&mut rng)?;
    let mut best = search.vnd(initial);
    let mut time_to_best = started.elapsed();
    let mut iterations = 0u64;
    let done = |s: &SearchState| reached(s, Some(lb)) || reached(s, cfg.target);

    if best.tree.leaves().len() > 1 {
        let mut k = 1;
        let mut k_max = best.tree.depth().max(1);
        while !done(&best)
            && started.elapsed() < cfg.time_limit
            && cfg.max_iterations.is_none_or(|cap| iterations < cap)
        {
            iterations += 1;
            let tree = shake(geo, &best.tree, k, &mut rng)?;
            let shaken = search.evaluate(tree, best.assignment.clone());
            let candidate = search.vnd(shaken);
            if candidate.eval.improves_on(&best.eval) {
                best = candidate;
                time_to_best = started.elapsed();
                k = 1;
                k_max = best.tree.depth().max(1);
                log::debug!(
                    "seed {seed}: {:.3}s T_max={} k={k} feasible={}",
                    time_to_best.as_secs_f64(),
                    best.eval.t_max,
                    best.eval.delay_feasible
                );
            } else {
                k = if k >= k_max { 1 } else { k + 1 };
            }
        }
    }
    let stats = RunStats {
        seed,
        best_t_max: best.eval.t_max,
        feasible: best.eval.delay_feasible,
        time_to_best,
        elapsed: started.elapsed(),
        iterations,
        evaluations: search.evaluations,
    };
    Ok((best, stats))
}

/// Best of `cfg.runs` independent runs; ties go to the lowest run index.
pub fn vns_solve_report(inst: &Instance, cfg: &VnsConfig) -> Result<VnsReport, VnsError> {
    if cfg.runs == 0 {
        return Err(VnsError::NoRuns);
    }
    let geo = GeoSums::build(inst);
    let results = par::map_indices(cfg.execution, cfg.runs, |r| {
        vns_run(inst, &geo, cfg, cfg.seed.wrapping_add(r as u64))
    });
    let mut states = Vec::with_capacity(cfg.runs);
    let mut runs = Vec::with_capacity(cfg.runs);
    for r in results {
        let (s, st) = r?;
        states.push(s);
        runs.push(st);
    }
    let mut best_run = 0;
    for (i, s) in states.iter().enumerate().skip(1) {
        if s.eval.improves_on(&states[best_run].eval) {
            best_run = i;
        }
    }
    let best = states.swap_remove(best_run);
    Ok(VnsReport {
        solution: best.to_solution(inst),
        best,
        best_run,
        runs,
    })
}

pub fn vns_solve(inst: &Instance, cfg: &VnsConfig) -> Result<Solution, VnsError> {
    Ok(vns_solve_report(inst, cfg)?.solution)
}
