//! Rectangular sub-region catalog, cardinality decomposition and an exact
//! branch-and-bound solver for the covering-assignment problem restricted to
//! a candidate set of sub-regions. Also writes the full mixed-integer model
//! in LP text format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use itertools::Itertools;

use crate::geosum::GeoSums;
use crate::model::{lower_bound, DemandDelay, Instance, Rect, Solution};
use crate::vns::eval::{strictly_less, Evaluator, MmfMemo};

#[derive(Debug, Clone, PartialEq)]
pub struct SubRegion {
    pub rect: Rect,
    pub cardinality: usize,
    pub time: f64,
    /// Megabytes of this region stored on each drone, by dense index.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubRegionCatalog {
    pub regions: Vec<SubRegion>,
    /// Distinct cardinalities, ascending.
    pub omega: Vec<usize>,
    /// Region indices per cardinality.
    pub omega_map: BTreeMap<usize, Vec<usize>>,
}

impl SubRegionCatalog {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn with_cardinality(&self, n: usize) -> &[usize] {
        self.omega_map.get(&n).map_or(&[], Vec::as_slice)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,c_lt,c_gt,l_lo,l_hi,cardinality,time_s\n");
        for (i, r) in self.regions.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{}",
                r.rect.c_lt, r.rect.c_gt, r.rect.l_lo, r.rect.l_hi, r.cardinality, r.time
            );
        }
        out
    }
}

/// Every rectangle whose four borders each touch a photo inside it. Such
/// tight rectangles are in one-to-one correspondence with the distinct
/// nonempty photo sets cut out by rectangles.
pub fn enumerate_rects(inst: &Instance, geo: &GeoSums) -> SubRegionCatalog {
    let (cols, rows) = (geo.cols(), geo.rows());
    let n = inst.drones().len();
    let mut regions = Vec::new();
    for c_lt in 0..cols {
        for c_gt in c_lt..cols {
            for l_lo in 0..rows {
                for l_hi in l_lo..rows {
                    let count = |r: Rect| geo.region_count(&r) > 0;
                    let tight = count(Rect::new(c_lt, c_lt, l_lo, l_hi))
                        && count(Rect::new(c_gt, c_gt, l_lo, l_hi))
                        && count(Rect::new(c_lt, c_gt, l_lo, l_lo))
                        && count(Rect::new(c_lt, c_gt, l_hi, l_hi));
                    if !tight {
                        continue;
                    }
                    let rect = Rect::new(c_lt, c_gt, l_lo, l_hi);
                    regions.push(SubRegion {
                        rect,
                        cardinality: geo.region_count(&rect),
                        time: geo.region_time(&rect),
                        data: (0..n).map(|h| geo.region_data_by_index(h, &rect)).collect(),
                    });
                }
            }
        }
    }
    let (omega, omega_map) = build_cardinality_index(&regions);
    SubRegionCatalog {
        regions,
        omega,
        omega_map,
    }
}

pub fn build_cardinality_index(regions: &[SubRegion]) -> (Vec<usize>, BTreeMap<usize, Vec<usize>>) {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in regions.iter().enumerate() {
        map.entry(r.cardinality).or_default().push(i);
    }
    (map.keys().copied().collect(), map)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Budget {
    pub max_nodes: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedOutcome {
    /// Best feasible solution found (possibly the warm start).
    pub solution: Option<Solution>,
    /// The search finished, so `solution` is optimal over the candidates, or
    /// no feasible solution exists among them.
    pub proven: bool,
    pub nodes: u64,
}

impl RestrictedOutcome {
    pub fn t_max(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.makespan)
    }

    pub fn infeasible(&self) -> bool {
        self.proven && self.solution.is_none()
    }
}

struct Bitset(Vec<u64>);

impl Bitset {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
}

struct Stop;

struct BranchAndBound<'a> {
    inst: &'a Instance,
    ev: Evaluator<'a>,
    memo: MmfMemo,
    cat: &'a SubRegionCatalog,
    /// Candidate catalog indices.
    cand: Vec<usize>,
    members: Vec<Bitset>,
    /// Candidate positions containing each photo, most balanced first.
    covering: Vec<Vec<usize>>,
    /// Photos ordered by how few candidates cover them.
    photo_order: Vec<usize>,
    /// Candidate positions by ascending time.
    by_time: Vec<usize>,
    subsets: Vec<Vec<usize>>,
    exact_sigma: bool,
    min_time: f64,
    max_card: usize,
    global_lb: f64,
    best: f64,
    best_solution: Option<Solution>,
    nodes: u64,
    budget: Budget,
    started: Instant,
}

impl<'a> BranchAndBound<'a> {
    fn tick(&mut self) -> Result<(), Stop> {
        self.nodes += 1;
        if self.budget.max_nodes.is_some_and(|cap| self.nodes > cap) {
            return Err(Stop);
        }
        if self.nodes.is_multiple_of(1024) && self.budget.time_limit.is_some_and(|t| self.started.elapsed() >= t) {
            return Err(Stop);
        }
        Ok(())
    }

    fn done(&self) -> bool {
        !strictly_less(self.global_lb, self.best)
    }

    fn bound(&self, chosen: &[usize]) -> f64 {
        let m = self.inst.m();
        let (sum, max) = chosen
            .iter()
            .map(|&c| self.cat.regions[self.cand[c]].time)
            .fold((0.0, 0.0f64), |(s, mx), t| (s + t, mx.max(t)));
        let rest = (m - chosen.len()) as f64 * self.min_time;
        max.max(self.inst.sigma() as f64 * (sum + rest) / m as f64)
    }

    fn cover(&mut self, chosen: &mut Vec<usize>, covered: &mut Vec<u32>, forbidden: &mut [bool]) -> Result<(), Stop> {
        self.tick()?;
        if self.done() || !strictly_less(self.bound(chosen), self.best) {
            return Ok(());
        }
        let m = self.inst.m();
        let Some(&p) = self.photo_order.iter().find(|&&p| covered[p] == 0) else {
            return self.complete(chosen, forbidden);
        };
        if chosen.len() == m {
            return Ok(());
        }
        let uncovered = covered.iter().filter(|&&c| c == 0).count();
        if uncovered > (m - chosen.len()) * self.max_card {
            return Ok(());
        }
        let options = self.covering[p].clone();
        let mut banned = Vec::new();
        for c in options {
            if forbidden[c] {
                continue;
            }
            self.include(c, covered, 1);
            chosen.push(c);
            let r = self.cover(chosen, covered, forbidden);
            chosen.pop();
            self.include(c, covered, -1);
            r?;
            forbidden[c] = true;
            banned.push(c);
        }
        for c in banned {
            forbidden[c] = false;
        }
        Ok(())
    }

    fn include(&self, c: usize, covered: &mut [u32], delta: i32) {
        for (p, slot) in covered.iter_mut().enumerate() {
            if self.members[c].get(p) {
                *slot = (*slot as i32 + delta) as u32;
            }
        }
    }

    /// All photos are covered; add the missing regions from those not yet
    /// chosen or excluded.
    fn complete(&mut self, chosen: &mut Vec<usize>, forbidden: &[bool]) -> Result<(), Stop> {
        let missing = self.inst.m() - chosen.len();
        let pool: Vec<usize> = self
            .by_time
            .iter()
            .copied()
            .filter(|c| !forbidden[*c] && !chosen.contains(c))
            .collect();
        if pool.len() < missing {
            return Ok(());
        }
        if missing == 0 {
            return self.assign(chosen);
        }
        if self.inst.t_hat().is_infinite() {
            // with no delay limit the optimum is monotone in region times
            let base = chosen.len();
            chosen.extend_from_slice(&pool[..missing]);
            let r = self.assign(chosen);
            chosen.truncate(base);
            return r;
        }
        self.extend_from(chosen, &pool, 0, missing)
    }

    fn extend_from(&mut self, chosen: &mut Vec<usize>, pool: &[usize], from: usize, missing: usize) -> Result<(), Stop> {
        if missing == 0 {
            return self.assign(chosen);
        }
        for i in from..=pool.len() - missing {
            self.tick()?;
            chosen.push(pool[i]);
            let prune = !strictly_less(self.bound(chosen), self.best);
            if !prune {
                let r = self.extend_from(chosen, pool, i + 1, missing - 1);
                if r.is_err() {
                    chosen.pop();
                    return r;
                }
            }
            chosen.pop();
            if prune || self.done() {
                // later pool entries are no shorter, so the bound only grows
                break;
            }
        }
        Ok(())
    }

    fn assign(&mut self, chosen: &[usize]) -> Result<(), Stop> {
        let mut order: Vec<usize> = chosen.to_vec();
        order.sort_by(|&a, &b| {
            let (ta, tb) = (self.cat.regions[self.cand[a]].time, self.cat.regions[self.cand[b]].time);
            tb.total_cmp(&ta).then(a.cmp(&b))
        });
        let times: Vec<f64> = order.iter().map(|&c| self.cat.regions[self.cand[c]].time).collect();
        let suffix: Vec<f64> = {
            let mut s = vec![0.0; times.len() + 1];
            for i in (0..times.len()).rev() {
                s[i] = s[i + 1] + times[i];
            }
            s
        };
        let mut loads = vec![0.0; self.inst.drones().len()];
        let mut counts = vec![0usize; self.inst.drones().len()];
        let mut picks: Vec<usize> = Vec::with_capacity(order.len());
        self.assign_rec(&order, &times, &suffix, &mut loads, &mut counts, &mut picks, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn assign_rec(
        &mut self,
        order: &[usize],
        times: &[f64],
        suffix: &[f64],
        loads: &mut Vec<f64>,
        counts: &mut Vec<usize>,
        picks: &mut Vec<usize>,
        touched: usize,
    ) -> Result<(), Stop> {
        self.tick()?;
        if self.done() {
            return Ok(());
        }
        let i = picks.len();
        let capable = self.inst.capable();
        let m = capable.len();
        let sigma = self.inst.sigma();
        if i == order.len() {
            if capable.iter().any(|&d| counts[d] == 0) {
                return Ok(());
            }
            return self.accept(order, picks);
        }
        let uncovered = capable.iter().filter(|&&d| counts[d] == 0).count();
        let widest = if self.exact_sigma { sigma } else { m };
        if uncovered > (order.len() - i) * widest {
            return Ok(());
        }
        let assigned: f64 = loads.iter().sum();
        if !strictly_less(sigma as f64 * suffix[i] / m as f64 + assigned / m as f64, self.best) {
            return Ok(());
        }
        let t = times[i];
        for s in 0..self.subsets.len() {
            let positions = &self.subsets[s];
            if self.exact_sigma {
                // untouched drones are interchangeable: only the lowest fresh ones
                let fresh: Vec<usize> = positions.iter().copied().filter(|&p| p >= touched).collect();
                if fresh.iter().enumerate().any(|(k, &p)| p != touched + k) {
                    continue;
                }
            }
            if positions.iter().any(|&p| !strictly_less(loads[capable[p]] + t, self.best)) {
                continue;
            }
            let next_touched = if self.exact_sigma {
                touched.max(positions.iter().map(|&p| p + 1).max().unwrap_or(0))
            } else {
                touched
            };
            for &p in positions {
                loads[capable[p]] += t;
                counts[capable[p]] += 1;
            }
            picks.push(s);
            let r = self.assign_rec(order, times, suffix, loads, counts, picks, next_touched);
            picks.pop();
            for &p in &self.subsets[s] {
                loads[capable[p]] -= t;
                counts[capable[p]] -= 1;
            }
            r?;
        }
        Ok(())
    }

    fn accept(&mut self, order: &[usize], picks: &[usize]) -> Result<(), Stop> {
        let capable = self.inst.capable();
        let mut pairs: Vec<(Rect, Vec<usize>)> = order
            .iter()
            .zip(picks)
            .map(|(&c, &s)| {
                (
                    self.cat.regions[self.cand[c]].rect,
                    self.subsets[s].iter().map(|&p| capable[p]).collect(),
                )
            })
            .collect();
        pairs.sort();
        let (regions, assignment): (Vec<Rect>, Vec<Vec<usize>>) = pairs.into_iter().unzip();
        let eval = self.ev.evaluate(&regions, &assignment, Some(&mut self.memo));
        if !eval.delay_feasible || !strictly_less(eval.t_max, self.best) {
            return Ok(());
        }
        self.best = eval.t_max;
        self.best_solution = Some(Solution {
            regions,
            assignment: assignment
                .iter()
                .map(|ds| ds.iter().map(|&d| self.inst.drone_id(d)).collect())
                .collect(),
            makespan: eval.t_max,
            delays: eval
                .demands
                .iter()
                .map(|d| DemandDelay {
                    from: self.inst.drone_id(d.from),
                    to: self.inst.drone_id(d.to),
                    seconds: d.delay,
                })
                .collect(),
            feasible: true,
        });
        Ok(())
    }
}

/// Exact optimum over coverings built from `candidates` (catalog indices):
/// exactly `m` distinct regions covering every photo, each assigned to at
/// least `sigma` capable drones, every capable drone used, all delays within
/// the limit. `warm` must be a feasible solution drawn from the candidates;
/// it serves as the initial incumbent.
pub fn solve_restricted(
    inst: &Instance,
    geo: &GeoSums,
    catalog: &SubRegionCatalog,
    candidates: &[usize],
    budget: Budget,
    warm: Option<&Solution>,
) -> RestrictedOutcome {
    let started = Instant::now();
    let mut cand: Vec<usize> = candidates.to_vec();
    cand.sort_unstable();
    cand.dedup();
    let np = inst.photos().len();
    let members: Vec<Bitset> = cand
        .iter()
        .map(|&c| {
            let r = catalog.regions[c].rect;
            let mut b = Bitset::new(np);
            for (p, &(col, row)) in inst.cells().iter().enumerate() {
                if r.contains(col, row) {
                    b.set(p);
                }
            }
            b
        })
        .collect();
    let target = geo.total_time() / inst.m() as f64;
    let mut covering: Vec<Vec<usize>> = vec![Vec::new(); np];
    for (c, b) in members.iter().enumerate() {
        for (p, list) in covering.iter_mut().enumerate() {
            if b.get(p) {
                list.push(c);
            }
        }
    }
    for list in &mut covering {
        list.sort_by(|&a, &b| {
            let da = (catalog.regions[cand[a]].time - target).abs();
            let db = (catalog.regions[cand[b]].time - target).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
    }
    let mut photo_order: Vec<usize> = (0..np).collect();
    photo_order.sort_by_key(|&p| (covering[p].len(), p));
    let mut by_time: Vec<usize> = (0..cand.len()).collect();
    by_time.sort_by(|&a, &b| {
        catalog.regions[cand[a]]
            .time
            .total_cmp(&catalog.regions[cand[b]].time)
            .then(a.cmp(&b))
    });
    let m = inst.m();
    let exact_sigma = inst.t_hat().is_infinite();
    let sizes: Vec<usize> = if exact_sigma {
        vec![inst.sigma()]
    } else {
        (inst.sigma()..=m).collect()
    };
    let subsets: Vec<Vec<usize>> = sizes
        .into_iter()
        .flat_map(|k| (0..m).combinations(k))
        .collect();

    let mut bb = BranchAndBound {
        inst,
        ev: Evaluator::new(inst, geo),
        memo: MmfMemo::new(),
        cat: catalog,
        min_time: by_time
            .first()
            .map_or(0.0, |&c| catalog.regions[cand[c]].time),
        max_card: cand.iter().map(|&c| catalog.regions[c].cardinality).max().unwrap_or(0),
        cand,
        members,
        covering,
        photo_order,
        by_time,
        subsets,
        exact_sigma,
        global_lb: lower_bound(inst),
        best: warm.map_or(f64::INFINITY, |s| s.makespan),
        best_solution: warm.cloned(),
        nodes: 0,
        budget,
        started,
    };
    let n = bb.cand.len();
    let finished = bb
        .cover(&mut Vec::new(), &mut vec![0; np], &mut vec![false; n])
        .is_ok();
    RestrictedOutcome {
        solution: bb.best_solution,
        proven: finished,
        nodes: bb.nodes,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecompConfig {
    /// Keep widening until every sub-region is a candidate, ignoring the
    /// repeated-objective stop.
    pub exhaustive: bool,
    /// Per-iteration budget for the restricted solver.
    pub budget: Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompIteration {
    pub n_lo: usize,
    pub n_hi: usize,
    pub candidates: usize,
    pub t_max: Option<f64>,
    pub proven: bool,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompOutcome {
    pub solution: Option<Solution>,
    pub trace: Vec<DecompIteration>,
    /// Snapped starting interval.
    pub initial_interval: (usize, usize),
    /// Interval of the iteration that produced the returned solution.
    pub final_interval: Option<(usize, usize)>,
    /// No feasible covering exists at all.
    pub proven_infeasible: bool,
    pub catalog_size: usize,
    pub omega: Vec<usize>,
}

/// Closest members of `omega` at or below `floor` and at or above `ceil`,
/// falling back to the extreme members.
pub fn snap_interval(omega: &[usize], floor: usize, ceil: usize) -> (usize, usize) {
    let lo = omega
        .iter()
        .rev()
        .find(|&&n| n <= floor)
        .or(omega.first())
        .copied()
        .unwrap_or(0);
    let hi = omega
        .iter()
        .find(|&&n| n >= ceil)
        .or(omega.last())
        .copied()
        .unwrap_or(0);
    (lo, hi)
}

pub fn decompose_solve(inst: &Instance, cfg: &DecompConfig) -> DecompOutcome {
    let geo = GeoSums::build(inst);
    let catalog = enumerate_rects(inst, &geo);
    decompose_with_catalog(inst, &geo, &catalog, cfg)
}

pub fn decompose_with_catalog(
    inst: &Instance,
    geo: &GeoSums,
    catalog: &SubRegionCatalog,
    cfg: &DecompConfig,
) -> DecompOutcome {
    let omega = &catalog.omega;
    let np = inst.photos().len();
    let m = inst.m();
    let initial = snap_interval(omega, np / m, np.div_ceil(m));
    let (mut lo, mut hi) = initial;
    let mut in_set = vec![false; catalog.len()];
    let mut candidates = Vec::new();
    let mut trace = Vec::new();
    let mut incumbent: Option<Solution> = None;
    let mut final_interval = None;
    let mut previous: Option<f64> = None;
    let mut last_proven;
    loop {
        for &n in [lo, hi].iter().dedup() {
            for &r in catalog.with_cardinality(n) {
                if !in_set[r] {
                    in_set[r] = true;
                    candidates.push(r);
                }
            }
        }
        let out = solve_restricted(inst, geo, catalog, &candidates, cfg.budget, incumbent.as_ref());
        let t = out.t_max();
        let improved = match (&incumbent, &out.solution) {
            (None, Some(_)) => true,
            (Some(a), Some(b)) => strictly_less(b.makespan, a.makespan),
            _ => false,
        };
        if improved {
            incumbent = out.solution.clone();
            final_interval = Some((lo, hi));
        }
        log::info!(
            "interval [{lo},{hi}]: {} candidates, T_max={}, proven={}",
            candidates.len(),
            t.map_or("none".to_string(), |v| v.to_string()),
            out.proven
        );
        trace.push(DecompIteration {
            n_lo: lo,
            n_hi: hi,
            candidates: candidates.len(),
            t_max: t,
            proven: out.proven,
            nodes: out.nodes,
        });
        last_proven = out.proven;
        if candidates.len() == catalog.len() {
            break;
        }
        if !cfg.exhaustive && t.is_some() && previous == t {
            break;
        }
        previous = t;
        if let Some(&n) = omega.iter().rev().find(|&&n| n < lo) {
            lo = n;
        }
        if let Some(&n) = omega.iter().find(|&&n| n > hi) {
            hi = n;
        }
    }
    DecompOutcome {
        proven_infeasible: incumbent.is_none() && last_proven && candidates.len() == catalog.len(),
        solution: incumbent,
        trace,
        initial_interval: initial,
        final_interval,
        catalog_size: catalog.len(),
        omega: omega.clone(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MilpFlags {
    /// Require every capable drone to process at least one sub-region.
    pub per_drone_coverage: bool,
}

fn lp_number(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Accumulates one constraint row, wrapping long rows.
struct Row {
    text: String,
    terms: usize,
}

impl Row {
    fn new(name: &str) -> Self {
        Self {
            text: format!(" {name}:"),
            terms: 0,
        }
    }

    fn term(&mut self, coef: f64, var: &str) -> &mut Self {
        if coef == 0.0 {
            return self;
        }
        if self.terms > 0 && self.terms.is_multiple_of(8) {
            self.text.push_str("\n   ");
        }
        let sign = if coef < 0.0 { "-" } else { "+" };
        let mag = coef.abs();
        if mag == 1.0 {
            let _ = write!(self.text, " {sign} {var}");
        } else {
            let _ = write!(self.text, " {sign} {} {var}", lp_number(mag));
        }
        self.terms += 1;
        self
    }

    fn finish(&mut self, out: &mut String, sense: &str, rhs: f64) {
        if self.terms == 0 {
            self.text.push_str(" 0 Tmax");
        }
        let _ = writeln!(out, "{} {sense} {}", self.text, lp_number(rhs));
    }
}

/// The full mixed-integer model over the candidate sub-regions, in CPLEX LP
/// format. Demands are the ordered (holder, capable drone) pairs with a
/// holder that stores any data.
pub fn export_milp(
    inst: &Instance,
    geo: &GeoSums,
    catalog: &SubRegionCatalog,
    candidates: &[usize],
    flags: MilpFlags,
) -> String {
    let mut cand = candidates.to_vec();
    cand.sort_unstable();
    cand.dedup();
    let capable: Vec<usize> = inst.capable().to_vec();
    let n = inst.drones().len();
    let id = |d: usize| inst.drone_id(d);
    let ev = Evaluator::new(inst, geo);
    let links = inst.topology().links();
    let q = |s: usize, d: usize| format!("q_{s}_{}", id(d));
    let o = |s: usize| format!("o_{s}");
    let dname = |h: usize, d: usize| format!("{}_{}", id(h), id(d));
    let lname = |l: usize| format!("{}_{}", links[l].u, links[l].v);

    let holds_data: Vec<bool> = (0..n)
        .map(|h| cand.iter().any(|&s| catalog.regions[s].data[h] > 0.0))
        .collect();
    let demands: Vec<(usize, usize)> = (0..n)
        .filter(|&h| holds_data[h])
        .flat_map(|h| capable.iter().filter(move |&&d| d != h).map(move |&d| (h, d)))
        .collect();
    let on_link: Vec<Vec<(usize, usize)>> = (0..links.len())
        .map(|l| {
            demands
                .iter()
                .copied()
                .filter(|&(h, d)| ev.path(h, d).contains(&l))
                .collect()
        })
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "\\ covering-assignment model");
    let _ = writeln!(
        out,
        "\\ photos={} capable={} sigma={} t_hat={} candidates={}",
        inst.photos().len(),
        capable.len(),
        inst.sigma(),
        if inst.t_hat().is_infinite() { "inf".to_string() } else { lp_number(inst.t_hat()) },
        cand.len()
    );
    out.push_str("Minimize\n obj: Tmax\nSubject To\n");

    for &d in &capable {
        let mut row = Row::new(&format!("makespan_{}", id(d)));
        row.term(1.0, "Tmax");
        for &s in &cand {
            row.term(-catalog.regions[s].time, &q(s, d));
        }
        row.finish(&mut out, ">=", 0.0);
    }
    if inst.t_hat().is_finite() {
        for &(h, d) in &demands {
            let mut row = Row::new(&format!("delay_{}", dname(h, d)));
            row.term(inst.t_hat(), &format!("phi_{}", dname(h, d)));
            for &s in &cand {
                row.term(-catalog.regions[s].data[h], &q(s, d));
            }
            row.finish(&mut out, ">=", 0.0);
        }
    }
    for &s in &cand {
        let mut row = Row::new(&format!("reliability_{s}"));
        for &d in &capable {
            row.term(1.0, &q(s, d));
        }
        row.term(-(inst.sigma() as f64), &o(s));
        row.finish(&mut out, ">=", 0.0);
    }
    for (p, &(c, l)) in inst.photos().iter().zip(inst.cells()) {
        let mut row = Row::new(&format!("cover_{}", p.id));
        for &s in &cand {
            if catalog.regions[s].rect.contains(c, l) {
                row.term(1.0, &o(s));
            }
        }
        row.finish(&mut out, ">=", 1.0);
    }
    {
        let mut row = Row::new("regions");
        for &s in &cand {
            row.term(1.0, &o(s));
        }
        row.finish(&mut out, "=", capable.len() as f64);
    }
    for &(h, d) in &demands {
        let mut row = Row::new(&format!("active_{}", dname(h, d)));
        row.term(1.0, &format!("z_{}", dname(h, d)));
        for &s in &cand {
            row.term(-catalog.regions[s].data[h], &q(s, d));
        }
        row.finish(&mut out, "<=", 0.0);
    }
    for &(h, d) in &demands {
        let cbar = ev
            .path(h, d)
            .iter()
            .map(|&l| links[l].capacity)
            .fold(f64::INFINITY, f64::min);
        let mut row = Row::new(&format!("rate_gate_{}", dname(h, d)));
        row.term(1.0, &format!("phi_{}", dname(h, d)));
        row.term(-cbar, &format!("z_{}", dname(h, d)));
        row.finish(&mut out, "<=", 0.0);
    }
    for &(h, d) in &demands {
        let mut row = Row::new(&format!("bottleneck_{}", dname(h, d)));
        for &l in ev.path(h, d) {
            row.term(1.0, &format!("w_{}_{}", dname(h, d), lname(l)));
        }
        row.term(-1.0, &format!("z_{}", dname(h, d)));
        row.finish(&mut out, ">=", 0.0);
    }
    for (l, users) in on_link.iter().enumerate() {
        let mut row = Row::new(&format!("capacity_{}", lname(l)));
        for &(a, b) in users {
            row.term(1.0, &format!("phi_{}", dname(a, b)));
        }
        row.finish(&mut out, "<=", links[l].capacity);
    }
    for (l, users) in on_link.iter().enumerate() {
        for &(h, d) in users {
            let mut row = Row::new(&format!("saturated_{}_{}", lname(l), dname(h, d)));
            for &(a, b) in users {
                row.term(1.0, &format!("phi_{}", dname(a, b)));
            }
            row.term(-links[l].capacity, &format!("w_{}_{}", dname(h, d), lname(l)));
            row.finish(&mut out, ">=", 0.0);
        }
    }
    for (l, users) in on_link.iter().enumerate() {
        for &(h, d) in users {
            let mut row = Row::new(&format!("link_max_{}_{}", lname(l), dname(h, d)));
            row.term(1.0, &format!("u_{}", lname(l)));
            row.term(-1.0, &format!("phi_{}", dname(h, d)));
            row.finish(&mut out, ">=", 0.0);
        }
    }
    for (l, users) in on_link.iter().enumerate() {
        for &(h, d) in users {
            let mut row = Row::new(&format!("highest_{}_{}", lname(l), dname(h, d)));
            row.term(1.0, &format!("phi_{}", dname(h, d)));
            row.term(-1.0, &format!("u_{}", lname(l)));
            row.term(-links[l].capacity, &format!("w_{}_{}", dname(h, d), lname(l)));
            row.finish(&mut out, ">=", -links[l].capacity);
        }
    }
    if flags.per_drone_coverage {
        for &d in &capable {
            let mut row = Row::new(&format!("drone_used_{}", id(d)));
            for &s in &cand {
                row.term(1.0, &q(s, d));
            }
            row.finish(&mut out, ">=", 1.0);
        }
    }

    out.push_str("Bounds\n Tmax >= 0\n");
    for &(h, d) in &demands {
        let _ = writeln!(out, " phi_{} >= 0", dname(h, d));
    }
    for l in 0..links.len() {
        let _ = writeln!(out, " u_{} >= 0", lname(l));
    }
    out.push_str("Binaries\n");
    let mut binaries = Vec::new();
    for &s in &cand {
        for &d in &capable {
            binaries.push(q(s, d));
        }
    }
    binaries.extend(cand.iter().map(|&s| o(s)));
    for &(h, d) in &demands {
        binaries.push(format!("z_{}", dname(h, d)));
    }
    for &(h, d) in &demands {
        for &l in ev.path(h, d) {
            binaries.push(format!("w_{}_{}", dname(h, d), lname(l)));
        }
    }
    for chunk in binaries.chunks(8) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out
}
