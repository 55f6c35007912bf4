//! Solution evaluation: per-drone processing totals, transfer loads between
//! holders and reconstructing drones, max-min fair rates and delays.

use std::collections::HashMap;

use crate::geosum::GeoSums;
use crate::mmf::{self, Demand, RateAllocation};
use crate::model::{Instance, Rect};

/// Rate allocations keyed by the sorted list of active `(holder, drone)`
/// pairs. Capacities are fixed per instance, so the set of active demands
/// determines the allocation.
#[derive(Debug, Default, Clone)]
pub struct MmfMemo {
    map: HashMap<Vec<(usize, usize)>, RateAllocation>,
    pub hits: u64,
    pub misses: u64,
}

impl MmfMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// One active transfer, drones given by dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDemand {
    pub from: usize,
    pub to: usize,
    pub load: f64,
    pub rate: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub t_max: f64,
    /// Processing seconds per drone, by dense index (zero for non-capable).
    pub totals: Vec<f64>,
    /// Capable drones whose total equals `t_max`, ascending.
    pub d_max: Vec<usize>,
    /// Active demands sorted by `(from, to)`.
    pub demands: Vec<EvalDemand>,
    pub delay_feasible: bool,
    /// Largest amount by which a delay exceeds the limit, zero if none.
    pub violation: f64,
}

/// Relative slack used for strict-improvement and tie tests.
pub const IMPROVEMENT_EPS: f64 = 1e-9;

fn eps(x: f64) -> f64 {
    IMPROVEMENT_EPS * x.abs().max(1.0)
}

/// `a < b` by more than the relative slack.
pub fn strictly_less(a: f64, b: f64) -> bool {
    if b.is_infinite() {
        return a < b;
    }
    a < b - eps(b)
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.delay_feasible
    }

    /// Acceptance rule: against a feasible reference only feasible states with
    /// a strictly smaller makespan win; against an infeasible one the order is
    /// lexicographic on (violation, makespan).
    pub fn improves_on(&self, other: &Evaluation) -> bool {
        if other.delay_feasible {
            return self.delay_feasible && strictly_less(self.t_max, other.t_max);
        }
        if strictly_less(self.violation, other.violation) {
            return true;
        }
        !strictly_less(other.violation, self.violation) && strictly_less(self.t_max, other.t_max)
    }
}

pub struct Evaluator<'a> {
    inst: &'a Instance,
    geo: &'a GeoSums,
    /// Link path for every ordered pair of dense drone indices.
    paths: Vec<Vec<Vec<usize>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a Instance, geo: &'a GeoSums) -> Self {
        let n = inst.drones().len();
        let topo = inst.topology();
        let paths = (0..n)
            .map(|h| {
                (0..n)
                    .map(|d| {
                        topo.path(inst.drone_id(h), inst.drone_id(d))
                            .expect("every drone is a topology node")
                    })
                    .collect()
            })
            .collect();
        Self { inst, geo, paths }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn geo(&self) -> &'a GeoSums {
        self.geo
    }

    pub fn path(&self, from: usize, to: usize) -> &[usize] {
        &self.paths[from][to]
    }

    /// Per-drone totals and the makespan, without any transfer computation.
    pub fn totals(&self, regions: &[Rect], assignment: &[Vec<usize>]) -> (Vec<f64>, f64) {
        let mut totals = vec![0.0; self.inst.drones().len()];
        for (r, drones) in regions.iter().zip(assignment) {
            let t = self.geo.region_time(r);
            for &d in drones {
                totals[d] += t;
            }
        }
        let t_max = self
            .inst
            .capable()
            .iter()
            .map(|&d| totals[d])
            .fold(0.0, f64::max);
        (totals, t_max)
    }

    pub fn makespan(&self, regions: &[Rect], assignment: &[Vec<usize>]) -> f64 {
        self.totals(regions, assignment).1
    }

    /// Megabytes each holder must send to each reconstructing drone, as a
    /// dense `n x n` matrix (`loads[h][d]`), self-holdings excluded.
    pub fn loads(&self, regions: &[Rect], assignment: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let n = self.inst.drones().len();
        let mut loads = vec![vec![0.0; n]; n];
        for (r, drones) in regions.iter().zip(assignment) {
            for (h, row) in loads.iter_mut().enumerate() {
                let data = self.geo.region_data_by_index(h, r);
                if data == 0.0 {
                    continue;
                }
                for &d in drones {
                    if d != h {
                        row[d] += data;
                    }
                }
            }
        }
        loads
    }

    pub fn evaluate(
        &self,
        regions: &[Rect],
        assignment: &[Vec<usize>],
        memo: Option<&mut MmfMemo>,
    ) -> Evaluation {
        let (totals, t_max) = self.totals(regions, assignment);
        let d_max: Vec<usize> = self
            .inst
            .capable()
            .iter()
            .copied()
            .filter(|&d| !strictly_less(totals[d], t_max))
            .collect();

        let loads = self.loads(regions, assignment);
        let mut demands = Vec::new();
        let mut key = Vec::new();
        for (h, row) in loads.iter().enumerate() {
            for (d, &load) in row.iter().enumerate() {
                if load > 0.0 {
                    key.push((h, d));
                    demands.push(Demand {
                        from: self.inst.drone_id(h),
                        to: self.inst.drone_id(d),
                        load,
                        path: self.paths[h][d].clone(),
                    });
                }
            }
        }

        let fresh;
        let alloc: &RateAllocation = match memo {
            Some(memo) => {
                if memo.map.contains_key(&key) {
                    memo.hits += 1;
                } else {
                    memo.misses += 1;
                    let a = self.fill(&demands);
                    memo.map.insert(key.clone(), a);
                }
                &memo.map[&key]
            }
            None => {
                fresh = self.fill(&demands);
                &fresh
            }
        };

        let t_hat = self.inst.t_hat();
        let mut violation: f64 = 0.0;
        let demands: Vec<EvalDemand> = key
            .iter()
            .zip(&demands)
            .zip(&alloc.rates)
            .map(|((&(from, to), dm), &rate)| {
                let delay = dm.load / rate;
                violation = violation.max(delay - t_hat);
                EvalDemand {
                    from,
                    to,
                    load: dm.load,
                    rate,
                    delay,
                }
            })
            .collect();
        Evaluation {
            t_max,
            totals,
            d_max,
            delay_feasible: violation <= 0.0,
            violation: violation.max(0.0),
            demands,
        }
    }

    fn fill(&self, demands: &[Demand]) -> RateAllocation {
        mmf::water_fill(self.inst.topology(), demands)
            .expect("paths come from the topology and capacities are validated")
    }
}
