//! Exhaustive solver for tiny instances. It shares no search code with the
//! heuristics: rectangles are listed by brute force, region times and
//! transfer loads are summed photo by photo, and every covering is paired
//! with every assignment.

use std::collections::BTreeMap;

use itertools::Itertools;
use thiserror::Error;

use crate::mmf::{self, Demand};
use crate::model::{DemandDelay, Instance, Rect, Solution};
use crate::par::{self, Execution};

/// Upper limit on coverings examined and on assignments per covering.
pub const ORACLE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {what} = {count} exceeds {limit}")]
    TooLarge {
        what: &'static str,
        count: u128,
        limit: u128,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `None` when no covering meets the delay limit.
    pub optimum: Option<f64>,
    pub solution: Option<Solution>,
    /// Coverings whose best assignment attains the optimum.
    pub optimal_coverings: usize,
    pub coverings: usize,
}

/// One assignment of one covering: its makespan and largest transfer delay.
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    t_max: f64,
    max_delay: f64,
    covering: usize,
    assignment: Vec<Vec<usize>>,
}

struct Problem<'a> {
    inst: &'a Instance,
    /// Distinct photo sets cut by rectangles, each with its tight rectangle.
    rects: Vec<(Rect, u64)>,
    coverings: Vec<Vec<usize>>,
    subsets: Vec<Vec<usize>>,
}

fn choose(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

impl<'a> Problem<'a> {
    fn new(inst: &'a Instance) -> Result<Self, OracleError> {
        let np = inst.photos().len();
        if np > 64 {
            return Err(OracleError::TooLarge {
                what: "photos",
                count: np as u128,
                limit: 64,
            });
        }
        let (cols, rows) = (inst.lngs().len(), inst.lats().len());
        let mut by_set: BTreeMap<u64, Rect> = BTreeMap::new();
        for (c0, c1) in (0..cols).tuple_combinations().chain((0..cols).map(|c| (c, c))) {
            for (l0, l1) in (0..rows).tuple_combinations().chain((0..rows).map(|l| (l, l))) {
                let r = Rect::new(c0, c1, l0, l1);
                let mut set = 0u64;
                for (p, &(c, l)) in inst.cells().iter().enumerate() {
                    if r.contains(c, l) {
                        set |= 1 << p;
                    }
                }
                if set == 0 {
                    continue;
                }
                // keep the smallest enclosing rectangle of each photo set
                let tight = inst
                    .cells()
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| set >> p & 1 == 1)
                    .fold(Rect::new(usize::MAX, 0, usize::MAX, 0), |acc, (_, &(c, l))| {
                        Rect::new(acc.c_lt.min(c), acc.c_gt.max(c), acc.l_lo.min(l), acc.l_hi.max(l))
                    });
                by_set.insert(set, tight);
            }
        }
        let rects: Vec<(Rect, u64)> = by_set.into_iter().map(|(s, r)| (r, s)).sorted().collect();

        let m = inst.m();
        let n_coverings = choose(rects.len() as u128, m as u128);
        if n_coverings > ORACLE_LIMIT {
            return Err(OracleError::TooLarge {
                what: "region subsets",
                count: n_coverings,
                limit: ORACLE_LIMIT,
            });
        }
        let subsets: Vec<Vec<usize>> = (inst.sigma()..=m)
            .flat_map(|k| inst.capable().iter().copied().combinations(k))
            .collect();
        let n_assign = (subsets.len() as u128).saturating_pow(m as u32);
        if n_assign > ORACLE_LIMIT {
            return Err(OracleError::TooLarge {
                what: "assignments per covering",
                count: n_assign,
                limit: ORACLE_LIMIT,
            });
        }
        let all = if np == 64 { u64::MAX } else { (1u64 << np) - 1 };
        let coverings = (0..rects.len())
            .combinations(m)
            .filter(|c| c.iter().fold(0u64, |acc, &i| acc | rects[i].1) == all)
            .collect();
        Ok(Self {
            inst,
            rects,
            coverings,
            subsets,
        })
    }

    fn time(&self, set: u64) -> f64 {
        self.inst
            .photos()
            .iter()
            .enumerate()
            .filter(|(p, _)| set >> p & 1 == 1)
            .map(|(_, ph)| ph.lambda)
            .sum()
    }

    fn held(&self, set: u64, holder: usize) -> f64 {
        self.inst
            .photos()
            .iter()
            .zip(self.inst.holder_indices())
            .enumerate()
            .filter(|(p, (_, hs))| set >> p & 1 == 1 && hs.contains(&holder))
            .map(|(_, (ph, _))| ph.mu)
            .sum()
    }

    /// Every assignment of one covering honoring reliability and per-drone
    /// coverage, with its makespan and largest delay.
    fn evaluate_covering(&self, ci: usize) -> Vec<Candidate> {
        let inst = self.inst;
        let covering = &self.coverings[ci];
        let n = inst.drones().len();
        let times: Vec<f64> = covering.iter().map(|&r| self.time(self.rects[r].1)).collect();
        let data: Vec<Vec<f64>> = covering
            .iter()
            .map(|&r| (0..n).map(|h| self.held(self.rects[r].1, h)).collect())
            .collect();
        let mut out = Vec::new();
        for picks in (0..covering.len())
            .map(|_| 0..self.subsets.len())
            .multi_cartesian_product()
        {
            let assignment: Vec<Vec<usize>> = picks.iter().map(|&s| self.subsets[s].clone()).collect();
            let mut totals = vec![0.0; n];
            for (ds, &t) in assignment.iter().zip(&times) {
                for &d in ds {
                    totals[d] += t;
                }
            }
            if inst.capable().iter().any(|&d| !assignment.iter().any(|ds| ds.contains(&d))) {
                continue;
            }
            let t_max = inst.capable().iter().map(|&d| totals[d]).fold(0.0, f64::max);
            let mut demands = Vec::new();
            for h in 0..n {
                for d in 0..n {
                    if h == d {
                        continue;
                    }
                    let load: f64 = assignment
                        .iter()
                        .zip(&data)
                        .filter(|(ds, _)| ds.contains(&d))
                        .map(|(_, row)| row[h])
                        .sum();
                    if load > 0.0 {
                        demands.push(Demand {
                            from: inst.drone_id(h),
                            to: inst.drone_id(d),
                            load,
                            path: inst
                                .topology()
                                .path(inst.drone_id(h), inst.drone_id(d))
                                .expect("drones are topology nodes"),
                        });
                    }
                }
            }
            let alloc = mmf::water_fill(inst.topology(), &demands).expect("valid demands");
            let delays = mmf::delays(&alloc, &demands).expect("water-filling gives positive rates");
            let max_delay = delays.iter().copied().fold(0.0, f64::max);
            out.push(Candidate {
                t_max,
                max_delay,
                covering: ci,
                assignment,
            });
        }
        out
    }

    fn all_candidates(&self, exec: Execution) -> Vec<Vec<Candidate>> {
        par::map_indices(exec, self.coverings.len(), |ci| self.evaluate_covering(ci))
    }

    fn solution(&self, c: &Candidate) -> Solution {
        let inst = self.inst;
        let regions: Vec<Rect> = self.coverings[c.covering].iter().map(|&r| self.rects[r].0).collect();
        let assignment: Vec<Vec<u32>> = c
            .assignment
            .iter()
            .map(|ds| ds.iter().map(|&d| inst.drone_id(d)).collect())
            .collect();
        let n = inst.drones().len();
        let mut delays = Vec::new();
        let mut demands = Vec::new();
        for h in 0..n {
            for d in 0..n {
                if h == d {
                    continue;
                }
                let load: f64 = self.coverings[c.covering]
                    .iter()
                    .zip(&c.assignment)
                    .filter(|(_, ds)| ds.contains(&d))
                    .map(|(&r, _)| self.held(self.rects[r].1, h))
                    .sum();
                if load > 0.0 {
                    demands.push(Demand {
                        from: inst.drone_id(h),
                        to: inst.drone_id(d),
                        load,
                        path: inst
                            .topology()
                            .path(inst.drone_id(h), inst.drone_id(d))
                            .expect("drones are topology nodes"),
                    });
                }
            }
        }
        let alloc = mmf::water_fill(inst.topology(), &demands).expect("valid demands");
        for (dm, t) in demands.iter().zip(mmf::delays(&alloc, &demands).expect("positive rates")) {
            delays.push(DemandDelay {
                from: dm.from,
                to: dm.to,
                seconds: t,
            });
        }
        Solution {
            regions,
            assignment,
            makespan: c.t_max,
            delays,
            feasible: true,
        }
    }
}

/// Global optimum over all coverings by `m` rectangles (overlaps allowed)
/// and all assignments of at least `sigma` drones per region.
pub fn brute_force_opt(inst: &Instance) -> Result<OracleResult, OracleError> {
    brute_force_opt_with(inst, Execution::default())
}

pub fn brute_force_opt_with(inst: &Instance, exec: Execution) -> Result<OracleResult, OracleError> {
    let problem = Problem::new(inst)?;
    let t_hat = inst.t_hat();
    let per_covering: Vec<Option<Candidate>> = problem
        .all_candidates(exec)
        .into_iter()
        .map(|cands| {
            cands
                .into_iter()
                .filter(|c| c.max_delay <= t_hat)
                .min_by(|a, b| a.t_max.total_cmp(&b.t_max))
        })
        .collect();
    let best = per_covering
        .iter()
        .flatten()
        .min_by(|a, b| a.t_max.total_cmp(&b.t_max).then(a.covering.cmp(&b.covering)));
    Ok(match best {
        None => OracleResult {
            optimum: None,
            solution: None,
            optimal_coverings: 0,
            coverings: problem.coverings.len(),
        },
        Some(b) => OracleResult {
            optimum: Some(b.t_max),
            solution: Some(problem.solution(b)),
            optimal_coverings: per_covering.iter().flatten().filter(|c| c.t_max == b.t_max).count(),
            coverings: problem.coverings.len(),
        },
    })
}

/// Trade-off between the delay limit and the optimum: pairs
/// `(required_limit, optimum)` with `required_limit` ascending and `optimum`
/// strictly descending. For a limit `L`, the optimum is the value of the last
/// pair with `required_limit <= L`; below the first pair nothing is feasible.
pub fn pareto_front(inst: &Instance) -> Result<Vec<(f64, f64)>, OracleError> {
    let problem = Problem::new(inst)?;
    let mut points: Vec<(f64, f64)> = problem
        .all_candidates(Execution::default())
        .into_iter()
        .flatten()
        .map(|c| (c.max_delay, c.t_max))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut front: Vec<(f64, f64)> = Vec::new();
    for (d, t) in points {
        if front.last().is_none_or(|&(_, best)| t < best) {
            front.push((d, t));
        }
    }
    Ok(front)
}

/// Optimum under limit `t_hat` read off a front from [`pareto_front`].
pub fn optimum_at(front: &[(f64, f64)], t_hat: f64) -> Option<f64> {
    front.iter().rev().find(|&&(d, _)| d <= t_hat).map(|&(_, t)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_solution;
    use crate::testing::{t4, t9};

    #[test]
    fn t4_optima() {
        let r = brute_force_opt(&t4()).unwrap();
        assert_eq!(r.optimum, Some(20.0));
        assert!(validate_solution(&t4(), r.solution.as_ref().unwrap()).is_empty());
        let s2 = t4().with_sigma(2).unwrap();
        assert_eq!(brute_force_opt(&s2).unwrap().optimum, Some(40.0));
    }

    #[test]
    fn t4_infeasible_when_every_covering_transfers() {
        // drone 1 holds everything, so drone 2 always receives data over the
        // 1 MB/s link; the smallest transfer is one 5 MB photo
        let mut doc = t4().to_document();
        for p in &mut doc.photos {
            p.holders = vec![1];
        }
        let inst = doc.into_instance().unwrap();
        let front = pareto_front(&inst).unwrap();
        assert_eq!(front.first().unwrap().0, 5.0);
        let tight = inst.with_t_hat(4.9).unwrap();
        assert_eq!(brute_force_opt(&tight).unwrap().optimum, None);
        let loose = inst.with_t_hat(5.0).unwrap();
        assert!(brute_force_opt(&loose).unwrap().optimum.is_some());
    }

    #[test]
    fn t9_optimum_and_front() {
        let r = brute_force_opt(&t9()).unwrap();
        assert_eq!(r.optimum, Some(30.0));
        let front = pareto_front(&t9()).unwrap();
        // native columns need no transfer at all
        assert_eq!(front, vec![(0.0, 30.0)]);
        assert_eq!(optimum_at(&front, 1.0), Some(30.0));
    }

    #[test]
    fn guard_refuses_large_instances() {
        let mut doc = t9().to_document();
        for i in 0..40u32 {
            doc.photos.push(crate::model::PhotoDoc {
                id: 100 + i,
                lat: (i / 8) as f64 + 0.5,
                lng: (i % 8) as f64 + 0.5,
                lambda_s: 1.0,
                mu_mb: 1.0,
                holders: vec![1],
            });
        }
        let inst = doc.into_instance().unwrap();
        assert!(matches!(brute_force_opt(&inst), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let inst = t9().with_sigma(2).unwrap();
        assert_eq!(
            brute_force_opt_with(&inst, Execution::Sequential).unwrap(),
            brute_force_opt_with(&inst, Execution::Parallel).unwrap()
        );
    }
}
