//! Max-min fair rates over a tree topology by water-filling, transfer delays,
//! and an independent checker for the bottleneck characterization.

use thiserror::Error;

use crate::model::{DroneId, Topology};

/// Absolute slack, in MB/s, when checking saturation and rate maximality.
pub const SATURATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MmfError {
    #[error("demand {from}->{to} has an empty path")]
    EmptyPath { from: DroneId, to: DroneId },
    #[error("demand {from}->{to} uses unknown link {link}")]
    UnknownLink {
        from: DroneId,
        to: DroneId,
        link: usize,
    },
    #[error("link {0} has nonpositive capacity")]
    NonPositiveCapacity(usize),
    #[error("demand {from}->{to} is active but received zero rate")]
    ZeroRate { from: DroneId, to: DroneId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub from: DroneId,
    pub to: DroneId,
    /// Megabytes to move.
    pub load: f64,
    /// Link indices on the tree path from `from` to `to`.
    pub path: Vec<usize>,
}

impl Demand {
    pub fn is_active(&self) -> bool {
        self.load > 0.0
    }
}

/// Rates and link usage, indexed like the demand slice they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    pub rates: Vec<f64>,
    pub link_usage: Vec<f64>,
    /// A saturated link on each demand's path where its rate is maximal.
    pub bottleneck: Vec<usize>,
}

/// Progressive filling: raise all unfrozen rates together, freeze the demands
/// crossing the first link to saturate, repeat.
///
/// Rates depend only on the paths, not on the loads. When several links reach
/// the same level they are frozen together; each demand's witness is the
/// first such link along its path.
pub fn water_fill(topo: &Topology, demands: &[Demand]) -> Result<RateAllocation, MmfError> {
    let links = topo.links();
    if let Some(i) = links.iter().position(|l| !(l.capacity > 0.0)) {
        return Err(MmfError::NonPositiveCapacity(i));
    }
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
    for (di, d) in demands.iter().enumerate() {
        if d.path.is_empty() {
            return Err(MmfError::EmptyPath {
                from: d.from,
                to: d.to,
            });
        }
        for &l in &d.path {
            if l >= links.len() {
                return Err(MmfError::UnknownLink {
                    from: d.from,
                    to: d.to,
                    link: l,
                });
            }
            users[l].push(di);
        }
    }

    let mut rates = vec![0.0; demands.len()];
    let mut frozen = vec![false; demands.len()];
    let mut bottleneck = vec![usize::MAX; demands.len()];
    let mut residual: Vec<f64> = links.iter().map(|l| l.capacity).collect();
    let mut unfrozen: Vec<usize> = users.iter().map(Vec::len).collect();
    let mut saturated = vec![false; links.len()];
    let mut remaining = demands.len();

    while remaining > 0 {
        let level = (0..links.len())
            .filter(|&l| unfrozen[l] > 0)
            .map(|l| residual[l] / unfrozen[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let slack = level * 1e-12;
        for l in 0..links.len() {
            if unfrozen[l] > 0 && residual[l] / unfrozen[l] as f64 <= level + slack {
                saturated[l] = true;
            }
        }
        let mut newly = Vec::new();
        for (di, d) in demands.iter().enumerate() {
            if frozen[di] {
                continue;
            }
            if let Some(&l) = d.path.iter().find(|&&l| saturated[l]) {
                newly.push(di);
                bottleneck[di] = l;
            }
        }
        for &di in &newly {
            frozen[di] = true;
            rates[di] = level;
            for &l in &demands[di].path {
                residual[l] -= level;
                unfrozen[l] -= 1;
            }
        }
        remaining -= newly.len();
    }

    let mut link_usage = vec![0.0; links.len()];
    for (d, &r) in demands.iter().zip(&rates) {
        for &l in &d.path {
            link_usage[l] += r;
        }
    }
    Ok(RateAllocation {
        rates,
        link_usage,
        bottleneck,
    })
}

/// Transfer time `load / rate` per demand; inactive demands take zero time.
pub fn delays(alloc: &RateAllocation, demands: &[Demand]) -> Result<Vec<f64>, MmfError> {
    demands
        .iter()
        .zip(&alloc.rates)
        .map(|(d, &rate)| {
            if !d.is_active() {
                Ok(0.0)
            } else if rate > 0.0 {
                Ok(d.load / rate)
            } else {
                Err(MmfError::ZeroRate {
                    from: d.from,
                    to: d.to,
                })
            }
        })
        .collect()
}

pub fn check_feasible(delays: &[f64], t_hat: f64) -> bool {
    delays.iter().all(|&t| t <= t_hat)
}

/// Checks capacities and, for every active demand, the existence of a
/// saturated link on its path where no other demand has a higher rate.
pub fn verify_mmf(topo: &Topology, demands: &[Demand], alloc: &RateAllocation) -> Vec<String> {
    let mut out = Vec::new();
    let links = topo.links();
    if alloc.rates.len() != demands.len() {
        out.push(format!(
            "allocation has {} rates for {} demands",
            alloc.rates.len(),
            demands.len()
        ));
        return out;
    }
    let mut usage = vec![0.0; links.len()];
    let mut max_rate = vec![0.0f64; links.len()];
    for (d, &r) in demands.iter().zip(&alloc.rates) {
        if r < -SATURATION_TOLERANCE {
            out.push(format!("demand {}->{} has negative rate {r}", d.from, d.to));
        }
        for &l in &d.path {
            if l >= links.len() {
                out.push(format!("demand {}->{} uses unknown link {l}", d.from, d.to));
                return out;
            }
            usage[l] += r;
            max_rate[l] = max_rate[l].max(r);
        }
    }
    for (l, link) in links.iter().enumerate() {
        if usage[l] > link.capacity + SATURATION_TOLERANCE {
            out.push(format!(
                "link {} ({}-{}) oversubscribed: {} > {}",
                l, link.u, link.v, usage[l], link.capacity
            ));
        }
    }
    for (d, &r) in demands.iter().zip(&alloc.rates) {
        if !d.is_active() {
            continue;
        }
        let has_bottleneck = d.path.iter().any(|&l| {
            (usage[l] - links[l].capacity).abs() <= SATURATION_TOLERANCE
                && r >= max_rate[l] - SATURATION_TOLERANCE
        });
        if !has_bottleneck {
            out.push(format!("demand {}->{} has no bottleneck link", d.from, d.to));
        }
    }
    out
}
