//! Problem instance, solution data model, JSON documents, makespan and the
//! workload lower bound.
//!
//! Photos live on a discrete grid: `lngs()` holds the sorted distinct
//! longitudes (columns) and `lats()` the sorted distinct latitudes (rows).
//! Every photo is mapped to a `(col, row)` cell; photos sharing a coordinate
//! share the index and therefore always travel together.
//!
//! Drones are addressed by their public [`DroneId`] at API boundaries and by
//! a dense index (position in [`Instance::drones`], sorted by id) inside the
//! solvers.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geosum::GeoSums;
use crate::vns::eval::Evaluator;

pub type DroneId = u32;
pub type PhotoId = u32;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance has no photos")]
    NoPhotos,
    #[error("duplicate photo id {0}")]
    DuplicatePhoto(PhotoId),
    #[error("duplicate drone id {0}")]
    DuplicateDrone(DroneId),
    #[error("photo {photo}: {what}")]
    InvalidPhoto { photo: PhotoId, what: &'static str },
    #[error("photo {photo} references unknown drone {drone}")]
    UnknownHolder { photo: PhotoId, drone: DroneId },
    #[error("link references unknown drone {0}")]
    UnknownLinkEndpoint(DroneId),
    #[error("link {u}-{v} has nonpositive capacity {capacity}")]
    NonPositiveCapacity { u: DroneId, v: DroneId, capacity: f64 },
    #[error("topology is not a tree")]
    NotATree,
    #[error("no 3D-capable drones")]
    NoCapableDrones,
    #[error("sigma exceeds capable drones (sigma={sigma}, capable={capable})")]
    SigmaTooLarge { sigma: usize, capable: usize },
    #[error("sigma must be at least 1")]
    SigmaZero,
    #[error("t_hat must be positive or \"inf\", got {0}")]
    InvalidTHat(f64),
    #[error("unknown drone {0}")]
    UnknownDrone(DroneId),
    #[error("assignment references non-capable drone {0}")]
    NonCapableAssignment(DroneId),
    #[error("assignment has {assignment} entries for {regions} regions")]
    AssignmentShape { regions: usize, assignment: usize },
    #[error("region {0} has borders outside the coordinate grid")]
    InvalidRect(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Photo {
    pub id: PhotoId,
    pub lat: f64,
    pub lng: f64,
    /// Processing time in seconds.
    pub lambda: f64,
    /// Data size in megabytes.
    pub mu: f64,
    /// Drones storing this photo, sorted and deduplicated.
    pub holders: Vec<DroneId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Drone {
    pub id: DroneId,
    pub capable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub u: DroneId,
    pub v: DroneId,
    /// Capacity in MB/s.
    pub capacity: f64,
}

/// Undirected tree over all drones. Links are shared by both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<DroneId>,
    links: Vec<Link>,
    // Rooted at nodes[0]: parent node index and the link leading to it.
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
    index: HashMap<DroneId, usize>,
}

impl Topology {
    pub fn new(nodes: Vec<DroneId>, links: Vec<Link>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, &id) in nodes.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(ModelError::DuplicateDrone(id));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (li, link) in links.iter().enumerate() {
            if !(link.capacity > 0.0) || !link.capacity.is_finite() {
                return Err(ModelError::NonPositiveCapacity {
                    u: link.u,
                    v: link.v,
                    capacity: link.capacity,
                });
            }
            let u = *index
                .get(&link.u)
                .ok_or(ModelError::UnknownLinkEndpoint(link.u))?;
            let v = *index
                .get(&link.v)
                .ok_or(ModelError::UnknownLinkEndpoint(link.v))?;
            if u == v {
                return Err(ModelError::NotATree);
            }
            adjacency[u].push((v, li));
            adjacency[v].push((u, li));
        }
        if nodes.is_empty() || links.len() + 1 != nodes.len() {
            return Err(ModelError::NotATree);
        }
        let mut parent = vec![None; nodes.len()];
        let mut depth = vec![usize::MAX; nodes.len()];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            for &(next, li) in &adjacency[n] {
                if depth[next] == usize::MAX {
                    depth[next] = depth[n] + 1;
                    parent[next] = Some((n, li));
                    queue.push_back(next);
                } else if parent[n].map(|(p, _)| p) != Some(next) {
                    return Err(ModelError::NotATree);
                }
            }
        }
        if depth.contains(&usize::MAX) {
            return Err(ModelError::NotATree);
        }
        Ok(Self {
            nodes,
            links,
            parent,
            depth,
            index,
        })
    }

    pub fn nodes(&self) -> &[DroneId] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Link indices along the unique path from `from` to `to`, in travel order.
    pub fn path(&self, from: DroneId, to: DroneId) -> Result<Vec<usize>, ModelError> {
        let mut a = *self
            .index
            .get(&from)
            .ok_or(ModelError::UnknownDrone(from))?;
        let mut b = *self.index.get(&to).ok_or(ModelError::UnknownDrone(to))?;
        let mut head = Vec::new();
        let mut tail = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                let (p, li) = self.parent[a].expect("non-root has a parent");
                head.push(li);
                a = p;
            } else {
                let (p, li) = self.parent[b].expect("non-root has a parent");
                tail.push(li);
                b = p;
            }
        }
        head.extend(tail.into_iter().rev());
        Ok(head)
    }
}

/// A rectangle over the coordinate grid, borders inclusive.
///
/// `c_lt..=c_gt` index into [`Instance::lngs`], `l_lo..=l_hi` into
/// [`Instance::lats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub c_lt: usize,
    pub c_gt: usize,
    pub l_lo: usize,
    pub l_hi: usize,
}

impl Rect {
    pub const fn new(c_lt: usize, c_gt: usize, l_lo: usize, l_hi: usize) -> Self {
        Self {
            c_lt,
            c_gt,
            l_lo,
            l_hi,
        }
    }

    #[inline]
    pub fn contains(&self, col: usize, row: usize) -> bool {
        self.c_lt <= col && col <= self.c_gt && self.l_lo <= row && row <= self.l_hi
    }

    pub fn is_valid_for(&self, cols: usize, rows: usize) -> bool {
        self.c_lt <= self.c_gt && self.c_gt < cols && self.l_lo <= self.l_hi && self.l_hi < rows
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "C[{}..{}] L[{}..{}]",
            self.c_lt, self.c_gt, self.l_lo, self.l_hi
        )
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    name: Option<String>,
    photos: Vec<Photo>,
    drones: Vec<Drone>,
    topology: Topology,
    sigma: usize,
    t_hat: f64,
    lngs: Vec<f64>,
    lats: Vec<f64>,
    cells: Vec<(usize, usize)>,
    holder_index: Vec<Vec<usize>>,
    capable: Vec<usize>,
    drone_index: HashMap<DroneId, usize>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.photos == other.photos
            && self.drones == other.drones
            && self.topology.nodes == other.topology.nodes
            && self.topology.links == other.topology.links
            && self.sigma == other.sigma
            && self.t_hat.to_bits() == other.t_hat.to_bits()
    }
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn position(sorted: &[f64], x: f64) -> usize {
    sorted
        .binary_search_by(|probe| probe.total_cmp(&x))
        .expect("coordinate present in distinct list")
}

impl Instance {
    pub fn new(
        name: Option<String>,
        photos: Vec<Photo>,
        mut drones: Vec<Drone>,
        links: Vec<Link>,
        sigma: usize,
        t_hat: f64,
    ) -> Result<Self, ModelError> {
        if photos.is_empty() {
            return Err(ModelError::NoPhotos);
        }
        drones.sort_by_key(|d| d.id);
        let mut drone_index = HashMap::with_capacity(drones.len());
        for (i, d) in drones.iter().enumerate() {
            if drone_index.insert(d.id, i).is_some() {
                return Err(ModelError::DuplicateDrone(d.id));
            }
        }
        let mut seen = BTreeSet::new();
        let mut photos = photos;
        for p in &mut photos {
            if !seen.insert(p.id) {
                return Err(ModelError::DuplicatePhoto(p.id));
            }
            let bad = |what| ModelError::InvalidPhoto { photo: p.id, what };
            if !p.lat.is_finite() || !p.lng.is_finite() {
                return Err(bad("coordinates must be finite"));
            }
            if !(p.lambda >= 0.0) || !p.lambda.is_finite() {
                return Err(bad("lambda must be finite and nonnegative"));
            }
            if !(p.mu >= 0.0) || !p.mu.is_finite() {
                return Err(bad("mu must be finite and nonnegative"));
            }
            p.holders.sort_unstable();
            p.holders.dedup();
            if p.holders.is_empty() {
                return Err(bad("photo must be stored on at least one drone"));
            }
            if let Some(&h) = p.holders.iter().find(|h| !drone_index.contains_key(h)) {
                return Err(ModelError::UnknownHolder {
                    photo: p.id,
                    drone: h,
                });
            }
        }
        let capable: Vec<usize> = drones
            .iter()
            .enumerate()
            .filter(|(_, d)| d.capable)
            .map(|(i, _)| i)
            .collect();
        if capable.is_empty() {
            return Err(ModelError::NoCapableDrones);
        }
        if sigma == 0 {
            return Err(ModelError::SigmaZero);
        }
        if sigma > capable.len() {
            return Err(ModelError::SigmaTooLarge {
                sigma,
                capable: capable.len(),
            });
        }
        if !(t_hat > 0.0) {
            return Err(ModelError::InvalidTHat(t_hat));
        }
        let topology = Topology::new(drones.iter().map(|d| d.id).collect(), links)?;

        let lngs = distinct_sorted(photos.iter().map(|p| p.lng));
        let lats = distinct_sorted(photos.iter().map(|p| p.lat));
        let cells = photos
            .iter()
            .map(|p| (position(&lngs, p.lng), position(&lats, p.lat)))
            .collect();
        let holder_index = photos
            .iter()
            .map(|p| p.holders.iter().map(|h| drone_index[h]).collect())
            .collect();
        Ok(Self {
            name,
            photos,
            drones,
            topology,
            sigma,
            t_hat,
            lngs,
            lats,
            cells,
            holder_index,
            capable,
            drone_index,
        })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn photos(&self) -> &[Photo] {
        &self.photos
    }

    /// Drones sorted by id; a drone's position here is its dense index.
    pub fn drones(&self) -> &[Drone] {
        &self.drones
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn t_hat(&self) -> f64 {
        self.t_hat
    }

    /// Number of 3D-capable drones, which is also the number of sub-regions.
    pub fn m(&self) -> usize {
        self.capable.len()
    }

    pub fn lngs(&self) -> &[f64] {
        &self.lngs
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    /// `(col, row)` of every photo, parallel to [`Instance::photos`].
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    /// Dense drone indices holding each photo.
    pub fn holder_indices(&self) -> &[Vec<usize>] {
        &self.holder_index
    }

    /// Dense indices of the capable drones, ascending.
    pub fn capable(&self) -> &[usize] {
        &self.capable
    }

    pub fn drone_index(&self, id: DroneId) -> Option<usize> {
        self.drone_index.get(&id).copied()
    }

    pub fn drone_id(&self, index: usize) -> DroneId {
        self.drones[index].id
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, self.lngs.len() - 1, 0, self.lats.len() - 1)
    }

    pub fn with_sigma(&self, sigma: usize) -> Result<Self, ModelError> {
        if sigma == 0 {
            return Err(ModelError::SigmaZero);
        }
        if sigma > self.m() {
            return Err(ModelError::SigmaTooLarge {
                sigma,
                capable: self.m(),
            });
        }
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }

    pub fn with_t_hat(&self, t_hat: f64) -> Result<Self, ModelError> {
        if !(t_hat > 0.0) {
            return Err(ModelError::InvalidTHat(t_hat));
        }
        Ok(Self {
            t_hat,
            ..self.clone()
        })
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        Self {
            name: Some(name.into()),
            ..self.clone()
        }
    }

    pub fn total_lambda(&self) -> f64 {
        self.photos.iter().map(|p| p.lambda).sum()
    }

    pub fn to_document(&self) -> InstanceDoc {
        InstanceDoc {
            name: self.name.clone(),
            photos: self
                .photos
                .iter()
                .map(|p| PhotoDoc {
                    id: p.id,
                    lat: p.lat,
                    lng: p.lng,
                    lambda_s: p.lambda,
                    mu_mb: p.mu,
                    holders: p.holders.clone(),
                })
                .collect(),
            drones: self
                .drones
                .iter()
                .map(|d| DroneDoc {
                    id: d.id,
                    capable: d.capable,
                })
                .collect(),
            links: self
                .topology
                .links
                .iter()
                .map(|l| LinkDoc {
                    u: l.u,
                    v: l.v,
                    capacity_mbps: l.capacity,
                })
                .collect(),
            sigma: self.sigma,
            t_hat_s: Seconds(self.t_hat),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("instance serializes")
    }
}

/// Seconds that serialize `+inf` as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seconds(pub f64);

impl Serialize for Seconds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Seconds(x)),
            Raw::Text(t) => parse_seconds(&t)
                .map(Seconds)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid seconds value {t:?}"))),
        }
    }
}

/// Parses a number of seconds or `inf`/`infinity`.
pub fn parse_seconds(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        Some(f64::INFINITY)
    } else {
        t.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotoDoc {
    pub id: PhotoId,
    pub lat: f64,
    pub lng: f64,
    pub lambda_s: f64,
    pub mu_mb: f64,
    pub holders: Vec<DroneId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneDoc {
    pub id: DroneId,
    pub capable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub u: DroneId,
    pub v: DroneId,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub photos: Vec<PhotoDoc>,
    pub drones: Vec<DroneDoc>,
    pub links: Vec<LinkDoc>,
    pub sigma: usize,
    pub t_hat_s: Seconds,
}

impl InstanceDoc {
    pub fn into_instance(self) -> Result<Instance, ModelError> {
        Instance::new(
            self.name,
            self.photos
                .into_iter()
                .map(|p| Photo {
                    id: p.id,
                    lat: p.lat,
                    lng: p.lng,
                    lambda: p.lambda_s,
                    mu: p.mu_mb,
                    holders: p.holders,
                })
                .collect(),
            self.drones
                .into_iter()
                .map(|d| Drone {
                    id: d.id,
                    capable: d.capable,
                })
                .collect(),
            self.links
                .into_iter()
                .map(|l| Link {
                    u: l.u,
                    v: l.v,
                    capacity: l.capacity_mbps,
                })
                .collect(),
            self.sigma,
            self.t_hat_s.0,
        )
    }
}

/// A source format that can be turned into an [`Instance`].
///
/// [`JsonFormat`] reads this crate's own schema. Other instance collections
/// plug in by implementing this trait.
pub trait InstanceFormat {
    fn read(&self, input: &mut dyn Read) -> Result<Instance, ModelError>;
}

pub struct JsonFormat;

impl InstanceFormat for JsonFormat {
    fn read(&self, input: &mut dyn Read) -> Result<Instance, ModelError> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        parse_instance(&text)
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    doc.into_instance()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let mut file = std::fs::File::open(path)?;
    JsonFormat.read(&mut file)
}

/// Perfect division of the replicated workload among the capable drones.
pub fn lower_bound(inst: &Instance) -> f64 {
    inst.sigma as f64 * inst.total_lambda() / inst.m() as f64
}

/// Per-drone processing totals computed straight from photo membership.
///
/// Photos inside several regions are counted once per region.
pub fn makespan(
    inst: &Instance,
    regions: &[Rect],
    assignment: &[Vec<DroneId>],
) -> Result<f64, ModelError> {
    if regions.len() != assignment.len() {
        return Err(ModelError::AssignmentShape {
            regions: regions.len(),
            assignment: assignment.len(),
        });
    }
    let (cols, rows) = (inst.lngs.len(), inst.lats.len());
    let mut totals = vec![0.0; inst.drones.len()];
    for (ri, (rect, drones)) in regions.iter().zip(assignment).enumerate() {
        if !rect.is_valid_for(cols, rows) {
            return Err(ModelError::InvalidRect(ri));
        }
        let time: f64 = inst
            .photos
            .iter()
            .zip(&inst.cells)
            .filter(|(_, &(c, l))| rect.contains(c, l))
            .map(|(p, _)| p.lambda)
            .sum();
        for &d in drones {
            let di = inst.drone_index(d).ok_or(ModelError::UnknownDrone(d))?;
            if !inst.drones[di].capable {
                return Err(ModelError::NonCapableAssignment(d));
            }
            totals[di] += time;
        }
    }
    Ok(inst
        .capable
        .iter()
        .map(|&d| totals[d])
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandDelay {
    pub from: DroneId,
    pub to: DroneId,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub regions: Vec<Rect>,
    /// Drone ids per region, ascending.
    pub assignment: Vec<Vec<DroneId>>,
    pub makespan: f64,
    pub delays: Vec<DemandDelay>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDoc {
    pub c_lt: usize,
    pub c_gt: usize,
    pub l_lo: usize,
    pub l_hi: usize,
    pub drones: Vec<DroneId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub makespan_s: f64,
    pub regions: Vec<RegionDoc>,
    pub delays: Vec<DemandDelay>,
    pub feasible: bool,
}

impl Solution {
    pub fn to_document(&self) -> SolutionDoc {
        SolutionDoc {
            makespan_s: self.makespan,
            regions: self
                .regions
                .iter()
                .zip(&self.assignment)
                .map(|(r, d)| RegionDoc {
                    c_lt: r.c_lt,
                    c_gt: r.c_gt,
                    l_lo: r.l_lo,
                    l_hi: r.l_hi,
                    drones: d.clone(),
                })
                .collect(),
            delays: self.delays.clone(),
            feasible: self.feasible,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("solution serializes")
    }

    pub fn from_document(doc: SolutionDoc) -> Self {
        let (regions, assignment) = doc
            .regions
            .into_iter()
            .map(|r| (Rect::new(r.c_lt, r.c_gt, r.l_lo, r.l_hi), r.drones))
            .unzip();
        Self {
            regions,
            assignment,
            makespan: doc.makespan_s,
            delays: doc.delays,
            feasible: doc.feasible,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(Self::from_document(serde_json::from_str(text)?))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Lists every way `sol` breaks the covering, reliability, per-drone coverage,
/// delay or consistency rules. An empty list means the solution is valid.
pub fn validate_solution(inst: &Instance, sol: &Solution) -> Vec<String> {
    let mut out = Vec::new();
    let (cols, rows) = (inst.lngs.len(), inst.lats.len());
    if sol.regions.len() != inst.m() {
        out.push(format!(
            "expected {} regions, found {}",
            inst.m(),
            sol.regions.len()
        ));
    }
    if sol.assignment.len() != sol.regions.len() {
        out.push(format!(
            "assignment has {} entries for {} regions",
            sol.assignment.len(),
            sol.regions.len()
        ));
        return out;
    }
    let mut structurally_sound = true;
    let mut per_drone = vec![0usize; inst.drones.len()];
    for (i, (rect, drones)) in sol.regions.iter().zip(&sol.assignment).enumerate() {
        if !rect.is_valid_for(cols, rows) {
            out.push(format!("region {i} has invalid borders {rect}"));
            structurally_sound = false;
            continue;
        }
        if !inst.cells.iter().any(|&(c, l)| rect.contains(c, l)) {
            out.push(format!("region {i} is empty"));
        }
        let distinct: BTreeSet<DroneId> = drones.iter().copied().collect();
        if distinct.len() != drones.len() {
            out.push(format!("region {i} lists a drone more than once"));
        }
        for &d in &distinct {
            match inst.drone_index(d) {
                None => {
                    out.push(format!("region {i} assigned to unknown drone {d}"));
                    structurally_sound = false;
                }
                Some(di) if !inst.drones[di].capable => {
                    out.push(format!("region {i} assigned to non-capable drone {d}"));
                    structurally_sound = false;
                }
                Some(di) => per_drone[di] += 1,
            }
        }
        if distinct.len() < inst.sigma {
            out.push(format!(
                "region {i} assigned to {} < σ={} drones",
                distinct.len(),
                inst.sigma
            ));
        }
    }
    for (p, &(c, l)) in inst.photos.iter().zip(&inst.cells) {
        let covered = sol
            .regions
            .iter()
            .any(|r| r.is_valid_for(cols, rows) && r.contains(c, l));
        if !covered {
            out.push(format!("photo {} uncovered", p.id));
        }
    }
    for &d in &inst.capable {
        if per_drone[d] == 0 {
            out.push(format!("drone {} has no region", inst.drones[d].id));
        }
    }
    if !structurally_sound {
        return out;
    }

    match makespan(inst, &sol.regions, &sol.assignment) {
        Ok(t) if !close(t, sol.makespan) => out.push(format!(
            "reported makespan {} differs from recomputed {}",
            sol.makespan, t
        )),
        Ok(_) => {}
        Err(e) => out.push(e.to_string()),
    }

    let geo = GeoSums::build(inst);
    let evaluator = Evaluator::new(inst, &geo);
    let assignment: Vec<Vec<usize>> = sol
        .assignment
        .iter()
        .map(|ds| {
            let mut v: Vec<usize> = ds.iter().filter_map(|&d| inst.drone_index(d)).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let eval = evaluator.evaluate(&sol.regions, &assignment, None);
    for demand in &eval.demands {
        if demand.delay > inst.t_hat {
            out.push(format!(
                "demand {}->{} delay {} s exceeds T̂={} s",
                inst.drone_id(demand.from),
                inst.drone_id(demand.to),
                demand.delay,
                inst.t_hat
            ));
        }
    }
    if sol.feasible && !eval.delay_feasible {
        out.push("solution marked feasible but delays exceed T̂".to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{t4, t9};

    #[test]
    fn t4_grid_and_capable_count() {
        let inst = t4();
        assert_eq!(inst.lngs().len(), 2);
        assert_eq!(inst.lats().len(), 2);
        assert_eq!(inst.m(), 2);
    }

    #[test]
    fn cyclic_links_are_rejected() {
        let mut doc = t4().to_document();
        doc.drones.push(DroneDoc {
            id: 3,
            capable: false,
        });
        doc.links.push(LinkDoc {
            u: 2,
            v: 3,
            capacity_mbps: 1.0,
        });
        doc.links.push(LinkDoc {
            u: 3,
            v: 1,
            capacity_mbps: 1.0,
        });
        // three links over three nodes: the count check fires first
        let err = doc.clone().into_instance().unwrap_err();
        assert_eq!(err.to_string(), "topology is not a tree");

        // right link count but a cycle plus a disconnected node
        doc.drones.push(DroneDoc {
            id: 4,
            capable: false,
        });
        let err = doc.into_instance().unwrap_err();
        assert_eq!(err.to_string(), "topology is not a tree");
    }

    #[test]
    fn sigma_above_capable_is_rejected() {
        let mut doc = t4().to_document();
        doc.sigma = 3;
        let err = doc.into_instance().unwrap_err();
        assert!(err.to_string().starts_with("sigma exceeds capable drones"));
    }

    #[test]
    fn unknown_holder_is_rejected() {
        let mut doc = t4().to_document();
        doc.photos[0].holders = vec![42];
        assert!(matches!(
            doc.into_instance(),
            Err(ModelError::UnknownHolder { drone: 42, .. })
        ));
    }

    #[test]
    fn duplicate_coordinates_share_an_index() {
        let mut doc = t4().to_document();
        doc.photos[1].lng = doc.photos[0].lng;
        doc.photos[1].lat = doc.photos[0].lat;
        let inst = doc.into_instance().unwrap();
        assert_eq!(inst.cells()[0], inst.cells()[1]);
    }

    #[test]
    fn t_hat_accepts_inf_string() {
        let text = t4().to_json();
        assert!(text.contains("\"t_hat_s\": \"inf\""));
        let back = parse_instance(&text).unwrap();
        assert!(back.t_hat().is_infinite());
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(lower_bound(&t4()), 20.0);
        assert_eq!(lower_bound(&t4().with_sigma(2).unwrap()), 40.0);
        assert_eq!(lower_bound(&t9()), 30.0);
    }

    #[test]
    fn makespan_of_column_splits() {
        let inst = t4();
        let cols = [Rect::new(0, 0, 0, 1), Rect::new(1, 1, 0, 1)];
        assert_eq!(makespan(&inst, &cols, &[vec![1], vec![2]]).unwrap(), 20.0);
        assert_eq!(
            makespan(&inst, &cols, &[vec![1, 2], vec![1, 2]]).unwrap(),
            40.0
        );
        let t9 = t9();
        let cols3: Vec<Rect> = (0..3).map(|c| Rect::new(c, c, 0, 2)).collect();
        assert_eq!(
            makespan(&t9, &cols3, &[vec![1], vec![2], vec![3]]).unwrap(),
            30.0
        );
    }

    #[test]
    fn makespan_rejects_non_capable() {
        let mut doc = t4().to_document();
        doc.drones.push(DroneDoc {
            id: 9,
            capable: false,
        });
        doc.links.push(LinkDoc {
            u: 1,
            v: 9,
            capacity_mbps: 1.0,
        });
        let inst = doc.into_instance().unwrap();
        let err = makespan(&inst, &[inst.full_rect()], &[vec![9]]).unwrap_err();
        assert!(matches!(err, ModelError::NonCapableAssignment(9)));
    }

    fn t4_optimal() -> Solution {
        Solution {
            regions: vec![Rect::new(0, 0, 0, 1), Rect::new(1, 1, 0, 1)],
            assignment: vec![vec![1], vec![2]],
            makespan: 20.0,
            delays: vec![],
            feasible: true,
        }
    }

    #[test]
    fn validate_accepts_t4_optimum() {
        assert!(validate_solution(&t4(), &t4_optimal()).is_empty());
    }

    #[test]
    fn validate_reports_sigma_shortfall() {
        let inst = t4().with_sigma(2).unwrap();
        let sol = Solution {
            assignment: vec![vec![1], vec![1, 2]],
            makespan: 40.0,
            ..t4_optimal()
        };
        assert_eq!(
            validate_solution(&inst, &sol),
            vec!["region 0 assigned to 1 < σ=2 drones".to_string()]
        );
    }

    #[test]
    fn validate_reports_uncovered_photo() {
        let sol = Solution {
            regions: vec![Rect::new(0, 0, 0, 1), Rect::new(1, 1, 0, 0)],
            makespan: 20.0,
            ..t4_optimal()
        };
        assert_eq!(
            validate_solution(&t4(), &sol),
            vec!["photo 3 uncovered".to_string()]
        );
    }

    #[test]
    fn validate_reports_delay_violation() {
        let inst = t4().with_t_hat(15.0).unwrap();
        let sol = Solution {
            assignment: vec![vec![2], vec![1]],
            feasible: true,
            ..t4_optimal()
        };
        let v = validate_solution(&inst, &sol);
        assert!(v.iter().any(|s| s.contains("exceeds T̂")), "{v:?}");
    }

    #[test]
    fn topology_paths_follow_the_tree() {
        let topo = Topology::new(
            vec![1, 2, 3, 4],
            vec![
                Link {
                    u: 1,
                    v: 2,
                    capacity: 1.0,
                },
                Link {
                    u: 2,
                    v: 3,
                    capacity: 1.0,
                },
                Link {
                    u: 2,
                    v: 4,
                    capacity: 1.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(topo.path(1, 3).unwrap(), vec![0, 1]);
        assert_eq!(topo.path(3, 4).unwrap(), vec![1, 2]);
        assert_eq!(topo.path(4, 1).unwrap(), vec![2, 0]);
        assert!(topo.path(2, 2).unwrap().is_empty());
    }
}
