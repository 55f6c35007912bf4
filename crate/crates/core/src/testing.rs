//! Small fixed instances shared by unit tests, integration tests and benches.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Drone, Instance, Link, Photo};

pub fn photo(id: u32, lng: f64, lat: f64, lambda: f64, mu: f64, holders: &[u32]) -> Photo {
    Photo {
        id,
        lat,
        lng,
        lambda,
        mu,
        holders: holders.to_vec(),
    }
}

pub fn capable(ids: &[u32]) -> Vec<Drone> {
    ids.iter().map(|&id| Drone { id, capable: true }).collect()
}

pub fn link(u: u32, v: u32, capacity: f64) -> Link {
    Link { u, v, capacity }
}

/// 2x2 unit grid, lambda 10 s and mu 5 MB per photo. Drone 1 holds the left
/// column, drone 2 the right one; one link of 1 MB/s.
pub fn t4() -> Instance {
    let photos = vec![
        photo(0, 0.0, 0.0, 10.0, 5.0, &[1]),
        photo(1, 1.0, 0.0, 10.0, 5.0, &[2]),
        photo(2, 0.0, 1.0, 10.0, 5.0, &[1]),
        photo(3, 1.0, 1.0, 10.0, 5.0, &[2]),
    ];
    Instance::new(
        Some("T4".into()),
        photos,
        capable(&[1, 2]),
        vec![link(1, 2, 1.0)],
        1,
        f64::INFINITY,
    )
    .expect("T4 is valid")
}

/// 3x3 unit grid, ids row-major, lambda 10 s and mu 5 MB. Column `c` is held
/// by drone `c + 1`; chain 1-2-3 of 1 MB/s links.
pub fn t9() -> Instance {
    let photos = (0..9)
        .map(|i| {
            let (c, l) = (i % 3, i / 3);
            photo(i, c as f64, l as f64, 10.0, 5.0, &[c + 1])
        })
        .collect();
    Instance::new(
        Some("T9".into()),
        photos,
        capable(&[1, 2, 3]),
        vec![link(1, 2, 1.0), link(2, 3, 1.0)],
        1,
        f64::INFINITY,
    )
    .expect("T9 is valid")
}

pub fn single_photo() -> Instance {
    Instance::new(
        Some("single".into()),
        vec![photo(0, 0.0, 0.0, 10.0, 5.0, &[1])],
        capable(&[1]),
        vec![],
        1,
        f64::INFINITY,
    )
    .expect("single-photo instance is valid")
}

/// Shape of a random tiny instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinySpec {
    pub max_cols: usize,
    pub max_rows: usize,
    /// Capable drones.
    pub m: usize,
    /// Additional drones that hold data but cannot reconstruct.
    pub extra_drones: usize,
    pub sigma: usize,
    pub max_lambda: u32,
    pub max_mu: u32,
}

impl Default for TinySpec {
    fn default() -> Self {
        Self {
            max_cols: 3,
            max_rows: 3,
            m: 2,
            extra_drones: 1,
            sigma: 1,
            max_lambda: 4,
            max_mu: 3,
        }
    }
}

/// Random instance with integer times and sizes: at least `m` photos on a
/// random subset of a small grid, one or two holders per photo, and a random
/// tree of 1 or 2 MB/s links. The delay limit is unbounded.
pub fn random_tiny<R: Rng + ?Sized>(spec: &TinySpec, rng: &mut R) -> Instance {
    let (cols, rows) = loop {
        let c = rng.gen_range(1..=spec.max_cols);
        let r = rng.gen_range(1..=spec.max_rows);
        if c * r >= spec.m {
            break (c, r);
        }
    };
    let mut cells: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (c, r))).collect();
    cells.shuffle(rng);
    cells.truncate(rng.gen_range(spec.m..=cols * rows));
    let z = spec.m + spec.extra_drones;
    let photos = cells
        .iter()
        .enumerate()
        .map(|(i, &(c, r))| {
            let mut holders = vec![rng.gen_range(1..=z as u32)];
            if rng.gen_bool(0.2) {
                holders.push(rng.gen_range(1..=z as u32));
            }
            photo(
                i as u32,
                c as f64,
                r as f64,
                rng.gen_range(1..=spec.max_lambda) as f64,
                rng.gen_range(1..=spec.max_mu) as f64,
                &holders,
            )
        })
        .collect();
    let drones = (1..=z as u32)
        .map(|id| Drone {
            id,
            capable: id as usize <= spec.m,
        })
        .collect();
    let links = (2..=z as u32)
        .map(|v| link(rng.gen_range(1..v), v, rng.gen_range(1..=2) as f64))
        .collect();
    Instance::new(None, photos, drones, links, spec.sigma, f64::INFINITY).expect("random tiny instance is valid")
}
