//! Synthetic instances: photos on a regular grid, drones dropped at random
//! positions, each photo stored on its nearest drone, random tree links.

use anyhow::{bail, Result};
use capsac::model::{Drone, Instance, Link, Photo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub photos: usize,
    pub drones: usize,
    pub capable_pct: u32,
    pub weighted: bool,
    pub lambda_s: f64,
    pub mu_mb: f64,
    /// `(rows, cols)`; defaults to a near-square grid.
    pub grid: Option<(usize, usize)>,
    pub seed: u64,
    pub capacity_mbps: f64,
    pub sigma: usize,
    pub t_hat: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            photos: 4,
            drones: 2,
            capable_pct: 100,
            weighted: false,
            lambda_s: 10.0,
            mu_mb: 5.0,
            grid: None,
            seed: 0,
            capacity_mbps: 1.0,
            sigma: 1,
            t_hat: f64::INFINITY,
        }
    }
}

pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let Some((r, c)) = text.split_once(['x', 'X']) else {
        bail!("grid must look like ROWSxCOLS, got {text:?}");
    };
    let (rows, cols) = (r.trim().parse::<usize>()?, c.trim().parse::<usize>()?);
    if rows == 0 || cols == 0 {
        bail!("grid dimensions must be positive");
    }
    Ok((rows, cols))
}

/// Number of capable drones for `drones` drones of which `pct` percent are
/// capable, rounded down.
pub fn capable_count(drones: usize, pct: u32) -> usize {
    drones * pct as usize / 100
}

pub fn instance_name(spec: &GenSpec) -> String {
    format!(
        "{}-P{}D{}%D̄{}",
        if spec.weighted { "w" } else { "u" },
        spec.photos,
        spec.drones,
        spec.capable_pct
    )
}

pub fn generate(spec: &GenSpec) -> Result<Instance> {
    if spec.photos == 0 {
        bail!("--photos must be positive");
    }
    if spec.drones == 0 {
        bail!("--drones must be positive");
    }
    if spec.capable_pct > 100 {
        bail!("--capable-pct must be at most 100");
    }
    let capable = capable_count(spec.drones, spec.capable_pct);
    if capable == 0 {
        bail!(
            "{}% of {} drones leaves no capable drone",
            spec.capable_pct,
            spec.drones
        );
    }
    let (rows, cols) = match spec.grid {
        Some(g) => g,
        None => {
            let rows = ((spec.photos as f64).sqrt().floor() as usize).max(1);
            (rows, spec.photos.div_ceil(rows))
        }
    };
    if rows * cols < spec.photos {
        bail!("a {rows}x{cols} grid holds fewer than {} photos", spec.photos);
    }
    if !(spec.lambda_s >= 0.0) || !(spec.mu_mb >= 0.0) || !(spec.capacity_mbps > 0.0) {
        bail!("lambda and mu must be nonnegative and capacity positive");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positions: Vec<(f64, f64)> = (0..spec.drones)
        .map(|_| {
            (
                rng.gen_range(0.0..cols as f64),
                rng.gen_range(0.0..rows as f64),
            )
        })
        .collect();
    let photos = (0..spec.photos)
        .map(|i| {
            let (lng, lat) = ((i % cols) as f64, (i / cols) as f64);
            let nearest = positions
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = (a.0 - lng).powi(2) + (a.1 - lat).powi(2);
                    let db = (b.0 - lng).powi(2) + (b.1 - lat).powi(2);
                    da.total_cmp(&db)
                })
                .map(|(d, _)| d as u32 + 1)
                .expect("at least one drone");
            let lambda = if spec.weighted {
                let x = rng.gen_range(0.5 * spec.lambda_s..=1.5 * spec.lambda_s);
                (x * 100.0).round() / 100.0
            } else {
                spec.lambda_s
            };
            Photo {
                id: i as u32,
                lat,
                lng,
                lambda,
                mu: spec.mu_mb,
                holders: vec![nearest],
            }
        })
        .collect();
    let drones = (1..=spec.drones as u32)
        .map(|id| Drone {
            id,
            capable: id as usize <= capable,
        })
        .collect();
    let links = (2..=spec.drones as u32)
        .map(|v| Link {
            u: rng.gen_range(1..v),
            v,
            capacity: spec.capacity_mbps,
        })
        .collect();
    Ok(Instance::new(
        Some(instance_name(spec)),
        photos,
        drones,
        links,
        spec.sigma,
        spec.t_hat,
    )?)
}
