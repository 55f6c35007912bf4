//! Covering-assignment solvers for swarm-powered ad hoc clouds: split a
//! photographed area into rectangular sub-regions, assign each to enough
//! 3D-capable drones, and minimize the makespan under max-min fair transfer
//! deadlines.

pub mod enumdecomp;
pub mod geosum;
pub mod mmf;
pub mod model;
pub mod oracle;
pub mod par;
pub mod ptree;
pub mod vns;

#[doc(hidden)]
pub mod testing;

pub use geosum::GeoSums;
pub use model::{
    load_instance, lower_bound, makespan, parse_instance, validate_solution, DroneId, Instance,
    ModelError, Rect, Solution,
};
pub use par::Execution;
