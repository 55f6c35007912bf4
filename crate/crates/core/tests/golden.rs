//! Text outputs compared against checked-in files. Set `UPDATE_GOLDEN=1` to
//! rewrite them.

use std::path::PathBuf;

use capsac::enumdecomp::{self, MilpFlags};
use capsac::ptree::{Axis, PartitionTree};
use capsac::testing::{t4, t9};
use capsac::GeoSums;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "{name} drifted");
}

#[test]
fn t4_lp() {
    let inst = t4().with_t_hat(30.0).unwrap();
    let geo = GeoSums::build(&inst);
    let catalog = enumdecomp::enumerate_rects(&inst, &geo);
    let all: Vec<usize> = (0..catalog.len()).collect();
    let lp = enumdecomp::export_milp(&inst, &geo, &catalog, &all, MilpFlags { per_drone_coverage: true });
    golden("t4.lp", &lp);
    golden("t4_catalog.csv", &catalog.to_csv());
}

#[test]
fn t9_tree_dump() {
    let inst = t9();
    let geo = GeoSums::build(&inst);
    let tree = PartitionTree::random(&geo, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    golden("t9_tree.txt", &tree.to_string());
    let root = tree.node(tree.root());
    assert!(Axis::BOTH.contains(&root.split.unwrap().axis));
}
