use std::collections::BTreeSet;
use std::path::Path;

use bnem_core::harness::{load_grid, NetworkSource};

fn grid(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../grids").join(name)
}

#[test]
fn desk_grid_expands() {
    let specs = load_grid(&grid("desk.grid")).unwrap();
    assert_eq!(specs.len(), 36);
    assert!(specs.iter().all(|s| s.replicates == 10));
}

#[test]
fn table_grid_expands_with_unique_ids() {
    let specs = load_grid(&grid("table_a1.grid")).unwrap();
    let ids: BTreeSet<&str> = specs.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids.len(), specs.len());
    assert_eq!(specs.iter().filter(|s| s.network == NetworkSource::Asia).count(), 3 * 8 * 2);
    let nodes: BTreeSet<usize> = specs
        .iter()
        .filter_map(|s| match &s.network {
            NetworkSource::Random(r) => Some(r.nodes),
            _ => None,
        })
        .collect();
    assert_eq!(nodes.into_iter().collect::<Vec<_>>(), vec![9, 27, 31, 56, 88, 109]);
}

#[test]
fn grid_networks_load() {
    for spec in load_grid(&grid("table_a1.grid")).unwrap() {
        let bn = spec.network.load().unwrap();
        assert!(bn.len() >= 8);
    }
}
