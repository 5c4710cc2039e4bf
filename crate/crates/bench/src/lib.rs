//! Fixtures shared by the benchmarks.

use bnem_core::missingness::ampute;
use bnem_core::network::{asia, random_network, RandomNetworkSpec};
use bnem_core::{AmputationSpec, DataSet, DiscreteBayesNet};

/// Asia with `rows` sampled rows and 5% of cells hidden completely at random.
pub fn asia_fixture(rows: usize) -> (DiscreteBayesNet, DataSet) {
    fixture(asia(), rows)
}

/// A seeded random network with `nodes` nodes and the same amputation.
pub fn random_fixture(nodes: usize, rows: usize) -> (DiscreteBayesNet, DataSet) {
    let spec = RandomNetworkSpec { nodes, max_parents: 3, min_states: 2, max_states: 3, seed: nodes as u64 };
    fixture(random_network(&spec).expect("random network"), rows)
}

fn fixture(bn: DiscreteBayesNet, rows: usize) -> (DiscreteBayesNet, DataSet) {
    let complete = bn.forward_sample(rows, 7);
    let amputed = ampute(&complete, bn.dag(), &AmputationSpec::mcar(0.05, 11)).expect("amputation");
    (bn, amputed)
}
