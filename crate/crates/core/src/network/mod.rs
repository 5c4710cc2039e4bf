//! Discrete Bayesian networks: CPT storage, joint evaluation, ancestral
//! sampling and a seeded random-network generator.

mod format;

pub use format::{parse_network, serialize_network, ParseError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::DataSet;
use crate::dag::{Dag, DagError};

/// Tolerance on CPT column sums.
pub const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("node `{0}` needs at least two states")]
    TooFewStates(String),
    #[error("CPT of `{node}` has {got} entries, expected {expected}")]
    CptShape { node: String, expected: usize, got: usize },
    #[error("CPT of `{node}` column {column} sums to {sum}")]
    ColumnSum { node: String, column: usize, sum: f64 },
    #[error("CPT of `{node}` has entry {value} outside [0, 1]")]
    EntryRange { node: String, value: f64 },
    #[error("state {state} out of range for `{node}` ({cardinality} states)")]
    InvalidState { node: String, state: usize, cardinality: usize },
    #[error("assignment has {got} values for {expected} nodes")]
    AssignmentLength { expected: usize, got: usize },
}

/// Conditional probability table of one node.
///
/// Stored column-major: the column for parent configuration `j` is the
/// contiguous slice `values[j * states .. (j + 1) * states]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    states: usize,
    configs: usize,
    values: Vec<f64>,
}

impl Cpt {
    pub fn new(states: usize, configs: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), states * configs, "CPT shape mismatch");
        Cpt { states, configs, values }
    }

    pub fn uniform(states: usize, configs: usize) -> Self {
        Cpt::new(states, configs, vec![1.0 / states as f64; states * configs])
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Number of parent configurations.
    pub fn configs(&self) -> usize {
        self.configs
    }

    #[inline]
    pub fn prob(&self, state: usize, config: usize) -> f64 {
        self.values[config * self.states + state]
    }

    pub fn column(&self, config: usize) -> &[f64] {
        &self.values[config * self.states..(config + 1) * self.states]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Cpt) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Mixed-radix parent configuration index; first parent most significant.
#[inline]
pub fn config_index(parents: &[usize], cardinalities: &[usize], assignment: &[usize]) -> usize {
    parents
        .iter()
        .fold(0, |j, &p| j * cardinalities[p] + assignment[p])
}

/// Inverse of [`config_index`]: parent states for configuration `j`.
pub fn config_states(parents: &[usize], cardinalities: &[usize], mut config: usize) -> Vec<usize> {
    let mut out = vec![0; parents.len()];
    for (slot, &p) in out.iter_mut().zip(parents).rev() {
        *slot = config % cardinalities[p];
        config /= cardinalities[p];
    }
    out
}

/// Number of parent configurations of `node`.
pub fn config_count(dag: &Dag, cardinalities: &[usize], node: usize) -> usize {
    dag.parents(node).iter().map(|&p| cardinalities[p]).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBayesNet {
    dag: Dag,
    states: Vec<Vec<String>>,
    cardinalities: Vec<usize>,
    cpts: Vec<Cpt>,
}

impl DiscreteBayesNet {
    pub fn new(dag: Dag, states: Vec<Vec<String>>, cpts: Vec<Cpt>) -> Result<Self, NetworkError> {
        assert_eq!(states.len(), dag.len());
        assert_eq!(cpts.len(), dag.len());
        for (i, s) in states.iter().enumerate() {
            if s.len() < 2 {
                return Err(NetworkError::TooFewStates(dag.name(i).to_string()));
            }
        }
        let cardinalities: Vec<usize> = states.iter().map(Vec::len).collect();
        for (i, cpt) in cpts.iter().enumerate() {
            let node = dag.name(i).to_string();
            let configs = config_count(&dag, &cardinalities, i);
            let expected = configs * cardinalities[i];
            if cpt.values.len() != expected || cpt.states != cardinalities[i] {
                return Err(NetworkError::CptShape { node, expected, got: cpt.values.len() });
            }
            if let Some(&value) = cpt.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(NetworkError::EntryRange { node, value });
            }
            for j in 0..configs {
                let sum: f64 = cpt.column(j).iter().sum();
                if (sum - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                    return Err(NetworkError::ColumnSum { node, column: j, sum });
                }
            }
        }
        Ok(DiscreteBayesNet { dag, states, cardinalities, cpts })
    }

    /// Same structure and states with every CPT uniform.
    pub fn uniform(dag: Dag, states: Vec<Vec<String>>) -> Result<Self, NetworkError> {
        let cards: Vec<usize> = states.iter().map(Vec::len).collect();
        let cpts = (0..dag.len())
            .map(|i| Cpt::uniform(cards[i], config_count(&dag, &cards, i)))
            .collect();
        DiscreteBayesNet::new(dag, states, cpts)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn len(&self) -> usize {
        self.dag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dag.is_empty()
    }

    pub fn states(&self, node: usize) -> &[String] {
        &self.states[node]
    }

    pub fn all_states(&self) -> &[Vec<String>] {
        &self.states
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn config_of(&self, node: usize, assignment: &[usize]) -> usize {
        config_index(self.dag.parents(node), &self.cardinalities, assignment)
    }

    /// `P(node = assignment[node] | parents as in assignment)`.
    #[inline]
    pub fn local_prob(&self, node: usize, assignment: &[usize]) -> f64 {
        self.cpts[node].prob(assignment[node], self.config_of(node, assignment))
    }

    pub fn check_assignment(&self, assignment: &[usize]) -> Result<(), NetworkError> {
        if assignment.len() != self.len() {
            return Err(NetworkError::AssignmentLength {
                expected: self.len(),
                got: assignment.len(),
            });
        }
        for (i, &s) in assignment.iter().enumerate() {
            if s >= self.cardinalities[i] {
                return Err(NetworkError::InvalidState {
                    node: self.dag.name(i).to_string(),
                    state: s,
                    cardinality: self.cardinalities[i],
                });
            }
        }
        Ok(())
    }

    /// Product of the local conditionals for a full assignment.
    pub fn joint_probability(&self, assignment: &[usize]) -> Result<f64, NetworkError> {
        self.check_assignment(assignment)?;
        Ok((0..self.len()).map(|i| self.local_prob(i, assignment)).product())
    }

    /// Largest absolute CPT entry difference against a same-shaped network.
    pub fn max_abs_diff(&self, other: &DiscreteBayesNet) -> f64 {
        self.cpts
            .iter()
            .zip(&other.cpts)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Ancestral sampling of `n` complete records.
    pub fn forward_sample(&self, n: usize, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = self
            .dag
            .topological_order()
            .expect("network DAG is acyclic");
        let width = self.len();
        let mut cells = Vec::with_capacity(n * width);
        let mut row = vec![0usize; width];
        for _ in 0..n {
            for &v in &order {
                let column = self.cpts[v].column(self.config_of(v, &row));
                row[v] = draw_categorical(column, rng.gen::<f64>());
            }
            cells.extend(row.iter().map(|&s| Some(s)));
        }
        DataSet::from_cells(self.dag.names().to_vec(), self.cardinalities.clone(), cells)
            .expect("sampled states are in range")
    }
}

/// Inverse-CDF draw; mass lost to rounding falls on the last positive state.
pub(crate) fn draw_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Network size class by node count: small up to 20 nodes, medium 21 to
/// 50, large above 50.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub fn from_node_count(nodes: usize) -> Self {
        match nodes {
            0..=20 => SizeClass::Small,
            21..=50 => SizeClass::Medium,
            _ => SizeClass::Large,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        }
    }
}

impl std::str::FromStr for SizeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(SizeClass::Small),
            "medium" => Ok(SizeClass::Medium),
            "large" => Ok(SizeClass::Large),
            other => Err(format!("unknown size class `{other}`")),
        }
    }
}

impl DiscreteBayesNet {
    pub fn size_class(&self) -> SizeClass {
        SizeClass::from_node_count(self.len())
    }
}

/// Parameters of [`random_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomNetworkSpec {
    pub nodes: usize,
    pub max_parents: usize,
    pub min_states: usize,
    pub max_states: usize,
    pub seed: u64,
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        RandomNetworkSpec { nodes: 10, max_parents: 3, min_states: 2, max_states: 3, seed: 0 }
    }
}

/// Seeded random network. Nodes `X1..Xn` are declared in topological order;
/// each picks up to `max_parents` parents among its predecessors and CPT
/// columns are Dirichlet(1) draws.
pub fn random_network(spec: &RandomNetworkSpec) -> Result<DiscreteBayesNet, NetworkError> {
    assert!(spec.min_states >= 2 && spec.max_states >= spec.min_states);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names: Vec<String> = (1..=spec.nodes).map(|i| format!("X{i}")).collect();
    let cards: Vec<usize> = (0..spec.nodes)
        .map(|_| rng.gen_range(spec.min_states..=spec.max_states))
        .collect();
    let mut parents = Vec::with_capacity(spec.nodes);
    for i in 0..spec.nodes {
        let k = rng.gen_range(0..=spec.max_parents.min(i));
        let mut ps = rand::seq::index::sample(&mut rng, i.max(1), k.min(i)).into_vec();
        ps.sort_unstable();
        parents.push(ps);
    }
    let dag = Dag::from_parents(&names, parents)?;
    let states: Vec<Vec<String>> = cards
        .iter()
        .map(|&c| (0..c).map(|s| format!("s{s}")).collect())
        .collect();
    let cpts = (0..spec.nodes)
        .map(|i| {
            let configs = config_count(&dag, &cards, i);
            let mut values = Vec::with_capacity(configs * cards[i]);
            for _ in 0..configs {
                values.extend(dirichlet_ones(&mut rng, cards[i]));
            }
            Cpt::new(cards[i], configs, values)
        })
        .collect();
    DiscreteBayesNet::new(dag, states, cpts)
}

/// Flat Dirichlet draw via normalised unit exponentials.
pub(crate) fn dirichlet_ones<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    let mut column: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // Pin the column sum to 1 up to the last ulp.
    let head: f64 = column[..k - 1].iter().sum();
    column[k - 1] = (1.0 - head).max(0.0);
    column
}

/// The bundled 8-node Asia network.
pub fn asia() -> DiscreteBayesNet {
    parse_network(include_str!("../../networks/asia.net")).expect("bundled Asia network parses")
}
