//! Random single-arc edits of a reference DAG, producing neighbouring
//! structures for the perturbed-network evaluation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dag::{ArcOp, Dag, DagError};
use crate::network::SizeClass;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerturbationError {
    #[error("perturbation needs at least two nodes")]
    TooSmall,
    #[error("no node admits a feasible arc operation")]
    NoFeasibleOperation,
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// One applied edit: the sampled node and the arc it touched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationRecord {
    pub node: usize,
    pub op: ArcOp,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PerturbationLog {
    pub records: Vec<PerturbationRecord>,
}

impl PerturbationLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Applies the logged edits to `dag` in order.
    pub fn replay(&self, dag: &Dag) -> Result<Dag, DagError> {
        let mut out = dag.clone();
        for r in &self.records {
            out = out.apply_arc_operation(r.op, r.from, r.to)?;
        }
        Ok(out)
    }

    /// CSV with header `node,operation,from,to`, using node names.
    pub fn to_csv(&self, dag: &Dag) -> String {
        let mut s = String::from("node,operation,from,to\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", dag.name(r.node), r.op.as_str(), dag.name(r.from), dag.name(r.to));
        }
        s
    }

    pub fn from_csv(text: &str, dag: &Dag) -> Result<Self, PerturbationError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| PerturbationError::Log { line: i + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, got {}", fields.len())));
            }
            let node = |n: &str| dag.index_of(n).ok_or_else(|| err(format!("unknown node `{n}`")));
            records.push(PerturbationRecord {
                node: node(fields[0])?,
                op: fields[1].parse().map_err(|e: String| err(e))?,
                from: node(fields[2])?,
                to: node(fields[3])?,
            });
        }
        Ok(PerturbationLog { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PerturbationOptions {
    /// Additions may not push a node above this many parents.
    pub max_in_degree: Option<usize>,
}

/// Number of nodes to perturb: 15% of nodes for small networks and 10%
/// otherwise, rounded up.
pub fn perturbed_node_count(nodes: usize, size_class: SizeClass) -> usize {
    let pct = match size_class {
        SizeClass::Small => 15,
        SizeClass::Medium | SizeClass::Large => 10,
    };
    (nodes * pct).div_ceil(100)
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Feasible edits touching `v`, grouped by operation, skipping pairs that
/// were already edited.
fn candidates(
    dag: &Dag,
    v: usize,
    edited: &BTreeSet<(usize, usize)>,
    options: PerturbationOptions,
) -> Vec<(ArcOp, Vec<(usize, usize)>)> {
    let incident: Vec<(usize, usize)> = dag
        .parents(v)
        .iter()
        .map(|&p| (p, v))
        .chain(dag.children(v).iter().map(|&c| (v, c)))
        .filter(|&(a, b)| !edited.contains(&pair(a, b)))
        .collect();
    let mut removals = incident.clone();
    removals.sort_unstable();
    let mut reversals: Vec<(usize, usize)> = incident
        .iter()
        .copied()
        .filter(|&(a, b)| dag.can_reverse(a, b))
        .filter(|&(a, _)| options.max_in_degree.is_none_or(|m| dag.parents(a).len() < m))
        .collect();
    reversals.sort_unstable();
    let room = |head: usize| options.max_in_degree.is_none_or(|m| dag.parents(head).len() < m);
    let mut additions = Vec::new();
    for u in 0..dag.len() {
        if u == v || edited.contains(&pair(u, v)) {
            continue;
        }
        if dag.can_add(u, v) && room(v) {
            additions.push((u, v));
        }
        if dag.can_add(v, u) && room(u) {
            additions.push((v, u));
        }
    }
    [(ArcOp::Remove, removals), (ArcOp::Add, additions), (ArcOp::Reverse, reversals)]
        .into_iter()
        .filter(|(_, c)| !c.is_empty())
        .collect()
}

/// Perturbs `dag` with the default options.
pub fn perturb_dag(dag: &Dag, size_class: SizeClass, seed: u64) -> Result<(Dag, PerturbationLog), PerturbationError> {
    perturb_dag_with(dag, size_class, seed, PerturbationOptions::default())
}

/// Samples nodes without replacement and applies one random edit per node.
///
/// Each node draws an operation uniformly among the feasible ones and then a
/// uniform arc for it. A node pair is edited at most once, so every edit
/// changes the structural Hamming distance by exactly one. Nodes without a
/// feasible edit are skipped in favour of the next sampled node.
pub fn perturb_dag_with(
    dag: &Dag,
    size_class: SizeClass,
    seed: u64,
    options: PerturbationOptions,
) -> Result<(Dag, PerturbationLog), PerturbationError> {
    if dag.len() < 2 {
        return Err(PerturbationError::TooSmall);
    }
    let target = perturbed_node_count(dag.len(), size_class);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dag.len()).collect();
    order.shuffle(&mut rng);

    let mut current = dag.clone();
    let mut edited = BTreeSet::new();
    let mut log = PerturbationLog::default();
    for v in order {
        if log.len() == target {
            break;
        }
        let options = candidates(&current, v, &edited, options);
        if options.is_empty() {
            continue;
        }
        let (op, arcs) = &options[rng.gen_range(0..options.len())];
        let (from, to) = arcs[rng.gen_range(0..arcs.len())];
        current = current.apply_arc_operation(*op, from, to)?;
        edited.insert(pair(from, to));
        log.records.push(PerturbationRecord { node: v, op: *op, from, to });
    }
    if log.is_empty() {
        return Err(PerturbationError::NoFeasibleOperation);
    }
    Ok((current, log))
}
