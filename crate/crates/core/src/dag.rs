//! Directed acyclic graphs over named nodes.
//!
//! Nodes are addressed by their position in the declaration order. Parent
//! lists are ordered: the first parent of a node is the most significant
//! digit of that node's parent-configuration index everywhere in the crate.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("arc {from} -> {to} would create a directed cycle")]
    Cycle { from: String, to: String },
    #[error("arc {from} -> {to} does not exist")]
    MissingArc { from: String, to: String },
    #[error("arc {from} -> {to} already exists")]
    DuplicateArc { from: String, to: String },
    #[error("self-arc on {0}")]
    SelfArc(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("graph contains a directed cycle")]
    NotAcyclic,
}

/// Single-arc edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcOp {
    Add,
    Remove,
    Reverse,
}

impl ArcOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcOp::Add => "add",
            ArcOp::Remove => "remove",
            ArcOp::Reverse => "reverse",
        }
    }
}

impl std::str::FromStr for ArcOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" => Ok(ArcOp::Add),
            "remove" => Ok(ArcOp::Remove),
            "reverse" => Ok(ArcOp::Reverse),
            other => Err(format!("unknown arc operation `{other}`")),
        }
    }
}

/// Structural role of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRole {
    pub is_root: bool,
    pub is_leaf: bool,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Creates an arcless graph.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, DagError> {
        let mut seen = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if seen.insert(name.as_ref().to_string(), i).is_some() {
                return Err(DagError::DuplicateNode(name.as_ref().to_string()));
            }
        }
        let n = names.len();
        Ok(Dag {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        })
    }

    /// Builds a graph from ordered parent lists, validating acyclicity.
    pub fn from_parents<S: AsRef<str>>(
        names: &[S],
        parents: Vec<Vec<usize>>,
    ) -> Result<Self, DagError> {
        let mut dag = Dag::new(names)?;
        assert_eq!(parents.len(), dag.len(), "one parent list per node");
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                if p >= dag.len() {
                    return Err(DagError::UnknownNode(format!("#{p}")));
                }
                if p == child {
                    return Err(DagError::SelfArc(dag.names[child].clone()));
                }
                if dag.parents[child].contains(&p) {
                    return Err(DagError::DuplicateArc {
                        from: dag.names[p].clone(),
                        to: dag.names[child].clone(),
                    });
                }
                dag.parents[child].push(p);
                dag.children[p].push(child);
            }
        }
        for ch in &mut dag.children {
            ch.sort_unstable();
        }
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize, DagError> {
        self.index_of(name)
            .ok_or_else(|| DagError::UnknownNode(name.to_string()))
    }

    /// Ordered parents of `node`.
    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    /// Children of `node`, ascending.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    /// All arcs as `(from, to)`, sorted.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut arcs: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
            .collect();
        arcs.sort_unstable();
        arcs
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Whether a directed path `from ~> to` exists (length zero counts).
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(self.children[v].iter().copied().filter(|&c| !seen[c]));
        }
        false
    }

    /// Whether adding `from -> to` keeps the graph a simple DAG.
    pub fn can_add(&self, from: usize, to: usize) -> bool {
        from != to && !self.has_arc(from, to) && !self.has_arc(to, from) && !self.has_path(to, from)
    }

    /// Whether reversing the existing arc `from -> to` keeps the graph acyclic.
    pub fn can_reverse(&self, from: usize, to: usize) -> bool {
        if !self.has_arc(from, to) {
            return false;
        }
        // Reversal is cyclic iff another path from -> to exists.
        let mut without = self.clone();
        without.detach(from, to);
        !without.has_path(from, to)
    }

    fn detach(&mut self, from: usize, to: usize) {
        self.parents[to].retain(|&p| p != from);
        self.children[from].retain(|&c| c != to);
    }

    fn attach(&mut self, from: usize, to: usize) {
        self.parents[to].push(from);
        let pos = self.children[from].partition_point(|&c| c < to);
        self.children[from].insert(pos, to);
    }

    /// Applies a single-arc edit, returning the edited graph.
    ///
    /// Added arcs become the last parent of their head; a reversed arc
    /// `from -> to` becomes the last parent of `from`.
    pub fn apply_arc_operation(&self, op: ArcOp, from: usize, to: usize) -> Result<Dag, DagError> {
        let (f, t) = (self.names[from].clone(), self.names[to].clone());
        if from == to {
            return Err(DagError::SelfArc(f));
        }
        let mut out = self.clone();
        match op {
            ArcOp::Add => {
                if self.has_arc(from, to) {
                    return Err(DagError::DuplicateArc { from: f, to: t });
                }
                if self.has_path(to, from) {
                    return Err(DagError::Cycle { from: f, to: t });
                }
                out.attach(from, to);
            }
            ArcOp::Remove => {
                if !self.has_arc(from, to) {
                    return Err(DagError::MissingArc { from: f, to: t });
                }
                out.detach(from, to);
            }
            ArcOp::Reverse => {
                if !self.has_arc(from, to) {
                    return Err(DagError::MissingArc { from: f, to: t });
                }
                out.detach(from, to);
                if out.has_path(from, to) {
                    return Err(DagError::Cycle { from: t, to: f });
                }
                out.attach(to, from);
            }
        }
        Ok(out)
    }

    /// Name-addressed variant of [`Dag::apply_arc_operation`].
    pub fn apply_named(&self, op: ArcOp, from: &str, to: &str) -> Result<Dag, DagError> {
        let (f, t) = (self.require(from)?, self.require(to)?);
        self.apply_arc_operation(op, f, t)
    }

    /// Kahn's algorithm, always releasing the lowest-index ready node first.
    pub fn topological_order(&self) -> Result<Vec<usize>, DagError> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() == self.len() {
            Ok(order)
        } else {
            Err(DagError::NotAcyclic)
        }
    }

    pub fn node_roles(&self) -> Vec<NodeRole> {
        (0..self.len())
            .map(|v| NodeRole {
                is_root: self.parents[v].is_empty(),
                is_leaf: self.children[v].is_empty(),
                degree: self.parents[v].len() + self.children[v].len(),
            })
            .collect()
    }

    /// Nodes adjacent to `node` in the skeleton.
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[node]
            .iter()
            .chain(self.children[node].iter())
            .copied()
    }

    /// Structural Hamming distance: unordered node pairs whose arc status
    /// differs (absent, one direction, other direction). A reversal counts once.
    pub fn structural_hamming_distance(&self, other: &Dag) -> usize {
        assert_eq!(self.len(), other.len());
        let mut d = 0;
        for u in 0..self.len() {
            for v in (u + 1)..self.len() {
                let a = (self.has_arc(u, v), self.has_arc(v, u));
                let b = (other.has_arc(u, v), other.has_arc(v, u));
                if a != b {
                    d += 1;
                }
            }
        }
        d
    }
}
