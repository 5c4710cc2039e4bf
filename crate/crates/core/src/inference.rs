//! Exact inference by variable elimination.
//!
//! Sum-product elimination answers posterior queries over arbitrary scopes;
//! max-product elimination with back-pointers produces the most probable
//! completion of a record. [`RecordPosterior`] is the fast path used by EM
//! when a record leaves only a handful of nodes unobserved.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::network::DiscreteBayesNet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("evidence has probability zero under the model")]
    ImpossibleEvidence,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("evidence state {state} out of range for node {node}")]
    InvalidEvidence { node: usize, state: usize },
}

/// Partial assignment, one slot per network node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence(Vec<Option<usize>>);

impl Evidence {
    pub fn empty(nodes: usize) -> Self {
        Evidence(vec![None; nodes])
    }

    pub fn from_pairs(nodes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut e = Evidence::empty(nodes);
        for &(node, state) in pairs {
            e.0[node] = Some(state);
        }
        e
    }

    pub fn from_row(row: &[Option<usize>]) -> Self {
        Evidence(row.to_vec())
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.0[node]
    }

    pub fn set(&mut self, node: usize, state: Option<usize>) {
        self.0[node] = state;
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.0
    }

    pub fn unobserved(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&v| self.0[v].is_none()).collect()
    }

    fn validate(&self, bn: &DiscreteBayesNet) -> Result<(), InferenceError> {
        if self.0.len() != bn.len() {
            return Err(InferenceError::InvalidQuery(format!(
                "evidence covers {} nodes, network has {}",
                self.0.len(),
                bn.len()
            )));
        }
        for (node, s) in self.0.iter().enumerate() {
            if let Some(state) = *s {
                if state >= bn.cardinalities()[node] {
                    return Err(InferenceError::InvalidEvidence { node, state });
                }
            }
        }
        Ok(())
    }
}

/// Normalised distribution over the joint states of `scope`, first scope
/// node most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub scope: Vec<usize>,
    pub cardinalities: Vec<usize>,
    pub values: Vec<f64>,
}

impl PosteriorTable {
    pub fn index(&self, states: &[usize]) -> usize {
        states
            .iter()
            .zip(&self.cardinalities)
            .fold(0, |i, (&s, &c)| i * c + s)
    }

    pub fn get(&self, states: &[usize]) -> f64 {
        self.values[self.index(states)]
    }

    /// Marginal of the scope member at `position`.
    pub fn marginal(&self, position: usize) -> Vec<f64> {
        let card = self.cardinalities[position];
        let inner: usize = self.cardinalities[position + 1..].iter().product();
        let mut out = vec![0.0; card];
        for (i, &v) in self.values.iter().enumerate() {
            out[(i / inner) % card] += v;
        }
        out
    }
}

/// Table factor over a sorted variable list; the first variable is the most
/// significant digit of the flat index.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

/// Odometer over a mixed-radix space, least significant digit last.
fn advance(state: &mut [usize], cards: &[usize]) -> Option<usize> {
    for d in (0..state.len()).rev() {
        state[d] += 1;
        if state[d] < cards[d] {
            return Some(d);
        }
        state[d] = 0;
    }
    None
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor { vars: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// CPT of `node` with evidence applied: observed variables are dropped.
    pub fn from_cpt(bn: &DiscreteBayesNet, node: usize, evidence: &Evidence) -> Self {
        let cards = bn.cardinalities();
        let mut family: Vec<usize> = bn.dag().parents(node).to_vec();
        family.push(node);
        let mut vars: Vec<usize> = family.iter().copied().filter(|&v| evidence.get(v).is_none()).collect();
        vars.sort_unstable();
        let fcards: Vec<usize> = vars.iter().map(|&v| cards[v]).collect();
        let size: usize = fcards.iter().product();
        let mut assignment: Vec<usize> = (0..bn.len()).map(|v| evidence.get(v).unwrap_or(0)).collect();
        let mut values = Vec::with_capacity(size);
        let mut st = vec![0; vars.len()];
        loop {
            for (&v, &s) in vars.iter().zip(&st) {
                assignment[v] = s;
            }
            values.push(bn.local_prob(node, &assignment));
            if advance(&mut st, &fcards).is_none() {
                break;
            }
        }
        Factor { vars, cards: fcards, values }
    }

    fn strides_in(&self, union: &[usize]) -> Vec<usize> {
        let mut strides = vec![0; union.len()];
        let mut s = 1;
        for (i, &v) in self.vars.iter().enumerate().rev() {
            let pos = union.binary_search(&v).expect("variable in union");
            strides[pos] = s;
            s *= self.cards[i];
        }
        strides
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let vars: Vec<usize> = self
            .vars
            .iter()
            .chain(&other.vars)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                let i = self.vars.iter().position(|x| x == v);
                i.map(|i| self.cards[i])
                    .unwrap_or_else(|| other.cards[other.vars.iter().position(|x| x == v).unwrap()])
            })
            .collect();
        let sa = self.strides_in(&vars);
        let sb = other.strides_in(&vars);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut st = vec![0; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        loop {
            values.push(self.values[ia] * other.values[ib]);
            if advance(&mut st, &cards).is_none() {
                break;
            }
            ia = st.iter().zip(&sa).map(|(s, k)| s * k).sum();
            ib = st.iter().zip(&sb).map(|(s, k)| s * k).sum();
        }
        Factor { vars, cards, values }
    }

    /// Eliminates `var` by summation.
    pub fn sum_out(&self, var: usize) -> Factor {
        self.eliminate(var, false).0
    }

    /// Eliminates `var` by maximisation; the second value holds, for every
    /// entry of the result, the lowest maximising state of `var`.
    pub fn max_out(&self, var: usize) -> (Factor, Vec<usize>) {
        self.eliminate(var, true)
    }

    fn eliminate(&self, var: usize, max: bool) -> (Factor, Vec<usize>) {
        let pos = self.vars.iter().position(|&v| v == var).expect("variable in factor");
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        let mut arg = Vec::with_capacity(if max { outer * inner } else { 0 });
        for o in 0..outer {
            for i in 0..inner {
                let base = o * card * inner + i;
                if max {
                    let (mut best, mut best_k) = (self.values[base], 0);
                    for k in 1..card {
                        let v = self.values[base + k * inner];
                        if v > best {
                            best = v;
                            best_k = k;
                        }
                    }
                    values.push(best);
                    arg.push(best_k);
                } else {
                    values.push((0..card).map(|k| self.values[base + k * inner]).sum());
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        (Factor { vars, cards, values }, arg)
    }

    fn index_of_assignment(&self, assignment: &[usize]) -> usize {
        self.vars
            .iter()
            .zip(&self.cards)
            .fold(0, |i, (&v, &c)| i * c + assignment[v])
    }
}

/// Greedy min-fill ordering of `eliminate` over the interaction graph of
/// `factors`; ties go to the lowest node index.
fn min_fill_order(factors: &[Factor], eliminate: &BTreeSet<usize>, nodes: usize) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes];
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining = eliminate.clone();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for &v in &remaining {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut fill = 0;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if !adj[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            if best.is_none_or(|(f, _)| fill < f) {
                best = Some((fill, v));
            }
        }
        let (_, v) = best.expect("non-empty");
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nb {
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
            adj[a].remove(&v);
        }
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Nodes that are ancestors of (or in) `seeds`.
fn ancestral_closure(bn: &DiscreteBayesNet, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; bn.len()];
    let mut stack: Vec<usize> = seeds.into_iter().collect();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut keep[v], true) {
            stack.extend(bn.dag().parents(v).iter().copied());
        }
    }
    keep
}

/// Unnormalised `P(scope_unobserved, evidence)` by sum-product elimination.
fn joint_with_evidence(bn: &DiscreteBayesNet, evidence: &Evidence, scope: &[usize]) -> Factor {
    let observed = (0..bn.len()).filter(|&v| evidence.get(v).is_some());
    let keep = ancestral_closure(bn, scope.iter().copied().chain(observed));
    let mut factors: Vec<Factor> = (0..bn.len())
        .filter(|&v| keep[v])
        .map(|v| Factor::from_cpt(bn, v, evidence))
        .collect();
    let eliminate: BTreeSet<usize> = (0..bn.len())
        .filter(|&v| keep[v] && evidence.get(v).is_none() && !scope.contains(&v))
        .collect();
    for var in min_fill_order(&factors, &eliminate, bn.len()) {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let combined = touching
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        factors.push(combined.sum_out(var));
    }
    factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f))
}

/// `P(evidence)`.
pub fn evidence_probability(bn: &DiscreteBayesNet, evidence: &Evidence) -> Result<f64, InferenceError> {
    evidence.validate(bn)?;
    Ok(joint_with_evidence(bn, evidence, &[]).values[0])
}

/// Posterior over `scope`; observed scope members collapse to point mass.
fn posterior_over(
    bn: &DiscreteBayesNet,
    evidence: &Evidence,
    scope: &[usize],
) -> Result<PosteriorTable, InferenceError> {
    evidence.validate(bn)?;
    let mut seen = BTreeSet::new();
    for &v in scope {
        if v >= bn.len() || !seen.insert(v) {
            return Err(InferenceError::InvalidQuery(format!("bad scope member {v}")));
        }
    }
    let free: Vec<usize> = scope.iter().copied().filter(|&v| evidence.get(v).is_none()).collect();
    let joint = joint_with_evidence(bn, evidence, &free);
    let z: f64 = joint.values.iter().sum();
    if !(z > 0.0) {
        return Err(InferenceError::ImpossibleEvidence);
    }
    let cards: Vec<usize> = scope.iter().map(|&v| bn.cardinalities()[v]).collect();
    let size: usize = cards.iter().product();
    let mut values = vec![0.0; size];
    let mut st = vec![0; scope.len()];
    let mut assignment = vec![0; bn.len()];
    for slot in values.iter_mut() {
        let consistent = scope
            .iter()
            .zip(&st)
            .all(|(&v, &s)| evidence.get(v).is_none_or(|o| o == s));
        if consistent {
            for (&v, &s) in scope.iter().zip(&st) {
                assignment[v] = s;
            }
            *slot = joint.values[joint.index_of_assignment(&assignment)] / z;
        }
        advance(&mut st, &cards);
    }
    Ok(PosteriorTable { scope: scope.to_vec(), cardinalities: cards, values })
}

/// `P(targets | evidence)`; targets must be non-empty and unobserved.
pub fn posterior_marginal(
    bn: &DiscreteBayesNet,
    evidence: &Evidence,
    targets: &[usize],
) -> Result<PosteriorTable, InferenceError> {
    if targets.is_empty() {
        return Err(InferenceError::InvalidQuery("no target nodes".into()));
    }
    if let Some(&t) = targets.iter().find(|&&t| t < bn.len() && evidence.get(t).is_some()) {
        return Err(InferenceError::InvalidQuery(format!("target {t} is observed")));
    }
    posterior_over(bn, evidence, targets)
}

/// `P(node, parents | evidence)` with scope `[node, parents...]`, so the
/// flat index is `state * configs + config`.
pub fn family_posterior(
    bn: &DiscreteBayesNet,
    evidence: &Evidence,
    node: usize,
) -> Result<PosteriorTable, InferenceError> {
    let mut scope = vec![node];
    scope.extend_from_slice(bn.dag().parents(node));
    posterior_over(bn, evidence, &scope)
}

/// Most probable joint completion of the unobserved nodes.
///
/// Max-product elimination runs in decreasing node index so that, reading
/// the back-pointers in increasing index, each node takes its lowest
/// maximising state. Among tied completions this selects the smallest in
/// mixed-radix order over the missing nodes (lowest index most significant).
pub fn mpe_completion(bn: &DiscreteBayesNet, record: &Evidence) -> Result<Vec<usize>, InferenceError> {
    record.validate(bn)?;
    let missing = record.unobserved();
    let mut factors: Vec<Factor> = (0..bn.len()).map(|v| Factor::from_cpt(bn, v, record)).collect();
    let mut pointers: Vec<(usize, Factor, Vec<usize>)> = Vec::with_capacity(missing.len());
    for &var in missing.iter().rev() {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let combined = touching
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        let (reduced, arg) = combined.max_out(var);
        pointers.push((var, reduced.clone(), arg));
        factors.push(reduced);
    }
    let best: f64 = factors.iter().map(|f| f.values[0]).product();
    if !(best > 0.0) {
        return Err(InferenceError::ImpossibleEvidence);
    }
    let mut assignment: Vec<usize> = (0..bn.len()).map(|v| record.get(v).unwrap_or(0)).collect();
    for (var, reduced, arg) in pointers.iter().rev() {
        assignment[*var] = arg[reduced.index_of_assignment(&assignment)];
    }
    Ok(assignment)
}

/// Largest joint state space [`RecordPosterior::compute`] enumerates.
pub const ENUMERATION_LIMIT: usize = 1 << 14;

/// Joint posterior over every unobserved node of one record, by direct
/// enumeration of the families that touch them.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordPosterior {
    pub missing: Vec<usize>,
    pub cardinalities: Vec<usize>,
    /// Normalised, mixed radix over `missing` (lowest index most significant).
    pub values: Vec<f64>,
    /// `ln P(observed cells)`.
    pub log_evidence: f64,
}

impl RecordPosterior {
    /// `None` when the missing nodes' joint space exceeds
    /// [`ENUMERATION_LIMIT`]; use the elimination routines instead.
    pub fn compute(bn: &DiscreteBayesNet, record: &Evidence) -> Option<Result<Self, InferenceError>> {
        if let Err(e) = record.validate(bn) {
            return Some(Err(e));
        }
        let missing = record.unobserved();
        let cards: Vec<usize> = missing.iter().map(|&v| bn.cardinalities()[v]).collect();
        let size = cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c).filter(|&s| s <= ENUMERATION_LIMIT));
        let size = size?;
        let mut is_missing = vec![false; bn.len()];
        for &m in &missing {
            is_missing[m] = true;
        }
        let dag = bn.dag();
        let mut assignment: Vec<usize> = (0..bn.len()).map(|v| record.get(v).unwrap_or(0)).collect();
        let mut log_fixed = 0.0;
        let mut varying = Vec::new();
        for v in 0..bn.len() {
            if is_missing[v] || dag.parents(v).iter().any(|&p| is_missing[p]) {
                varying.push(v);
            } else {
                let p = bn.local_prob(v, &assignment);
                if p <= 0.0 {
                    return Some(Err(InferenceError::ImpossibleEvidence));
                }
                log_fixed += p.ln();
            }
        }
        let mut values = Vec::with_capacity(size);
        let mut st = vec![0; missing.len()];
        loop {
            for (&m, &s) in missing.iter().zip(&st) {
                assignment[m] = s;
            }
            values.push(varying.iter().map(|&v| bn.local_prob(v, &assignment)).product::<f64>());
            if advance(&mut st, &cards).is_none() {
                break;
            }
        }
        let z: f64 = values.iter().sum();
        if !(z > 0.0) {
            return Some(Err(InferenceError::ImpossibleEvidence));
        }
        for v in &mut values {
            *v /= z;
        }
        Some(Ok(RecordPosterior { missing, cardinalities: cards, values, log_evidence: log_fixed + z.ln() }))
    }

    /// Visits each joint state of the missing nodes with its probability,
    /// writing the states into `assignment`.
    pub fn for_each(&self, assignment: &mut [usize], mut f: impl FnMut(&[usize], f64)) {
        let mut st = vec![0; self.missing.len()];
        for &p in &self.values {
            for (&m, &s) in self.missing.iter().zip(&st) {
                assignment[m] = s;
            }
            f(assignment, p);
            advance(&mut st, &self.cardinalities);
        }
    }

    /// Marginal of missing node `node`.
    pub fn marginal(&self, node: usize) -> Option<Vec<f64>> {
        let pos = self.missing.iter().position(|&m| m == node)?;
        let card = self.cardinalities[pos];
        let inner: usize = self.cardinalities[pos + 1..].iter().product();
        let mut out = vec![0.0; card];
        for (i, &v) in self.values.iter().enumerate() {
            out[(i / inner) % card] += v;
        }
        Some(out)
    }
}

/// Posterior of a single unobserved node, via enumeration when the record is
/// small and elimination otherwise.
pub fn node_posterior(bn: &DiscreteBayesNet, record: &Evidence, node: usize) -> Result<Vec<f64>, InferenceError> {
    match RecordPosterior::compute(bn, record) {
        Some(rp) => Ok(rp?.marginal(node).expect("node is unobserved")),
        None => Ok(posterior_marginal(bn, record, &[node])?.values),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::Dag;
    use crate::network::{asia, random_network, Cpt, RandomNetworkSpec};

    fn bin() -> Vec<String> {
        vec!["0".into(), "1".into()]
    }

    fn chain_ab() -> DiscreteBayesNet {
        let dag = Dag::from_parents(&["A", "B"], vec![vec![], vec![0]]).unwrap();
        DiscreteBayesNet::new(
            dag,
            vec![bin(), bin()],
            vec![Cpt::new(2, 1, vec![0.4, 0.6]), Cpt::new(2, 2, vec![0.8, 0.2, 0.1, 0.9])],
        )
        .unwrap()
    }

    fn all_assignments(cards: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut st = vec![0; cards.len()];
        loop {
            out.push(st.clone());
            if advance(&mut st, cards).is_none() {
                return out;
            }
        }
    }

    /// Enumeration oracle over the whole joint.
    fn brute_posterior(bn: &DiscreteBayesNet, ev: &Evidence, scope: &[usize]) -> Option<Vec<f64>> {
        let cards: Vec<usize> = scope.iter().map(|&v| bn.cardinalities()[v]).collect();
        let mut table = vec![0.0; cards.iter().product()];
        for a in all_assignments(bn.cardinalities()) {
            if (0..bn.len()).any(|v| ev.get(v).is_some_and(|s| s != a[v])) {
                continue;
            }
            let idx = scope.iter().zip(&cards).fold(0, |i, (&v, &c)| i * c + a[v]);
            table[idx] += bn.joint_probability(&a).unwrap();
        }
        let z: f64 = table.iter().sum();
        (z > 0.0).then(|| table.iter().map(|v| v / z).collect())
    }

    #[test]
    fn prior_of_root() {
        let dag = Dag::new(&["R"]).unwrap();
        let bn = DiscreteBayesNet::new(dag, vec![bin()], vec![Cpt::new(2, 1, vec![0.3, 0.7])]).unwrap();
        let t = posterior_marginal(&bn, &Evidence::empty(1), &[0]).unwrap();
        assert_eq!(t.values, vec![0.3, 0.7]);
    }

    #[test]
    fn bayes_rule_on_chain() {
        let bn = chain_ab();
        let t = posterior_marginal(&bn, &Evidence::from_pairs(2, &[(1, 1)]), &[0]).unwrap();
        let expected = 0.54 / (0.54 + 0.08);
        assert!((t.values[1] - expected).abs() < 1e-12);
        assert!((expected - 0.871).abs() < 1e-3);
    }

    #[test]
    fn fully_observed_is_a_precondition_violation() {
        let bn = chain_ab();
        let ev = Evidence::from_pairs(2, &[(0, 1), (1, 1)]);
        assert!(matches!(posterior_marginal(&bn, &ev, &[0]), Err(InferenceError::InvalidQuery(_))));
        assert!(matches!(posterior_marginal(&bn, &ev, &[]), Err(InferenceError::InvalidQuery(_))));
    }

    #[test]
    fn family_posterior_examples() {
        // X with parent A: P(A=1)=0.5, P(X=1|A=0)=0.2, P(X=1|A=1)=0.8.
        let dag = Dag::from_parents(&["A", "X"], vec![vec![], vec![0]]).unwrap();
        let bn = DiscreteBayesNet::new(
            dag,
            vec![bin(), bin()],
            vec![Cpt::new(2, 1, vec![0.5, 0.5]), Cpt::new(2, 2, vec![0.8, 0.2, 0.2, 0.8])],
        )
        .unwrap();
        let t = family_posterior(&bn, &Evidence::empty(2), 1).unwrap();
        // scope [X, A]: (x, a)
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(t.get(&[0, 0]), 0.4));
        assert!(close(t.get(&[1, 0]), 0.1));
        assert!(close(t.get(&[0, 1]), 0.1));
        assert!(close(t.get(&[1, 1]), 0.4));

        let t = family_posterior(&bn, &Evidence::from_pairs(2, &[(0, 1), (1, 0)]), 1).unwrap();
        assert_eq!(t.values, vec![0.0, 1.0, 0.0, 0.0]);

        let t = family_posterior(&bn, &Evidence::empty(2), 0).unwrap();
        assert_eq!(t.values, vec![0.5, 0.5]);
    }

    #[test]
    fn impossible_evidence() {
        let bn = asia();
        let d = |n: &str| bn.dag().index_of(n).unwrap();
        // lung = yes forces either = yes.
        let ev = Evidence::from_pairs(8, &[(d("lung"), 0), (d("either"), 1)]);
        assert_eq!(posterior_marginal(&bn, &ev, &[d("xray")]), Err(InferenceError::ImpossibleEvidence));
        assert_eq!(mpe_completion(&bn, &ev), Err(InferenceError::ImpossibleEvidence));
        assert_eq!(RecordPosterior::compute(&bn, &ev).unwrap(), Err(InferenceError::ImpossibleEvidence));
    }

    #[test]
    fn mpe_examples() {
        let dag = Dag::new(&["R"]).unwrap();
        let skewed = DiscreteBayesNet::new(dag.clone(), vec![bin()], vec![Cpt::new(2, 1, vec![0.3, 0.7])]).unwrap();
        assert_eq!(mpe_completion(&skewed, &Evidence::empty(1)).unwrap(), vec![1]);
        let tie = DiscreteBayesNet::new(dag, vec![bin()], vec![Cpt::new(2, 1, vec![0.5, 0.5])]).unwrap();
        assert_eq!(mpe_completion(&tie, &Evidence::empty(1)).unwrap(), vec![0]);

        let bn = chain_ab();
        let ev = Evidence::from_pairs(2, &[(0, 0), (1, 1)]);
        assert_eq!(mpe_completion(&bn, &ev).unwrap(), vec![0, 1]);
    }

    #[test]
    fn mpe_is_joint_not_per_node_argmax() {
        // A uniform-ish, B deterministic-ish given A; per-node marginal argmax
        // picks A=1 and B=0 whose joint probability is small.
        let dag = Dag::from_parents(&["A", "B"], vec![vec![], vec![0]]).unwrap();
        let bn = DiscreteBayesNet::new(
            dag,
            vec![bin(), bin()],
            vec![
                Cpt::new(2, 1, vec![0.4, 0.6]),
                // B | A=0: (1.0, 0.0); B | A=1: (0.5, 0.5)
                Cpt::new(2, 2, vec![1.0, 0.0, 0.5, 0.5]),
            ],
        )
        .unwrap();
        let ev = Evidence::empty(2);
        let pa = posterior_marginal(&bn, &ev, &[0]).unwrap().values;
        let pb = posterior_marginal(&bn, &ev, &[1]).unwrap().values;
        let marginal_argmax = [
            if pa[1] > pa[0] { 1 } else { 0 },
            if pb[1] > pb[0] { 1 } else { 0 },
        ];
        assert_eq!(marginal_argmax, [1, 0]);
        // Joint: (0,0)=0.4, (1,0)=0.3, (1,1)=0.3.
        assert_eq!(mpe_completion(&bn, &ev).unwrap(), vec![0, 0]);
        assert!(bn.joint_probability(&[0, 0]).unwrap() > bn.joint_probability(&marginal_argmax).unwrap());
    }

    #[test]
    fn mpe_tie_breaks_to_lowest_mixed_radix_completion() {
        // Two independent uniform nodes plus an unrelated observed node.
        let dag = Dag::new(&["A", "B", "C"]).unwrap();
        let bn = DiscreteBayesNet::uniform(dag, vec![bin(), bin(), bin()]).unwrap();
        let ev = Evidence::from_pairs(3, &[(1, 1)]);
        assert_eq!(mpe_completion(&bn, &ev).unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn elimination_matches_enumeration_on_random_networks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for seed in 0..30 {
            let bn = random_network(&RandomNetworkSpec { nodes: 7, max_parents: 3, seed, ..Default::default() })
                .unwrap();
            let mut ev = Evidence::empty(7);
            for v in 0..7 {
                if rng.gen_bool(0.4) {
                    ev.set(v, Some(rng.gen_range(0..bn.cardinalities()[v])));
                }
            }
            let free = ev.unobserved();
            if free.is_empty() {
                continue;
            }
            let oracle = brute_posterior(&bn, &ev, &free[..1]).unwrap();
            let got = posterior_marginal(&bn, &ev, &free[..1]).unwrap();
            for (a, b) in oracle.iter().zip(&got.values) {
                assert!((a - b).abs() < 1e-10);
            }
            let rp = RecordPosterior::compute(&bn, &ev).unwrap().unwrap();
            let joint = brute_posterior(&bn, &ev, &free).unwrap();
            for (a, b) in joint.iter().zip(&rp.values) {
                assert!((a - b).abs() < 1e-10);
            }
            let pe = evidence_probability(&bn, &ev).unwrap();
            assert!((pe.ln() - rp.log_evidence).abs() < 1e-9);
        }
    }

    #[test]
    fn factor_product_and_sum_out() {
        let bn = chain_ab();
        let ev = Evidence::empty(2);
        let fa = Factor::from_cpt(&bn, 0, &ev);
        let fb = Factor::from_cpt(&bn, 1, &ev);
        let joint = fa.product(&fb);
        assert_eq!(joint.vars(), &[0, 1]);
        let total: f64 = joint.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        let pb = joint.sum_out(0);
        assert!((pb.values()[1] - (0.4 * 0.2 + 0.6 * 0.9)).abs() < 1e-15);
    }
}
