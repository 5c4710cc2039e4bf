//! Sufficient statistics, parameter estimators and network scores.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::dag::Dag;
use crate::data::DataSet;
use crate::network::{config_count, config_index, Cpt, DiscreteBayesNet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("data set has missing cells")]
    IncompleteData,
    #[error("Dirichlet hyperparameters must be positive, got {0}")]
    InvalidPrior(f64),
}

/// Counts `n_ijk` for one node, column-major like [`Cpt`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    states: usize,
    configs: usize,
    counts: Vec<f64>,
}

impl CountTable {
    pub fn zeros(states: usize, configs: usize) -> Self {
        CountTable { states, configs, counts: vec![0.0; states * configs] }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn configs(&self) -> usize {
        self.configs
    }

    #[inline]
    pub fn get(&self, config: usize, state: usize) -> f64 {
        self.counts[config * self.states + state]
    }

    #[inline]
    pub fn add(&mut self, config: usize, state: usize, weight: f64) {
        self.counts[config * self.states + state] += weight;
    }

    pub fn column(&self, config: usize) -> &[f64] {
        &self.counts[config * self.states..(config + 1) * self.states]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.counts
    }

    /// Adds another table entry by entry.
    pub fn merge(&mut self, other: &CountTable) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistics {
    tables: Vec<CountTable>,
}

impl SufficientStatistics {
    pub fn zeros(dag: &Dag, cardinalities: &[usize]) -> Self {
        let tables = (0..dag.len())
            .map(|i| CountTable::zeros(cardinalities[i], config_count(dag, cardinalities, i)))
            .collect();
        SufficientStatistics { tables }
    }

    pub fn table(&self, node: usize) -> &CountTable {
        &self.tables[node]
    }

    pub fn table_mut(&mut self, node: usize) -> &mut CountTable {
        &mut self.tables[node]
    }

    pub fn tables(&self) -> &[CountTable] {
        &self.tables
    }

    /// Adds one complete record with the given weight.
    pub fn add_record(&mut self, dag: &Dag, cardinalities: &[usize], assignment: &[usize], weight: f64) {
        for (i, t) in self.tables.iter_mut().enumerate() {
            let j = config_index(dag.parents(i), cardinalities, assignment);
            t.add(j, assignment[i], weight);
        }
    }

    pub fn merge(&mut self, other: &SufficientStatistics) {
        for (a, b) in self.tables.iter_mut().zip(&other.tables) {
            a.merge(b);
        }
    }
}

/// Dirichlet hyperparameters `alpha_ijk`.
#[derive(Debug, Clone, PartialEq)]
pub enum DirichletPrior {
    /// The same value for every entry.
    Uniform(f64),
    /// One table per node, laid out like the node's [`CountTable`].
    PerEntry(Vec<Vec<f64>>),
}

impl Default for DirichletPrior {
    fn default() -> Self {
        DirichletPrior::Uniform(1.0)
    }
}

impl DirichletPrior {
    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = match self {
            DirichletPrior::Uniform(a) => (!(*a > 0.0)).then_some(*a),
            DirichletPrior::PerEntry(t) => t.iter().flatten().copied().find(|a| !(*a > 0.0)),
        };
        bad.map_or(Ok(()), |a| Err(EstimationError::InvalidPrior(a)))
    }

    #[inline]
    pub fn alpha(&self, node: usize, config: usize, state: usize, states: usize) -> f64 {
        match self {
            DirichletPrior::Uniform(a) => *a,
            DirichletPrior::PerEntry(t) => t[node][config * states + state],
        }
    }
}

/// Which M-step estimator to apply to (expected) counts.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Mle,
    Bayes(DirichletPrior),
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Bayes(DirichletPrior::Uniform(1.0))
    }
}

impl Estimator {
    pub fn estimate(&self, stats: &SufficientStatistics) -> Vec<Cpt> {
        match self {
            Estimator::Mle => mle_estimate(stats),
            Estimator::Bayes(prior) => bayes_estimate(stats, prior),
        }
    }
}

/// Counts over complete data.
pub fn tally_counts(
    data: &DataSet,
    dag: &Dag,
    cardinalities: &[usize],
) -> Result<SufficientStatistics, EstimationError> {
    let mut stats = SufficientStatistics::zeros(dag, cardinalities);
    for r in 0..data.n_rows() {
        let row = data.complete_row(r).ok_or(EstimationError::IncompleteData)?;
        stats.add_record(dag, cardinalities, &row, 1.0);
    }
    Ok(stats)
}

fn normalise(column: &[f64]) -> Vec<f64> {
    let total: f64 = column.iter().sum();
    if total > 0.0 {
        column.iter().map(|n| n / total).collect()
    } else {
        vec![1.0 / column.len() as f64; column.len()]
    }
}

/// Relative frequencies; empty columns fall back to uniform.
pub fn mle_estimate(stats: &SufficientStatistics) -> Vec<Cpt> {
    stats
        .tables
        .iter()
        .map(|t| {
            let values = (0..t.configs).flat_map(|j| normalise(t.column(j))).collect();
            Cpt::new(t.states, t.configs, values)
        })
        .collect()
}

/// Posterior mean under a Dirichlet prior.
pub fn bayes_estimate(stats: &SufficientStatistics, prior: &DirichletPrior) -> Vec<Cpt> {
    stats
        .tables
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let values = (0..t.configs)
                .flat_map(|j| {
                    let col: Vec<f64> = (0..t.states)
                        .map(|k| t.get(j, k) + prior.alpha(i, j, k, t.states))
                        .collect();
                    normalise(&col)
                })
                .collect();
            Cpt::new(t.states, t.configs, values)
        })
        .collect()
}

/// Free parameters of a node: `(|X_i| - 1)` per parent configuration.
pub fn free_parameters(bn: &DiscreteBayesNet, node: usize) -> usize {
    (bn.cardinalities()[node] - 1) * bn.cpt(node).configs()
}

/// Per-node BIC terms; their sum is [`bic_score`].
pub fn bic_node_terms(bn: &DiscreteBayesNet, data: &DataSet) -> Result<Vec<f64>, EstimationError> {
    let stats = tally_counts(data, bn.dag(), bn.cardinalities())?;
    let n = data.n_rows();
    let penalty = if n == 0 { 0.0 } else { (n as f64).ln() / 2.0 };
    Ok((0..bn.len())
        .map(|i| {
            let cpt = bn.cpt(i);
            let t = stats.table(i);
            let mut ll = 0.0;
            for j in 0..t.configs() {
                for k in 0..t.states() {
                    let c = t.get(j, k);
                    if c > 0.0 {
                        ll += c * cpt.prob(k, j).ln();
                    }
                }
            }
            ll - penalty * free_parameters(bn, i) as f64
        })
        .collect())
}

/// Log-likelihood of complete data under `bn` minus `ln(n)/2` per free
/// parameter, natural logarithms. Returns negative infinity when an
/// observed configuration has probability zero.
pub fn bic_score(bn: &DiscreteBayesNet, data: &DataSet) -> Result<f64, EstimationError> {
    Ok(bic_node_terms(bn, data)?.iter().sum())
}

/// Log marginal likelihood `ln P(D | G)` under Dirichlet priors.
pub fn bd_score(
    dag: &Dag,
    cardinalities: &[usize],
    data: &DataSet,
    prior: &DirichletPrior,
) -> Result<f64, EstimationError> {
    prior.validate()?;
    let stats = tally_counts(data, dag, cardinalities)?;
    let mut score = 0.0;
    for (i, t) in stats.tables.iter().enumerate() {
        for j in 0..t.configs {
            let mut alpha_sum = 0.0;
            let mut n_sum = 0.0;
            for k in 0..t.states {
                let a = prior.alpha(i, j, k, t.states);
                let n = t.get(j, k);
                alpha_sum += a;
                n_sum += n;
                score += ln_gamma(a + n) - ln_gamma(a);
            }
            score += ln_gamma(alpha_sum) - ln_gamma(alpha_sum + n_sum);
        }
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{random_network, RandomNetworkSpec};

    fn bin() -> Vec<String> {
        vec!["0".into(), "1".into()]
    }

    fn single(rows: &[usize]) -> (Dag, DataSet) {
        let dag = Dag::new(&["X"]).unwrap();
        let rows: Vec<Vec<usize>> = rows.iter().map(|&r| vec![r]).collect();
        (dag, DataSet::from_rows(vec!["X".into()], vec![2], &rows).unwrap())
    }

    fn table(states: usize, values: &[f64]) -> SufficientStatistics {
        let mut t = CountTable::zeros(states, values.len() / states);
        t.counts.copy_from_slice(values);
        SufficientStatistics { tables: vec![t] }
    }

    #[test]
    fn tally_examples() {
        let (dag, d) = single(&[]);
        let s = tally_counts(&d, &dag, &[2]).unwrap();
        assert_eq!(s.table(0).values(), &[0.0, 0.0]);

        let (dag, d) = single(&[1, 1, 0]);
        let s = tally_counts(&d, &dag, &[2]).unwrap();
        assert_eq!(s.table(0).get(0, 1), 2.0);
        assert_eq!(s.table(0).get(0, 0), 1.0);

        let dag = Dag::from_parents(&["A", "X"], vec![vec![], vec![0]]).unwrap();
        let d = DataSet::from_rows(
            vec!["A".into(), "X".into()],
            vec![2, 2],
            &[vec![0, 1], vec![0, 1], vec![1, 0]],
        )
        .unwrap();
        let s = tally_counts(&d, &dag, &[2, 2]).unwrap();
        assert_eq!(s.table(1).values(), &[0.0, 2.0, 1.0, 0.0]);

        let mut inc = d.clone();
        inc.mask(0, 0);
        assert_eq!(tally_counts(&inc, &dag, &[2, 2]), Err(EstimationError::IncompleteData));
    }

    #[test]
    fn mle_examples() {
        let p = mle_estimate(&table(2, &[2.0, 1.0]));
        assert!((p[0].prob(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[0].prob(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mle_estimate(&table(2, &[0.0, 0.0]))[0].values(), &[0.5, 0.5]);
        assert_eq!(mle_estimate(&table(2, &[5.0, 0.0]))[0].values(), &[1.0, 0.0]);
    }

    #[test]
    fn bayes_examples() {
        let one = DirichletPrior::Uniform(1.0);
        assert_eq!(bayes_estimate(&table(2, &[0.0, 0.0]), &one)[0].values(), &[0.5, 0.5]);
        let p = bayes_estimate(&table(2, &[2.0, 1.0]), &one);
        assert!((p[0].prob(0, 0) - 0.6).abs() < 1e-15);
        assert!((p[0].prob(1, 0) - 0.4).abs() < 1e-15);
        let p = bayes_estimate(&table(2, &[0.7, 0.3]), &one);
        assert!((p[0].prob(0, 0) - 1.7 / 3.0).abs() < 1e-15);
        assert!((p[0].prob(1, 0) - 1.3 / 3.0).abs() < 1e-15);
        assert!(DirichletPrior::Uniform(0.0).validate().is_err());
    }

    #[test]
    fn small_alpha_approaches_mle() {
        let stats = table(3, &[4.0, 1.0, 0.5, 0.0, 2.0, 7.0]);
        let mle = mle_estimate(&stats);
        let bayes = bayes_estimate(&stats, &DirichletPrior::Uniform(1e-8));
        assert!(mle[0].max_abs_diff(&bayes[0]) < 1e-6);
    }

    #[test]
    fn bic_examples() {
        let (dag, d) = single(&[1, 1, 1, 0]);
        let stats = tally_counts(&d, &dag, &[2]).unwrap();
        let bn = DiscreteBayesNet::new(dag, vec![bin()], mle_estimate(&stats)).unwrap();
        let expected = 3.0 * 0.75f64.ln() + 0.25f64.ln() - 4f64.ln() / 2.0;
        assert!((bic_score(&bn, &d).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 2.9425).abs() < 1e-4);

        let (dag, d) = single(&[1]);
        let bn = DiscreteBayesNet::uniform(dag, vec![bin()]).unwrap();
        assert!((bic_score(&bn, &d).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn bic_zero_likelihood_is_negative_infinity() {
        let (dag, d) = single(&[0, 1]);
        let bn = DiscreteBayesNet::new(dag, vec![bin()], vec![Cpt::new(2, 1, vec![1.0, 0.0])]).unwrap();
        assert_eq!(bic_score(&bn, &d).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn useless_parent_lowers_bic() {
        // Independent A and X; compare X alone vs X | A, both at MLE.
        let gen = random_network(&RandomNetworkSpec { nodes: 2, max_parents: 0, max_states: 2, seed: 3, ..Default::default() })
            .unwrap();
        let d = gen.forward_sample(5000, 1);
        let cards = gen.cardinalities().to_vec();
        let states = gen.all_states().to_vec();
        let fit = |dag: Dag| {
            let stats = tally_counts(&d, &dag, &cards).unwrap();
            let bn = DiscreteBayesNet::new(dag, states.clone(), mle_estimate(&stats)).unwrap();
            bic_score(&bn, &d).unwrap()
        };
        let without = fit(Dag::new(&["X1", "X2"]).unwrap());
        let with = fit(Dag::from_parents(&["X1", "X2"], vec![vec![], vec![0]]).unwrap());
        assert!(with < without);
    }

    #[test]
    fn bd_examples() {
        let one = DirichletPrior::Uniform(1.0);
        let (dag, d) = single(&[]);
        assert_eq!(bd_score(&dag, &[2], &d, &one).unwrap(), 0.0);
        let (dag, d) = single(&[1, 1, 0]);
        let bd = bd_score(&dag, &[2], &d, &one).unwrap();
        // Sequential predictive: (1/2)(2/3)(1/4).
        assert!((bd - (1.0f64 / 12.0).ln()).abs() < 1e-12);
        assert!((bd + 2.4849).abs() < 1e-4);
    }

    #[test]
    fn bd_is_row_order_invariant() {
        let gen = random_network(&RandomNetworkSpec { nodes: 5, seed: 8, ..Default::default() }).unwrap();
        let d = gen.forward_sample(60, 2);
        let prior = DirichletPrior::Uniform(0.5);
        let a = bd_score(gen.dag(), gen.cardinalities(), &d, &prior).unwrap();
        let order: Vec<usize> = (0..60).rev().collect();
        let b = bd_score(gen.dag(), gen.cardinalities(), &d.permute_rows(&order), &prior).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
