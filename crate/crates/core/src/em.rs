//! Soft, hard and soft-forced EM for parameter learning from incomplete data,
//! plus imputation with a fitted model.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dag::Dag;
use crate::data::DataSet;
use crate::estimation::{bayes_estimate, DirichletPrior, Estimator, SufficientStatistics};
use crate::inference::{
    evidence_probability, family_posterior, mpe_completion, Evidence, InferenceError, RecordPosterior,
};
use crate::network::{config_count, dirichlet_ones, Cpt, DiscreteBayesNet, NetworkError, SizeClass};

/// Rows per E-step work unit. Chunk partial sums are merged in row order,
/// so results do not depend on the number of worker threads.
const ROWS_PER_CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("every record is impossible under the current parameters")]
    DegenerateModel,
    #[error("invalid EM configuration: {0}")]
    InvalidConfig(String),
    #[error("data columns do not match the structure")]
    ColumnMismatch,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmVariant {
    Soft,
    Hard,
    SoftForced,
}

impl EmVariant {
    pub const ALL: [EmVariant; 3] = [EmVariant::Hard, EmVariant::Soft, EmVariant::SoftForced];

    pub fn as_str(self) -> &'static str {
        match self {
            EmVariant::Soft => "soft",
            EmVariant::Hard => "hard",
            EmVariant::SoftForced => "soft-forced",
        }
    }
}

impl std::fmt::Display for EmVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EmVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soft" => Ok(EmVariant::Soft),
            "hard" => Ok(EmVariant::Hard),
            "soft-forced" | "soft_forced" => Ok(EmVariant::SoftForced),
            other => Err(format!("unknown EM variant `{other}`")),
        }
    }
}

/// Starting parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Bayesian estimate (alpha = 1) from rows whose whole family is observed.
    AvailableCase,
    Uniform,
    /// Dirichlet(1) draw per CPT column.
    Random(u64),
}

/// Iteration cap of soft-forced EM for a network size class.
pub fn forced_iteration_cap(size: SizeClass) -> usize {
    match size {
        SizeClass::Small => 3,
        SizeClass::Medium => 4,
        SizeClass::Large => 6,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub variant: EmVariant,
    pub estimator: Estimator,
    /// Stop once the largest absolute CPT change falls below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub init: InitPolicy,
    pub size_class: SizeClass,
}

impl EmConfig {
    pub fn new(variant: EmVariant, size_class: SizeClass) -> Self {
        EmConfig {
            variant,
            estimator: Estimator::default(),
            epsilon: 1e-3,
            max_iterations: 100,
            init: InitPolicy::AvailableCase,
            size_class,
        }
    }

    pub fn validate(&self) -> Result<(), EmError> {
        if !(self.epsilon > 0.0) {
            return Err(EmError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(EmError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if let Estimator::Bayes(prior) = &self.estimator {
            prior.validate().map_err(|e| EmError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    /// Effective iteration budget.
    pub fn iteration_cap(&self) -> usize {
        match self.variant {
            EmVariant::SoftForced => forced_iteration_cap(self.size_class).min(self.max_iterations),
            _ => self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// `sum_r ln P(observed cells of r)` under the parameters the E-step used.
    pub log_likelihood: f64,
    pub max_change: f64,
    pub skipped_records: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    pub iterations: Vec<IterationRecord>,
}

impl EmTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.log_likelihood).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub network: DiscreteBayesNet,
    pub trace: EmTrace,
    pub converged: bool,
}

/// Starting parameters for `dag` over the given state labels.
pub fn initialize_parameters(
    dag: &Dag,
    states: &[Vec<String>],
    data: &DataSet,
    policy: InitPolicy,
) -> Result<DiscreteBayesNet, EmError> {
    let cards: Vec<usize> = states.iter().map(Vec::len).collect();
    let cpts = match policy {
        InitPolicy::Uniform => (0..dag.len())
            .map(|i| Cpt::uniform(cards[i], config_count(dag, &cards, i)))
            .collect(),
        InitPolicy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dag.len())
                .map(|i| {
                    let configs = config_count(dag, &cards, i);
                    let values = (0..configs).flat_map(|_| dirichlet_ones(&mut rng, cards[i])).collect();
                    Cpt::new(cards[i], configs, values)
                })
                .collect()
        }
        InitPolicy::AvailableCase => {
            let mut stats = SufficientStatistics::zeros(dag, &cards);
            for row in data.rows().take(data.n_rows()) {
                for i in 0..dag.len() {
                    let Some(k) = row[i] else { continue };
                    let parents: Option<Vec<usize>> = dag.parents(i).iter().map(|&p| row[p]).collect();
                    if let Some(ps) = parents {
                        let j = dag.parents(i).iter().zip(&ps).fold(0, |j, (&p, &s)| j * cards[p] + s);
                        stats.table_mut(i).add(j, k, 1.0);
                    }
                }
            }
            bayes_estimate(&stats, &DirichletPrior::Uniform(1.0))
        }
    };
    Ok(DiscreteBayesNet::new(dag.clone(), states.to_vec(), cpts)?)
}

/// Expected counts plus bookkeeping from one E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedStatistics {
    pub stats: SufficientStatistics,
    pub log_likelihood: f64,
    /// Records excluded because their observed cells have probability zero.
    pub skipped: Vec<usize>,
}

impl ExpectedStatistics {
    fn empty(bn: &DiscreteBayesNet) -> Self {
        ExpectedStatistics {
            stats: SufficientStatistics::zeros(bn.dag(), bn.cardinalities()),
            log_likelihood: 0.0,
            skipped: Vec::new(),
        }
    }

    fn merge(&mut self, other: ExpectedStatistics) {
        self.stats.merge(&other.stats);
        self.log_likelihood += other.log_likelihood;
        self.skipped.extend(other.skipped);
    }
}

/// Adds one record's expected family counts to `acc`; returns
/// `ln P(observed)`.
fn accumulate_soft(
    bn: &DiscreteBayesNet,
    row: &[Option<usize>],
    acc: &mut SufficientStatistics,
) -> Result<f64, InferenceError> {
    let dag = bn.dag();
    let cards = bn.cardinalities();
    if let Some(full) = row.iter().copied().collect::<Option<Vec<usize>>>() {
        let p = bn.joint_probability(&full).expect("row states are valid");
        if !(p > 0.0) {
            return Err(InferenceError::ImpossibleEvidence);
        }
        acc.add_record(dag, cards, &full, 1.0);
        return Ok(p.ln());
    }
    let evidence = Evidence::from_row(row);
    let touches = |i: usize| row[i].is_none() || dag.parents(i).iter().any(|&p| row[p].is_none());
    match RecordPosterior::compute(bn, &evidence) {
        Some(rp) => {
            let rp = rp?;
            let mut assignment: Vec<usize> = row.iter().map(|c| c.unwrap_or(0)).collect();
            for i in (0..bn.len()).filter(|&i| !touches(i)) {
                let j = bn.config_of(i, &assignment);
                acc.table_mut(i).add(j, assignment[i], 1.0);
            }
            let varying: Vec<usize> = (0..bn.len()).filter(|&i| touches(i)).collect();
            rp.for_each(&mut assignment, |a, p| {
                for &i in &varying {
                    let j = bn.config_of(i, a);
                    acc.table_mut(i).add(j, a[i], p);
                }
            });
            Ok(rp.log_evidence)
        }
        None => {
            let pe = evidence_probability(bn, &evidence)?;
            if !(pe > 0.0) {
                return Err(InferenceError::ImpossibleEvidence);
            }
            for i in 0..bn.len() {
                let table = family_posterior(bn, &evidence, i)?;
                let configs = bn.cpt(i).configs();
                for (idx, &p) in table.values.iter().enumerate() {
                    if p != 0.0 {
                        acc.table_mut(i).add(idx % configs, idx / configs, p);
                    }
                }
            }
            Ok(pe.ln())
        }
    }
}

fn log_evidence(bn: &DiscreteBayesNet, row: &[Option<usize>]) -> Result<f64, InferenceError> {
    let evidence = Evidence::from_row(row);
    match RecordPosterior::compute(bn, &evidence) {
        Some(rp) => Ok(rp?.log_evidence),
        None => {
            let pe = evidence_probability(bn, &evidence)?;
            if pe > 0.0 {
                Ok(pe.ln())
            } else {
                Err(InferenceError::ImpossibleEvidence)
            }
        }
    }
}

fn chunked<F>(bn: &DiscreteBayesNet, data: &DataSet, per_row: F) -> ExpectedStatistics
where
    F: Fn(&[Option<usize>], &mut SufficientStatistics) -> Result<f64, InferenceError> + Sync,
{
    let n = data.n_rows();
    let parts: Vec<ExpectedStatistics> = (0..n.div_ceil(ROWS_PER_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut part = ExpectedStatistics::empty(bn);
            for r in c * ROWS_PER_CHUNK..((c + 1) * ROWS_PER_CHUNK).min(n) {
                // `per_row` only fails before it has added anything.
                match per_row(data.row(r), &mut part.stats) {
                    Ok(ll) => part.log_likelihood += ll,
                    Err(_) => part.skipped.push(r),
                }
            }
            part
        })
        .collect();
    let mut total = ExpectedStatistics::empty(bn);
    for p in parts {
        total.merge(p);
    }
    total
}

/// Soft E-step: expected counts `E[n_ijk | observed, theta]` over all records.
pub fn expected_sufficient_statistics(bn: &DiscreteBayesNet, data: &DataSet) -> ExpectedStatistics {
    chunked(bn, data, |row, acc| accumulate_soft(bn, row, acc))
}

/// Hard E-step: integer counts on each record's most probable completion.
pub fn completed_statistics(bn: &DiscreteBayesNet, data: &DataSet) -> ExpectedStatistics {
    chunked(bn, data, |row, acc| {
        let ll = log_evidence(bn, row)?;
        let full = match row.iter().copied().collect::<Option<Vec<usize>>>() {
            Some(full) => full,
            None => mpe_completion(bn, &Evidence::from_row(row))?,
        };
        acc.add_record(bn.dag(), bn.cardinalities(), &full, 1.0);
        Ok(ll)
    })
}

/// Fits parameters for `dag` (with the given state labels) by EM.
///
/// Soft EM alternates expected counts with the M-step estimator until the
/// largest CPT change is below `epsilon` or the iteration budget runs out.
/// Hard EM replaces expected counts by counts on the most probable
/// completion of each record. Soft-forced EM is soft EM with the budget
/// capped at 3/4/6 iterations for small/medium/large networks.
pub fn run_em(dag: &Dag, states: &[Vec<String>], data: &DataSet, config: &EmConfig) -> Result<EmFit, EmError> {
    config.validate()?;
    if data.columns() != dag.names() {
        return Err(EmError::ColumnMismatch);
    }
    let mut current = initialize_parameters(dag, states, data, config.init)?;
    let mut trace = EmTrace::default();
    let mut converged = false;
    let complete = data.is_complete();
    for _ in 0..config.iteration_cap() {
        let start = Instant::now();
        let step = match config.variant {
            EmVariant::Hard => completed_statistics(&current, data),
            EmVariant::Soft | EmVariant::SoftForced => expected_sufficient_statistics(&current, data),
        };
        if data.n_rows() > 0 && step.skipped.len() == data.n_rows() {
            return Err(EmError::DegenerateModel);
        }
        let next = DiscreteBayesNet::new(dag.clone(), states.to_vec(), config.estimator.estimate(&step.stats))?;
        let max_change = next.max_abs_diff(&current);
        trace.iterations.push(IterationRecord {
            log_likelihood: step.log_likelihood,
            max_change,
            skipped_records: step.skipped.len(),
            elapsed: start.elapsed(),
        });
        current = next;
        // Without missing cells the counts no longer depend on the
        // parameters, so the first M-step is already the fixed point.
        if max_change < config.epsilon || complete {
            converged = true;
            break;
        }
    }
    Ok(EmFit { network: current, trace, converged })
}

/// Data completed with a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub data: DataSet,
    /// Rows whose observed cells are impossible under the model; their
    /// missing cells stay missing.
    pub failed_rows: Vec<usize>,
}

/// Replaces every missing cell with its value in the row's most probable
/// completion. The ledger is carried over unchanged.
pub fn impute_with_model(bn: &DiscreteBayesNet, data: &DataSet) -> Imputation {
    let fills: Vec<(usize, Result<Vec<usize>, InferenceError>)> = (0..data.n_rows())
        .into_par_iter()
        .filter(|&r| data.row(r).iter().any(Option::is_none))
        .map(|r| (r, mpe_completion(bn, &Evidence::from_row(data.row(r)))))
        .collect();
    let mut out = data.clone();
    let mut failed_rows = Vec::new();
    for (r, completion) in fills {
        match completion {
            Ok(full) => {
                for c in 0..data.n_cols() {
                    if data.get(r, c).is_none() {
                        out.fill(r, c, full[c]);
                    }
                }
            }
            Err(_) => failed_rows.push(r),
        }
    }
    Imputation { data: out, failed_rows }
}
