//! Imputation and parameter-recovery measures (PCR, APD, KLD, ΔKLD) and
//! replicate summaries with confidence intervals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::data::{DataSet, LedgerEntry};
use crate::em::EmVariant;
use crate::inference::{node_posterior, Evidence, InferenceError, RecordPosterior};
use crate::network::DiscreteBayesNet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("ledger is empty")]
    EmptyLedger,
    #[error("networks disagree on node count or state spaces")]
    NetworkMismatch,
    #[error("ledger cell ({row}, {column}) is outside the data set")]
    LedgerOutOfRange { row: usize, column: usize },
    #[error("scenario `{scenario}`, variant {variant}: {count} usable replicates, need at least 2")]
    InsufficientReplicates { scenario: String, variant: EmVariant, count: usize },
}

/// Proportion of hidden cells whose imputed value equals the true value.
/// Cells left missing count as incorrect.
pub fn pcr(imputed: &DataSet, ledger: &[LedgerEntry]) -> Result<f64, MetricsError> {
    if ledger.is_empty() {
        return Err(MetricsError::EmptyLedger);
    }
    let mut correct = 0usize;
    for e in ledger {
        check_entry(imputed, e)?;
        if imputed.get(e.row, e.column) == Some(e.state) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ledger.len() as f64)
}

fn check_entry(data: &DataSet, e: &LedgerEntry) -> Result<(), MetricsError> {
    if e.row >= data.n_rows() || e.column >= data.n_cols() {
        Err(MetricsError::LedgerOutOfRange { row: e.row, column: e.column })
    } else {
        Ok(())
    }
}

fn check_networks(a: &DiscreteBayesNet, b: &DiscreteBayesNet) -> Result<(), MetricsError> {
    if a.cardinalities() != b.cardinalities() {
        Err(MetricsError::NetworkMismatch)
    } else {
        Ok(())
    }
}

/// Ledger entries grouped by row, in row order.
fn by_row(ledger: &[LedgerEntry]) -> Vec<(usize, Vec<LedgerEntry>)> {
    let mut map: BTreeMap<usize, Vec<LedgerEntry>> = BTreeMap::new();
    for e in ledger {
        map.entry(e.row).or_default().push(*e);
    }
    map.into_iter().collect()
}

/// Posterior marginals of the given missing nodes of one record.
fn record_marginals(
    bn: &DiscreteBayesNet,
    record: &Evidence,
    nodes: &[usize],
) -> Result<Vec<Vec<f64>>, InferenceError> {
    match RecordPosterior::compute(bn, record) {
        Some(rp) => {
            let rp = rp?;
            Ok(nodes.iter().map(|&v| rp.marginal(v).expect("node is unobserved")).collect())
        }
        None => nodes.iter().map(|&v| node_posterior(bn, record, v)).collect(),
    }
}

/// Sum of per-cell terms plus the number of cells that could not be scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermSum {
    pub value: f64,
    pub terms: usize,
    pub skipped: usize,
}

/// Absolute probability difference: over hidden cells, the gap between the
/// reference and learned posterior probability of the true value given the
/// row's observed cells. Rows impossible under either model are skipped.
pub fn apd(
    reference: &DiscreteBayesNet,
    learned: &DiscreteBayesNet,
    incomplete: &DataSet,
    ledger: &[LedgerEntry],
) -> Result<TermSum, MetricsError> {
    check_networks(reference, learned)?;
    if ledger.is_empty() {
        return Err(MetricsError::EmptyLedger);
    }
    for e in ledger {
        check_entry(incomplete, e)?;
    }
    let rows = by_row(ledger);
    let parts: Vec<(f64, usize, usize)> = rows
        .par_iter()
        .map(|(r, entries)| {
            let record = Evidence::from_row(incomplete.row(*r));
            let nodes: Vec<usize> = entries.iter().map(|e| e.column).collect();
            match (record_marginals(reference, &record, &nodes), record_marginals(learned, &record, &nodes)) {
                (Ok(p), Ok(q)) => {
                    let sum = entries
                        .iter()
                        .enumerate()
                        .map(|(i, e)| (p[i][e.state] - q[i][e.state]).abs())
                        .sum();
                    (sum, entries.len(), 0)
                }
                _ => (0.0, 0, entries.len()),
            }
        })
        .collect();
    Ok(parts.into_iter().fold(TermSum { value: 0.0, terms: 0, skipped: 0 }, |acc, (v, t, s)| TermSum {
        value: acc.value + v,
        terms: acc.terms + t,
        skipped: acc.skipped + s,
    }))
}

/// How the distributions compared by [`kld`] are conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KldConditioning {
    /// CPT columns at the parent configuration of the true, completed row.
    #[default]
    TrueParents,
    /// Posterior of the hidden variable given the row's observed cells.
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KldSummary {
    /// Sum of the finite terms, in nats.
    pub value: f64,
    pub terms: usize,
    /// Terms where the learned model gives zero probability to a state the
    /// reference allows.
    pub infinite_terms: usize,
    /// Cells that could not be scored (impossible evidence).
    pub skipped: usize,
}

impl KldSummary {
    /// `value`, or infinity when some term diverged.
    pub fn total(&self) -> f64 {
        if self.infinite_terms > 0 {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

/// `Σ p ln(p/q)` with `0 ln(0/q) = 0`; `None` if `p > 0 = q` somewhere.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Option<f64> {
    let mut sum = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return None;
            }
            sum += a * (a / b).ln();
        }
    }
    Some(sum)
}

/// Sum over hidden cells of the divergence between the reference and the
/// learned conditional distribution of the cell's variable.
///
/// Under [`KldConditioning::TrueParents`] each network is read at the parent
/// configuration its own structure induces on the true completed row, so the
/// learned model may have a different DAG than the reference.
pub fn kld(
    reference: &DiscreteBayesNet,
    learned: &DiscreteBayesNet,
    incomplete: &DataSet,
    ledger: &[LedgerEntry],
    conditioning: KldConditioning,
) -> Result<KldSummary, MetricsError> {
    check_networks(reference, learned)?;
    if ledger.is_empty() {
        return Err(MetricsError::EmptyLedger);
    }
    for e in ledger {
        check_entry(incomplete, e)?;
    }
    let rows = by_row(ledger);
    let parts: Vec<Vec<Option<Option<f64>>>> = rows
        .par_iter()
        .map(|(r, entries)| match conditioning {
            KldConditioning::TrueParents => {
                let mut truth: Vec<usize> = incomplete.row(*r).iter().map(|c| c.unwrap_or(0)).collect();
                for e in entries {
                    truth[e.column] = e.state;
                }
                entries
                    .iter()
                    .map(|e| {
                        let v = e.column;
                        let p = reference.cpt(v).column(reference.config_of(v, &truth));
                        let q = learned.cpt(v).column(learned.config_of(v, &truth));
                        Some(kl_divergence(p, q))
                    })
                    .collect()
            }
            KldConditioning::Posterior => {
                let record = Evidence::from_row(incomplete.row(*r));
                let nodes: Vec<usize> = entries.iter().map(|e| e.column).collect();
                match (record_marginals(reference, &record, &nodes), record_marginals(learned, &record, &nodes)) {
                    (Ok(p), Ok(q)) => p.iter().zip(&q).map(|(a, b)| Some(kl_divergence(a, b))).collect(),
                    _ => vec![None; entries.len()],
                }
            }
        })
        .collect();
    let mut out = KldSummary { value: 0.0, terms: 0, infinite_terms: 0, skipped: 0 };
    for term in parts.into_iter().flatten() {
        match term {
            Some(Some(v)) => {
                out.value += v;
                out.terms += 1;
            }
            Some(None) => out.infinite_terms += 1,
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// KLD of the model fitted on a perturbed structure minus KLD of the model
/// fitted on the reference structure.
pub fn delta_kld(kld_perturbed: f64, kld_reference: f64) -> f64 {
    kld_perturbed - kld_reference
}

/// One fitted model's scores within a replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scenario_id: String,
    pub replicate: usize,
    pub variant: EmVariant,
    pub pcr: f64,
    pub apd: f64,
    pub kld: f64,
    pub delta_kld: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: u64,
}

pub const RECORD_HEADER: &str = "scenario_id,replicate,variant,pcr,apd,kld,delta_kld,iterations,converged,runtime_ms";

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            self.replicate,
            self.variant,
            fmt_f64(self.pcr),
            fmt_f64(self.apd),
            fmt_f64(self.kld),
            fmt_f64(self.delta_kld),
            self.iterations,
            self.converged,
            self.runtime_ms
        )
    }

    pub fn key(&self) -> (&str, usize, EmVariant) {
        (&self.scenario_id, self.replicate, self.variant)
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.10}")
    }
}

pub fn records_to_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(RECORD_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMethod {
    /// mean ± 1.96 · sd / √r
    #[default]
    Normal,
    /// mean ± t(0.975, r − 1) · sd / √r
    StudentT,
}

impl std::str::FromStr for CiMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(CiMethod::Normal),
            "t" | "student-t" => Ok(CiMethod::StudentT),
            other => Err(format!("unknown interval method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl ConfidenceInterval {
    /// 95% interval from at least two values, `None` otherwise.
    pub fn from_values(values: &[f64], method: CiMethod) -> Option<Self> {
        let n = values.len();
        if n < 2 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let z = match method {
            CiMethod::Normal => 1.96,
            CiMethod::StudentT => StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975),
        };
        let half = z * (var / n as f64).sqrt();
        Some(ConfidenceInterval { mean, lower: mean - half, upper: mean + half, n })
    }

    /// Lower mean and an interval entirely below `other`'s.
    pub fn dominates(&self, other: &ConfidenceInterval) -> bool {
        self.mean < other.mean && self.upper < other.lower
    }
}

/// Replicate summary for one (scenario, variant) group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub scenario_id: String,
    pub variant: EmVariant,
    pub replicates: usize,
    /// Replicates left out of the KLD interval because their KLD diverged.
    pub excluded: usize,
    pub kld: ConfidenceInterval,
    pub pcr_mean: f64,
    pub apd_mean: f64,
    pub delta_kld_mean: f64,
    /// Variants of the same scenario this one dominates on KLD.
    pub dominates: Vec<EmVariant>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { f64::NAN } else { sum / n as f64 }
}

/// Groups records by scenario and variant, builds KLD intervals and
/// pairwise dominance verdicts. Non-finite KLD values are excluded and
/// counted in [`GroupSummary::excluded`].
pub fn summarize_replicates(records: &[MetricsRecord], method: CiMethod) -> Result<Vec<GroupSummary>, MetricsError> {
    let mut groups: BTreeMap<(String, EmVariant), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scenario_id.clone(), r.variant)).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((scenario, variant), rs) in &groups {
        let finite: Vec<f64> = rs.iter().map(|r| r.kld).filter(|v| v.is_finite()).collect();
        let kld = ConfidenceInterval::from_values(&finite, method).ok_or_else(|| {
            MetricsError::InsufficientReplicates { scenario: scenario.clone(), variant: *variant, count: finite.len() }
        })?;
        out.push(GroupSummary {
            scenario_id: scenario.clone(),
            variant: *variant,
            replicates: rs.len(),
            excluded: rs.len() - finite.len(),
            kld,
            pcr_mean: mean(rs.iter().map(|r| r.pcr)),
            apd_mean: mean(rs.iter().map(|r| r.apd)),
            delta_kld_mean: mean(rs.iter().map(|r| r.delta_kld)),
            dominates: Vec::new(),
        });
    }
    for i in 0..out.len() {
        let beaten: Vec<EmVariant> = out
            .iter()
            .filter(|o| o.scenario_id == out[i].scenario_id && out[i].kld.dominates(&o.kld))
            .map(|o| o.variant)
            .collect();
        out[i].dominates = beaten;
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str =
    "scenario_id,variant,replicates,excluded,kld_mean,kld_lower,kld_upper,pcr_mean,apd_mean,delta_kld_mean,dominates";

pub fn summary_to_csv(groups: &[GroupSummary]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for g in groups {
        let dominated: Vec<&str> = g.dominates.iter().map(|v| v.as_str()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            g.scenario_id,
            g.variant,
            g.replicates,
            g.excluded,
            fmt_f64(g.kld.mean),
            fmt_f64(g.kld.lower),
            fmt_f64(g.kld.upper),
            fmt_f64(g.pcr_mean),
            fmt_f64(g.apd_mean),
            fmt_f64(g.delta_kld_mean),
            dominated.join(";")
        );
    }
    s
}
