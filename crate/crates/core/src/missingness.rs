//! Amputation: hiding values of a complete data set under a chosen
//! mechanism, pattern, severity and balancing.
//!
//! For every eligible column the masking probability of row `r` is
//! `min(1, w_r * logistic(b + s_r))`, where `s_r` is a standardised score
//! (zero under MCAR, built from other columns under MAR, and additionally
//! from the column's own value under MNAR), `w_r` is the balancing weight of
//! the cell's value and the intercept `b` is found by bisection so that the
//! expected proportion of hidden cells matches the requested severity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::dag::Dag;
use crate::data::DataSet;

/// Additive tolerance on the achieved missing proportion.
pub const SEVERITY_TOLERANCE: f64 = 0.01;

const BISECTION_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmputationError {
    #[error("missingness pattern selects no node")]
    EmptySelection,
    #[error("unknown target node `{0}`")]
    UnknownTarget(String),
    #[error("input data already has missing cells")]
    IncompleteInput,
    #[error("severity {0} outside [0, 0.5]")]
    InvalidSeverity(f64),
    #[error("unbalanced weight must be at least 1, got {0}")]
    InvalidWeight(f64),
    #[error("eligible columns would need {rate:.3} of their cells hidden")]
    InsufficientCells { rate: f64 },
    #[error("could not calibrate column `{column}`: expected proportion {achieved:.4}, wanted {target:.4}")]
    CalibrationFailure { column: String, achieved: f64, target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "mnar" => Ok(Mechanism::Mnar),
            other => Err(format!("unknown mechanism `{other}`")),
        }
    }
}

/// Which nodes may receive missing values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Fair,
    Root,
    Leaf,
    HighDegree,
    Target(Vec<String>),
}

impl Pattern {
    pub fn is_fair(&self) -> bool {
        matches!(self, Pattern::Fair)
    }

    pub fn label(&self) -> String {
        match self {
            Pattern::Fair => "fair".into(),
            Pattern::Root => "root".into(),
            Pattern::Leaf => "leaf".into(),
            Pattern::HighDegree => "high-degree".into(),
            Pattern::Target(t) => format!("target({})", t.join("+")),
        }
    }

    /// Parses `fair|root|leaf|high-degree|target`, the last needing `targets`.
    pub fn parse(name: &str, targets: &[String]) -> Result<Self, String> {
        match name {
            "fair" => Ok(Pattern::Fair),
            "root" => Ok(Pattern::Root),
            "leaf" => Ok(Pattern::Leaf),
            "high-degree" | "high_degree" | "central" => Ok(Pattern::HighDegree),
            "target" if targets.is_empty() => Err("target pattern needs target nodes".into()),
            "target" => Ok(Pattern::Target(targets.to_vec())),
            other => Err(format!("unknown pattern `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Balancing {
    Balanced,
    /// The highest state of each column gets `weight` times the masking
    /// propensity of the others.
    Unbalanced(f64),
}

/// Default weight of the unbalanced setting.
pub const DEFAULT_UNBALANCED_WEIGHT: f64 = 3.0;

impl Balancing {
    pub fn is_balanced(self) -> bool {
        matches!(self, Balancing::Balanced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeverityClass {
    Low,
    Medium,
    High,
}

impl SeverityClass {
    /// Low up to 1%, medium up to 5%, high above.
    pub fn from_proportion(p: f64) -> Self {
        if p <= 0.01 {
            SeverityClass::Low
        } else if p <= 0.05 {
            SeverityClass::Medium
        } else {
            SeverityClass::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityClass::Low => "low",
            SeverityClass::Medium => "medium",
            SeverityClass::High => "high",
        }
    }
}

impl std::str::FromStr for SeverityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(SeverityClass::Low),
            "medium" => Ok(SeverityClass::Medium),
            "high" => Ok(SeverityClass::High),
            other => other
                .parse::<f64>()
                .map(SeverityClass::from_proportion)
                .map_err(|_| format!("unknown severity `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmputationSpec {
    pub mechanism: Mechanism,
    pub pattern: Pattern,
    /// Target proportion of hidden cells.
    pub severity: f64,
    pub balancing: Balancing,
    pub seed: u64,
    /// Measure severity per eligible column instead of over the whole table.
    pub per_column: bool,
}

impl AmputationSpec {
    pub fn mcar(severity: f64, seed: u64) -> Self {
        AmputationSpec {
            mechanism: Mechanism::Mcar,
            pattern: Pattern::Fair,
            severity,
            balancing: Balancing::Balanced,
            seed,
            per_column: false,
        }
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Nodes eligible for missing values under `pattern`, ascending.
///
/// `HighDegree` keeps nodes whose degree reaches the 75th percentile of all
/// degrees (linear interpolation between order statistics).
pub fn select_pattern_nodes(dag: &Dag, pattern: &Pattern) -> Result<Vec<usize>, AmputationError> {
    let roles = dag.node_roles();
    let nodes: Vec<usize> = match pattern {
        Pattern::Fair => (0..dag.len()).collect(),
        Pattern::Root => (0..dag.len()).filter(|&v| roles[v].is_root).collect(),
        Pattern::Leaf => (0..dag.len()).filter(|&v| roles[v].is_leaf).collect(),
        Pattern::HighDegree => {
            if dag.is_empty() {
                Vec::new()
            } else {
                let mut degrees: Vec<f64> = roles.iter().map(|r| r.degree as f64).collect();
                degrees.sort_by(f64::total_cmp);
                let cut = quantile(&degrees, 0.75);
                (0..dag.len()).filter(|&v| roles[v].degree as f64 >= cut).collect()
            }
        }
        Pattern::Target(names) => {
            let mut out = Vec::with_capacity(names.len());
            for n in names {
                let v = dag.index_of(n).ok_or_else(|| AmputationError::UnknownTarget(n.clone()))?;
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            out.sort_unstable();
            out
        }
    };
    if nodes.is_empty() {
        Err(AmputationError::EmptySelection)
    } else {
        Ok(nodes)
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standardised state index of a column (all zeros if constant).
fn standardised(data: &DataSet, c: usize) -> Vec<f64> {
    let vals: Vec<f64> = (0..data.n_rows())
        .map(|r| data.get(r, c).expect("complete input") as f64)
        .collect();
    standardise(vals)
}

fn standardise(mut vals: Vec<f64>) -> Vec<f64> {
    let n = vals.len() as f64;
    if vals.is_empty() {
        return vals;
    }
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in &mut vals {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
    vals
}

fn mean_propensity(scores: &[f64], weights: &[f64], intercept: f64) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(weights)
        .map(|(s, w)| (w * logistic(intercept + s)).min(1.0))
        .sum();
    total / scores.len() as f64
}

/// Hides cells of a complete data set; hidden values go to the ledger.
pub fn ampute(data: &DataSet, dag: &Dag, spec: &AmputationSpec) -> Result<DataSet, AmputationError> {
    if !data.is_complete() {
        return Err(AmputationError::IncompleteInput);
    }
    if !(0.0..=0.5).contains(&spec.severity) {
        return Err(AmputationError::InvalidSeverity(spec.severity));
    }
    if let Balancing::Unbalanced(w) = spec.balancing {
        if !(w >= 1.0) {
            return Err(AmputationError::InvalidWeight(w));
        }
    }
    let columns = select_pattern_nodes(dag, &spec.pattern)?;
    let mut out = data.clone();
    if spec.severity == 0.0 || data.n_rows() == 0 {
        return Ok(out);
    }
    let rate = if spec.per_column {
        spec.severity
    } else {
        spec.severity * data.n_cols() as f64 / columns.len() as f64
    };
    if rate > 1.0 {
        return Err(AmputationError::InsufficientCells { rate });
    }

    let n = data.n_rows();
    let z: Vec<Vec<f64>> = if spec.mechanism == Mechanism::Mcar {
        Vec::new()
    } else {
        (0..data.n_cols()).map(|c| standardised(data, c)).collect()
    };
    // Columns that never lose values drive MAR; with a fair pattern every
    // column is eligible, so the other columns are used instead.
    let external: Vec<usize> = (0..data.n_cols()).filter(|c| !columns.contains(c)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for &c in &columns {
        let scores: Vec<f64> = match spec.mechanism {
            Mechanism::Mcar => vec![0.0; n],
            Mechanism::Mar | Mechanism::Mnar => {
                let predictors: Vec<usize> = if external.is_empty() {
                    (0..data.n_cols()).filter(|&p| p != c).collect()
                } else {
                    external.clone()
                };
                let mut raw: Vec<f64> = (0..n).map(|r| predictors.iter().map(|&p| z[p][r]).sum()).collect();
                if spec.mechanism == Mechanism::Mnar {
                    raw = standardise(raw);
                    for (s, own) in raw.iter_mut().zip(&z[c]) {
                        *s += own;
                    }
                }
                standardise(raw)
            }
        };
        let top = data.cardinalities()[c] - 1;
        let weights: Vec<f64> = (0..n)
            .map(|r| match spec.balancing {
                Balancing::Unbalanced(w) if data.get(r, c) == Some(top) => w,
                _ => 1.0,
            })
            .collect();
        let (mut lo, mut hi) = (-60.0f64, 60.0f64);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mean_propensity(&scores, &weights, mid) < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let intercept = 0.5 * (lo + hi);
        let achieved = mean_propensity(&scores, &weights, intercept);
        if (achieved - rate).abs() > SEVERITY_TOLERANCE {
            return Err(AmputationError::CalibrationFailure {
                column: data.columns()[c].clone(),
                achieved,
                target: rate,
            });
        }
        for r in 0..n {
            let p = (weights[r] * logistic(intercept + scores[r])).min(1.0);
            if rng.gen::<f64>() < p {
                out.mask(r, c);
            }
        }
    }
    out.sort_ledger();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityCheck {
    pub achieved: f64,
    pub target: f64,
    pub pass: bool,
}

/// Passes when the hidden proportion over all cells is within
/// [`SEVERITY_TOLERANCE`] of `target`.
pub fn verify_severity(data: &DataSet, target: f64) -> SeverityCheck {
    check_proportion(data.missing_proportion(), target)
}

pub fn check_proportion(achieved: f64, target: f64) -> SeverityCheck {
    // Rounded to absorb representation error at the boundary.
    let diff = ((achieved - target).abs() * 1e12).round() / 1e12;
    SeverityCheck { achieved, target, pass: diff <= SEVERITY_TOLERANCE }
}

/// Pearson chi-square test of independence on a contingency table.
/// Returns `(statistic, degrees of freedom, p-value)`; empty rows and
/// columns are dropped, and a table with fewer than two non-empty rows or
/// columns gives p = 1.
pub fn chi_square_independence(table: &[Vec<f64>]) -> (f64, usize, f64) {
    let rows: Vec<&Vec<f64>> = table.iter().filter(|r| r.iter().sum::<f64>() > 0.0).collect();
    let width = rows.first().map_or(0, |r| r.len());
    let cols: Vec<usize> = (0..width).filter(|&k| rows.iter().map(|r| r[k]).sum::<f64>() > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let total: f64 = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
    let mut stat = 0.0;
    for r in &rows {
        let row_sum: f64 = r.iter().sum();
        for &k in &cols {
            let col_sum: f64 = rows.iter().map(|q| q[k]).sum();
            let expected = row_sum * col_sum / total;
            stat += (r[k] - expected).powi(2) / expected;
        }
    }
    let dof = (rows.len() - 1) * (cols.len() - 1);
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    (stat, dof, 1.0 - dist.cdf(stat))
}

/// Observed and hidden value counts of column `c`, rows `[observed, hidden]`.
pub fn mask_value_table(amputed: &DataSet, c: usize) -> Vec<Vec<f64>> {
    let card = amputed.cardinalities()[c];
    let mut table = vec![vec![0.0; card]; 2];
    for r in 0..amputed.n_rows() {
        if let Some(k) = amputed.get(r, c) {
            table[0][k] += 1.0;
        }
    }
    for e in amputed.ledger().iter().filter(|e| e.column == c) {
        table[1][e.state] += 1.0;
    }
    table
}
