//! Running expanded scenarios and writing their outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use super::grid::ScenarioSpec;
use crate::data::DataSet;
use crate::em::{impute_with_model, run_em, EmConfig, EmError, InitPolicy};
use crate::metrics::{
    apd, delta_kld, kld, pcr, records_to_csv, summarize_replicates, summary_to_csv, CiMethod, GroupSummary,
    MetricsError, MetricsRecord,
};
use crate::missingness::{ampute, verify_severity, AmputationError, AmputationSpec};
use crate::network::DiscreteBayesNet;
use crate::perturbation::{perturb_dag, PerturbationError};

/// Amputation attempts per replicate before giving up.
pub const SEVERITY_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("network: {0}")]
    Network(String),
    #[error("severity not reached within {attempts} attempts (last: {last})")]
    SeverityUnreachable { attempts: usize, last: String },
    #[error("amputation: {0}")]
    Amputation(#[from] AmputationError),
    #[error("perturbation: {0}")]
    Perturbation(#[from] PerturbationError),
    #[error("{variant} EM: {source}")]
    Em { variant: String, source: EmError },
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
}

/// Stage tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sample,
    Ampute(usize),
    Perturb,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Seed for one stage of one replicate, stable across runs and platforms.
pub fn derive_seed(base: u64, scenario: &str, replicate: usize, stage: Stage) -> u64 {
    let (tag, extra) = match stage {
        Stage::Sample => (0u8, 0u64),
        Stage::Ampute(attempt) => (1, attempt as u64),
        Stage::Perturb => (2, 0),
    };
    let mut h = fnv1a(scenario.as_bytes(), 0xCBF2_9CE4_8422_2325);
    h = fnv1a(&(replicate as u64).to_le_bytes(), h);
    h = fnv1a(&[tag], h);
    h = fnv1a(&extra.to_le_bytes(), h);
    splitmix64(base ^ splitmix64(h))
}

/// Samples and amputes one replicate's data, retrying with fresh seeds until
/// the achieved severity is within tolerance and something was hidden.
pub fn prepare_replicate_data(
    spec: &ScenarioSpec,
    bn: &DiscreteBayesNet,
    replicate: usize,
) -> Result<DataSet, ScenarioError> {
    let complete = bn.forward_sample(spec.sample_size, derive_seed(spec.base_seed, &spec.id, replicate, Stage::Sample));
    let mut last = String::from("no attempt");
    for attempt in 0..SEVERITY_RETRIES {
        let amp = AmputationSpec {
            mechanism: spec.mechanism,
            pattern: spec.pattern.clone(),
            severity: spec.severity,
            balancing: spec.balancing,
            seed: derive_seed(spec.base_seed, &spec.id, replicate, Stage::Ampute(attempt)),
            per_column: spec.per_column,
        };
        match ampute(&complete, bn.dag(), &amp) {
            Ok(data) => {
                let check = verify_severity(&data, spec.severity);
                if check.pass && !data.ledger().is_empty() {
                    return Ok(data);
                }
                last = format!("achieved {:.4} with {} hidden cells", check.achieved, data.ledger().len());
            }
            Err(e @ AmputationError::CalibrationFailure { .. }) => last = e.to_string(),
            Err(e) => return Err(e.into()),
        }
    }
    Err(ScenarioError::SeverityUnreachable { attempts: SEVERITY_RETRIES, last })
}

/// Runs every variant on one replicate.
///
/// Each variant is fitted on the reference structure (PCR, APD, KLD) and on
/// a perturbed structure; ΔKLD contrasts the two fits' KLD.
pub fn run_replicate(
    spec: &ScenarioSpec,
    bn: &DiscreteBayesNet,
    replicate: usize,
    timings: bool,
) -> Result<Vec<MetricsRecord>, ScenarioError> {
    let data = prepare_replicate_data(spec, bn, replicate)?;
    let ledger = data.ledger().to_vec();
    let (perturbed, _) = perturb_dag(bn.dag(), bn.size_class(), derive_seed(spec.base_seed, &spec.id, replicate, Stage::Perturb))?;
    let mut out = Vec::with_capacity(spec.variants.len());
    for &variant in &spec.variants {
        let start = Instant::now();
        let config = EmConfig {
            variant,
            estimator: spec.estimator.clone(),
            epsilon: spec.epsilon,
            max_iterations: spec.max_iterations,
            init: InitPolicy::AvailableCase,
            size_class: bn.size_class(),
        };
        let em_err = |source| ScenarioError::Em { variant: variant.to_string(), source };
        let fit = run_em(bn.dag(), bn.all_states(), &data, &config).map_err(em_err)?;
        let runtime_ms = start.elapsed().as_millis() as u64;
        let imputed = impute_with_model(&fit.network, &data);
        let kld_ref = kld(bn, &fit.network, &data, &ledger, spec.kld)?.total();
        let fit_perturbed = run_em(&perturbed, bn.all_states(), &data, &config).map_err(em_err)?;
        let kld_perturbed = kld(bn, &fit_perturbed.network, &data, &ledger, spec.kld)?.total();
        out.push(MetricsRecord {
            scenario_id: spec.id.clone(),
            replicate,
            variant,
            pcr: pcr(&imputed.data, &ledger)?,
            apd: apd(bn, &fit.network, &data, &ledger)?.value,
            kld: kld_ref,
            delta_kld: delta_kld(kld_perturbed, kld_ref),
            iterations: fit.trace.len(),
            converged: fit.converged,
            runtime_ms: if timings { runtime_ms } else { 0 },
        });
    }
    Ok(out)
}

/// A replicate that could not be completed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReplicateFailure {
    pub scenario_id: String,
    /// `None` for failures that affect the whole scenario.
    pub replicate: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Record wall-clock fitting time in `runtime_ms`; off keeps the
    /// results file byte-reproducible.
    pub timings: bool,
    pub ci: CiMethod,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { jobs: 0, timings: false, ci: CiMethod::Normal }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationOutput {
    /// Sorted by grid position of the scenario, replicate and variant.
    pub records: Vec<MetricsRecord>,
    pub summary: Vec<GroupSummary>,
    pub failures: Vec<ReplicateFailure>,
}

impl SimulationOutput {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs all replicates of all scenarios in parallel. Failures are collected
/// rather than aborting the run.
pub fn simulate(specs: &[ScenarioSpec], options: &SimulationOptions) -> SimulationOutput {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if options.jobs > 0 {
        builder = builder.num_threads(options.jobs);
    }
    let pool = builder.build().expect("thread pool");
    pool.install(|| simulate_in_pool(specs, options))
}

fn simulate_in_pool(specs: &[ScenarioSpec], options: &SimulationOptions) -> SimulationOutput {
    let networks: Vec<Result<DiscreteBayesNet, String>> = specs.par_iter().map(|s| s.network.load()).collect();
    let mut failures = Vec::new();
    let mut units = Vec::new();
    for (spec, net) in specs.iter().zip(&networks) {
        match net {
            Ok(bn) => units.extend((0..spec.replicates).map(|r| (spec, bn, r))),
            Err(e) => failures.push(ReplicateFailure {
                scenario_id: spec.id.clone(),
                replicate: None,
                message: ScenarioError::Network(e.clone()).to_string(),
            }),
        }
    }
    let results: Vec<(&ScenarioSpec, usize, Result<Vec<MetricsRecord>, ScenarioError>)> = units
        .into_par_iter()
        .map(|(spec, bn, r)| (spec, r, run_replicate(spec, bn, r, options.timings)))
        .collect();
    let mut records = Vec::new();
    for (spec, r, res) in results {
        match res {
            Ok(rs) => records.extend(rs),
            Err(e) => failures.push(ReplicateFailure {
                scenario_id: spec.id.clone(),
                replicate: Some(r),
                message: e.to_string(),
            }),
        }
    }
    let position: BTreeMap<&str, usize> = specs.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    records.sort_by_key(|r| (position[r.scenario_id.as_str()], r.replicate, r.variant));

    let mut by_scenario: BTreeMap<usize, Vec<MetricsRecord>> = BTreeMap::new();
    for r in &records {
        by_scenario.entry(position[r.scenario_id.as_str()]).or_default().push(r.clone());
    }
    let mut summary = Vec::new();
    for (pos, rs) in by_scenario {
        let scenario = &specs[pos].id;
        match summarize_replicates(&rs, options.ci) {
            Ok(groups) => summary.extend(groups),
            Err(e) => failures.push(ReplicateFailure {
                scenario_id: scenario.to_string(),
                replicate: None,
                message: format!("summary: {e}"),
            }),
        }
    }
    failures.sort();
    SimulationOutput { records, summary, failures }
}

/// Runs all replicates of one scenario.
pub fn run_scenario(spec: &ScenarioSpec, options: &SimulationOptions) -> SimulationOutput {
    simulate(std::slice::from_ref(spec), options)
}

pub fn failures_to_log(failures: &[ReplicateFailure]) -> String {
    let mut s = String::new();
    for f in failures {
        let rep = f.replicate.map_or("-".to_string(), |r| r.to_string());
        let _ = writeln!(s, "{}\t{}\t{}", f.scenario_id, rep, f.message);
    }
    s
}

/// Writes `results.csv`, `summary.csv` and `errors.log` into `dir`.
pub fn write_outputs(dir: &Path, output: &SimulationOutput) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), records_to_csv(&output.records))?;
    std::fs::write(dir.join("summary.csv"), summary_to_csv(&output.summary))?;
    std::fs::write(dir.join("errors.log"), failures_to_log(&output.failures))
}
