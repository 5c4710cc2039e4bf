//! Scenario grid files.
//!
//! A grid is a sequence of `[scenario]` sections. Each section holds
//! `key = value` lines whose values are comma-separated lists; `#` starts a
//! comment. Every section expands to the Cartesian product of its
//! mechanisms, patterns, balancing settings, severities and sample sizes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::em::EmVariant;
use crate::estimation::{DirichletPrior, Estimator};
use crate::metrics::KldConditioning;
use crate::missingness::{Balancing, Mechanism, Pattern, DEFAULT_UNBALANCED_WEIGHT};
use crate::network::{asia, parse_network, random_network, DiscreteBayesNet, RandomNetworkSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: `{key}`: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, key: &str, message: impl Into<String>) -> Self {
        ConfigError { line, key: key.to_string(), message: message.into() }
    }
}

/// Where a scenario's reference network comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Asia,
    File(PathBuf),
    Random(RandomNetworkSpec),
}

impl NetworkSource {
    /// `asia`, `random(nodes=25, max_parents=3, states=2-3, seed=1)` or a
    /// path, resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let text = text.trim();
        if text == "asia" {
            return Ok(NetworkSource::Asia);
        }
        if let Some(args) = text.strip_prefix("random(").and_then(|t| t.strip_suffix(')')) {
            let mut spec = RandomNetworkSpec::default();
            for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                let (k, v) = arg.split_once('=').ok_or_else(|| format!("expected key=value, got `{arg}`"))?;
                let (k, v) = (k.trim(), v.trim());
                let num = |v: &str| v.parse::<usize>().map_err(|_| format!("`{k}` needs an integer, got `{v}`"));
                match k {
                    "nodes" => spec.nodes = num(v)?,
                    "max_parents" => spec.max_parents = num(v)?,
                    "states" => {
                        let (lo, hi) = v.split_once('-').unwrap_or((v, v));
                        spec.min_states = num(lo)?;
                        spec.max_states = num(hi)?;
                    }
                    "seed" => spec.seed = v.parse().map_err(|_| format!("bad seed `{v}`"))?,
                    other => return Err(format!("unknown random-network argument `{other}`")),
                }
            }
            if spec.nodes < 2 {
                return Err("random networks need at least 2 nodes".into());
            }
            if spec.min_states < 2 || spec.max_states < spec.min_states {
                return Err("states must be a range within 2..".into());
            }
            return Ok(NetworkSource::Random(spec));
        }
        if text.is_empty() {
            return Err("empty network".into());
        }
        Ok(NetworkSource::File(base.join(text)))
    }

    pub fn load(&self) -> Result<DiscreteBayesNet, String> {
        match self {
            NetworkSource::Asia => Ok(asia()),
            NetworkSource::Random(spec) => random_network(spec).map_err(|e| e.to_string()),
            NetworkSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                parse_network(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            NetworkSource::Asia => "asia".into(),
            NetworkSource::Random(s) => format!("random{}s{}", s.nodes, s.seed),
            NetworkSource::File(p) => p.file_stem().map_or("network".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

/// One cell of an expanded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub network: NetworkSource,
    pub sample_size: usize,
    pub severity: f64,
    pub mechanism: Mechanism,
    pub pattern: Pattern,
    pub balancing: Balancing,
    pub per_column: bool,
    pub replicates: usize,
    pub variants: Vec<EmVariant>,
    pub base_seed: u64,
    pub estimator: Estimator,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub kld: KldConditioning,
}

const KEYS: &[&str] = &[
    "name",
    "network",
    "sample_sizes",
    "severities",
    "mechanisms",
    "patterns",
    "targets",
    "balancing",
    "weight",
    "replicates",
    "variants",
    "seed",
    "estimator",
    "alpha",
    "epsilon",
    "max_iter",
    "per_column",
    "kld",
];

/// Upper bound of the high severity class.
pub const MAX_SEVERITY: f64 = 0.2;

#[derive(Default)]
struct Section {
    line: usize,
    entries: Vec<(usize, String, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()))
    }

    fn list(&self, key: &str) -> Option<(usize, Vec<String>)> {
        self.get(key).map(|(l, v)| {
            (l, v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        })
    }

    fn required_list(&self, key: &str) -> Result<(usize, Vec<String>), ConfigError> {
        match self.list(key) {
            None => Err(ConfigError::new(self.line, key, "missing")),
            Some((l, v)) if v.is_empty() => Err(ConfigError::new(l, key, "empty list")),
            Some(found) => Ok(found),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((l, v)) => v.parse().map_err(|_| ConfigError::new(l, key, format!("cannot parse `{v}`"))),
        }
    }

    fn parsed_list<T, E: std::fmt::Display>(
        &self,
        key: &str,
        default: Vec<T>,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<Vec<T>, ConfigError> {
        match self.list(key) {
            None => Ok(default),
            Some((l, v)) if v.is_empty() => Err(ConfigError::new(l, key, "empty list")),
            Some((l, v)) => v
                .iter()
                .map(|s| parse(s).map_err(|e| ConfigError::new(l, key, e.to_string())))
                .collect(),
        }
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if line != "[scenario]" {
                return Err(ConfigError::new(line_no, line, "unknown section"));
            }
            sections.push(Section { line: line_no, entries: Vec::new() });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line_no, line, "expected `key = value`"))?;
        let key = key.trim();
        let section = sections
            .last_mut()
            .ok_or_else(|| ConfigError::new(line_no, key, "outside a [scenario] section"))?;
        if !KEYS.contains(&key) {
            return Err(ConfigError::new(line_no, key, "unknown key"));
        }
        if section.get(key).is_some() {
            return Err(ConfigError::new(line_no, key, "given twice"));
        }
        section.entries.push((line_no, key.to_string(), value.trim().to_string()));
    }
    if sections.is_empty() {
        return Err(ConfigError::new(1, "[scenario]", "grid has no scenario"));
    }
    Ok(sections)
}

fn format_severity(s: f64) -> String {
    format!("{s}")
}

/// Expands a grid file's text into scenarios. Relative network paths are
/// resolved against `base`.
pub fn expand_scenario_grid(text: &str, base: &Path) -> Result<Vec<ScenarioSpec>, ConfigError> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for section in split_sections(text)? {
        let (nl, net) = section
            .get("network")
            .ok_or_else(|| ConfigError::new(section.line, "network", "missing"))?;
        let network = NetworkSource::parse(net, base).map_err(|e| ConfigError::new(nl, "network", e))?;
        let name = section.get("name").map_or_else(|| network.label(), |(_, n)| n.to_string());
        if name.is_empty() || name.contains([',', '"', '\n']) {
            return Err(ConfigError::new(section.line, "name", "names must be non-empty without commas or quotes"));
        }

        let (sl, raw_sizes) = section.required_list("sample_sizes")?;
        let sizes: Vec<usize> = raw_sizes
            .iter()
            .map(|s| match s.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(ConfigError::new(sl, "sample_sizes", format!("`{s}` is not a positive integer"))),
            })
            .collect::<Result<_, _>>()?;

        let (vl, raw_sev) = section.required_list("severities")?;
        let severities: Vec<f64> = raw_sev
            .iter()
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v > 0.0 && v <= MAX_SEVERITY => Ok(v),
                _ => Err(ConfigError::new(vl, "severities", format!("`{s}` is not in (0, {MAX_SEVERITY}]"))),
            })
            .collect::<Result<_, _>>()?;

        let mechanisms = section.parsed_list("mechanisms", vec![Mechanism::Mcar], str::parse::<Mechanism>)?;
        let targets = section.list("targets").map(|(_, t)| t).unwrap_or_default();
        let patterns = section.parsed_list("patterns", vec![Pattern::Fair], |p| Pattern::parse(p, &targets))?;

        let weight: f64 = section.parsed("weight", DEFAULT_UNBALANCED_WEIGHT)?;
        if !(weight >= 1.0) {
            return Err(ConfigError::new(section.get("weight").map_or(section.line, |g| g.0), "weight", "must be at least 1"));
        }
        let balancing = section.parsed_list("balancing", vec![Balancing::Balanced], |b| match b {
            "balanced" => Ok(Balancing::Balanced),
            "unbalanced" => Ok(Balancing::Unbalanced(weight)),
            other => Err(format!("unknown balancing `{other}`")),
        })?;

        let replicates: usize = section.parsed("replicates", 10)?;
        if replicates == 0 {
            return Err(ConfigError::new(section.get("replicates").map_or(section.line, |g| g.0), "replicates", "must be at least 1"));
        }
        let variants = section.parsed_list("variants", EmVariant::ALL.to_vec(), str::parse::<EmVariant>)?;
        let base_seed: u64 = section.parsed("seed", 1)?;

        let alpha: f64 = section.parsed("alpha", 1.0)?;
        if !(alpha > 0.0) {
            return Err(ConfigError::new(section.get("alpha").map_or(section.line, |g| g.0), "alpha", "must be positive"));
        }
        let estimator = match section.get("estimator") {
            None | Some((_, "bayes")) => Estimator::Bayes(DirichletPrior::Uniform(alpha)),
            Some((_, "mle")) => Estimator::Mle,
            Some((l, other)) => return Err(ConfigError::new(l, "estimator", format!("unknown estimator `{other}`"))),
        };
        let epsilon: f64 = section.parsed("epsilon", 1e-3)?;
        if !(epsilon > 0.0) {
            return Err(ConfigError::new(section.get("epsilon").map_or(section.line, |g| g.0), "epsilon", "must be positive"));
        }
        let max_iterations: usize = section.parsed("max_iter", 100)?;
        if max_iterations == 0 {
            return Err(ConfigError::new(section.get("max_iter").map_or(section.line, |g| g.0), "max_iter", "must be at least 1"));
        }
        let per_column: bool = section.parsed("per_column", false)?;
        let kld = match section.get("kld") {
            None | Some((_, "true-parents")) => KldConditioning::TrueParents,
            Some((_, "posterior")) => KldConditioning::Posterior,
            Some((l, other)) => return Err(ConfigError::new(l, "kld", format!("unknown conditioning `{other}`"))),
        };

        for &mechanism in &mechanisms {
            for pattern in &patterns {
                for &bal in &balancing {
                    for &severity in &severities {
                        for &sample_size in &sizes {
                            let id = format!(
                                "{name}_n{sample_size}_s{}_{}_{}_{}",
                                format_severity(severity),
                                mechanism.as_str(),
                                pattern.label(),
                                if bal.is_balanced() { "balanced" } else { "unbalanced" }
                            );
                            if !ids.insert(id.clone()) {
                                return Err(ConfigError::new(section.line, "name", format!("duplicate scenario `{id}`")));
                            }
                            out.push(ScenarioSpec {
                                id,
                                network: network.clone(),
                                sample_size,
                                severity,
                                mechanism,
                                pattern: pattern.clone(),
                                balancing: bal,
                                per_column,
                                replicates,
                                variants: variants.clone(),
                                base_seed,
                                estimator: estimator.clone(),
                                epsilon,
                                max_iterations,
                                kld,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reads and expands a grid file.
pub fn load_grid(path: &Path) -> Result<Vec<ScenarioSpec>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(0, "grid", e.to_string()))?;
    expand_scenario_grid(&text, path.parent().unwrap_or(Path::new(".")))
}
