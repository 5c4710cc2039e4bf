use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bnem_core::em::{impute_with_model, run_em};
use bnem_core::estimation::{bd_score, bic_score};
use bnem_core::harness::run::failures_to_log;
use bnem_core::harness::{load_grid, recommend, simulate, write_outputs, NetworkSource, SimulationOptions};
use bnem_core::metrics::{apd, kld, pcr, CiMethod};
use bnem_core::missingness::{ampute, verify_severity, DEFAULT_UNBALANCED_WEIGHT};
use bnem_core::network::serialize_network;
use bnem_core::perturbation::{perturb_dag_with, PerturbationOptions};
use bnem_core::{
    AmputationSpec, Balancing, DataSet, DirichletPrior, DiscreteBayesNet, EmConfig, EmVariant, Estimator,
    InitPolicy, KldConditioning, Mechanism, Pattern, SeverityClass, SizeClass,
};

#[derive(Parser)]
#[command(name = "bnem", version, about = "EM parameter learning for discrete Bayesian networks with missing data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample complete data from a network.
    Generate {
        /// `asia`, `random(nodes=.., max_parents=.., states=a-b, seed=..)` or a network file.
        #[arg(long)]
        network: String,
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the network itself, useful for random networks.
        #[arg(long)]
        network_out: Option<PathBuf>,
    },
    /// Hide cells of a complete data set.
    Ampute {
        #[arg(long)]
        network: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "mcar")]
        mechanism: Mechanism,
        #[arg(long, default_value = "fair")]
        pattern: String,
        /// Comma-separated node names for `--pattern target`.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long)]
        severity: f64,
        #[arg(long, value_enum, default_value_t = BalancingArg::Balanced)]
        balancing: BalancingArg,
        #[arg(long, default_value_t = DEFAULT_UNBALANCED_WEIGHT)]
        weight: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        per_column: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Learn CPTs for a network's structure from incomplete data.
    Fit {
        /// Network whose structure and state labels are used.
        #[arg(long)]
        network: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "soft")]
        variant: EmVariant,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = InitArg::AvailableCase)]
        init: InitArg,
        /// Seed for `--init random`.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-iteration log-likelihood trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fill missing cells with the most probable completion of each row.
    Impute {
        #[arg(long)]
        network: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BIC and BD scores of a network on complete data.
    Score {
        #[arg(long)]
        network: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Apply random arc edits to a network's structure.
    Perturb {
        #[arg(long)]
        network: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        max_in_degree: Option<usize>,
        /// Perturbed network, with uniform CPTs.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log: PathBuf,
    },
    /// PCR, APD and KLD of a learned network against the reference.
    Metrics {
        #[arg(long)]
        reference: String,
        #[arg(long)]
        learned: PathBuf,
        /// The amputed data set.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long, value_enum, default_value_t = KldArg::TrueParents)]
        kld: KldArg,
    },
    /// Run a scenario grid.
    Simulate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        timings: bool,
        #[arg(long, default_value = "normal")]
        ci: CiMethod,
    },
    /// Suggest EM variants for a setting.
    Recommend {
        /// `small`, `medium`, `large` or a node count.
        #[arg(long)]
        size: String,
        #[arg(long, value_enum)]
        balancing: BalancingArg,
        /// `low`, `medium`, `high` or a proportion.
        #[arg(long)]
        severity: SeverityClass,
        #[arg(long)]
        pattern: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BalancingArg {
    Balanced,
    Unbalanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    AvailableCase,
    Uniform,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum KldArg {
    TrueParents,
    Posterior,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Mle,
    Bayes,
}

#[derive(clap::Args)]
struct EstimatorArgs {
    #[arg(long, value_enum, default_value_t = EstimatorArg::Bayes)]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl EstimatorArgs {
    fn build(&self) -> Estimator {
        match self.estimator {
            EstimatorArg::Mle => Estimator::Mle,
            EstimatorArg::Bayes => Estimator::Bayes(DirichletPrior::Uniform(self.alpha)),
        }
    }
}

fn load_network(source: &str) -> Result<DiscreteBayesNet> {
    let source = NetworkSource::parse(source, Path::new(".")).map_err(anyhow::Error::msg)?;
    source.load().map_err(anyhow::Error::msg)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_data(path: &Path, bn: &DiscreteBayesNet) -> Result<DataSet> {
    DataSet::from_csv(&read(path)?, bn).with_context(|| format!("parsing {}", path.display()))
}

fn load_with_ledger(data: &Path, ledger: &Path, bn: &DiscreteBayesNet) -> Result<DataSet> {
    let mut ds = load_data(data, bn)?;
    let entries = ds
        .ledger_from_csv(&read(ledger)?, bn.all_states())
        .with_context(|| format!("parsing {}", ledger.display()))?;
    ds.set_ledger(entries);
    Ok(ds)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Simulate { grid, out, jobs, timings, ci } = &cli.command {
        return run_simulate(grid, out, *jobs, *timings, *ci);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_simulate(grid: &Path, out: &Path, jobs: usize, timings: bool, ci: CiMethod) -> ExitCode {
    let specs = match load_grid(grid) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", grid.display());
            return ExitCode::from(1);
        }
    };
    let output = simulate(&specs, &SimulationOptions { jobs, timings, ci });
    if let Err(e) = write_outputs(out, &output) {
        eprintln!("error: writing {}: {e}", out.display());
        return ExitCode::from(1);
    }
    eprintln!("{} scenarios, {} records, {} failures", specs.len(), output.records.len(), output.failures.len());
    if output.has_failures() {
        eprint!("{}", failures_to_log(&output.failures));
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { network, rows, seed, out, network_out } => {
            let bn = load_network(&network)?;
            if let Some(p) = &network_out {
                emit(Some(p), &serialize_network(&bn))?;
            }
            let data = bn.forward_sample(rows, seed);
            emit(out.as_deref(), &data.to_csv(bn.all_states()))
        }
        Command::Ampute {
            network,
            data,
            mechanism,
            pattern,
            targets,
            severity,
            balancing,
            weight,
            seed,
            per_column,
            out,
            ledger,
        } => {
            let bn = load_network(&network)?;
            let complete = load_data(&data, &bn)?;
            let spec = AmputationSpec {
                mechanism,
                pattern: Pattern::parse(&pattern, &targets).map_err(anyhow::Error::msg)?,
                severity,
                balancing: match balancing {
                    BalancingArg::Balanced => Balancing::Balanced,
                    BalancingArg::Unbalanced => Balancing::Unbalanced(weight),
                },
                seed,
                per_column,
            };
            let amputed = ampute(&complete, bn.dag(), &spec)?;
            let check = verify_severity(&amputed, severity);
            eprintln!(
                "hidden {} cells, proportion {:.4} (target {:.4}{})",
                amputed.missing_count(),
                check.achieved,
                check.target,
                if check.pass { "" } else { ", outside tolerance" }
            );
            emit(Some(&ledger), &amputed.ledger_to_csv(bn.all_states()))?;
            emit(out.as_deref(), &amputed.to_csv(bn.all_states()))
        }
        Command::Fit { network, data, variant, estimator, epsilon, max_iter, init, seed, out, trace } => {
            let bn = load_network(&network)?;
            let ds = load_data(&data, &bn)?;
            let config = EmConfig {
                estimator: estimator.build(),
                epsilon,
                max_iterations: max_iter,
                init: match init {
                    InitArg::AvailableCase => InitPolicy::AvailableCase,
                    InitArg::Uniform => InitPolicy::Uniform,
                    InitArg::Random => InitPolicy::Random(seed),
                },
                ..EmConfig::new(variant, bn.size_class())
            };
            let fit = run_em(bn.dag(), bn.all_states(), &ds, &config)?;
            eprintln!(
                "{} iterations, {}",
                fit.trace.len(),
                if fit.converged { "converged" } else { "not converged" }
            );
            if let Some(p) = &trace {
                let mut text = String::from("iteration,log_likelihood\n");
                for (i, ll) in fit.trace.log_likelihoods().iter().enumerate() {
                    text.push_str(&format!("{},{ll:.10}\n", i + 1));
                }
                emit(Some(p), &text)?;
            }
            emit(out.as_deref(), &serialize_network(&fit.network))
        }
        Command::Impute { network, data, out } => {
            let bn = load_network(&network)?;
            let ds = load_data(&data, &bn)?;
            let imputation = impute_with_model(&bn, &ds);
            if !imputation.failed_rows.is_empty() {
                eprintln!("{} rows are impossible under the model and were left incomplete", imputation.failed_rows.len());
            }
            emit(out.as_deref(), &imputation.data.to_csv(bn.all_states()))
        }
        Command::Score { network, data, alpha } => {
            let bn = load_network(&network)?;
            let ds = load_data(&data, &bn)?;
            let bic = bic_score(&bn, &ds)?;
            let bd = bd_score(bn.dag(), bn.cardinalities(), &ds, &DirichletPrior::Uniform(alpha))?;
            println!("bic={bic:.10}");
            println!("bd={bd:.10}");
            Ok(())
        }
        Command::Perturb { network, seed, max_in_degree, out, log } => {
            let bn = load_network(&network)?;
            let (dag, record) =
                perturb_dag_with(bn.dag(), bn.size_class(), seed, PerturbationOptions { max_in_degree })?;
            emit(Some(&log), &record.to_csv(bn.dag()))?;
            let perturbed = DiscreteBayesNet::uniform(dag, bn.all_states().to_vec())?;
            eprintln!("{} arc edits", record.len());
            emit(out.as_deref(), &serialize_network(&perturbed))
        }
        Command::Metrics { reference, learned, data, ledger, kld: conditioning } => {
            let reference = load_network(&reference)?;
            let learned = load_network(&learned.to_string_lossy())?;
            if reference.all_states() != learned.all_states() || reference.dag().names() != learned.dag().names() {
                bail!("reference and learned networks have different variables");
            }
            let ds = load_with_ledger(&data, &ledger, &reference)?;
            let imputed = impute_with_model(&learned, &ds).data;
            let conditioning = match conditioning {
                KldArg::TrueParents => KldConditioning::TrueParents,
                KldArg::Posterior => KldConditioning::Posterior,
            };
            let p = pcr(&imputed, ds.ledger())?;
            let a = apd(&reference, &learned, &ds, ds.ledger())?;
            let k = kld(&reference, &learned, &ds, ds.ledger(), conditioning)?;
            println!("pcr={p:.10}");
            println!("apd={:.10}", a.value);
            println!("kld={:.10}", k.total());
            if a.skipped + k.skipped > 0 || k.infinite_terms > 0 {
                eprintln!(
                    "skipped rows: apd {}, kld {}; infinite kld terms {}",
                    a.skipped, k.skipped, k.infinite_terms
                );
            }
            Ok(())
        }
        Command::Recommend { size, balancing, severity, pattern } => {
            let size = match size.parse::<usize>() {
                Ok(n) => SizeClass::from_node_count(n),
                Err(_) => size.parse::<SizeClass>().map_err(anyhow::Error::msg)?,
            };
            let fair = pattern != "target" && Pattern::parse(&pattern, &[]).map_err(anyhow::Error::msg)?.is_fair();
            let balanced = matches!(balancing, BalancingArg::Balanced);
            println!("{}", recommend(size, balanced, severity, fair));
            Ok(())
        }
        Command::Simulate { .. } => unreachable!("handled in main"),
    }
}
