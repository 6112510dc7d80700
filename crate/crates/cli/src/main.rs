//! `downcode-lab`: sample secret datasets, anonymize them, run the
//! downcoding and PSO attacks, audit quasi-identifiers, and run seeded
//! experiment campaigns.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use downcode_core::attacks::{downcode_clustered, downcode_prefix, predicate_set_report, PredicateFile};
use downcode_core::audit::{audit, redaction_sensitivity, AuditDataset, RedactionMode};
use downcode_core::generators::{
    build_clustered_hierarchy, build_prefix_hierarchy, sample_clustered, sample_prefix, ClusteredParams, PrefixParams,
};
use downcode_core::harness::{run_experiment, DistributionConfig, ExperimentConfig, SCHEMA};
use downcode_core::io::{
    load_hierarchies, read_dataset, read_generalized, read_json, save_hierarchies, write_dataset, write_generalized,
    write_json,
};
use downcode_core::{
    anonymize, dataset_refines, generalizes_dataset, AnonymizerConfig, GeneralizedDataset, Hierarchies, Strategy,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "downcode-lab", version, about = "Minimal k-anonymization, downcoding and PSO attacks, QI audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a secret dataset from the clustered or prefix distribution.
    Sample(SampleArgs),
    /// Produce a minimal hierarchical k-anonymization.
    Anon(AnonArgs),
    /// Downcode a published dataset and emit the PSO predicates.
    Attack(AttackArgs),
    /// Effective-anonymity audit of a raw CSV.
    Audit(AuditArgs),
    /// Run a seeded campaign from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Clustered,
    Prefix,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Prefix failure budget; sets `T = ⌈N²/α⌉`.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Clustered only: use the `N`-dependent scale instead of the fixed
    /// desk geometry.
    #[arg(long)]
    scaled: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Secret dataset (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Hierarchy set for the sampled dimensions (JSON).
    #[arg(long)]
    hierarchy_out: PathBuf,
    /// Distribution parameters, as `attack --params` expects (JSON).
    #[arg(long)]
    params_out: Option<PathBuf>,
    /// Per-row latent provenance (JSON).
    #[arg(long)]
    provenance_out: Option<PathBuf>,
}

#[derive(Args)]
struct AnonArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    hierarchies: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = StrategyArg::TopThenMinimize)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum StrategyArg {
    TopThenMinimize,
    LcaPartitionThenMinimize,
    RandomPartitionThenMinimize,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::TopThenMinimize => Strategy::TopThenMinimize,
            StrategyArg::LcaPartitionThenMinimize => Strategy::LcaPartitionThenMinimize,
            StrategyArg::RandomPartitionThenMinimize => Strategy::RandomPartitionThenMinimize,
        }
    }
}

#[derive(Args)]
struct AttackArgs {
    /// Published generalized dataset (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Distribution parameters written by `sample --params-out`.
    #[arg(long)]
    params: PathBuf,
    /// Downcoded dataset (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Emitted predicates (JSON).
    #[arg(long)]
    predicates: Option<PathBuf>,
    /// Attack audit log and, with `--secret`, its evaluation (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Secret dataset for scoring; never shown to the adversary.
    #[arg(long)]
    secret: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    mc_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    input: PathBuf,
    /// Token marking a missing cell.
    #[arg(long, default_value = "")]
    missing: String,
    /// Quasi-identifier columns, e.g. `gender,yob` or `posts1..posts16`;
    /// repeatable.
    #[arg(long, required = true)]
    qi: Vec<String>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Also report which column subsets of the first QI keep this row
    /// unambiguously unique.
    #[arg(long)]
    redact_row: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn sample(a: SampleArgs) -> Result<ExitCode> {
    let (x, prov, h, params) = match a.family {
        Family::Clustered => {
            let p = if a.scaled {
                ClusteredParams::scaled(a.k, a.n, a.d)?
            } else {
                ClusteredParams::desk(a.k, a.n, a.d)?
            };
            let (x, prov) = sample_clustered(&p, a.seed)?;
            (x, prov, build_clustered_hierarchy(&p)?, DistributionConfig::Clustered(p))
        }
        Family::Prefix => {
            let p = PrefixParams::new(a.k, a.n, a.d, a.alpha)?;
            let (x, prov) = sample_prefix(&p, a.seed)?;
            (x, prov, build_prefix_hierarchy(p.spikes())?, DistributionConfig::Prefix(p))
        }
    };
    let mut out = create(&a.out)?;
    write_dataset(&x, &mut out)?;
    out.flush()?;
    save_hierarchies(&Hierarchies::uniform(Arc::new(h), a.d), &a.hierarchy_out)?;
    if let Some(path) = a.params_out {
        write_json(&path, &params)?;
    }
    if let Some(path) = a.provenance_out {
        write_json(&path, &prov)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn anon(a: AnonArgs) -> Result<ExitCode> {
    let x = read_dataset(open(&a.input)?)?;
    let hs = load_hierarchies(&a.hierarchies, Some(x.dims()))?;
    let y = anonymize(&x, &hs, &AnonymizerConfig::new(a.k, a.strategy.into(), a.seed)?)?;
    let mut out = create(&a.out)?;
    write_generalized(&y, &hs, &mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn attack(a: AttackArgs) -> Result<ExitCode> {
    let params: DistributionConfig = read_json(&a.params)?;
    let h = Arc::new(params.hierarchy()?);
    let hs = Hierarchies::uniform(h.clone(), params.d());
    let y: GeneralizedDataset = read_generalized(open(&a.input)?, &hs)?;
    let out = match &params {
        DistributionConfig::Clustered(p) => downcode_clustered(&y, p.k, &h, p)?,
        DistributionConfig::Prefix(_) => downcode_prefix(&y, &h)?,
    };
    let mut w = create(&a.out)?;
    write_generalized(&out.z, &hs, &mut w)?;
    w.flush()?;
    let psi = out.predicates();
    if let Some(path) = &a.predicates {
        let files: Vec<PredicateFile> = psi.iter().map(|p| p.to_file(&hs)).collect();
        write_json(path, &files)?;
    }
    let mut report = json!({
        "schema": SCHEMA,
        "audit": out.audit,
        "changed_rows": out.changed_rows,
        "predicates": psi.len(),
    });
    if let Some(secret) = &a.secret {
        let x = read_dataset(open(secret)?)?;
        let refinement = dataset_refines(&out.z, &y, &hs)?;
        let pso = predicate_set_report(&psi, &x, &hs, params.sampler(), a.mc_samples, a.seed)?;
        report["evaluation"] = json!({
            "refinement": refinement,
            "generalizes_secret": generalizes_dataset(&out.z, &x, &hs)?,
            "pso": pso,
        });
    }
    match &a.report {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn audit_cmd(a: AuditArgs) -> Result<ExitCode> {
    let y = AuditDataset::read_csv(open(&a.input)?, &a.missing)?;
    let qis = a.qi.iter().map(|s| y.parse_qi(s)).collect::<downcode_core::Result<Vec<_>>>()?;
    let table = audit(&y, &qis, a.k)?;
    let mut report = json!({ "schema": SCHEMA, "rows": y.len(), "table": table });
    if let Some(n) = a.redact_row {
        let res = redaction_sensitivity(&y, n, &qis[0], a.k, RedactionMode::Auto)?;
        report["redaction"] = json!({ "row": n, "qi": qis[0].name, "subsets": res });
    }
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let cfg: ExperimentConfig = read_json(&a.config)?;
    let report = run_experiment(&cfg, a.workers)?;
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    for c in &report.acceptance {
        let value = c.value.map_or("n/a".to_owned(), |v| format!("{v:.4}"));
        eprintln!(
            "{} {:?} = {value} (min {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.metric,
            c.min
        );
    }
    if report.aggregate.errors > 0 {
        eprintln!("{} trial(s) failed with errors", report.aggregate.errors);
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Anon(a) => anon(a),
        Command::Attack(a) => attack(a),
        Command::Audit(a) => audit_cmd(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
