//! Seeded Monte-Carlo campaigns: sample a secret dataset, anonymize it
//! minimally, attack the result, and score the attack against the secret.
//!
//! Trial `i` draws everything from stream `i` of the master seed, so a
//! report does not depend on how trials are scheduled across workers.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anonymizer::{anonymize, AnonymizerConfig, Strategy};
use crate::attacks::{
    downcode_clustered, downcode_prefix, predicate_set_report, prefix_dims_at, AuditEntry, DowncodeOutput, PsoReport,
    RecordSampler,
};
use crate::error::{Error, Result};
use crate::generators::{
    build_clustered_hierarchy, build_prefix_hierarchy, classify_clusters, home_cluster, is_collision_free,
    sample_clustered_with, sample_prefix_with, stream_rng, ClusteredParams, PrefixNodes, PrefixParams,
};
use crate::hierarchy::{GeneralizedValue, Hierarchy};
use crate::model::{
    align_within_classes, dataset_refines, refines, Dataset, DatasetRefinementReport, GeneralizedDataset,
    GeneralizedRecord, Hierarchies, RefinementRelation,
};
use crate::stats::{wilson, Proportion};

pub const SCHEMA: &str = "downcode-lab/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    /// Clustered downcoding.
    Thm1,
    /// Prefix downcoding.
    Thm2,
    /// Clustered compound PSO.
    Thm3,
    /// Prefix compound PSO.
    Thm4,
}

impl Theorem {
    pub fn is_pso(self) -> bool {
        matches!(self, Theorem::Thm3 | Theorem::Thm4)
    }

    fn is_clustered(self) -> bool {
        matches!(self, Theorem::Thm1 | Theorem::Thm3)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionConfig {
    Clustered(ClusteredParams),
    Prefix(PrefixParams),
}

impl DistributionConfig {
    pub fn k(&self) -> usize {
        match self {
            DistributionConfig::Clustered(p) => p.k,
            DistributionConfig::Prefix(p) => p.k,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DistributionConfig::Clustered(p) => p.n,
            DistributionConfig::Prefix(p) => p.n,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            DistributionConfig::Clustered(p) => p.d,
            DistributionConfig::Prefix(p) => p.d,
        }
    }

    pub fn hierarchy(&self) -> Result<Hierarchy> {
        match self {
            DistributionConfig::Clustered(p) => build_clustered_hierarchy(p),
            DistributionConfig::Prefix(p) => build_prefix_hierarchy(p.spikes()),
        }
    }

    pub fn sampler(&self) -> &dyn RecordSampler {
        match self {
            DistributionConfig::Clustered(p) => p,
            DistributionConfig::Prefix(p) => p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub delta_n: usize,
    pub delta_d: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Daleth,
    DalethCollisionFree,
    Validity,
    DeltaD,
    MeanDowncoded,
    Isolation,
    Disjoint,
    PsoSuccess,
    FullPsi,
    Claim1,
    Claim2,
    Claim3,
}

/// A pass/fail threshold on an aggregate metric; `min` is compared with
/// the point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCheck {
    pub metric: Metric,
    pub min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theorem: Theorem,
    pub distribution: DistributionConfig,
    pub strategy: Strategy,
    pub trials: usize,
    pub thresholds: Thresholds,
    /// Fresh draws per Monte-Carlo weight estimate.
    #[serde(default)]
    pub mc_samples: u64,
    /// How many predicates per trial get a Monte-Carlo estimate.
    #[serde(default)]
    pub mc_spot_checks: usize,
    /// Largest predicate weight that still counts as singling out.
    #[serde(default = "default_max_weight")]
    pub max_weight: f64,
    pub seed: u64,
    #[serde(default)]
    pub acceptance: Vec<AcceptanceCheck>,
}

fn default_max_weight() -> f64 {
    1e-3
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        match (&self.distribution, self.theorem.is_clustered()) {
            (DistributionConfig::Clustered(p), true) => p.validate()?,
            (DistributionConfig::Prefix(p), false) => p.validate()?,
            _ => return bad(format!("{:?} needs the matching distribution", self.theorem)),
        }
        if self.thresholds.delta_n > self.distribution.n() || self.thresholds.delta_d > self.distribution.d() {
            return bad("thresholds exceed (N, D)".into());
        }
        if !(0.0..=1.0).contains(&self.max_weight) {
            return bad("max_weight must be a probability".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub mode: StructureKind,
    /// Cells checked and cells of the expected shape (claim 2).
    pub cells: usize,
    pub conforming: usize,
    /// Clusters with exactly `k` members (claim 1).
    pub size_k_clusters: usize,
    /// Size-`k` clusters whose published rows leave `H_t^D` (claim 1).
    pub non_confined: usize,
    /// Every record lies in some `H_t^D` (claim 1's premise).
    pub premise: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Claim1,
    Claim2,
}

pub enum StructureMode<'a> {
    /// Minimal outputs keep every size-`k` cluster but at most one inside
    /// its own cell.
    Claim1(&'a ClusteredParams),
    /// Prefix outputs publish `[0, class max]` in every cell.
    Claim2,
}

fn classes(y: &GeneralizedDataset) -> Vec<Vec<usize>> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut first: std::collections::HashMap<&GeneralizedRecord, usize> = std::collections::HashMap::new();
    for (n, r) in y.rows().iter().enumerate() {
        let f = *first.entry(r).or_insert(n);
        map.entry(f).or_default().push(n);
    }
    map.into_values().collect()
}

pub fn verify_structure(y: &GeneralizedDataset, x: &Dataset, h: &Hierarchy, mode: StructureMode) -> Result<StructureReport> {
    if y.len() != x.len() || y.dims() != x.dims() {
        return Err(Error::ShapeMismatch("y and x must share N and D".into()));
    }
    let mut report = StructureReport {
        mode: StructureKind::Claim2,
        cells: 0,
        conforming: 0,
        size_k_clusters: 0,
        non_confined: 0,
        premise: true,
    };
    match mode {
        StructureMode::Claim2 => {
            let nodes = PrefixNodes::locate(h)?;
            for class in classes(y) {
                for d in 0..y.dims() {
                    let vals: Vec<u64> = class.iter().map(|&n| x.row(n).0[d] as u64).collect();
                    let max = *vals.iter().max().expect("classes are nonempty");
                    let cell = y.row(class[0]).0[d];
                    let ok = if vals.iter().all(|v| *v == max) {
                        cell == GeneralizedValue::exact(max as f64)
                    } else {
                        cell == GeneralizedValue::Node(nodes.node(max))
                    };
                    report.cells += 1;
                    report.conforming += usize::from(ok);
                }
            }
        }
        StructureMode::Claim1(p) => {
            report.mode = StructureKind::Claim1;
            let nodes = crate::generators::ClusteredNodes::locate(h, p)?;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); p.clusters];
            for (n, row) in x.rows().iter().enumerate() {
                match home_cluster(row, p) {
                    Some(t) => members[t - 1].push(n),
                    None => report.premise = false,
                }
            }
            for (i, rows) in members.iter().enumerate() {
                if rows.len() != p.k {
                    continue;
                }
                report.size_k_clusters += 1;
                let bounds = p.bounds(i + 1);
                let cell = nodes.cell[i];
                let confined = rows.iter().all(|&n| {
                    y.row(n).0.iter().all(|c| match c {
                        GeneralizedValue::Node(id) => h.is_ancestor_or_self(cell, *id),
                        GeneralizedValue::Exact(v) => bounds.in_cell(*v),
                    })
                });
                report.non_confined += usize::from(!confined);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_free: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_good_clusters: Option<usize>,
    pub audit: Vec<AuditEntry>,
    pub downcoded: usize,
    pub refinement: Option<DatasetRefinementReport>,
    /// The secret records fit the attack output (after matching rows within
    /// each published class).
    pub valid: bool,
    /// Valid and meets `(Δ_N, Δ_D)`.
    pub success: bool,
    /// Every changed row is refined on every coordinate that was not
    /// already an exact value.
    pub refinable_refined: bool,
    pub structure: Option<StructureReport>,
    /// `|D^t|` of each emitted prefix predicate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefix_dt: Vec<usize>,
    pub pso: Option<PsoReport>,
    /// Every predicate isolates one row, they are pairwise disjoint, and
    /// every weight is at most `max_weight`.
    pub pso_success: bool,
}

impl TrialRecord {
    fn failed(trial: usize, err: Error) -> Self {
        TrialRecord {
            trial,
            error: Some(err.to_string()),
            collision_free: None,
            x_good_clusters: None,
            audit: Vec::new(),
            downcoded: 0,
            refinement: None,
            valid: false,
            success: false,
            refinable_refined: false,
            structure: None,
            prefix_dt: Vec::new(),
            pso: None,
            pso_success: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// `ℸ(Δ_N, Δ_D)`: trials whose attack is valid and meets the thresholds.
    pub daleth: Proportion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub daleth_collision_free: Option<Proportion>,
    /// Among trials that changed something: the change is valid.
    pub validity: Proportion,
    /// Among trials that changed something: every changed row has `Δ_D`
    /// refined coordinates.
    pub delta_d: Proportion,
    pub refinable_refined: Proportion,
    pub mean_downcoded: f64,
    /// Among emitted predicates: isolates exactly one row.
    pub isolation: Proportion,
    pub disjoint: Proportion,
    pub pso_success: Proportion,
    /// PSO success with one predicate per row (`|Ψ| = N`).
    pub full_psi: Proportion,
    /// Distribution of `|Ψ|` over trials.
    pub psi_sizes: BTreeMap<usize, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim1: Option<Proportion>,
    /// Conforming cells over collision-free trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim2: Option<Proportion>,
    /// Emitted prefix predicates with `|D^t| ≥ D/(4ke)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim3: Option<Proportion>,
    pub errors: usize,
}

impl Aggregate {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        let p = |x: &Proportion| x.estimate;
        Some(match m {
            Metric::Daleth => p(&self.daleth),
            Metric::DalethCollisionFree => p(self.daleth_collision_free.as_ref()?),
            Metric::Validity => p(&self.validity),
            Metric::DeltaD => p(&self.delta_d),
            Metric::MeanDowncoded => self.mean_downcoded,
            Metric::Isolation => p(&self.isolation),
            Metric::Disjoint => p(&self.disjoint),
            Metric::PsoSuccess => p(&self.pso_success),
            Metric::FullPsi => p(&self.full_psi),
            Metric::Claim1 => p(self.claim1.as_ref()?),
            Metric::Claim2 => p(self.claim2.as_ref()?),
            Metric::Claim3 => p(self.claim3.as_ref()?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub metric: Metric,
    pub min: f64,
    pub value: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub aggregate: Aggregate,
    pub acceptance: Vec<CheckOutcome>,
    pub passed: bool,
    pub trials: Vec<TrialRecord>,
}

struct Setup {
    cfg: ExperimentConfig,
    hs: Hierarchies,
}

fn refinable_refined(z: &GeneralizedDataset, y: &GeneralizedDataset, hs: &Hierarchies) -> Result<bool> {
    for (a, b) in z.rows().iter().zip(y.rows()) {
        if let RefinementRelation::Strict(dims) = refines(a, b, hs)? {
            let coarse = b.0.iter().filter(|c| c.as_node().is_some()).count();
            if dims.len() != coarse {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn run_trial(setup: &Setup, trial: usize) -> Result<TrialRecord> {
    let cfg = &setup.cfg;
    let hs = &setup.hs;
    let h = hs.get(0);
    let mut rng = stream_rng(cfg.seed, trial as u64);
    let (x, prov) = match &cfg.distribution {
        DistributionConfig::Clustered(p) => sample_clustered_with(p, &mut rng)?,
        DistributionConfig::Prefix(p) => sample_prefix_with(p, &mut rng)?,
    };
    let anon_seed = rng.next_u64();
    let mc_seed = rng.next_u64();
    let k = cfg.distribution.k();
    let y = anonymize(&x, hs, &AnonymizerConfig::new(k, cfg.strategy, anon_seed)?)?;

    let (out, collision_free, x_good, structure): (DowncodeOutput, _, _, _) = match &cfg.distribution {
        DistributionConfig::Clustered(p) => {
            let diag = classify_clusters(&x, &prov, p)?;
            let s = verify_structure(&y, &x, h, StructureMode::Claim1(p))?;
            (downcode_clustered(&y, k, h, p)?, None, Some(diag.x_good_count()), s)
        }
        DistributionConfig::Prefix(_) => {
            let cf = is_collision_free(&prov)?;
            let s = verify_structure(&y, &x, h, StructureMode::Claim2)?;
            (downcode_prefix(&y, h)?, Some(cf), None, s)
        }
    };

    let refinement = dataset_refines(&out.z, &y, hs)?;
    let valid = refinement.holds && align_within_classes(&out.z, &x, &y, hs)?.is_some();
    let success =
        valid && refinement.delta_n >= cfg.thresholds.delta_n && refinement.min_delta_d >= cfg.thresholds.delta_d;

    let psi = out.predicates();
    let prefix_dt = match &cfg.distribution {
        DistributionConfig::Prefix(_) => out
            .downcoded()
            .map(|e| prefix_dims_at(y.row(e.row.expect("downcoded rows are recorded")), h, e.t))
            .collect::<Result<_>>()?,
        DistributionConfig::Clustered(_) => Vec::new(),
    };
    let sampler = cfg.distribution.sampler();
    let mut pso = predicate_set_report(&psi, &x, hs, sampler, 0, mc_seed)?;
    for (i, stats) in pso.predicates.iter_mut().enumerate().take(cfg.mc_spot_checks) {
        if cfg.mc_samples > 0 {
            stats.hits = sampler.count_hits(&psi[i], hs, cfg.mc_samples, &mut stream_rng(mc_seed, i as u64));
            stats.samples = cfg.mc_samples;
        }
    }
    let light = pso.predicates.iter().all(|s| {
        let w = if s.samples > 0 {
            s.hits as f64 / s.samples as f64
        } else {
            s.structural_weight
        };
        w <= cfg.max_weight
    });
    let pso_success = !psi.is_empty() && pso.all_isolate() && pso.pairwise_disjoint && light;

    Ok(TrialRecord {
        trial,
        error: None,
        collision_free,
        x_good_clusters: x_good,
        downcoded: out.downcoded().count(),
        audit: out.audit.clone(),
        refinable_refined: refinable_refined(&out.z, &y, hs)?,
        refinement: Some(refinement),
        valid,
        success,
        structure: Some(structure),
        prefix_dt,
        pso: Some(pso),
        pso_success,
    })
}

fn aggregate(cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Aggregate {
    let count = |f: &dyn Fn(&TrialRecord) -> bool| trials.iter().filter(|t| f(t)).count() as u64;
    let total = trials.len() as u64;
    let changed = |t: &TrialRecord| t.refinement.as_ref().is_some_and(|r| r.delta_n > 0);
    let n_changed = count(&changed);
    let daleth_collision_free = matches!(cfg.distribution, DistributionConfig::Prefix(_)).then(|| {
        let cf = |t: &TrialRecord| t.collision_free == Some(true);
        wilson(count(&|t| cf(t) && t.success), count(&cf))
    });
    let preds: Vec<_> = trials
        .iter()
        .filter_map(|t| t.pso.as_ref())
        .flat_map(|p| p.predicates.iter())
        .collect();
    let mut psi_sizes = BTreeMap::new();
    for t in trials {
        *psi_sizes.entry(t.pso.as_ref().map_or(0, |p| p.size)).or_default() += 1;
    }
    let structures: Vec<&StructureReport> = trials.iter().filter_map(|t| t.structure.as_ref()).collect();
    let (claim1, claim2, claim3) = match &cfg.distribution {
        DistributionConfig::Clustered(_) => {
            let ok = structures.iter().filter(|s| s.non_confined <= 1).count() as u64;
            (Some(wilson(ok, total)), None, None)
        }
        DistributionConfig::Prefix(p) => {
            let cf: Vec<&StructureReport> = trials
                .iter()
                .filter(|t| t.collision_free == Some(true))
                .filter_map(|t| t.structure.as_ref())
                .collect();
            let cells: usize = cf.iter().map(|s| s.cells).sum();
            let good: usize = cf.iter().map(|s| s.conforming).sum();
            let bound = p.d as f64 / (4.0 * p.k as f64 * std::f64::consts::E);
            let dts: Vec<usize> = trials.iter().flat_map(|t| t.prefix_dt.iter().copied()).collect();
            let above = dts.iter().filter(|v| **v as f64 >= bound).count();
            (
                None,
                Some(wilson(good as u64, cells as u64)),
                Some(wilson(above as u64, dts.len() as u64)),
            )
        }
    };
    Aggregate {
        daleth: wilson(count(&|t| t.success), total),
        daleth_collision_free,
        validity: wilson(count(&|t| changed(t) && t.valid), n_changed),
        delta_d: wilson(
            count(&|t| {
                changed(t)
                    && t.refinement
                        .as_ref()
                        .is_some_and(|r| r.min_delta_d >= cfg.thresholds.delta_d)
            }),
            n_changed,
        ),
        refinable_refined: wilson(count(&|t| changed(t) && t.refinable_refined), n_changed),
        mean_downcoded: trials.iter().map(|t| t.downcoded as f64).sum::<f64>() / total.max(1) as f64,
        isolation: wilson(
            preds.iter().filter(|p| p.isolation == 1).count() as u64,
            preds.len() as u64,
        ),
        disjoint: wilson(count(&|t| t.pso.as_ref().is_some_and(|p| p.pairwise_disjoint)), total),
        pso_success: wilson(count(&|t| t.pso_success), total),
        full_psi: wilson(
            count(&|t| t.pso_success && t.pso.as_ref().is_some_and(|p| p.size == cfg.distribution.n())),
            total,
        ),
        psi_sizes,
        claim1,
        claim2,
        claim3,
        errors: trials.iter().filter(|t| t.error.is_some()).count(),
    }
}

/// Runs every trial on a pool of `workers` threads (all cores if `None`).
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let h = Arc::new(cfg.distribution.hierarchy()?);
    let setup = Setup {
        cfg: cfg.clone(),
        hs: Hierarchies::uniform(h, cfg.distribution.d()),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let trials: Vec<TrialRecord> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(&setup, i).unwrap_or_else(|e| TrialRecord::failed(i, e)))
            .collect()
    });
    let aggregate = aggregate(cfg, &trials);
    let acceptance: Vec<CheckOutcome> = cfg
        .acceptance
        .iter()
        .map(|c| {
            let value = aggregate.metric(c.metric);
            CheckOutcome {
                metric: c.metric,
                min: c.min,
                value,
                passed: value.is_some_and(|v| v >= c.min),
            }
        })
        .collect();
    Ok(ExperimentReport {
        schema: SCHEMA.to_owned(),
        config: cfg.clone(),
        passed: acceptance.iter().all(|c| c.passed),
        aggregate,
        acceptance,
        trials,
    })
}

/// Downcoding campaign (clustered or prefix).
pub fn run_downcoding_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    if cfg.theorem.is_pso() {
        return Err(Error::Config("downcoding campaigns take thm1 or thm2".into()));
    }
    run_experiment(cfg, workers)
}

/// Compound-PSO campaign (clustered or prefix).
pub fn run_pso_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    if !cfg.theorem.is_pso() {
        return Err(Error::Config("PSO campaigns take thm3 or thm4".into()));
    }
    run_experiment(cfg, workers)
}
