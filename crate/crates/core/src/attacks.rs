//! Downcoding adversaries against minimal hierarchical k-anonymizers and
//! the predicate singling-out attacks derived from them.
//!
//! Adversaries see only the published dataset, `k`, the hierarchy and the
//! distribution parameters. The secret records appear only in the
//! evaluation helpers ([`evaluate_predicate`], [`predicate_set_report`]).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{stream_rng, ClusteredNodes, ClusteredParams, PrefixNodes, PrefixParams};
use crate::hierarchy::{GeneralizedValue, Hierarchy, ValueSet};
use crate::model::{Dataset, GeneralizedDataset, GeneralizedRecord, Hierarchies, Record};
use crate::stats::normal_mass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Downcoded,
    /// The group does not have exactly `k` rows.
    PassthroughSize,
    /// Too few or too many coarse coordinates.
    PassthroughBalance,
    /// A cell outside the expected shape would not be refined by the
    /// rewrite, so the group is left alone.
    PassthroughShape,
    /// Rows carrying the prefix node disagree elsewhere.
    SkippedNonuniform,
    /// Every row carrying the prefix node was already rewritten.
    SkippedNoRow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Cluster index or spike value.
    pub t: u64,
    pub action: Action,
    /// Row that received the distinguished record `z^t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DowncodeOutput {
    pub z: GeneralizedDataset,
    pub changed_rows: Vec<usize>,
    pub audit: Vec<AuditEntry>,
}

impl DowncodeOutput {
    pub fn downcoded(&self) -> impl Iterator<Item = &AuditEntry> {
        self.audit.iter().filter(|e| e.action == Action::Downcoded)
    }

    /// The `matches(z^t)` predicates of every rewritten group.
    pub fn predicates(&self) -> Vec<Predicate> {
        self.downcoded()
            .map(|e| Predicate {
                label: e.t,
                cells: self.z.row(e.row.expect("downcoded entries carry a row")).clone(),
            })
            .collect()
    }
}

/// `ψ(x) = 1` iff `x ∈ cells`.
#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub label: u64,
    pub cells: GeneralizedRecord,
}

/// On-disk predicate: one `v:` / `n:` descriptor per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateFile {
    pub label: u64,
    pub cells: Vec<String>,
}

impl Predicate {
    pub fn to_file(&self, hs: &Hierarchies) -> PredicateFile {
        PredicateFile {
            label: self.label,
            cells: self.cells.0.iter().enumerate().map(|(d, c)| hs.get(d).format_cell(c)).collect(),
        }
    }

    pub fn from_file(file: &PredicateFile, hs: &Hierarchies) -> Result<Self> {
        hs.check_dims(file.cells.len())?;
        let cells = file
            .cells
            .iter()
            .enumerate()
            .map(|(d, s)| hs.get(d).parse_cell(s))
            .collect::<Result<_>>()?;
        Ok(Predicate {
            label: file.label,
            cells: GeneralizedRecord(cells),
        })
    }
}

fn check_cells(y: &GeneralizedDataset, h: &Hierarchy) -> Result<()> {
    for row in y.rows() {
        for c in &row.0 {
            h.validate_cell(c)?;
        }
    }
    Ok(())
}

fn finish(y: &GeneralizedDataset, rows: Vec<GeneralizedRecord>, audit: Vec<AuditEntry>) -> Result<DowncodeOutput> {
    let changed_rows = rows
        .iter()
        .zip(y.rows())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(n, _)| n)
        .collect();
    Ok(DowncodeOutput {
        z: GeneralizedDataset::new(y.dims(), rows)?,
        changed_rows,
        audit,
    })
}

/// Rewrites every size-`k` cluster group whose coarse coordinates number
/// about half of `D`: `k - 1` rows become all-`sml` and one row becomes
/// `big` on exactly the coarse coordinates.
pub fn downcode_clustered(y: &GeneralizedDataset, k: usize, h: &Hierarchy, p: &ClusteredParams) -> Result<DowncodeOutput> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    p.validate()?;
    let nodes = ClusteredNodes::locate(h, p)?;
    check_cells(y, h)?;
    let dims = y.dims();
    let mut rows = y.rows().to_vec();
    let mut audit = Vec::new();
    for t in 1..=p.clusters {
        let bounds = p.bounds(t);
        let cell = nodes.cell[t - 1];
        let sml = GeneralizedValue::Node(nodes.sml[t - 1]);
        let big = GeneralizedValue::Node(nodes.big[t - 1]);
        let inside = |c: &GeneralizedValue| match c {
            GeneralizedValue::Node(n) => h.is_ancestor_or_self(cell, *n),
            GeneralizedValue::Exact(v) => bounds.in_cell(*v),
        };
        let group: Vec<usize> = (0..y.len()).filter(|&n| y.row(n).0.iter().any(inside)).collect();
        if group.is_empty() {
            continue;
        }
        let entry = |action, row| AuditEntry { t: t as u64, action, row };
        if group.len() != k {
            audit.push(entry(Action::PassthroughSize, None));
            continue;
        }
        let yt = y.row(group[0]);
        if group.iter().any(|&n| y.row(n) != yt) {
            return Err(Error::Precondition(format!(
                "cluster {t} has {k} rows that are not identical; input is not k-anonymous"
            )));
        }
        let coarse = GeneralizedValue::Node(cell);
        let big_dims: Vec<bool> = yt.0.iter().map(|c| *c == coarse).collect();
        let b = big_dims.iter().filter(|x| **x).count() as f64;
        if (b - dims as f64 / 2.0).abs() > dims as f64 / 8.0 {
            audit.push(entry(Action::PassthroughBalance, None));
            continue;
        }
        let root = GeneralizedValue::Node(nodes.root);
        if yt
            .0
            .iter()
            .zip(&big_dims)
            .any(|(c, is_big)| !is_big && *c != sml && *c != root)
        {
            audit.push(entry(Action::PassthroughShape, None));
            continue;
        }
        let all_sml = GeneralizedRecord(vec![sml; dims]);
        let zt = GeneralizedRecord(big_dims.iter().map(|is_big| if *is_big { big } else { sml }).collect());
        rows[group[0]] = zt;
        for &n in &group[1..] {
            rows[n] = all_sml.clone();
        }
        audit.push(entry(Action::Downcoded, Some(group[0])));
    }
    finish(y, rows, audit)
}

/// Largest value a cell admits in the prefix hierarchy.
fn upper_endpoint(c: &GeneralizedValue, nodes: &PrefixNodes) -> u64 {
    match c {
        GeneralizedValue::Node(n) => nodes.upper(*n),
        GeneralizedValue::Exact(v) => *v as u64,
    }
}

/// For each spike value `t` present as a node `[0,t]`, rewrites one row
/// carrying it: exact 0 below `t`, exact `t` on the `[0,t]` coordinates,
/// `[0,t]` above. Exact cells are already finest and stay as published.
pub fn downcode_prefix(y: &GeneralizedDataset, h: &Hierarchy) -> Result<DowncodeOutput> {
    let nodes = PrefixNodes::locate(h)?;
    check_cells(y, h)?;
    let mut rows = y.rows().to_vec();
    let mut replaced = vec![false; y.len()];
    let mut audit = Vec::new();
    let mut present: Vec<u64> = y
        .rows()
        .iter()
        .flat_map(|r| r.0.iter().filter_map(|c| c.as_node()))
        .map(|n| nodes.upper(n))
        .collect();
    present.sort_unstable();
    present.dedup();
    for t in present {
        let node = GeneralizedValue::Node(nodes.node(t));
        let carriers: Vec<usize> = (0..y.len()).filter(|&n| y.row(n).0.contains(&node)).collect();
        let yt = y.row(carriers[0]);
        if carriers.iter().any(|&n| y.row(n) != yt) {
            audit.push(AuditEntry {
                t,
                action: Action::SkippedNonuniform,
                row: None,
            });
            continue;
        }
        let Some(&target) = carriers.iter().find(|&&n| !replaced[n]) else {
            audit.push(AuditEntry {
                t,
                action: Action::SkippedNoRow,
                row: None,
            });
            continue;
        };
        let zt = GeneralizedRecord(
            yt.0.iter()
                .map(|c| {
                    if c.as_exact().is_some() {
                        return *c;
                    }
                    match upper_endpoint(c, &nodes).cmp(&t) {
                        std::cmp::Ordering::Less => GeneralizedValue::exact(0.0),
                        std::cmp::Ordering::Equal => GeneralizedValue::exact(t as f64),
                        std::cmp::Ordering::Greater => node,
                    }
                })
                .collect(),
        );
        rows[target] = zt;
        replaced[target] = true;
        audit.push(AuditEntry {
            t,
            action: Action::Downcoded,
            row: Some(target),
        });
    }
    finish(y, rows, audit)
}

/// The `[0,t]` coordinates of a prefix record: `D^t`.
pub fn prefix_dims_at(y: &GeneralizedRecord, h: &Hierarchy, t: u64) -> Result<usize> {
    let nodes = PrefixNodes::locate(h)?;
    let node = GeneralizedValue::Node(nodes.node(t));
    Ok(y.0.iter().filter(|c| **c == node).count())
}

pub fn pso_clustered(y: &GeneralizedDataset, k: usize, h: &Hierarchy, p: &ClusteredParams) -> Result<Vec<Predicate>> {
    Ok(downcode_clustered(y, k, h, p)?.predicates())
}

pub fn pso_prefix(y: &GeneralizedDataset, h: &Hierarchy) -> Result<Vec<Predicate>> {
    Ok(downcode_prefix(y, h)?.predicates())
}

pub fn evaluate_predicate(psi: &Predicate, x: &Record, hs: &Hierarchies) -> Result<bool> {
    if psi.cells.dims() != x.dims() {
        return Err(Error::DimensionMismatch {
            expected: psi.cells.dims(),
            found: x.dims(),
        });
    }
    hs.check_dims(x.dims())?;
    Ok(hs.record_in(x, &psi.cells))
}

/// A distribution that predicates can be weighed against.
pub trait RecordSampler: Sync {
    /// Exact `P_{x ~ U}[ψ(x) = 1]`.
    fn closed_form_weight(&self, psi: &Predicate, hs: &Hierarchies) -> f64;

    /// Number of `samples` fresh draws that satisfy `ψ`.
    fn count_hits(&self, psi: &Predicate, hs: &Hierarchies, samples: u64, rng: &mut dyn rand::RngCore) -> u64;
}

fn cell_mass(c: &GeneralizedValue, h: &Hierarchy, mean: f64, sd: f64) -> f64 {
    match c {
        GeneralizedValue::Exact(_) => 0.0,
        GeneralizedValue::Node(n) => match h.set(*n) {
            ValueSet::Intervals(pieces) => pieces.iter().map(|[lo, hi]| normal_mass(mean, sd, *lo, *hi)).sum(),
            ValueSet::Values(_) => 0.0,
        },
    }
}

impl RecordSampler for ClusteredParams {
    fn closed_form_weight(&self, psi: &Predicate, hs: &Hierarchies) -> f64 {
        let mut total = 0.0;
        for t in 1..=self.clusters {
            for (p_size, sd) in [(1.0 - self.p_big, self.sigma_sml), (self.p_big, self.sigma_big)] {
                let prod: f64 = psi
                    .cells
                    .0
                    .iter()
                    .enumerate()
                    .map(|(d, c)| cell_mass(c, hs.get(d), self.center(t), sd))
                    .product();
                total += p_size * prod / self.clusters as f64;
            }
        }
        total
    }

    fn count_hits(&self, psi: &Predicate, hs: &Hierarchies, samples: u64, rng: &mut dyn rand::RngCore) -> u64 {
        let (lo, hi) = self.support();
        let mut hits = 0;
        for _ in 0..samples {
            let big = rng.random_bool(self.p_big);
            let t = rng.random_range(1..=self.clusters);
            let sd = if big { self.sigma_big } else { self.sigma_sml };
            let normal = rand_distr::Normal::new(self.center(t), sd).expect("validated parameters");
            // coordinates are drawn lazily; the first miss ends the draw
            let hit = psi.cells.0.iter().enumerate().all(|(d, c)| {
                let v = loop {
                    let v = rand_distr::Distribution::sample(&normal, rng);
                    if lo <= v && v < hi {
                        break v;
                    }
                };
                hs.get(d).cell_contains(c, v)
            });
            hits += u64::from(hit);
        }
        hits
    }
}

impl RecordSampler for PrefixParams {
    fn closed_form_weight(&self, psi: &Predicate, hs: &Hierarchies) -> f64 {
        let t_max = self.spikes();
        let p = self.spike_probability();
        let mut total = 0.0;
        for s in 1..=t_max {
            let prod: f64 = psi
                .cells
                .0
                .iter()
                .enumerate()
                .map(|(d, c)| {
                    let h = hs.get(d);
                    let zero = if h.cell_contains(c, 0.0) { 1.0 - p } else { 0.0 };
                    let spike = if h.cell_contains(c, s as f64) { p } else { 0.0 };
                    zero + spike
                })
                .product();
            total += prod;
        }
        total / t_max as f64
    }

    fn count_hits(&self, psi: &Predicate, hs: &Hierarchies, samples: u64, rng: &mut dyn rand::RngCore) -> u64 {
        let t_max = self.spikes();
        let p = self.spike_probability();
        let mut hits = 0;
        for _ in 0..samples {
            let t = rng.random_range(1..=t_max);
            let hit = psi.cells.0.iter().enumerate().all(|(d, c)| {
                let v = if rng.random_bool(p) { t as f64 } else { 0.0 };
                hs.get(d).cell_contains(c, v)
            });
            hits += u64::from(hit);
        }
        hits
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateStats {
    pub label: u64,
    /// Rows of the secret dataset satisfying the predicate.
    pub isolation: usize,
    pub structural_weight: f64,
    pub hits: u64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoReport {
    pub predicates: Vec<PredicateStats>,
    pub pairwise_disjoint: bool,
    /// `|Ψ|`.
    pub size: usize,
}

impl PsoReport {
    pub fn all_isolate(&self) -> bool {
        self.predicates.iter().all(|p| p.isolation == 1)
    }
}

/// Whether every pair of predicates is disjoint in some coordinate.
pub fn pairwise_disjoint(psi: &[Predicate], hs: &Hierarchies) -> bool {
    psi.iter()
        .enumerate()
        .all(|(i, a)| psi[i + 1..].iter().all(|b| !hs.records_intersect(&a.cells, &b.cells)))
}

/// Isolation counts against `x`, pairwise disjointness, and closed-form and
/// Monte-Carlo weights under `sampler`. Predicate `i` draws from stream `i`
/// of `seed`.
pub fn predicate_set_report(
    psi: &[Predicate],
    x: &Dataset,
    hs: &Hierarchies,
    sampler: &dyn RecordSampler,
    mc_samples: u64,
    seed: u64,
) -> Result<PsoReport> {
    hs.check_dims(x.dims())?;
    if let Some(bad) = psi.iter().find(|p| p.cells.dims() != x.dims()) {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            found: bad.cells.dims(),
        });
    }
    let predicates = psi
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let isolation = x.rows().iter().filter(|r| hs.record_in(r, &p.cells)).count();
            let hits = if mc_samples == 0 {
                0
            } else {
                sampler.count_hits(p, hs, mc_samples, &mut stream_rng(seed, i as u64))
            };
            PredicateStats {
                label: p.label,
                isolation,
                structural_weight: sampler.closed_form_weight(p, hs),
                hits,
                samples: mc_samples,
            }
        })
        .collect();
    Ok(PsoReport {
        predicates,
        pairwise_disjoint: pairwise_disjoint(psi, hs),
        size: psi.len(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::generators::{build_clustered_hierarchy, build_prefix_hierarchy};
    use crate::model::dataset_refines;

    fn prefix_toy() -> (Hierarchies, Dataset, GeneralizedDataset) {
        let h = Arc::new(build_prefix_hierarchy(5).unwrap());
        let n = |t| GeneralizedValue::Node(h.node_by_label(&format!("[0,{t}]")).unwrap());
        let x = Dataset::from_rows(vec![vec![0.0, 3.0], vec![5.0, 0.0]]).unwrap();
        let y = GeneralizedDataset::new(2, vec![GeneralizedRecord(vec![n(5), n(3)]); 2]).unwrap();
        (Hierarchies::uniform(h, 2), x, y)
    }

    #[test]
    fn prefix_toy_downcoding() {
        let (hs, _, y) = prefix_toy();
        let h = hs.get(0);
        let out = downcode_prefix(&y, h).unwrap();
        let e = GeneralizedValue::exact;
        let n3 = GeneralizedValue::Node(h.node_by_label("[0,3]").unwrap());
        assert_eq!(out.z.row(0), &GeneralizedRecord(vec![n3, e(3.0)]));
        assert_eq!(out.z.row(1), &GeneralizedRecord(vec![e(5.0), e(0.0)]));
        assert_eq!(out.changed_rows, vec![0, 1]);
        let rep = dataset_refines(&out.z, &y, &hs).unwrap();
        assert!(rep.holds);
        assert_eq!((rep.delta_n, rep.min_delta_d), (2, 2));
        assert_eq!(prefix_dims_at(y.row(0), h, 3).unwrap(), 1);
    }

    #[test]
    fn prefix_all_zero_is_untouched() {
        let h = build_prefix_hierarchy(5).unwrap();
        let y = GeneralizedDataset::new(2, vec![GeneralizedRecord(vec![GeneralizedValue::exact(0.0); 2]); 3]).unwrap();
        let out = downcode_prefix(&y, &h).unwrap();
        assert_eq!(out.z, y);
        assert!(out.audit.is_empty());
    }

    #[test]
    fn prefix_nonuniform_carriers_are_skipped() {
        let h = build_prefix_hierarchy(5).unwrap();
        let n = |t| GeneralizedValue::Node(h.node_by_label(&format!("[0,{t}]")).unwrap());
        let y = GeneralizedDataset::new(
            2,
            vec![
                GeneralizedRecord(vec![n(2), n(4)]),
                GeneralizedRecord(vec![n(2), n(5)]),
            ],
        )
        .unwrap();
        let out = downcode_prefix(&y, &h).unwrap();
        assert_eq!(out.audit[0].action, Action::SkippedNonuniform);
        assert!(dataset_refines(&out.z, &y, &Hierarchies::uniform(Arc::new(h), 2)).unwrap().holds);
    }

    #[test]
    fn prefix_rejects_other_hierarchies() {
        let h = crate::fixtures::binary_hierarchy("b");
        let y = GeneralizedDataset::new(1, vec![]).unwrap();
        assert!(downcode_prefix(&y, &h).is_err());
    }

    #[test]
    fn prefix_predicates_and_weights() {
        let (hs, x, y) = prefix_toy();
        let psi = pso_prefix(&y, hs.get(0)).unwrap();
        assert_eq!(psi.len(), 2);
        assert!(evaluate_predicate(&psi[1], x.row(1), &hs).unwrap());
        assert!(!evaluate_predicate(&psi[1], x.row(0), &hs).unwrap());
        assert!(pairwise_disjoint(&psi, &hs));
        let params = PrefixParams {
            k: 2,
            n: 2,
            d: 2,
            alpha: 1.0,
            t: Some(5),
            p_spike: None,
        };
        let rep = predicate_set_report(&psi, &x, &hs, &params, 100_000, 3).unwrap();
        assert_eq!(rep.size, 2);
        assert!(rep.all_isolate() && rep.pairwise_disjoint);
        let w = &rep.predicates[1];
        assert!((w.structural_weight - 0.0375).abs() < 1e-12);
        let mc = w.hits as f64 / w.samples as f64;
        assert!((mc - 0.0375).abs() < 0.005, "{mc}");
        let again = predicate_set_report(&psi, &x, &hs, &params, 100_000, 3).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn predicate_dimension_mismatch() {
        let (hs, _, y) = prefix_toy();
        let psi = pso_prefix(&y, hs.get(0)).unwrap();
        assert!(matches!(
            evaluate_predicate(&psi[0], &Record(vec![1.0]), &hs),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predicate_file_round_trip() {
        let (hs, _, y) = prefix_toy();
        let psi = pso_prefix(&y, hs.get(0)).unwrap();
        let f = psi[0].to_file(&hs);
        assert_eq!(f.cells, vec!["n:[0,3]", "v:3"]);
        assert_eq!(Predicate::from_file(&f, &hs).unwrap(), psi[0]);
    }

    fn clustered_group(k: usize, d: usize, coarse: usize) -> (ClusteredParams, Arc<Hierarchy>, GeneralizedDataset) {
        let p = ClusteredParams::desk(k, 2 * k, d).unwrap();
        let h = Arc::new(build_clustered_hierarchy(&p).unwrap());
        let nodes = ClusteredNodes::locate(&h, &p).unwrap();
        let rec = GeneralizedRecord(
            (0..d)
                .map(|i| GeneralizedValue::Node(if i < coarse { nodes.cell[0] } else { nodes.sml[0] }))
                .collect(),
        );
        let other = GeneralizedRecord(vec![GeneralizedValue::Node(nodes.root); d]);
        let mut rows = vec![rec; k];
        rows.extend(vec![other; k]);
        (p, h.clone(), GeneralizedDataset::new(d, rows).unwrap())
    }

    #[test]
    fn clustered_balanced_group_is_downcoded() {
        let (p, h, y) = clustered_group(4, 8, 4);
        let nodes = ClusteredNodes::locate(&h, &p).unwrap();
        let out = downcode_clustered(&y, 4, &h, &p).unwrap();
        let big = GeneralizedValue::Node(nodes.big[0]);
        let sml = GeneralizedValue::Node(nodes.sml[0]);
        let mut expect = vec![big; 4];
        expect.extend(vec![sml; 4]);
        assert_eq!(out.z.row(0), &GeneralizedRecord(expect));
        for n in 1..4 {
            assert_eq!(out.z.row(n), &GeneralizedRecord(vec![sml; 8]));
        }
        assert_eq!(out.z.row(4), y.row(4));
        assert_eq!(out.changed_rows, vec![0, 1, 2, 3]);
        let hs = Hierarchies::uniform(h.clone(), 8);
        let rep = dataset_refines(&out.z, &y, &hs).unwrap();
        assert!(rep.holds && rep.delta_n == 4);
        assert_eq!(pso_clustered(&y, 4, &h, &p).unwrap().len(), 1);
    }

    #[test]
    fn clustered_guards() {
        let (p, h, y) = clustered_group(4, 8, 8);
        let out = downcode_clustered(&y, 4, &h, &p).unwrap();
        assert_eq!(out.audit[0].action, Action::PassthroughBalance);
        assert_eq!(out.z, y);

        let (p, h, y) = clustered_group(4, 8, 4);
        let mut rows = y.rows().to_vec();
        rows.push(rows[0].clone());
        let y5 = GeneralizedDataset::new(8, rows).unwrap();
        let out = downcode_clustered(&y5, 4, &h, &p).unwrap();
        assert_eq!(out.audit[0].action, Action::PassthroughSize);

        let mut rows = y.rows().to_vec();
        rows[1].0[7] = GeneralizedValue::Node(h.root());
        let broken = GeneralizedDataset::new(8, rows).unwrap();
        assert!(matches!(downcode_clustered(&broken, 4, &h, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn clustered_exact_cells_block_rewrite() {
        let (p, h, y) = clustered_group(4, 8, 4);
        let mut rows = y.rows().to_vec();
        for r in rows.iter_mut().take(4) {
            r.0[7] = GeneralizedValue::exact(130.0);
        }
        let y = GeneralizedDataset::new(8, rows).unwrap();
        let out = downcode_clustered(&y, 4, &h, &p).unwrap();
        assert_eq!(out.audit[0].action, Action::PassthroughShape);
        assert_eq!(out.z, y);
    }

    #[test]
    fn clustered_predicate_membership() {
        let (p, h, y) = clustered_group(4, 8, 4);
        let hs = Hierarchies::uniform(h.clone(), 8);
        let psi = pso_clustered(&y, 4, &h, &p).unwrap();
        let mut big_row = vec![100.0; 4];
        big_row.extend(vec![130.5; 4]);
        assert!(evaluate_predicate(&psi[0], &Record(big_row), &hs).unwrap());
        assert!(!evaluate_predicate(&psi[0], &Record(vec![130.0; 8]), &hs).unwrap());
        let w = p.closed_form_weight(&psi[0], &hs);
        assert!(w > 0.0 && w < 1e-3, "{w}");
    }
}
