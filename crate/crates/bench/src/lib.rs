//! Seeded workloads shared by the pipeline benchmarks.

use std::sync::Arc;

use downcode_core::audit::{AuditDataset, RawCell};
use downcode_core::generators::{
    build_clustered_hierarchy, build_prefix_hierarchy, sample_clustered, sample_prefix, stream_rng, ClusteredParams,
    PrefixParams,
};
use downcode_core::{Dataset, Hierarchies, Hierarchy};
use rand::Rng;

pub struct Workload {
    pub x: Dataset,
    pub h: Arc<Hierarchy>,
    pub hs: Hierarchies,
    pub k: usize,
}

pub fn prefix_workload(n: usize, d: usize, seed: u64) -> (Workload, PrefixParams) {
    let p = PrefixParams::new(2, n, d, 0.1).expect("valid prefix parameters");
    let (x, _) = sample_prefix(&p, seed).expect("sampling succeeds");
    let h = Arc::new(build_prefix_hierarchy(p.spikes()).expect("valid hierarchy"));
    let hs = Hierarchies::uniform(h.clone(), d);
    (Workload { x, h, hs, k: 2 }, p)
}

pub fn clustered_workload(k: usize, n: usize, d: usize, seed: u64) -> (Workload, ClusteredParams) {
    let p = ClusteredParams::desk(k, n, d).expect("valid clustered parameters");
    let (x, _) = sample_clustered(&p, seed).expect("sampling succeeds");
    let h = Arc::new(build_clustered_hierarchy(&p).expect("valid hierarchy"));
    let hs = Hierarchies::uniform(h.clone(), d);
    (Workload { x, h, hs, k }, p)
}

/// Categorical table with roughly `missing` of its cells blank.
pub fn audit_workload(n: usize, width: usize, missing: f64, seed: u64) -> AuditDataset {
    let mut rng = stream_rng(seed, 0);
    let rows = (0..n)
        .map(|_| {
            (0..width)
                .map(|_| {
                    if rng.random_bool(missing) {
                        RawCell::Missing
                    } else {
                        RawCell::Value(rng.random_range(0..8u32).to_string())
                    }
                })
                .collect()
        })
        .collect();
    AuditDataset::from_text((0..width).map(|c| format!("c{c}")).collect(), rows).expect("well-formed table")
}
