use std::sync::Arc;

use super::*;
use crate::fixtures::{binary_hierarchy, payroll, two_bits};
use crate::hierarchy::{AttributeDomain, Hierarchy, NodeSpec, ValueSet};
use crate::model::{dataset_refines, is_k_anonymous};

/// 1-dim domain {1,2} with a single root node.
fn one_two() -> Hierarchies {
    let h = Hierarchy::new(
        "pair",
        AttributeDomain::finite(vec![1.0, 2.0]).unwrap(),
        vec![NodeSpec::new("root", None, ValueSet::values([1.0, 2.0]).unwrap())],
    )
    .unwrap();
    Hierarchies::uniform(Arc::new(h), 1)
}

fn col(vals: &[f64]) -> Dataset {
    Dataset::from_rows(vals.iter().map(|v| vec![*v]).collect()).unwrap()
}

fn cells(hs: &Hierarchies, spec: &[&str]) -> GeneralizedDataset {
    let h = hs.get(0);
    let rows = spec
        .iter()
        .map(|s| GeneralizedRecord(vec![h.parse_cell(s).unwrap()]))
        .collect();
    GeneralizedDataset::new(1, rows).unwrap()
}

fn top(hs: &Hierarchies, n: usize) -> GeneralizedDataset {
    let rec = GeneralizedRecord(hs.iter().map(|h| GeneralizedValue::Node(h.root())).collect());
    GeneralizedDataset::new(hs.dims(), vec![rec; n]).unwrap()
}

#[test]
fn config_rejects_small_k() {
    assert!(matches!(
        AnonymizerConfig::new(1, Strategy::TopThenMinimize, 0),
        Err(Error::InvalidK(1))
    ));
}

#[test]
fn top_strategy_is_all_root() {
    let (hs, x, _, _) = two_bits();
    let cfg = AnonymizerConfig::new(2, Strategy::TopThenMinimize, 0).unwrap();
    assert_eq!(initial_anonymize(&x, &hs, &cfg).unwrap(), top(&hs, 4));
}

#[test]
fn lca_partition_blocks() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 1.0, 2.0]);
    let cfg = AnonymizerConfig::new(2, Strategy::LcaPartitionThenMinimize, 0).unwrap();
    let y = initial_anonymize(&x, &hs, &cfg).unwrap();
    assert_eq!(y, cells(&hs, &["v:1", "v:1", "n:root", "n:root"]));
}

#[test]
fn too_few_rows_is_an_error() {
    let hs = one_two();
    let cfg = AnonymizerConfig::new(5, Strategy::TopThenMinimize, 0).unwrap();
    assert!(matches!(
        initial_anonymize(&col(&[1.0, 2.0, 1.0]), &hs, &cfg),
        Err(Error::TooFewRows { n: 3, k: 5 })
    ));
    let empty = Dataset::new(1, Vec::new()).unwrap();
    assert!(initial_anonymize(&empty, &hs, &cfg).unwrap().is_empty());
}

#[test]
fn random_partition_is_seed_deterministic_and_anonymous() {
    let hs = Hierarchies::uniform(Arc::new(binary_hierarchy("b")), 3);
    let x = Dataset::from_rows((0..11).map(|i| vec![(i % 2) as f64, (i / 2 % 2) as f64, (i / 4 % 2) as f64]).collect())
        .unwrap();
    let cfg = AnonymizerConfig::new(3, Strategy::RandomPartitionThenMinimize, 9).unwrap();
    let a = initial_anonymize(&x, &hs, &cfg).unwrap();
    let b = initial_anonymize(&x, &hs, &cfg).unwrap();
    assert_eq!(a, b);
    check_triple(&x, &a, &hs, 3).unwrap();
}

#[test]
fn chunking_merges_short_tail() {
    let blocks = chunk_blocks((0..7).collect(), 3);
    assert_eq!(blocks, vec![vec![0, 1, 2], vec![3, 4, 5, 6]]);
}

#[test]
fn safe_split_arithmetic() {
    // everything fits
    assert_eq!(safe_split(4, 4, 2), Some(4));
    // remainder already large enough
    assert_eq!(safe_split(4, 2, 2), Some(2));
    // m = 2k, |I_h| = k + 1: move exactly k
    assert_eq!(safe_split(6, 4, 3), Some(3));
    // would leave a splinter and cannot compensate
    assert_eq!(safe_split(5, 1, 2), None);
    assert_eq!(safe_split(4, 0, 2), None);
}

#[test]
fn single_flush_adopts_finer_record() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 1.0, 1.0, 2.0]);
    let y = cells(&hs, &["v:1", "v:1", "n:root", "n:root", "n:root"]);
    let z = single_flush(&x, &y, &hs, 2, 2).unwrap();
    assert_eq!(z, cells(&hs, &["v:1", "v:1", "v:1", "n:root", "n:root"]));
}

#[test]
fn single_flush_keeps_class_of_exactly_k() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 1.0, 2.0]);
    let y = cells(&hs, &["v:1", "v:1", "n:root", "n:root"]);
    assert_eq!(single_flush(&x, &y, &hs, 2, 2).unwrap(), y);
}

#[test]
fn single_flush_without_target_is_identity() {
    let hs = one_two();
    let x = col(&[1.0, 2.0, 1.0]);
    let y = top(&hs, 3);
    assert_eq!(single_flush(&x, &y, &hs, 2, 0).unwrap(), y);
}

#[test]
fn flush_rejects_broken_precondition() {
    let hs = one_two();
    let x = col(&[1.0, 2.0]);
    let y = cells(&hs, &["v:1", "v:2"]);
    assert!(matches!(single_flush(&x, &y, &hs, 2, 0), Err(Error::Precondition(_))));
    assert!(matches!(
        group_flush(&x, &top(&hs, 2), &hs, 2, 5),
        Err(Error::RowOutOfRange { .. })
    ));
}

#[test]
fn group_flush_splits_block_of_k() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 2.0, 2.0]);
    let z = group_flush(&x, &top(&hs, 4), &hs, 2, 0).unwrap();
    assert_eq!(z, cells(&hs, &["v:1", "v:1", "n:root", "n:root"]));
}

#[test]
fn group_flush_moves_exactly_k_when_remainder_would_splinter() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 1.0, 1.0, 2.0, 2.0]);
    // m = 6 = 2k, |I_{1}| = 4 = k + 1: three rows move, three stay
    let z = group_flush(&x, &top(&hs, 6), &hs, 3, 0).unwrap();
    assert_eq!(z, cells(&hs, &["v:1", "v:1", "v:1", "n:root", "n:root", "n:root"]));
}

#[test]
fn group_flush_needs_two_k() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 2.0]);
    let y = top(&hs, 3);
    assert_eq!(group_flush(&x, &y, &hs, 2, 0).unwrap(), y);
}

#[test]
fn simul_flush_descends_whole_class() {
    let hs = one_two();
    let x = col(&[1.0, 1.0]);
    let y = top(&hs, 2);
    let root = y.row(0).clone();
    assert_eq!(simul_flush(&x, &y, &hs, 2, &root).unwrap(), cells(&hs, &["v:1", "v:1"]));
}

#[test]
fn simul_flush_reverts_incomplete_drain() {
    let hs = one_two();
    let x = col(&[1.0, 2.0]);
    let y = top(&hs, 2);
    let root = y.row(0).clone();
    assert_eq!(simul_flush(&x, &y, &hs, 2, &root).unwrap(), y);
}

#[test]
fn simul_flush_on_exact_class_is_identity() {
    let hs = one_two();
    let x = col(&[1.0, 1.0]);
    let y = cells(&hs, &["v:1", "v:1"]);
    assert_eq!(simul_flush(&x, &y, &hs, 2, y.row(0)).unwrap(), y);
    let missing = GeneralizedRecord(vec![GeneralizedValue::exact(2.0)]);
    assert!(simul_flush(&x, &y, &hs, 2, &missing).is_err());
}

#[test]
fn minimize_two_bits_reaches_a_minimal_fixpoint() {
    let (hs, x, middle, right) = two_bits();
    let z = minimize(&x, &top(&hs, 4), &hs, 2).unwrap();
    check_triple(&x, &z, &hs, 2).unwrap();
    assert!(brute_force_is_minimal(&x, &z, &hs, 2).unwrap());
    assert_eq!(minimize(&x, &middle, &hs, 2).unwrap(), middle);
    assert_eq!(minimize(&x, &right, &hs, 2).unwrap(), right);
}

#[test]
fn minimize_full_descent() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 1.0, 1.0]);
    let z = minimize(&x, &top(&hs, 4), &hs, 2).unwrap();
    assert_eq!(z, cells(&hs, &["v:1"; 4]));
}

#[test]
fn minimize_log_replays_to_result() {
    let f = payroll();
    let cfg = AnonymizerConfig::new(3, Strategy::TopThenMinimize, 0).unwrap();
    let y0 = initial_anonymize(&f.x, &f.hierarchies, &cfg).unwrap();
    let out = minimize_with_log(&f.x, &y0, &f.hierarchies, 3).unwrap();
    let mut cur = y0.clone();
    for mv in &out.moves {
        let next = apply_move(&f.x, &cur, &f.hierarchies, 3, mv).unwrap();
        let rep = dataset_refines(&next, &cur, &f.hierarchies).unwrap();
        assert!(rep.holds && rep.delta_n >= 1);
        cur = next;
    }
    assert_eq!(cur, out.dataset);
    assert!(brute_force_is_minimal(&f.x, &out.dataset, &f.hierarchies, 3).unwrap());
}

#[test]
fn apply_move_rejects_anonymity_break() {
    let hs = one_two();
    let x = col(&[1.0, 1.0, 2.0]);
    let y = top(&hs, 3);
    let mv = RefinementMove::AdoptSingle {
        row: 0,
        target: GeneralizedRecord(vec![GeneralizedValue::exact(1.0)]),
    };
    assert!(apply_move(&x, &y, &hs, 2, &mv).is_err());
}

#[test]
fn brute_force_fig2() {
    let (hs, x, middle, right) = two_bits();
    assert!(brute_force_is_minimal(&x, &middle, &hs, 2).unwrap());
    assert!(brute_force_is_minimal(&x, &right, &hs, 2).unwrap());
    assert!(!brute_force_is_minimal(&x, &top(&hs, 4), &hs, 2).unwrap());
    let empty = Dataset::new(2, Vec::new()).unwrap();
    let ey = GeneralizedDataset::new(2, Vec::new()).unwrap();
    assert!(brute_force_is_minimal(&empty, &ey, &hs, 2).unwrap());
}

#[test]
fn payroll_y_is_minimal_and_z_breaks_anonymity() {
    let f = payroll();
    assert!(brute_force_is_minimal(&f.x, &f.y, &f.hierarchies, 3).unwrap());
    let q = QuasiIdentifier::all(3);
    assert!(!is_k_anonymous(&f.z, 3, &q).unwrap());
}

#[test]
fn strict_refinements_enumerates_downcodings() {
    let hs = one_two();
    let x = col(&[1.0, 2.0]);
    let mut seen = Vec::new();
    strict_refinements(&x, &top(&hs, 2), &hs, |z| {
        seen.push(z.clone());
        std::ops::ControlFlow::Continue(())
    })
    .unwrap();
    // each row either stays at root or goes exact, minus the unchanged one
    assert_eq!(seen.len(), 3);
}
