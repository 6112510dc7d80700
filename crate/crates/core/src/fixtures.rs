//! Small worked instances: a downcoded payroll table and a two-bit table
//! with two different minimal 2-anonymizations.

use std::sync::Arc;

use crate::hierarchy::{AttributeDomain, GeneralizedValue, Hierarchy, NodeSpec, ValueSet};
use crate::model::{Dataset, GeneralizedDataset, GeneralizedRecord, Hierarchies};

pub struct Fixture {
    pub hierarchies: Hierarchies,
    pub x: Dataset,
    pub y: GeneralizedDataset,
    pub z: GeneralizedDataset,
}

fn zip_hierarchy() -> Hierarchy {
    Hierarchy::new(
        "zip",
        AttributeDomain::finite(vec![20037.0, 91010.0, 91011.0, 91012.0]).unwrap(),
        vec![
            NodeSpec::new("*****", None, ValueSet::values([20037.0, 91010.0, 91011.0, 91012.0]).unwrap()),
            NodeSpec::new("9101*", Some("*****"), ValueSet::values([91010.0, 91011.0, 91012.0]).unwrap()),
        ],
    )
    .unwrap()
}

fn income_hierarchy() -> Hierarchy {
    let iv = |lo: f64, hi: f64| ValueSet::interval(lo * 1000.0, hi * 1000.0).unwrap();
    Hierarchy::new(
        "income",
        AttributeDomain::real(0.0, 150_000.0).unwrap(),
        vec![
            NodeSpec::new("0-150k", None, iv(0.0, 150.0)),
            NodeSpec::new("0-75k", Some("0-150k"), iv(0.0, 75.0)),
            NodeSpec::new("75-150k", Some("0-150k"), iv(75.0, 150.0)),
            NodeSpec::new("0-25k", Some("0-75k"), iv(0.0, 25.0)),
            NodeSpec::new("25-50k", Some("0-75k"), iv(25.0, 50.0)),
            NodeSpec::new("50-75k", Some("0-75k"), iv(50.0, 75.0)),
            NodeSpec::new("75-100k", Some("75-150k"), iv(75.0, 100.0)),
            NodeSpec::new("100-125k", Some("75-150k"), iv(100.0, 125.0)),
            NodeSpec::new("125-150k", Some("75-150k"), iv(125.0, 150.0)),
        ],
    )
    .unwrap()
}

/// Binary attribute with a single `*` node; 0 = no, 1 = yes.
pub fn binary_hierarchy(id: &str) -> Hierarchy {
    Hierarchy::new(
        id,
        AttributeDomain::integers(1),
        vec![NodeSpec::new("*", None, ValueSet::values([0.0, 1.0]).unwrap())],
    )
    .unwrap()
}

/// ZIP / income / test-result table: `y` is a minimal 3-anonymization of
/// `x` and `z` downcodes it.
pub fn payroll() -> Fixture {
    let zip = Arc::new(zip_hierarchy());
    let income = Arc::new(income_hierarchy());
    let covid = Arc::new(binary_hierarchy("covid"));
    let n = |h: &Hierarchy, l: &str| GeneralizedValue::Node(h.node_by_label(l).unwrap());
    let e = GeneralizedValue::exact;
    let x = Dataset::from_rows(vec![
        vec![91010.0, 125_000.0, 1.0],
        vec![91011.0, 105_000.0, 0.0],
        vec![91012.0, 80_000.0, 0.0],
        vec![20037.0, 50_000.0, 0.0],
        vec![20037.0, 20_000.0, 0.0],
        vec![20037.0, 25_000.0, 1.0],
    ])
    .unwrap();
    let star = n(&covid, "*");
    let top = GeneralizedRecord(vec![n(&zip, "9101*"), n(&income, "75-150k"), star]);
    let bottom = GeneralizedRecord(vec![e(20037.0), n(&income, "0-75k"), star]);
    let y = GeneralizedDataset::new(
        3,
        vec![top.clone(), top.clone(), top.clone(), bottom.clone(), bottom.clone(), bottom.clone()],
    )
    .unwrap();
    let z = GeneralizedDataset::new(
        3,
        vec![
            GeneralizedRecord(vec![e(91010.0), n(&income, "125-150k"), star]),
            GeneralizedRecord(vec![n(&zip, "9101*"), n(&income, "100-125k"), star]),
            top,
            GeneralizedRecord(vec![e(20037.0), n(&income, "0-75k"), e(0.0)]),
            bottom,
            GeneralizedRecord(vec![e(20037.0), e(25_000.0), e(1.0)]),
        ],
    )
    .unwrap();
    Fixture {
        hierarchies: Hierarchies::per_dim(vec![zip, income, covid]),
        x,
        y,
        z,
    }
}

/// Two binary attributes (old, rich) and two minimal 2-anonymizations:
/// returns `(hierarchies, x, middle, right)`.
pub fn two_bits() -> (Hierarchies, Dataset, GeneralizedDataset, GeneralizedDataset) {
    let h = Arc::new(binary_hierarchy("bit"));
    let star = GeneralizedValue::Node(h.root());
    let e = GeneralizedValue::exact;
    let x = Dataset::from_rows(vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let middle = GeneralizedDataset::new(
        2,
        vec![
            GeneralizedRecord(vec![star, star]),
            GeneralizedRecord(vec![star, star]),
            GeneralizedRecord(vec![star, e(0.0)]),
            GeneralizedRecord(vec![star, e(0.0)]),
        ],
    )
    .unwrap();
    let right = GeneralizedDataset::new(
        2,
        vec![
            GeneralizedRecord(vec![e(1.0), star]),
            GeneralizedRecord(vec![e(0.0), e(0.0)]),
            GeneralizedRecord(vec![e(1.0), star]),
            GeneralizedRecord(vec![e(0.0), e(0.0)]),
        ],
    )
    .unwrap();
    (Hierarchies::uniform(h, 2), x, middle, right)
}
