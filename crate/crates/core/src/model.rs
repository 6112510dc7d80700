//! Records, generalized datasets, the refinement order and effective anonymity.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{GeneralizedValue, Hierarchy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record(pub Vec<f64>);

impl Record {
    pub fn dims(&self) -> usize {
        self.0.len()
    }
}

/// A secret dataset: `N` records sharing one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dims: usize,
    rows: Vec<Record>,
}

impl Dataset {
    pub fn new(dims: usize, rows: Vec<Record>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: r.dims(),
            });
        }
        Ok(Dataset { dims, rows })
    }

    /// Builds from raw rows; the dimension is taken from the first row.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        Dataset::new(dims, rows.into_iter().map(Record).collect())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &Record {
        &self.rows[n]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GeneralizedRecord(pub Vec<GeneralizedValue>);

impl GeneralizedRecord {
    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn from_record(x: &Record) -> Self {
        GeneralizedRecord(x.0.iter().map(|v| GeneralizedValue::exact(*v)).collect())
    }

    /// Restriction to the dimensions of `q`.
    pub fn project(&self, q: &QuasiIdentifier) -> Vec<GeneralizedValue> {
        q.dims.iter().map(|d| self.0[*d]).collect()
    }
}

/// A published dataset: `N` generalized records, row-aligned with the
/// dataset it generalizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralizedDataset {
    dims: usize,
    rows: Vec<GeneralizedRecord>,
}

impl GeneralizedDataset {
    pub fn new(dims: usize, rows: Vec<GeneralizedRecord>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: r.dims(),
            });
        }
        Ok(GeneralizedDataset { dims, rows })
    }

    /// Embeds every record as exact cells.
    pub fn from_exact(x: &Dataset) -> Self {
        GeneralizedDataset {
            dims: x.dims(),
            rows: x.rows().iter().map(GeneralizedRecord::from_record).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[GeneralizedRecord] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &GeneralizedRecord {
        &self.rows[n]
    }

    pub fn into_rows(self) -> Vec<GeneralizedRecord> {
        self.rows
    }
}

/// One hierarchy per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchies(Vec<Arc<Hierarchy>>);

impl Hierarchies {
    pub fn uniform(h: Arc<Hierarchy>, dims: usize) -> Self {
        Hierarchies(vec![h; dims])
    }

    pub fn per_dim(hs: Vec<Arc<Hierarchy>>) -> Self {
        Hierarchies(hs)
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, d: usize) -> &Hierarchy {
        &self.0[d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Hierarchy> {
        self.0.iter().map(|h| h.as_ref())
    }

    pub fn check_dims(&self, dims: usize) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: dims,
            });
        }
        Ok(())
    }

    /// Whether `x ∈ y` coordinate-wise.
    pub fn record_in(&self, x: &Record, y: &GeneralizedRecord) -> bool {
        x.0.iter()
            .zip(&y.0)
            .enumerate()
            .all(|(d, (v, c))| self.get(d).cell_contains(c, *v))
    }

    /// Whether `z ⊆ y` coordinate-wise.
    pub fn record_subset(&self, z: &GeneralizedRecord, y: &GeneralizedRecord) -> bool {
        z.0.iter()
            .zip(&y.0)
            .enumerate()
            .all(|(d, (a, b))| self.get(d).cell_subset(a, b))
    }

    pub fn records_intersect(&self, a: &GeneralizedRecord, b: &GeneralizedRecord) -> bool {
        a.0.iter()
            .zip(&b.0)
            .enumerate()
            .all(|(d, (p, q))| self.get(d).cells_intersect(p, q))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiIdentifier {
    pub name: String,
    pub dims: Vec<usize>,
}

impl QuasiIdentifier {
    pub fn new(name: impl Into<String>, dims: impl IntoIterator<Item = usize>, total_dims: usize) -> Result<Self> {
        let mut dims: Vec<usize> = dims.into_iter().collect();
        dims.sort_unstable();
        dims.dedup();
        if dims.is_empty() {
            return Err(Error::Precondition("quasi-identifier must be nonempty".into()));
        }
        if let Some(d) = dims.iter().find(|d| **d >= total_dims) {
            return Err(Error::DimensionMismatch {
                expected: total_dims,
                found: d + 1,
            });
        }
        Ok(QuasiIdentifier { name: name.into(), dims })
    }

    pub fn all(total_dims: usize) -> Self {
        QuasiIdentifier {
            name: "all".into(),
            dims: (0..total_dims).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefinementRelation {
    Equal,
    /// Every cell is contained in the other's; the listed dimensions are
    /// proper containments.
    Strict(Vec<usize>),
    Incomparable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRefinementReport {
    pub holds: bool,
    pub delta_n: usize,
    pub min_delta_d: usize,
}

/// Compares `z` against `y`: equal, a strict refinement, or neither.
pub fn refines(z: &GeneralizedRecord, y: &GeneralizedRecord, hs: &Hierarchies) -> Result<RefinementRelation> {
    if z.dims() != y.dims() {
        return Err(Error::DimensionMismatch {
            expected: y.dims(),
            found: z.dims(),
        });
    }
    hs.check_dims(z.dims())?;
    let mut refined = Vec::new();
    for (d, (a, b)) in z.0.iter().zip(&y.0).enumerate() {
        if a == b {
            continue;
        }
        if !hs.get(d).cell_subset(a, b) {
            return Ok(RefinementRelation::Incomparable);
        }
        refined.push(d);
    }
    Ok(if refined.is_empty() {
        RefinementRelation::Equal
    } else {
        RefinementRelation::Strict(refined)
    })
}

pub fn dataset_refines(z: &GeneralizedDataset, y: &GeneralizedDataset, hs: &Hierarchies) -> Result<DatasetRefinementReport> {
    if z.len() != y.len() || z.dims() != y.dims() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            z.len(),
            z.dims(),
            y.len(),
            y.dims()
        )));
    }
    let mut holds = true;
    let mut delta_n = 0;
    let mut min_delta_d = usize::MAX;
    for (a, b) in z.rows().iter().zip(y.rows()) {
        match refines(a, b, hs)? {
            RefinementRelation::Equal => {}
            RefinementRelation::Strict(dims) => {
                delta_n += 1;
                min_delta_d = min_delta_d.min(dims.len());
            }
            RefinementRelation::Incomparable => holds = false,
        }
    }
    Ok(DatasetRefinementReport {
        holds,
        delta_n,
        min_delta_d: if delta_n == 0 { 0 } else { min_delta_d },
    })
}

/// Correctness: `x_n ∈ z_n` for every row.
pub fn generalizes_dataset(z: &GeneralizedDataset, x: &Dataset, hs: &Hierarchies) -> Result<bool> {
    if z.len() != x.len() || z.dims() != x.dims() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            z.len(),
            z.dims(),
            x.len(),
            x.dims()
        )));
    }
    hs.check_dims(z.dims())?;
    Ok(z.rows().iter().zip(x.rows()).all(|(zr, xr)| hs.record_in(xr, zr)))
}

/// Every cell is a node of its dimension's hierarchy or an exact domain value.
pub fn respects(y: &GeneralizedDataset, hs: &Hierarchies) -> Result<()> {
    hs.check_dims(y.dims())?;
    for row in y.rows() {
        for (d, c) in row.0.iter().enumerate() {
            hs.get(d).validate_cell(c)?;
        }
    }
    Ok(())
}

/// Number of rows whose projection onto `q` is identical to row `n`'s,
/// including row `n` itself.
pub fn effective_anonymity(y: &GeneralizedDataset, n: usize, q: &QuasiIdentifier) -> Result<usize> {
    if n >= y.len() {
        return Err(Error::RowOutOfRange { index: n, len: y.len() });
    }
    let target = y.row(n);
    Ok(y.rows()
        .iter()
        .filter(|r| q.dims.iter().all(|d| r.0[*d] == target.0[*d]))
        .count())
}

/// Effective anonymity of every row, by grouping.
pub fn effective_anonymities(y: &GeneralizedDataset, q: &QuasiIdentifier) -> Vec<usize> {
    let mut counts: HashMap<Vec<GeneralizedValue>, usize> = HashMap::new();
    let keys: Vec<Vec<GeneralizedValue>> = y.rows().iter().map(|r| r.project(q)).collect();
    for k in &keys {
        *counts.entry(k.clone()).or_default() += 1;
    }
    keys.iter().map(|k| counts[k]).collect()
}

pub fn is_k_anonymous(y: &GeneralizedDataset, k: usize, q: &QuasiIdentifier) -> Result<bool> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    Ok(effective_anonymities(y, q).into_iter().all(|ea| ea >= k))
}

/// Reorders the rows of `z` inside each class of identical `y` rows so that
/// row `n` of the result generalizes `x_n`. Such a permutation leaves
/// `z ⪯ y` intact whenever it held. Returns `None` when no such reordering
/// exists.
pub fn align_within_classes(
    z: &GeneralizedDataset,
    x: &Dataset,
    y: &GeneralizedDataset,
    hs: &Hierarchies,
) -> Result<Option<GeneralizedDataset>> {
    if z.len() != x.len() || z.len() != y.len() || z.dims() != x.dims() || z.dims() != y.dims() {
        return Err(Error::ShapeMismatch("z, x and y must share N and D".into()));
    }
    let mut classes: HashMap<&GeneralizedRecord, Vec<usize>> = HashMap::new();
    for (n, r) in y.rows().iter().enumerate() {
        classes.entry(r).or_default().push(n);
    }
    let mut out = z.rows().to_vec();
    let mut groups: Vec<Vec<usize>> = classes.into_values().collect();
    groups.sort();
    for rows in groups {
        // bipartite matching: x-rows of the class against z-rows of the class
        let m = rows.len();
        let adj: Vec<Vec<usize>> = rows
            .iter()
            .map(|&xi| (0..m).filter(|&j| hs.record_in(x.row(xi), z.row(rows[j]))).collect())
            .collect();
        let mut owner: Vec<Option<usize>> = vec![None; m];
        for i in 0..m {
            let mut seen = vec![false; m];
            if !augment(i, &adj, &mut owner, &mut seen) {
                return Ok(None);
            }
        }
        for (j, o) in owner.iter().enumerate() {
            let i = o.expect("perfect matching");
            out[rows[i]] = z.row(rows[j]).clone();
        }
    }
    Ok(Some(GeneralizedDataset::new(z.dims(), out)?))
}

fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &j in &adj[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j].is_none_or(|o| augment(o, adj, owner, seen)) {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}
