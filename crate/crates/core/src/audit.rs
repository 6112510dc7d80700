//! Quasi-identifier uniqueness audits over raw tabular data.
//!
//! Effective anonymity (EA) compares cells representationally. Ambiguous
//! effective anonymity (EA_amb) instead asks whether two rows *could* agree:
//! cells match when their value sets intersect, with a missing value
//! standing for every value of its column's domain.

use std::collections::HashMap;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QuasiIdentifier;

/// An audit cell. Values are interned per column.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AuditCell {
    Value(u32),
    Missing,
    /// A published generalization: the sorted set of values it covers.
    Set(Vec<u32>),
}

#[derive(Clone, Debug, Default)]
struct Column {
    name: String,
    dictionary: Vec<String>,
    index: HashMap<String, u32>,
}

impl Column {
    fn intern(&mut self, v: &str) -> u32 {
        if let Some(id) = self.index.get(v) {
            return *id;
        }
        let id = self.dictionary.len() as u32;
        self.dictionary.push(v.to_owned());
        self.index.insert(v.to_owned(), id);
        id
    }
}

/// `N` rows of categorical cells with named columns.
#[derive(Clone, Debug)]
pub struct AuditDataset {
    columns: Vec<Column>,
    rows: Vec<Vec<AuditCell>>,
}

/// Raw cell text for [`AuditDataset::from_text`].
#[derive(Clone, Debug, PartialEq)]
pub enum RawCell {
    Value(String),
    Missing,
    Set(Vec<String>),
}

impl AuditDataset {
    pub fn from_text(columns: Vec<String>, rows: Vec<Vec<RawCell>>) -> Result<Self> {
        let mut cols: Vec<Column> = columns
            .into_iter()
            .map(|name| Column {
                name,
                ..Column::default()
            })
            .collect();
        let width = cols.len();
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Malformed(format!("row {} has {} cells, expected {width}", i + 1, row.len())));
            }
            out.push(
                row.into_iter()
                    .zip(cols.iter_mut())
                    .map(|(cell, col)| match cell {
                        RawCell::Value(v) => AuditCell::Value(col.intern(&v)),
                        RawCell::Missing => AuditCell::Missing,
                        RawCell::Set(vs) => {
                            let mut ids: Vec<u32> = vs.iter().map(|v| col.intern(v)).collect();
                            ids.sort_unstable();
                            ids.dedup();
                            AuditCell::Set(ids)
                        }
                    })
                    .collect(),
            );
        }
        Ok(AuditDataset { columns: cols, rows: out })
    }

    /// Reads a headered CSV. Cells equal to `missing` are missing; cells of
    /// the form `{a|b|c}` are generalized sets.
    pub fn read_csv<R: Read>(input: R, missing: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|s| {
                        if s == missing {
                            RawCell::Missing
                        } else if let Some(inner) = s.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                            RawCell::Set(inner.split('|').map(str::to_owned).collect())
                        } else {
                            RawCell::Value(s.to_owned())
                        }
                    })
                    .collect(),
            );
        }
        AuditDataset::from_text(columns, rows)
    }

    /// Declares values that belong to a column's domain without being
    /// observed; they widen what a missing cell may stand for.
    pub fn add_domain_values(&mut self, column: usize, values: &[&str]) {
        for v in values {
            self.columns[column].intern(v);
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn cell(&self, n: usize, c: usize) -> &AuditCell {
        &self.rows[n][c]
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(|c| *c == AuditCell::Missing)
    }

    fn check_qi(&self, q: &QuasiIdentifier) -> Result<()> {
        if let Some(bad) = q.dims.iter().find(|d| **d >= self.width()) {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                found: bad + 1,
            });
        }
        Ok(())
    }

    fn check_row(&self, n: usize) -> Result<()> {
        if n >= self.len() {
            return Err(Error::RowOutOfRange { index: n, len: self.len() });
        }
        Ok(())
    }

    /// Parses a QI spec: comma-separated column names, where `name1..name16`
    /// expands a numbered range.
    pub fn parse_qi(&self, spec: &str) -> Result<QuasiIdentifier> {
        let mut dims = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            for name in expand_range(part)? {
                dims.push(
                    self.column_index(&name)
                        .ok_or_else(|| Error::Malformed(format!("unknown column `{name}` in QI `{spec}`")))?,
                );
            }
        }
        QuasiIdentifier::new(spec, dims, self.width())
    }
}

fn expand_range(part: &str) -> Result<Vec<String>> {
    let Some((a, b)) = part.split_once("..") else {
        return Ok(vec![part.to_owned()]);
    };
    let split = |s: &str| {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (stem, num) = s.split_at(s.len() - digits);
        num.parse::<u64>().ok().map(|n| (stem.to_owned(), n))
    };
    let bad = || Error::Malformed(format!("bad column range `{part}`"));
    let (stem_a, lo) = split(a).ok_or_else(bad)?;
    let (stem_b, hi) = split(b).ok_or_else(bad)?;
    if stem_a != stem_b || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).map(|i| format!("{stem_a}{i}")).collect())
}

fn cells_intersect(a: &AuditCell, b: &AuditCell) -> bool {
    match (a, b) {
        (AuditCell::Missing, _) | (_, AuditCell::Missing) => true,
        (AuditCell::Value(x), AuditCell::Value(y)) => x == y,
        (AuditCell::Value(x), AuditCell::Set(s)) | (AuditCell::Set(s), AuditCell::Value(x)) => s.binary_search(x).is_ok(),
        (AuditCell::Set(s), AuditCell::Set(t)) => {
            let (mut i, mut j) = (0, 0);
            while i < s.len() && j < t.len() {
                match s[i].cmp(&t[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => return true,
                }
            }
            false
        }
    }
}

fn rows_intersect(y: &AuditDataset, a: usize, b: usize, dims: &[usize]) -> bool {
    dims.iter().all(|&d| cells_intersect(&y.rows[a][d], &y.rows[b][d]))
}

pub fn effective_anonymity(y: &AuditDataset, n: usize, q: &QuasiIdentifier) -> Result<usize> {
    y.check_row(n)?;
    y.check_qi(q)?;
    Ok((0..y.len())
        .filter(|&m| q.dims.iter().all(|&d| y.rows[m][d] == y.rows[n][d]))
        .count())
}

/// EA of every row, by grouping identical projections.
pub fn effective_anonymities(y: &AuditDataset, q: &QuasiIdentifier) -> Result<Vec<usize>> {
    y.check_qi(q)?;
    let keys: Vec<Vec<&AuditCell>> = y.rows.iter().map(|r| q.dims.iter().map(|&d| &r[d]).collect()).collect();
    let mut counts: HashMap<&[&AuditCell], usize> = HashMap::new();
    for k in &keys {
        *counts.entry(k.as_slice()).or_default() += 1;
    }
    Ok(keys.iter().map(|k| counts[k.as_slice()]).collect())
}

pub fn ambiguous_effective_anonymity(y: &AuditDataset, n: usize, q: &QuasiIdentifier) -> Result<usize> {
    y.check_row(n)?;
    y.check_qi(q)?;
    Ok((0..y.len()).filter(|&m| rows_intersect(y, n, m, &q.dims)).count())
}

/// EA_amb of every row. Falls back to grouping when no cell in `q` is
/// missing or a set, since the two notions then coincide.
pub fn ambiguous_effective_anonymities(y: &AuditDataset, q: &QuasiIdentifier) -> Result<Vec<usize>> {
    y.check_qi(q)?;
    let plain = y
        .rows
        .iter()
        .all(|r| q.dims.iter().all(|&d| matches!(r[d], AuditCell::Value(_))));
    if plain {
        return effective_anonymities(y, q);
    }
    Ok((0..y.len())
        .into_par_iter()
        .map(|n| (0..y.len()).filter(|&m| rows_intersect(y, n, m, &q.dims)).count())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub qi: String,
    pub columns: Vec<String>,
    pub ea_unique: usize,
    pub ea_below_k: usize,
    pub amb_unique: usize,
    pub amb_below_k: usize,
    /// Rows counted.
    pub denominator: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTable {
    pub k: usize,
    pub rows: Vec<AuditRow>,
}

/// Name of the row for the union of all listed QIs.
pub const UNION_QI: &str = "all";

/// Tabulates EA and EA_amb for each QI and for their union.
pub fn audit(y: &AuditDataset, qis: &[QuasiIdentifier], k: usize) -> Result<AuditTable> {
    audit_subset(y, qis, k, None)
}

/// As [`audit`], counting only the rows in `subset` (anonymity itself is
/// always measured against the whole dataset).
pub fn audit_subset(y: &AuditDataset, qis: &[QuasiIdentifier], k: usize, subset: Option<&[usize]>) -> Result<AuditTable> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    if let Some(s) = subset {
        if let Some(bad) = s.iter().find(|n| **n >= y.len()) {
            return Err(Error::RowOutOfRange { index: *bad, len: y.len() });
        }
    }
    let mut all_qis = qis.to_vec();
    if !qis.is_empty() {
        let mut dims: Vec<usize> = qis.iter().flat_map(|q| q.dims.iter().copied()).collect();
        dims.sort_unstable();
        dims.dedup();
        all_qis.push(QuasiIdentifier {
            name: UNION_QI.to_owned(),
            dims,
        });
    }
    let names = y.column_names();
    let counted: Vec<usize> = subset.map_or_else(|| (0..y.len()).collect(), <[usize]>::to_vec);
    let mut rows = Vec::with_capacity(all_qis.len());
    for q in &all_qis {
        let ea = effective_anonymities(y, q)?;
        let amb = ambiguous_effective_anonymities(y, q)?;
        let count = |v: &[usize], pred: &dyn Fn(usize) -> bool| counted.iter().filter(|&&n| pred(v[n])).count();
        rows.push(AuditRow {
            qi: q.name.clone(),
            columns: q.dims.iter().map(|&d| names[d].to_owned()).collect(),
            ea_unique: count(&ea, &|e| e == 1),
            ea_below_k: count(&ea, &|e| e < k),
            amb_unique: count(&amb, &|e| e == 1),
            amb_below_k: count(&amb, &|e| e < k),
            denominator: counted.len(),
        });
    }
    Ok(AuditTable { k, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedactionMode {
    /// Every subset of the QI.
    Full,
    /// The QI itself and each subset missing one column.
    LeaveOneOut,
    /// Full up to 12 columns, leave-one-out beyond.
    Auto,
}

/// Largest QI the full enumeration accepts.
pub const FULL_REDACTION_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionResult {
    /// Column indices kept.
    pub dims: Vec<usize>,
    pub amb_anonymity: usize,
    /// EA_amb = 1 on the kept columns.
    pub unique: bool,
    pub below_k: bool,
}

/// Whether row `n` stays unambiguously unique when only a subset of `q`'s
/// columns is published.
pub fn redaction_sensitivity(
    y: &AuditDataset,
    n: usize,
    q: &QuasiIdentifier,
    k: usize,
    mode: RedactionMode,
) -> Result<Vec<RedactionResult>> {
    y.check_row(n)?;
    y.check_qi(q)?;
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    let w = q.dims.len();
    let full = match mode {
        RedactionMode::Full => true,
        RedactionMode::LeaveOneOut => false,
        RedactionMode::Auto => w <= 12,
    };
    if full && w > FULL_REDACTION_LIMIT {
        return Err(Error::InvalidParams(format!(
            "full redaction enumeration is limited to {FULL_REDACTION_LIMIT} columns, QI has {w}"
        )));
    }
    // agree[m] = bitmask of QI positions where row m could match row n
    let masks: Vec<u64> = (0..y.len())
        .map(|m| {
            q.dims.iter().enumerate().fold(0u64, |acc, (i, &d)| {
                if cells_intersect(&y.rows[n][d], &y.rows[m][d]) {
                    acc | (1 << i)
                } else {
                    acc
                }
            })
        })
        .collect();
    let result = |subset: u64| {
        let count = masks.iter().filter(|&&m| m & subset == subset).count();
        RedactionResult {
            dims: (0..w).filter(|i| subset >> i & 1 == 1).map(|i| q.dims[i]).collect(),
            amb_anonymity: count,
            unique: count == 1,
            below_k: count < k,
        }
    };
    let all: u64 = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
    if !full {
        let mut out = vec![result(all)];
        out.extend((0..w).map(|i| result(all & !(1 << i))));
        return Ok(out);
    }
    // superset sums: count[s] = #rows whose mask contains s
    let size = 1usize << w;
    let mut count = vec![0usize; size];
    for m in &masks {
        count[*m as usize] += 1;
    }
    for i in 0..w {
        for s in 0..size {
            if s >> i & 1 == 0 {
                count[s] += count[s | 1 << i];
            }
        }
    }
    Ok((0..size)
        .map(|s| RedactionResult {
            dims: (0..w).filter(|i| s >> i & 1 == 1).map(|i| q.dims[i]).collect(),
            amb_anonymity: count[s],
            unique: count[s] == 1,
            below_k: count[s] < k,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> RawCell {
        RawCell::Value(s.to_owned())
    }

    fn ds(rows: Vec<Vec<RawCell>>, cols: &[&str]) -> AuditDataset {
        AuditDataset::from_text(cols.iter().map(|c| c.to_string()).collect(), rows).unwrap()
    }

    #[test]
    fn missing_matches_everything() {
        let y = ds(
            vec![vec![v("F"), v("1986")], vec![RawCell::Missing, v("1986")]],
            &["gender", "yob"],
        );
        let q = QuasiIdentifier::all(2);
        assert_eq!(ambiguous_effective_anonymity(&y, 0, &q).unwrap(), 2);
        assert_eq!(ambiguous_effective_anonymity(&y, 1, &q).unwrap(), 2);
        assert_eq!(effective_anonymity(&y, 0, &q).unwrap(), 1);
    }

    #[test]
    fn exact_data_gives_equal_measures() {
        let y = ds(
            vec![vec![v("a"), v("1")], vec![v("a"), v("1")], vec![v("b"), v("1")]],
            &["c", "d"],
        );
        let q = QuasiIdentifier::all(2);
        assert_eq!(
            effective_anonymities(&y, &q).unwrap(),
            ambiguous_effective_anonymities(&y, &q).unwrap()
        );
        let single = ds(vec![vec![v("a")]], &["c"]);
        assert_eq!(ambiguous_effective_anonymity(&single, 0, &QuasiIdentifier::all(1)).unwrap(), 1);
    }

    #[test]
    fn sets_intersect_by_membership() {
        let y = ds(
            vec![
                vec![RawCell::Set(vec!["a".into(), "b".into()])],
                vec![v("b")],
                vec![RawCell::Set(vec!["c".into(), "d".into()])],
            ],
            &["c"],
        );
        let q = QuasiIdentifier::all(1);
        assert_eq!(ambiguous_effective_anonymities(&y, &q).unwrap(), vec![2, 2, 1]);
    }

    #[test]
    fn audit_counts_and_union() {
        let y = ds(
            vec![
                vec![v("F"), v("1990"), v("US")],
                vec![v("F"), v("1990"), v("US")],
                vec![v("M"), v("1990"), v("US")],
                vec![v("M"), v("1991"), RawCell::Missing],
                vec![v("M"), v("1990"), v("CA")],
                vec![v("F"), v("1991"), v("CA")],
            ],
            &["g", "y", "c"],
        );
        let q1 = y.parse_qi("g,y").unwrap();
        let q2 = y.parse_qi("c").unwrap();
        let t = audit(&y, &[q1, q2], 2).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[2].qi, UNION_QI);
        // (g,y): F1990 x2, M1990 x2, M1991, F1991
        assert_eq!((t.rows[0].ea_unique, t.rows[0].amb_unique), (2, 2));
        // c: missing is unique representationally but ambiguous
        assert_eq!((t.rows[1].ea_unique, t.rows[1].amb_unique), (1, 0));
        assert!(t.rows.iter().all(|r| r.amb_unique <= r.ea_unique && r.denominator == 6));
        assert!(matches!(audit(&y, &[], 1), Err(Error::InvalidK(1))));
    }

    #[test]
    fn audit_of_identical_rows() {
        let y = ds(vec![vec![v("x"), v("y")]; 5], &["a", "b"]);
        let t = audit(&y, &[QuasiIdentifier::all(2)], 5).unwrap();
        assert!(t.rows.iter().all(|r| r.ea_below_k == 0 && r.amb_below_k == 0));
    }

    #[test]
    fn audit_subset_denominator() {
        let y = ds(vec![vec![v("x")], vec![v("y")], vec![v("y")]], &["a"]);
        let t = audit_subset(&y, &[QuasiIdentifier::all(1)], 2, Some(&[0, 1])).unwrap();
        assert_eq!(t.rows[0].denominator, 2);
        assert_eq!(t.rows[0].ea_unique, 1);
    }

    #[test]
    fn qi_ranges_expand() {
        let cols: Vec<String> = (1..=3).map(|i| format!("posts{i}")).chain(["g".to_string()]).collect();
        let y = AuditDataset::from_text(cols, vec![]).unwrap();
        let q = y.parse_qi("g,posts1..posts3").unwrap();
        assert_eq!(q.dims, vec![0, 1, 2, 3]);
        assert!(y.parse_qi("nope").is_err());
        assert!(y.parse_qi("posts3..posts1").is_err());
    }

    #[test]
    fn redaction_flags_supersets_of_identifying_pair() {
        let y = ds(
            vec![
                vec![v("a"), v("x"), v("1")],
                vec![v("a"), v("y"), v("1")],
                vec![v("b"), v("x"), v("1")],
            ],
            &["p", "q", "r"],
        );
        let q = QuasiIdentifier::all(3);
        let res = redaction_sensitivity(&y, 0, &q, 2, RedactionMode::Full).unwrap();
        assert_eq!(res.len(), 8);
        for r in &res {
            let has_pair = r.dims.contains(&0) && r.dims.contains(&1);
            assert_eq!(r.unique, has_pair, "{:?}", r.dims);
        }
        assert_eq!(res[0].dims, Vec::<usize>::new());
        assert_eq!(res[0].amb_anonymity, 3);
        let full = res.iter().find(|r| r.dims.len() == 3).unwrap();
        assert_eq!(full.amb_anonymity, ambiguous_effective_anonymity(&y, 0, &q).unwrap());
        let loo = redaction_sensitivity(&y, 0, &q, 2, RedactionMode::LeaveOneOut).unwrap();
        assert_eq!(loo.len(), 4);
        assert!(loo[0].unique && !loo[1].unique && !loo[2].unique && loo[3].unique);
    }

    #[test]
    fn redaction_guard() {
        let cols: Vec<String> = (0..21).map(|i| format!("c{i}")).collect();
        let y = AuditDataset::from_text(cols, vec![vec![v("a"); 21]]).unwrap();
        let q = QuasiIdentifier::all(21);
        assert!(redaction_sensitivity(&y, 0, &q, 2, RedactionMode::Full).is_err());
        assert_eq!(redaction_sensitivity(&y, 0, &q, 2, RedactionMode::Auto).unwrap().len(), 22);
    }

    #[test]
    fn csv_reading() {
        let text = "g,yob\nF,1986\n?,1986\n{F|M},1990\n";
        let y = AuditDataset::read_csv(text.as_bytes(), "?").unwrap();
        assert_eq!(y.len(), 3);
        assert_eq!(*y.cell(1, 0), AuditCell::Missing);
        assert!(matches!(y.cell(2, 0), AuditCell::Set(s) if s.len() == 2));
        assert!(y.has_missing());
    }
}
