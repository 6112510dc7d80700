//! CSV and JSON readers/writers for datasets, generalized datasets and
//! hierarchy sets.
//!
//! Scalars are written with Rust's shortest round-trip formatting, so a
//! dataset read back from its own output is bit-identical.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, HierarchyFile};
use crate::model::{Dataset, GeneralizedDataset, GeneralizedRecord, Hierarchies, Record};

pub fn write_dataset<W: Write>(x: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=x.dims()).map(|d| format!("x{d}")))?;
    for row in x.rows() {
        w.write_record(row.0.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headered CSV of numeric columns.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let dims = r.headers()?.len();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("row {}: `{s}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Record(vals));
    }
    Dataset::new(dims, rows)
}

/// Writes `v:<scalar>` / `n:<label>` cells under a header of hierarchy ids.
pub fn write_generalized<W: Write>(y: &GeneralizedDataset, hs: &Hierarchies, out: W) -> Result<()> {
    hs.check_dims(y.dims())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(hs.iter().map(Hierarchy::id))?;
    for row in y.rows() {
        w.write_record(row.0.iter().enumerate().map(|(d, c)| hs.get(d).format_cell(c)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_generalized<R: Read>(input: R, hs: &Hierarchies) -> Result<GeneralizedDataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    hs.check_dims(header.len())?;
    for (d, id) in header.iter().enumerate() {
        if id != hs.get(d).id() {
            return Err(Error::Malformed(format!(
                "column {} names hierarchy `{id}` but `{}` was supplied",
                d + 1,
                hs.get(d).id()
            )));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cells = rec
            .iter()
            .enumerate()
            .map(|(d, s)| hs.get(d).parse_cell(s))
            .collect::<Result<Vec<_>>>()?;
        rows.push(GeneralizedRecord(cells));
    }
    GeneralizedDataset::new(header.len(), rows)
}

/// On-disk hierarchy set: either a single hierarchy shared by `dims`
/// columns, or one hierarchy per column.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HierarchySetFile {
    Shared { dims: usize, hierarchy: HierarchyFile },
    PerDim { hierarchies: Vec<HierarchyFile> },
}

pub fn hierarchies_to_file(hs: &Hierarchies) -> HierarchySetFile {
    let first = hs.get(0);
    if hs.iter().all(|h| h == first) {
        HierarchySetFile::Shared {
            dims: hs.dims(),
            hierarchy: first.to_file(),
        }
    } else {
        HierarchySetFile::PerDim {
            hierarchies: hs.iter().map(Hierarchy::to_file).collect(),
        }
    }
}

pub fn hierarchies_from_file(file: HierarchySetFile) -> Result<Hierarchies> {
    Ok(match file {
        HierarchySetFile::Shared { dims, hierarchy } => Hierarchies::uniform(Arc::new(Hierarchy::from_file(hierarchy)?), dims),
        HierarchySetFile::PerDim { hierarchies } => Hierarchies::per_dim(
            hierarchies
                .into_iter()
                .map(|f| Hierarchy::from_file(f).map(Arc::new))
                .collect::<Result<_, _>>()?,
        ),
    })
}

/// Loads a hierarchy set, or a bare hierarchy applied to `dims` columns.
pub fn load_hierarchies(path: &Path, dims: Option<usize>) -> Result<Hierarchies> {
    let text = fs::read_to_string(path)?;
    if let Ok(set) = serde_json::from_str::<HierarchySetFile>(&text) {
        return hierarchies_from_file(set);
    }
    let h = Hierarchy::from_json(&text)?;
    let dims = dims.ok_or_else(|| Error::Config("a bare hierarchy needs the column count".into()))?;
    Ok(Hierarchies::uniform(Arc::new(h), dims))
}

pub fn save_hierarchies(hs: &Hierarchies, path: &Path) -> Result<()> {
    write_json(path, &hierarchies_to_file(hs))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
