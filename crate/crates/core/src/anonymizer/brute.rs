//! Exhaustive search over strict refinements, for tiny instances only.

use std::collections::HashMap;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::model::{Dataset, GeneralizedDataset, GeneralizedRecord, Hierarchies};

/// Maximum number of search-tree nodes visited before giving up.
pub const SEARCH_BUDGET: u64 = 10_000_000;

/// Every record `z` with `x ∈ z ⊆ y`, in row-major chain order.
fn candidates(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, n: usize) -> Vec<GeneralizedRecord> {
    let per_dim: Vec<_> = (0..x.dims())
        .map(|d| {
            let h = hs.get(d);
            let outer = &y.row(n).0[d];
            h.chain(x.row(n).0[d])
                .into_iter()
                .filter(|c| h.cell_subset(c, outer))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = vec![GeneralizedRecord(Vec::with_capacity(x.dims()))];
    for cells in per_dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                cells.iter().map(move |c| {
                    let mut r = prefix.clone();
                    r.0.push(*c);
                    r
                })
            })
            .collect();
    }
    out
}

struct Search<'a> {
    y: &'a GeneralizedDataset,
    hs: &'a Hierarchies,
    x: &'a Dataset,
    k: Option<usize>,
    cands: Vec<Vec<GeneralizedRecord>>,
    chosen: Vec<GeneralizedRecord>,
    counts: HashMap<GeneralizedRecord, usize>,
    visited: u64,
}

impl Search<'_> {
    fn feasible(&self, next: usize) -> bool {
        let Some(k) = self.k else { return true };
        self.counts.iter().all(|(rec, &c)| {
            if c >= k {
                return true;
            }
            let need = k - c;
            let supply = (next..self.x.len())
                .filter(|&j| self.hs.record_in(self.x.row(j), rec) && self.hs.record_subset(rec, self.y.row(j)))
                .take(need)
                .count();
            supply >= need
        })
    }

    fn run(
        &mut self,
        n: usize,
        changed: bool,
        visit: &mut dyn FnMut(&[GeneralizedRecord]) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>> {
        self.visited += 1;
        if self.visited > SEARCH_BUDGET {
            return Err(Error::SearchTooLarge { budget: SEARCH_BUDGET });
        }
        if n == self.x.len() {
            return Ok(if changed { visit(&self.chosen) } else { ControlFlow::Continue(()) });
        }
        for i in 0..self.cands[n].len() {
            let rec = self.cands[n][i].clone();
            let is_change = rec != *self.y.row(n);
            *self.counts.entry(rec.clone()).or_default() += 1;
            self.chosen.push(rec.clone());
            let flow = if self.feasible(n + 1) {
                self.run(n + 1, changed || is_change, visit)?
            } else {
                ControlFlow::Continue(())
            };
            self.chosen.pop();
            let c = self.counts.get_mut(&rec).expect("counted above");
            *c -= 1;
            if *c == 0 {
                self.counts.remove(&rec);
            }
            if flow.is_break() {
                return Ok(flow);
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

fn search(
    x: &Dataset,
    y: &GeneralizedDataset,
    hs: &Hierarchies,
    k: Option<usize>,
    visit: &mut dyn FnMut(&[GeneralizedRecord]) -> ControlFlow<()>,
) -> Result<()> {
    if x.len() != y.len() || x.dims() != y.dims() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            x.len(),
            x.dims(),
            y.len(),
            y.dims()
        )));
    }
    hs.check_dims(x.dims())?;
    if !crate::model::generalizes_dataset(y, x, hs)? {
        return Err(Error::Precondition("generalized dataset does not generalize the records".into()));
    }
    let cands = (0..x.len()).map(|n| candidates(x, y, hs, n)).collect();
    let mut s = Search {
        y,
        hs,
        x,
        k,
        cands,
        chosen: Vec::with_capacity(x.len()),
        counts: HashMap::new(),
        visited: 0,
    };
    let _ = s.run(0, false, visit)?;
    Ok(())
}

/// True iff no strict refinement of `y` is k-anonymous, respects the
/// hierarchies and generalizes `x`.
pub fn brute_force_is_minimal(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize) -> Result<bool> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    let mut found = false;
    search(x, y, hs, Some(k), &mut |_| {
        found = true;
        ControlFlow::Break(())
    })?;
    Ok(!found)
}

/// Calls `visit` with every `z` satisfying `x ⪯ z ≺ y` (a valid downcoding
/// of `y`), until it returns `Break`.
pub fn strict_refinements(
    x: &Dataset,
    y: &GeneralizedDataset,
    hs: &Hierarchies,
    mut visit: impl FnMut(&GeneralizedDataset) -> ControlFlow<()>,
) -> Result<()> {
    let dims = x.dims();
    search(x, y, hs, None, &mut |rows| {
        let z = GeneralizedDataset::new(dims, rows.to_vec()).expect("rows share the dimension");
        visit(&z)
    })
}
