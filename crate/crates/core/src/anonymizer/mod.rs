//! Hierarchical k-anonymizers.
//!
//! An initial k-anonymous generalization is produced by one of three
//! strategies and then pushed down the refinement order by local moves
//! until none applies:
//!
//! * **single flush**: a row leaves a class larger than `k` for an existing
//!   strictly finer record that still contains it;
//! * **group flush**: a class of at least `2k` rows sends a block of rows one
//!   step down a single dimension, never leaving a splinter below `k`;
//! * **simul flush**: a class is padded with `k` wildcard phantom rows, the
//!   two moves above are simulated, and the result is kept only if every
//!   real row vacated the class.
//!
//! [`minimize`] repeats the three phases to a fixpoint. Global minimality is
//! only certified by the exhaustive [`brute_force_is_minimal`] oracle.

mod brute;

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::GeneralizedValue;
use crate::model::{
    effective_anonymities, generalizes_dataset, respects, Dataset, GeneralizedDataset, GeneralizedRecord,
    Hierarchies, QuasiIdentifier,
};

pub use brute::{brute_force_is_minimal, strict_refinements, SEARCH_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Every cell generalized to its hierarchy root.
    TopThenMinimize,
    /// Greedy blocks of rows with the finest common generalization.
    LcaPartitionThenMinimize,
    /// Seeded shuffle cut into blocks of `k`.
    RandomPartitionThenMinimize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizerConfig {
    pub k: usize,
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
}

impl AnonymizerConfig {
    pub fn new(k: usize, strategy: Strategy, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidK(k));
        }
        Ok(AnonymizerConfig { k, strategy, seed })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RefinementMove {
    AdoptSingle {
        row: usize,
        target: GeneralizedRecord,
    },
    GroupSplit {
        class: GeneralizedRecord,
        dim: usize,
        child: GeneralizedValue,
        moved_rows: Vec<usize>,
    },
    /// Every row of the class moves, either down `dim` or into finer
    /// existing records.
    ClassDescent {
        class: GeneralizedRecord,
        dim: usize,
        child: GeneralizedValue,
        moved_rows: Vec<usize>,
        adopted: Vec<(usize, GeneralizedRecord)>,
    },
    /// Every row of the class adopts an existing finer record.
    ClassMerge {
        class: GeneralizedRecord,
        adopted: Vec<(usize, GeneralizedRecord)>,
    },
}

impl RefinementMove {
    /// Row reassignments performed by this move.
    pub fn assignments(&self) -> Vec<(usize, GeneralizedRecord)> {
        match self {
            RefinementMove::AdoptSingle { row, target } => vec![(*row, target.clone())],
            RefinementMove::GroupSplit {
                class,
                dim,
                child,
                moved_rows,
            } => {
                let z = with_cell(class, *dim, *child);
                moved_rows.iter().map(|r| (*r, z.clone())).collect()
            }
            RefinementMove::ClassDescent {
                class,
                dim,
                child,
                moved_rows,
                adopted,
            } => {
                let z = with_cell(class, *dim, *child);
                let mut out = adopted.clone();
                out.extend(moved_rows.iter().map(|r| (*r, z.clone())));
                out
            }
            RefinementMove::ClassMerge { adopted, .. } => adopted.clone(),
        }
    }
}

fn with_cell(rec: &GeneralizedRecord, dim: usize, cell: GeneralizedValue) -> GeneralizedRecord {
    let mut z = rec.clone();
    z.0[dim] = cell;
    z
}

/// Checks that `y` is k-anonymous over all dimensions, respects the
/// hierarchies and generalizes `x`.
pub fn check_triple(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    if x.len() != y.len() || x.dims() != y.dims() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            x.len(),
            x.dims(),
            y.len(),
            y.dims()
        )));
    }
    respects(y, hs)?;
    if !generalizes_dataset(y, x, hs)? {
        return Err(Error::Precondition("generalized dataset does not generalize the records".into()));
    }
    let q = QuasiIdentifier::all(y.dims());
    if effective_anonymities(y, &q).into_iter().any(|ea| ea < k) {
        return Err(Error::Precondition(format!("generalized dataset is not {k}-anonymous")));
    }
    Ok(())
}

/// Produces the k-anonymous starting point for minimization.
pub fn initial_anonymize(x: &Dataset, hs: &Hierarchies, cfg: &AnonymizerConfig) -> Result<GeneralizedDataset> {
    let k = cfg.k;
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    hs.check_dims(x.dims())?;
    let n = x.len();
    if n > 0 && n < k {
        return Err(Error::TooFewRows { n, k });
    }
    for row in x.rows() {
        for (d, v) in row.0.iter().enumerate() {
            if !hs.get(d).domain().contains(*v) {
                return Err(Error::ValueOutsideDomain(*v));
            }
        }
    }
    let blocks: Vec<Vec<usize>> = match cfg.strategy {
        Strategy::TopThenMinimize => {
            let top = GeneralizedRecord(hs.iter().map(|h| GeneralizedValue::Node(h.root())).collect());
            return GeneralizedDataset::new(x.dims(), vec![top; n]);
        }
        Strategy::RandomPartitionThenMinimize => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
            chunk_blocks(order, k)
        }
        Strategy::LcaPartitionThenMinimize => lca_blocks(x, hs, k),
    };
    let mut rows = vec![GeneralizedRecord(Vec::new()); n];
    for block in blocks {
        let rec = GeneralizedRecord(
            (0..x.dims())
                .map(|d| {
                    let vals: Vec<f64> = block.iter().map(|r| x.row(*r).0[d]).collect();
                    hs.get(d).least_common_node(&vals)
                })
                .collect::<Result<_>>()?,
        );
        for r in block {
            rows[r] = rec.clone();
        }
    }
    let y = GeneralizedDataset::new(x.dims(), rows)?;
    debug_assert!(check_triple(x, &y, hs, k).is_ok());
    Ok(y)
}

fn chunk_blocks(order: Vec<usize>, k: usize) -> Vec<Vec<usize>> {
    let mut blocks: Vec<Vec<usize>> = order.chunks(k).map(<[usize]>::to_vec).collect();
    if blocks.len() > 1 && blocks.last().is_some_and(|b| b.len() < k) {
        let tail = blocks.pop().unwrap();
        blocks.last_mut().unwrap().extend(tail);
    }
    blocks
}

/// Greedy blocks: seed with the lowest unassigned row, then repeatedly add
/// the row whose inclusion keeps the common generalization finest.
fn lca_blocks(x: &Dataset, hs: &Hierarchies, k: usize) -> Vec<Vec<usize>> {
    let n = x.len();
    let mut assigned = vec![false; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut remaining = n;
    let mut next_seed = 0;
    while remaining >= k {
        while assigned[next_seed] {
            next_seed += 1;
        }
        let seed = next_seed;
        assigned[seed] = true;
        remaining -= 1;
        let mut block = vec![seed];
        let mut cells: Vec<GeneralizedValue> = x.row(seed).0.iter().map(|v| GeneralizedValue::exact(*v)).collect();
        while block.len() < k {
            let mut best: Option<(u64, usize)> = None;
            for cand in (0..n).filter(|r| !assigned[*r]) {
                let cost: u64 = cells
                    .iter()
                    .enumerate()
                    .map(|(d, c)| {
                        let h = hs.get(d);
                        h.coarseness(&h.join(c, x.row(cand).0[d])) as u64
                    })
                    .sum();
                if best.is_none_or(|(b, _)| cost < b) {
                    best = Some((cost, cand));
                }
            }
            let (_, pick) = best.expect("enough unassigned rows");
            assigned[pick] = true;
            remaining -= 1;
            for (d, c) in cells.iter_mut().enumerate() {
                *c = hs.get(d).join(c, x.row(pick).0[d]);
            }
            block.push(pick);
        }
        blocks.push(block);
    }
    let leftover: Vec<usize> = (0..n).filter(|r| !assigned[*r]).collect();
    if !leftover.is_empty() {
        match blocks.last_mut() {
            Some(last) => last.extend(leftover),
            None => blocks.push(leftover),
        }
    }
    blocks
}

/// Sizes a split of a class of `m` rows where `i` rows fit the target child:
/// the number of rows to move such that both parts stay at least `k` (or
/// the source class empties).
fn safe_split(m: usize, i: usize, k: usize) -> Option<usize> {
    if i == 0 {
        return None;
    }
    let rest = m - i;
    let r = if rest == 0 || rest >= k {
        i
    } else if m >= k && m - k <= i {
        m - k
    } else {
        return None;
    };
    (r >= k).then_some(r)
}

struct ClassInfo {
    rows: BTreeSet<usize>,
    modified: u64,
}

/// Mutable view used by the flush moves: rows plus an index from class
/// record to member rows.
struct Work<'a> {
    x: &'a Dataset,
    hs: &'a Hierarchies,
    k: usize,
    rows: Vec<GeneralizedRecord>,
    classes: HashMap<GeneralizedRecord, ClassInfo>,
    generation: u64,
}

impl<'a> Work<'a> {
    fn new(x: &'a Dataset, y: &GeneralizedDataset, hs: &'a Hierarchies, k: usize) -> Self {
        let rows = y.rows().to_vec();
        let mut classes: HashMap<GeneralizedRecord, ClassInfo> = HashMap::new();
        for (n, r) in rows.iter().enumerate() {
            classes
                .entry(r.clone())
                .or_insert_with(|| ClassInfo {
                    rows: BTreeSet::new(),
                    modified: 0,
                })
                .rows
                .insert(n);
        }
        Work {
            x,
            hs,
            k,
            rows,
            classes,
            generation: 1,
        }
    }

    fn class_size(&self, rec: &GeneralizedRecord) -> usize {
        self.classes.get(rec).map_or(0, |c| c.rows.len())
    }

    /// Distinct class records ordered by their lowest row index.
    fn records_in_row_order(&self) -> Vec<GeneralizedRecord> {
        let mut v: Vec<(usize, &GeneralizedRecord)> = self
            .classes
            .iter()
            .map(|(r, c)| (*c.rows.first().expect("classes are nonempty"), r))
            .collect();
        v.sort_by_key(|(first, _)| *first);
        v.into_iter().map(|(_, r)| r.clone()).collect()
    }

    fn assign(&mut self, row: usize, rec: GeneralizedRecord) {
        let old = std::mem::replace(&mut self.rows[row], rec.clone());
        self.generation += 1;
        let g = self.generation;
        if let Some(info) = self.classes.get_mut(&old) {
            info.rows.remove(&row);
            info.modified = g;
            if info.rows.is_empty() {
                self.classes.remove(&old);
            }
        }
        let info = self.classes.entry(rec).or_insert_with(|| ClassInfo {
            rows: BTreeSet::new(),
            modified: g,
        });
        info.rows.insert(row);
        info.modified = g;
    }

    fn apply(&mut self, mv: &RefinementMove) {
        for (row, rec) in mv.assignments() {
            self.assign(row, rec);
        }
    }

    fn finish(self) -> Result<GeneralizedDataset> {
        GeneralizedDataset::new(self.x.dims(), self.rows)
    }

    /// First existing record, in row order, that strictly refines `from`
    /// and still contains row `n`'s record.
    fn finer_target(&self, n: usize, from: &GeneralizedRecord, order: &[GeneralizedRecord]) -> Option<GeneralizedRecord> {
        let x = self.x.row(n);
        order
            .iter()
            .find(|y| *y != from && self.hs.record_subset(y, from) && self.hs.record_in(x, y))
            .cloned()
    }

    fn plan_single(&self, n: usize, order: &[GeneralizedRecord]) -> Option<RefinementMove> {
        let from = &self.rows[n];
        if self.class_size(from) <= self.k {
            return None;
        }
        self.finer_target(n, from, order)
            .map(|target| RefinementMove::AdoptSingle { row: n, target })
    }

    /// Candidate children of a cell for rows of a class: explicit children in
    /// hierarchy order, then the exact values the class actually holds that
    /// no explicit child covers.
    fn child_cells(&self, d: usize, cell: &GeneralizedValue, members: &[usize]) -> Vec<GeneralizedValue> {
        let GeneralizedValue::Node(node) = cell else {
            return Vec::new();
        };
        let h = self.hs.get(d);
        let mut out: Vec<GeneralizedValue> = h.children(*node).iter().map(|c| GeneralizedValue::Node(*c)).collect();
        let mut vals: Vec<f64> = members
            .iter()
            .map(|r| self.x.row(*r).0[d])
            .filter(|v| !h.children(*node).iter().any(|c| h.set(*c).contains(*v)))
            .collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup_by(|a, b| a.to_bits() == b.to_bits());
        out.extend(vals.into_iter().map(GeneralizedValue::exact));
        out
    }

    /// Finest cell on `d` covering the given rows. A group that moves
    /// together would keep descending one step at a time to this cell, so
    /// moves jump straight there.
    fn settle(&self, d: usize, rows: &[usize]) -> GeneralizedValue {
        let vals: Vec<f64> = rows.iter().map(|r| self.x.row(*r).0[d]).collect();
        self.hs
            .get(d)
            .least_common_node(&vals)
            .expect("rows are nonempty and inside the domain")
    }

    fn plan_group(&self, n: usize) -> Option<RefinementMove> {
        let class = &self.rows[n];
        let members: Vec<usize> = self.classes[class].rows.iter().copied().collect();
        let m = members.len();
        if m < 2 * self.k {
            return None;
        }
        for d in 0..class.dims() {
            for child in self.child_cells(d, &class.0[d], &members) {
                let h = self.hs.get(d);
                let fits: Vec<usize> = members
                    .iter()
                    .copied()
                    .filter(|r| h.cell_contains(&child, self.x.row(*r).0[d]))
                    .collect();
                if let Some(r) = safe_split(m, fits.len(), self.k) {
                    let moved = fits[..r].to_vec();
                    return Some(RefinementMove::GroupSplit {
                        class: class.clone(),
                        dim: d,
                        child: self.settle(d, &moved),
                        moved_rows: moved,
                    });
                }
            }
        }
        None
    }

    /// Simulates the class padded with `k` wildcard phantoms. Phantoms
    /// never leave through a single flush and fit every child, so they sit
    /// at the end of every block in row order.
    fn plan_simul(&self, class: &GeneralizedRecord, order: &[GeneralizedRecord]) -> Option<RefinementMove> {
        let k = self.k;
        let members: Vec<usize> = self.classes.get(class)?.rows.iter().copied().collect();
        let mut count = members.len() + k;
        let mut adopted: Vec<(usize, GeneralizedRecord)> = Vec::new();
        let mut left: Vec<usize> = Vec::new();
        for &n in &members {
            if count > k {
                if let Some(t) = self.finer_target(n, class, order) {
                    adopted.push((n, t));
                    count -= 1;
                    continue;
                }
            }
            left.push(n);
        }
        if left.is_empty() {
            return (!adopted.is_empty()).then(|| RefinementMove::ClassMerge {
                class: class.clone(),
                adopted,
            });
        }
        self.descend(class, &left, count, adopted.clone()).or_else(|| {
            // adopting can strand the remaining rows; the whole class may
            // still descend together
            (!adopted.is_empty())
                .then(|| self.descend(class, &members, members.len() + k, Vec::new()))
                .flatten()
        })
    }

    fn descend(
        &self,
        class: &GeneralizedRecord,
        left: &[usize],
        count: usize,
        adopted: Vec<(usize, GeneralizedRecord)>,
    ) -> Option<RefinementMove> {
        let k = self.k;
        if count < 2 * k {
            return None;
        }
        for d in 0..class.dims() {
            let h = self.hs.get(d);
            for child in self.child_cells(d, &class.0[d], left) {
                if !left.iter().all(|r| h.cell_contains(&child, self.x.row(*r).0[d])) {
                    continue;
                }
                let Some(r) = safe_split(count, left.len() + k, k) else {
                    continue;
                };
                if r < left.len() {
                    continue;
                }
                let target = with_cell(class, d, child);
                if self.class_size(&target) + left.len() < k {
                    continue;
                }
                let settled = self.settle(d, left);
                let child = if self.class_size(&with_cell(class, d, settled)) + left.len() >= k {
                    settled
                } else {
                    child
                };
                return Some(RefinementMove::ClassDescent {
                    class: class.clone(),
                    dim: d,
                    child,
                    moved_rows: left.to_vec(),
                    adopted,
                });
            }
        }
        None
    }
}

fn check_row(y: &GeneralizedDataset, n: usize) -> Result<()> {
    if n >= y.len() {
        return Err(Error::RowOutOfRange { index: n, len: y.len() });
    }
    Ok(())
}

/// Moves row `n` to an existing strictly finer record when its class can
/// spare it.
pub fn single_flush(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize, n: usize) -> Result<GeneralizedDataset> {
    check_triple(x, y, hs, k)?;
    check_row(y, n)?;
    let mut w = Work::new(x, y, hs, k);
    let order = w.records_in_row_order();
    if let Some(mv) = w.plan_single(n, &order) {
        w.apply(&mv);
    }
    let out = w.finish()?;
    debug_assert!(check_triple(x, &out, hs, k).is_ok());
    Ok(out)
}

/// Splits a block of at least `k` rows off row `n`'s class, down a
/// single dimension.
pub fn group_flush(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize, n: usize) -> Result<GeneralizedDataset> {
    check_triple(x, y, hs, k)?;
    check_row(y, n)?;
    let mut w = Work::new(x, y, hs, k);
    if let Some(mv) = w.plan_group(n) {
        w.apply(&mv);
    }
    let out = w.finish()?;
    debug_assert!(check_triple(x, &out, hs, k).is_ok());
    Ok(out)
}

/// Empties the class `class_record` when phantom support lets all of its
/// rows move to finer records.
pub fn simul_flush(
    x: &Dataset,
    y: &GeneralizedDataset,
    hs: &Hierarchies,
    k: usize,
    class_record: &GeneralizedRecord,
) -> Result<GeneralizedDataset> {
    check_triple(x, y, hs, k)?;
    if !y.rows().contains(class_record) {
        return Err(Error::Precondition("class record is not present in the dataset".into()));
    }
    let mut w = Work::new(x, y, hs, k);
    let order = w.records_in_row_order();
    if let Some(mv) = w.plan_simul(class_record, &order) {
        w.apply(&mv);
    }
    let out = w.finish()?;
    debug_assert!(check_triple(x, &out, hs, k).is_ok());
    Ok(out)
}

/// Applies a move and verifies that the result strictly refines `y` and
/// keeps the k-anonymity / hierarchy / correctness triple.
pub fn apply_move(
    x: &Dataset,
    y: &GeneralizedDataset,
    hs: &Hierarchies,
    k: usize,
    mv: &RefinementMove,
) -> Result<GeneralizedDataset> {
    let mut rows = y.rows().to_vec();
    let assignments = mv.assignments();
    if assignments.is_empty() {
        return Err(Error::Precondition("move changes nothing".into()));
    }
    for (row, rec) in assignments {
        check_row(y, row)?;
        if rec == rows[row] || !hs.record_subset(&rec, &rows[row]) {
            return Err(Error::Precondition(format!("row {row} is not strictly refined")));
        }
        rows[row] = rec;
    }
    let out = GeneralizedDataset::new(y.dims(), rows)?;
    check_triple(x, &out, hs, k)?;
    Ok(out)
}

/// Outcome of [`minimize_with_log`].
#[derive(Clone, Debug)]
pub struct MinimizeOutcome {
    pub dataset: GeneralizedDataset,
    pub moves: Vec<RefinementMove>,
}

/// Runs the flush phases until a full pass changes nothing.
pub fn minimize(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize) -> Result<GeneralizedDataset> {
    Ok(run_minimize(x, y, hs, k, false)?.dataset)
}

/// As [`minimize`], also returning every applied move in order.
pub fn minimize_with_log(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize) -> Result<MinimizeOutcome> {
    run_minimize(x, y, hs, k, true)
}

fn run_minimize(x: &Dataset, y: &GeneralizedDataset, hs: &Hierarchies, k: usize, log: bool) -> Result<MinimizeOutcome> {
    check_triple(x, y, hs, k)?;
    let mut w = Work::new(x, y, hs, k);
    let mut moves = Vec::new();
    let mut record = |w: &mut Work, mv: RefinementMove| {
        w.apply(&mv);
        if log {
            moves.push(mv);
        }
    };
    // generation at which a class (or row) was last found stuck
    let mut group_stuck: HashMap<GeneralizedRecord, u64> = HashMap::new();
    let mut simul_stuck: HashMap<GeneralizedRecord, u64> = HashMap::new();
    let mut single_stuck: Vec<u64> = vec![0; x.len()];
    loop {
        let start = w.generation;

        loop {
            let before = w.generation;
            let mut order = w.records_in_row_order();
            let mut order_gen = w.generation;
            for (n, stuck) in single_stuck.iter_mut().enumerate() {
                if *stuck == w.generation {
                    continue;
                }
                if order_gen != w.generation {
                    order = w.records_in_row_order();
                    order_gen = w.generation;
                }
                match w.plan_single(n, &order) {
                    Some(mv) => record(&mut w, mv),
                    None => *stuck = w.generation,
                }
            }
            if w.generation == before {
                break;
            }
        }

        loop {
            let before = w.generation;
            for n in 0..x.len() {
                let class = &w.rows[n];
                let modified = w.classes[class].modified;
                if group_stuck.get(class).is_some_and(|g| *g >= modified) {
                    continue;
                }
                match w.plan_group(n) {
                    Some(mv) => record(&mut w, mv),
                    None => {
                        let g = w.generation;
                        group_stuck.insert(w.rows[n].clone(), g);
                    }
                }
            }
            if w.generation == before {
                break;
            }
        }

        loop {
            let before = w.generation;
            for class in w.records_in_row_order() {
                if !w.classes.contains_key(&class) || simul_stuck.get(&class) == Some(&w.generation) {
                    continue;
                }
                let order = w.records_in_row_order();
                match w.plan_simul(&class, &order) {
                    Some(mv) => record(&mut w, mv),
                    None => {
                        simul_stuck.insert(class, w.generation);
                    }
                }
            }
            if w.generation == before {
                break;
            }
        }

        if w.generation == start {
            break;
        }
    }
    let dataset = w.finish()?;
    debug_assert!(check_triple(x, &dataset, hs, k).is_ok());
    Ok(MinimizeOutcome { dataset, moves })
}

/// Convenience: initial generalization followed by [`minimize`].
pub fn anonymize(x: &Dataset, hs: &Hierarchies, cfg: &AnonymizerConfig) -> Result<GeneralizedDataset> {
    let y = initial_anonymize(x, hs, cfg)?;
    if x.is_empty() {
        return Ok(y);
    }
    minimize(x, &y, hs, cfg.k)
}

#[cfg(test)]
mod tests;
