//! Attribute domains, generalization hierarchies and generalized cell values.
//!
//! A hierarchy is a rooted tree of value sets. Every internal node is
//! partitioned by its children; exact values act as the implicit leaves, so
//! a published cell is either a hierarchy node or an exact value and never a
//! singleton node. On finite domains the children of a node need not cover
//! it: the uncovered values are implicit singleton children.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, HierarchyError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Canonical form of a scalar: `-0.0` becomes `0.0`.
#[inline]
pub(crate) fn canon(v: f64) -> f64 {
    v + 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeDomain {
    /// The half-open real interval `[lo, hi)`.
    Real { lo: f64, hi: f64 },
    /// A finite ordered set of scalars.
    Finite { values: Vec<f64> },
}

impl AttributeDomain {
    pub fn real(lo: f64, hi: f64) -> Result<Self, HierarchyError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(HierarchyError::InvalidDomain(format!("[{lo}, {hi}) is empty")));
        }
        Ok(AttributeDomain::Real { lo, hi })
    }

    pub fn finite(mut values: Vec<f64>) -> Result<Self, HierarchyError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HierarchyError::InvalidDomain("non-finite value".into()));
        }
        for v in values.iter_mut() {
            *v = canon(*v);
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.is_empty() {
            return Err(HierarchyError::InvalidDomain("no values".into()));
        }
        Ok(AttributeDomain::Finite { values })
    }

    /// The integer domain `{0, 1, ..., max}`.
    pub fn integers(max: u64) -> Self {
        AttributeDomain::Finite {
            values: (0..=max).map(|v| v as f64).collect(),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            AttributeDomain::Real { lo, hi } => *lo <= v && v < *hi,
            AttributeDomain::Finite { values } => values.binary_search_by(|p| p.total_cmp(&canon(v))).is_ok(),
        }
    }

    fn validate(&self) -> Result<(), HierarchyError> {
        match self {
            AttributeDomain::Real { lo, hi } => {
                AttributeDomain::real(*lo, *hi)?;
            }
            AttributeDomain::Finite { values } => {
                if values.is_empty() {
                    return Err(HierarchyError::InvalidDomain("no values".into()));
                }
                if values.windows(2).any(|w| w[0].total_cmp(&w[1]) != std::cmp::Ordering::Less) {
                    return Err(HierarchyError::InvalidDomain("values must be sorted and distinct".into()));
                }
            }
        }
        Ok(())
    }
}

/// A set of attribute values: a union of disjoint half-open intervals or an
/// explicit list of scalars. On a finite domain, intervals denote the domain
/// values they contain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSet {
    Intervals(Vec<[f64; 2]>),
    Values(Vec<f64>),
}

impl ValueSet {
    /// Builds a normalized interval union: sorted, with touching or
    /// overlapping pieces merged.
    pub fn intervals(pieces: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, HierarchyError> {
        let mut v: Vec<[f64; 2]> = Vec::new();
        for (lo, hi) in pieces {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(HierarchyError::InvalidSet(format!("empty or invalid interval [{lo}, {hi})")));
            }
            v.push([lo, hi]);
        }
        if v.is_empty() {
            return Err(HierarchyError::InvalidSet("no intervals".into()));
        }
        v.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut merged: Vec<[f64; 2]> = Vec::with_capacity(v.len());
        for iv in v {
            match merged.last_mut() {
                Some(last) if iv[0] <= last[1] => last[1] = last[1].max(iv[1]),
                _ => merged.push(iv),
            }
        }
        Ok(ValueSet::Intervals(merged))
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, HierarchyError> {
        Self::intervals([(lo, hi)])
    }

    pub fn values(vals: impl IntoIterator<Item = f64>) -> Result<Self, HierarchyError> {
        let mut v: Vec<f64> = vals.into_iter().map(canon).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(HierarchyError::InvalidSet("non-finite value".into()));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.is_empty() {
            return Err(HierarchyError::InvalidSet("no values".into()));
        }
        Ok(ValueSet::Values(v))
    }

    fn normalized(&self) -> Result<Self, HierarchyError> {
        match self {
            ValueSet::Intervals(iv) => Self::intervals(iv.iter().map(|p| (p[0], p[1]))),
            ValueSet::Values(v) => Self::values(v.iter().copied()),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            ValueSet::Intervals(iv) => {
                // intervals are sorted and disjoint
                let idx = iv.partition_point(|p| p[1] <= v);
                idx < iv.len() && iv[idx][0] <= v
            }
            ValueSet::Values(vals) => vals.binary_search_by(|p| p.total_cmp(&canon(v))).is_ok(),
        }
    }

    /// Raw containment `self ⊆ other`, without reference to a domain.
    pub fn is_subset(&self, other: &ValueSet) -> bool {
        match (self, other) {
            (ValueSet::Values(a), _) => a.iter().all(|v| other.contains(*v)),
            (ValueSet::Intervals(a), ValueSet::Intervals(b)) => a
                .iter()
                .all(|p| b.iter().any(|q| q[0] <= p[0] && p[1] <= q[1])),
            (ValueSet::Intervals(_), ValueSet::Values(_)) => false,
        }
    }

    /// Raw intersection test, without reference to a domain.
    pub fn intersects(&self, other: &ValueSet) -> bool {
        match (self, other) {
            (ValueSet::Values(a), _) => a.iter().any(|v| other.contains(*v)),
            (_, ValueSet::Values(b)) => b.iter().any(|v| self.contains(*v)),
            (ValueSet::Intervals(a), ValueSet::Intervals(b)) => a
                .iter()
                .any(|p| b.iter().any(|q| p[0].max(q[0]) < p[1].min(q[1]))),
        }
    }
}

impl fmt::Display for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueSet::Intervals(iv) => {
                let parts: Vec<String> = iv.iter().map(|p| format!("[{}, {})", p[0], p[1])).collect();
                write!(f, "{}", parts.join(" ∪ "))
            }
            ValueSet::Values(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

/// One coordinate of a generalized record.
#[derive(Clone, Copy, Debug)]
pub enum GeneralizedValue {
    Exact(f64),
    Node(NodeId),
}

impl GeneralizedValue {
    pub fn exact(v: f64) -> Self {
        GeneralizedValue::Exact(canon(v))
    }

    pub fn as_exact(&self) -> Option<f64> {
        match self {
            GeneralizedValue::Exact(v) => Some(*v),
            GeneralizedValue::Node(_) => None,
        }
    }

    pub fn as_node(&self) -> Option<NodeId> {
        match self {
            GeneralizedValue::Node(n) => Some(*n),
            GeneralizedValue::Exact(_) => None,
        }
    }
}

impl PartialEq for GeneralizedValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (GeneralizedValue::Exact(a), GeneralizedValue::Exact(b)) => canon(*a).to_bits() == canon(*b).to_bits(),
            (GeneralizedValue::Node(a), GeneralizedValue::Node(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for GeneralizedValue {}

impl Hash for GeneralizedValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            GeneralizedValue::Exact(v) => {
                0u8.hash(state);
                canon(*v).to_bits().hash(state);
            }
            GeneralizedValue::Node(n) => {
                1u8.hash(state);
                n.hash(state);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyNode {
    pub id: NodeId,
    pub label: String,
    pub parent: Option<NodeId>,
    pub set: ValueSet,
}

/// Node description used to build a hierarchy; parents are referenced by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub set: ValueSet,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, parent: Option<&str>, set: ValueSet) -> Self {
        NodeSpec {
            id: id.into(),
            parent: parent.map(str::to_owned),
            set,
        }
    }
}

/// On-disk form of a hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyFile {
    #[serde(default)]
    pub id: Option<String>,
    pub domain: AttributeDomain,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    id: String,
    domain: AttributeDomain,
    nodes: Vec<HierarchyNode>,
    root: NodeId,
    children: Vec<Vec<NodeId>>,
    depth: Vec<u32>,
    height: Vec<u32>,
    enter: Vec<u32>,
    exit: Vec<u32>,
    by_label: HashMap<String, NodeId>,
}

impl PartialEq for Hierarchy {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.domain == other.domain && self.nodes == other.nodes
    }
}

impl Hierarchy {
    /// Builds and validates a hierarchy. Node order fixes the child scan order.
    pub fn new(id: impl Into<String>, domain: AttributeDomain, specs: Vec<NodeSpec>) -> Result<Self, HierarchyError> {
        domain.validate()?;
        if specs.is_empty() {
            return Err(HierarchyError::Empty);
        }
        let mut by_label = HashMap::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            if by_label.insert(s.id.clone(), NodeId(i as u32)).is_some() {
                return Err(HierarchyError::DuplicateNode(s.id.clone()));
            }
        }
        let mut nodes = Vec::with_capacity(specs.len());
        let mut roots = Vec::new();
        for (i, s) in specs.into_iter().enumerate() {
            let parent = match &s.parent {
                None => {
                    roots.push(NodeId(i as u32));
                    None
                }
                Some(p) => Some(*by_label.get(p).ok_or_else(|| HierarchyError::UnknownParent {
                    node: s.id.clone(),
                    parent: p.clone(),
                })?),
            };
            let set = s.set.normalized()?;
            nodes.push(HierarchyNode {
                id: NodeId(i as u32),
                label: s.id,
                parent,
                set,
            });
        }
        if roots.len() != 1 {
            return Err(HierarchyError::RootCount(roots.len()));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); nodes.len()];
        for n in &nodes {
            if let Some(p) = n.parent {
                children[p.index()].push(n.id);
            }
        }

        // Depth-first numbering; unreachable nodes sit on a cycle.
        let len = nodes.len();
        let mut depth = vec![u32::MAX; len];
        let mut enter = vec![0u32; len];
        let mut exit = vec![0u32; len];
        let mut height = vec![0u32; len];
        let mut clock = 0u32;
        let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
        depth[root.index()] = 0;
        enter[root.index()] = clock;
        clock += 1;
        while let Some((node, next)) = stack.last_mut() {
            let node = *node;
            if let Some(&child) = children[node.index()].get(*next) {
                *next += 1;
                depth[child.index()] = depth[node.index()] + 1;
                enter[child.index()] = clock;
                clock += 1;
                stack.push((child, 0));
            } else {
                exit[node.index()] = clock;
                stack.pop();
                if let Some((parent, _)) = stack.last() {
                    let h = height[node.index()] + 1;
                    let ph = &mut height[parent.index()];
                    *ph = (*ph).max(h);
                }
            }
        }
        let unreachable: Vec<String> = nodes
            .iter()
            .filter(|n| depth[n.id.index()] == u32::MAX)
            .map(|n| n.label.clone())
            .collect();
        if !unreachable.is_empty() {
            return Err(HierarchyError::Unreachable(unreachable));
        }

        let h = Hierarchy {
            id: id.into(),
            domain,
            nodes,
            root,
            children,
            depth,
            height,
            enter,
            exit,
            by_label,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn from_file(file: HierarchyFile) -> Result<Self, HierarchyError> {
        Hierarchy::new(file.id.unwrap_or_else(|| "h".to_owned()), file.domain, file.nodes)
    }

    pub fn to_file(&self) -> HierarchyFile {
        HierarchyFile {
            id: Some(self.id.clone()),
            domain: self.domain.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    id: n.label.clone(),
                    parent: n.parent.map(|p| self.nodes[p.index()].label.clone()),
                    set: n.set.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HierarchyFile = serde_json::from_str(text)?;
        Ok(Hierarchy::from_file(file)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    /// Number of domain values in `set`; `None` on real domains.
    fn finite_count(&self, set: &ValueSet) -> Option<usize> {
        let AttributeDomain::Finite { values } = &self.domain else {
            return None;
        };
        Some(match set {
            ValueSet::Values(v) => v.iter().filter(|x| self.domain.contains(**x)).count(),
            ValueSet::Intervals(iv) => iv
                .iter()
                .map(|p| values.partition_point(|x| *x < p[1]) - values.partition_point(|x| *x < p[0]))
                .sum(),
        })
    }

    fn finite_members<'a>(&'a self, set: &'a ValueSet) -> Box<dyn Iterator<Item = f64> + 'a> {
        match (&self.domain, set) {
            (_, ValueSet::Values(v)) => Box::new(v.iter().copied().filter(|x| self.domain.contains(*x))),
            (AttributeDomain::Finite { values }, ValueSet::Intervals(iv)) => Box::new(iv.iter().flat_map(move |p| {
                let a = values.partition_point(|x| *x < p[0]);
                let b = values.partition_point(|x| *x < p[1]);
                values[a..b].iter().copied()
            })),
            (AttributeDomain::Real { .. }, ValueSet::Intervals(_)) => Box::new(std::iter::empty()),
        }
    }

    fn set_subset(&self, a: &ValueSet, b: &ValueSet) -> bool {
        if a.is_subset(b) {
            return true;
        }
        match self.domain {
            AttributeDomain::Real { .. } => false,
            AttributeDomain::Finite { .. } => self.finite_members(a).all(|v| b.contains(v)),
        }
    }

    fn set_overlaps(&self, a: &ValueSet, b: &ValueSet) -> bool {
        if !a.intersects(b) {
            return false;
        }
        match self.domain {
            AttributeDomain::Real { .. } => true,
            AttributeDomain::Finite { .. } => self.finite_members(a).any(|v| b.contains(v)),
        }
    }

    fn validate(&self) -> Result<(), HierarchyError> {
        let real = matches!(self.domain, AttributeDomain::Real { .. });
        let root = &self.nodes[self.root.index()];
        match &self.domain {
            AttributeDomain::Real { lo, hi } => {
                if root.set != ValueSet::Intervals(vec![[*lo, *hi]]) {
                    return Err(HierarchyError::RootNotDomain);
                }
            }
            AttributeDomain::Finite { values } => {
                if self.finite_count(&root.set) != Some(values.len()) {
                    return Err(HierarchyError::RootNotDomain);
                }
            }
        }
        for n in &self.nodes {
            if real && matches!(n.set, ValueSet::Values(_)) {
                return Err(HierarchyError::InvalidSet(format!(
                    "node `{}` lists values on a real domain",
                    n.label
                )));
            }
            if let Some(c) = self.finite_count(&n.set) {
                match c {
                    0 => return Err(HierarchyError::EmptySet(n.label.clone())),
                    1 => return Err(HierarchyError::SingletonNode(n.label.clone())),
                    _ => {}
                }
            }
        }
        for p in &self.nodes {
            let kids = &self.children[p.id.index()];
            let depth = self.depth[p.id.index()] as usize + 1;
            for &c in kids {
                let child = &self.nodes[c.index()];
                let proper = self.set_subset(&child.set, &p.set)
                    && match (self.finite_count(&child.set), self.finite_count(&p.set)) {
                        (Some(a), Some(b)) => a < b,
                        _ => child.set != p.set,
                    };
                if !proper {
                    return Err(HierarchyError::NotProperSubset {
                        depth,
                        parent: p.label.clone(),
                        child: child.label.clone(),
                    });
                }
            }
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    if self.set_overlaps(&self.nodes[a.index()].set, &self.nodes[b.index()].set) {
                        return Err(HierarchyError::Overlap {
                            depth,
                            a: self.nodes[a.index()].label.clone(),
                            b: self.nodes[b.index()].label.clone(),
                        });
                    }
                }
            }
            if real && !kids.is_empty() {
                let union = ValueSet::intervals(kids.iter().flat_map(|c| match &self.nodes[c.index()].set {
                    ValueSet::Intervals(iv) => iv.iter().map(|q| (q[0], q[1])).collect::<Vec<_>>(),
                    ValueSet::Values(_) => Vec::new(),
                }))?;
                if union != p.set {
                    return Err(HierarchyError::Incomplete {
                        depth,
                        parent: p.label.clone(),
                        children: kids.iter().map(|c| self.nodes[c.index()].label.clone()).collect(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn domain(&self) -> &AttributeDomain {
        &self.domain
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&HierarchyNode> {
        self.nodes
            .get(id.index())
            .ok_or_else(|| Error::UnknownNode(id.0.to_string()))
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.by_label.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].label
    }

    pub fn set(&self, id: NodeId) -> &ValueSet {
        &self.nodes[id.index()].set
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.index()]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    pub fn depth(&self, id: NodeId) -> u32 {
        self.depth[id.index()]
    }

    /// Longest path from `id` down to a node leaf.
    pub fn height(&self, id: NodeId) -> u32 {
        self.height[id.index()]
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn is_ancestor_or_self(&self, anc: NodeId, desc: NodeId) -> bool {
        self.enter[anc.index()] <= self.enter[desc.index()] && self.exit[desc.index()] <= self.exit[anc.index()]
    }

    /// Membership of a domain value in a node's set.
    pub fn node_contains(&self, node: NodeId, v: f64) -> Result<bool> {
        let n = self.node(node)?;
        if !self.domain.contains(v) {
            return Err(Error::ValueOutsideDomain(v));
        }
        Ok(n.set.contains(v))
    }

    /// Deepest node containing `v` (assumed in the domain).
    pub fn deepest_node(&self, v: f64) -> NodeId {
        let mut cur = self.root;
        'down: loop {
            for &c in &self.children[cur.index()] {
                if self.nodes[c.index()].set.contains(v) {
                    cur = c;
                    continue 'down;
                }
            }
            return cur;
        }
    }

    /// Root-to-leaf generalizations of `v`: every node containing it, then
    /// `v` itself.
    pub fn chain(&self, v: f64) -> Vec<GeneralizedValue> {
        let mut out = Vec::new();
        let mut cur = Some(self.deepest_node(v));
        while let Some(n) = cur {
            out.push(GeneralizedValue::Node(n));
            cur = self.parent(n);
        }
        out.reverse();
        out.push(GeneralizedValue::exact(v));
        out
    }

    /// The finest cell covering every value: the exact value for a singleton,
    /// otherwise the deepest node containing them all.
    pub fn least_common_node(&self, values: &[f64]) -> Result<GeneralizedValue> {
        let first = *values
            .first()
            .ok_or_else(|| Error::Precondition("least_common_node needs at least one value".into()))?;
        if let Some(bad) = values.iter().find(|v| !self.domain.contains(**v)) {
            return Err(Error::ValueOutsideDomain(*bad));
        }
        if values.iter().all(|v| canon(*v).to_bits() == canon(first).to_bits()) {
            return Ok(GeneralizedValue::exact(first));
        }
        let mut cur = self.root;
        'down: loop {
            for &c in &self.children[cur.index()] {
                let set = &self.nodes[c.index()].set;
                if set.contains(first) {
                    if values.iter().all(|v| set.contains(*v)) {
                        cur = c;
                        continue 'down;
                    }
                    break 'down;
                }
            }
            break;
        }
        Ok(GeneralizedValue::Node(cur))
    }

    /// Finest cell covering both `cell` and the value `v`.
    pub fn join(&self, cell: &GeneralizedValue, v: f64) -> GeneralizedValue {
        let mut n = match cell {
            GeneralizedValue::Exact(e) if canon(*e).to_bits() == canon(v).to_bits() => return *cell,
            GeneralizedValue::Exact(e) => self.deepest_node(*e),
            GeneralizedValue::Node(start) => *start,
        };
        while !self.nodes[n.index()].set.contains(v) {
            match self.parent(n) {
                Some(p) => n = p,
                None => break,
            }
        }
        GeneralizedValue::Node(n)
    }

    pub fn validate_cell(&self, cell: &GeneralizedValue) -> Result<()> {
        match cell {
            GeneralizedValue::Exact(v) => {
                if self.domain.contains(*v) {
                    Ok(())
                } else {
                    Err(Error::ValueOutsideDomain(*v))
                }
            }
            GeneralizedValue::Node(n) => {
                if self.has_node(*n) {
                    Ok(())
                } else {
                    Err(Error::UnknownNode(n.0.to_string()))
                }
            }
        }
    }

    pub fn cell_contains(&self, cell: &GeneralizedValue, v: f64) -> bool {
        match cell {
            GeneralizedValue::Exact(e) => canon(*e).to_bits() == canon(v).to_bits(),
            GeneralizedValue::Node(n) => self.nodes[n.index()].set.contains(v),
        }
    }

    /// `inner ⊆ outer` as sets.
    pub fn cell_subset(&self, inner: &GeneralizedValue, outer: &GeneralizedValue) -> bool {
        match (inner, outer) {
            (GeneralizedValue::Node(a), GeneralizedValue::Node(b)) => self.is_ancestor_or_self(*b, *a),
            (GeneralizedValue::Exact(v), o) => self.cell_contains(o, *v),
            (GeneralizedValue::Node(_), GeneralizedValue::Exact(_)) => false,
        }
    }

    pub fn cells_intersect(&self, a: &GeneralizedValue, b: &GeneralizedValue) -> bool {
        match (a, b) {
            (GeneralizedValue::Node(x), GeneralizedValue::Node(y)) => {
                self.is_ancestor_or_self(*x, *y) || self.is_ancestor_or_self(*y, *x)
            }
            (GeneralizedValue::Exact(v), o) | (o, GeneralizedValue::Exact(v)) => self.cell_contains(o, *v),
        }
    }

    /// Levels of generalization above an exact value: 0 for exact cells.
    pub fn coarseness(&self, cell: &GeneralizedValue) -> u32 {
        match cell {
            GeneralizedValue::Exact(_) => 0,
            GeneralizedValue::Node(n) => self.height(*n) + 1,
        }
    }

    /// Depth of a cell below the root; exact values sit one level below the
    /// deepest node that contains them.
    pub fn cell_depth(&self, cell: &GeneralizedValue) -> u32 {
        match cell {
            GeneralizedValue::Node(n) => self.depth(*n),
            GeneralizedValue::Exact(v) => self.depth(self.deepest_node(*v)) + 1,
        }
    }

    pub fn format_cell(&self, cell: &GeneralizedValue) -> String {
        match cell {
            GeneralizedValue::Exact(v) => format!("v:{v}"),
            GeneralizedValue::Node(n) => format!("n:{}", self.label(*n)),
        }
    }

    pub fn parse_cell(&self, text: &str) -> Result<GeneralizedValue> {
        let text = text.trim();
        if let Some(v) = text.strip_prefix("v:") {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Malformed(format!("bad scalar cell `{text}`")))?;
            let cell = GeneralizedValue::exact(v);
            self.validate_cell(&cell)?;
            Ok(cell)
        } else if let Some(label) = text.strip_prefix("n:") {
            self.node_by_label(label)
                .map(GeneralizedValue::Node)
                .ok_or_else(|| Error::UnknownNode(label.to_owned()))
        } else {
            Err(Error::Malformed(format!("cell `{text}` must start with `v:` or `n:`")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Hierarchy {
        Hierarchy::new(
            "small",
            AttributeDomain::integers(5),
            vec![
                NodeSpec::new("all", None, ValueSet::interval(0.0, 6.0).unwrap()),
                NodeSpec::new("low", Some("all"), ValueSet::values([0.0, 1.0, 2.0]).unwrap()),
                NodeSpec::new("high", Some("all"), ValueSet::values([3.0, 4.0, 5.0]).unwrap()),
                NodeSpec::new("lowest", Some("low"), ValueSet::values([0.0, 1.0]).unwrap()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn interval_normalization_merges_touching_pieces() {
        let s = ValueSet::intervals([(3.0, 4.0), (0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(s, ValueSet::Intervals(vec![[0.0, 2.0], [3.0, 4.0]]));
        assert!(s.contains(1.5));
        assert!(!s.contains(2.0));
        assert!(s.contains(3.0));
        assert!(ValueSet::interval(0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_overlapping_children() {
        let err = Hierarchy::new(
            "bad",
            AttributeDomain::integers(3),
            vec![
                NodeSpec::new("all", None, ValueSet::interval(0.0, 4.0).unwrap()),
                NodeSpec::new("a", Some("all"), ValueSet::values([0.0, 1.0]).unwrap()),
                NodeSpec::new("b", Some("all"), ValueSet::values([1.0, 2.0]).unwrap()),
            ],
        )
        .unwrap_err();
        assert_eq!(
            err,
            HierarchyError::Overlap {
                depth: 1,
                a: "a".into(),
                b: "b".into()
            }
        );
    }

    #[test]
    fn rejects_incomplete_real_partition() {
        let err = Hierarchy::new(
            "gap",
            AttributeDomain::real(0.0, 10.0).unwrap(),
            vec![
                NodeSpec::new("all", None, ValueSet::interval(0.0, 10.0).unwrap()),
                NodeSpec::new("a", Some("all"), ValueSet::interval(0.0, 4.0).unwrap()),
                NodeSpec::new("b", Some("all"), ValueSet::interval(5.0, 10.0).unwrap()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, HierarchyError::Incomplete { depth: 1, .. }));
    }

    #[test]
    fn rejects_singleton_nodes_and_cycles() {
        let err = Hierarchy::new(
            "s",
            AttributeDomain::integers(2),
            vec![
                NodeSpec::new("all", None, ValueSet::interval(0.0, 3.0).unwrap()),
                NodeSpec::new("one", Some("all"), ValueSet::values([1.0]).unwrap()),
            ],
        )
        .unwrap_err();
        assert_eq!(err, HierarchyError::SingletonNode("one".into()));

        let err = Hierarchy::new(
            "c",
            AttributeDomain::integers(3),
            vec![
                NodeSpec::new("all", None, ValueSet::interval(0.0, 4.0).unwrap()),
                NodeSpec::new("a", Some("b"), ValueSet::values([0.0, 1.0]).unwrap()),
                NodeSpec::new("b", Some("a"), ValueSet::values([0.0, 1.0, 2.0]).unwrap()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, HierarchyError::Unreachable(_)));
    }

    #[test]
    fn root_must_equal_domain() {
        let err = Hierarchy::new(
            "r",
            AttributeDomain::integers(3),
            vec![NodeSpec::new("all", None, ValueSet::values([0.0, 1.0, 2.0]).unwrap())],
        )
        .unwrap_err();
        assert_eq!(err, HierarchyError::RootNotDomain);
    }

    #[test]
    fn chain_and_least_common_node() {
        let h = small();
        let lowest = h.node_by_label("lowest").unwrap();
        let chain = h.chain(1.0);
        assert_eq!(chain.len(), 4);
        assert_eq!(chain[2], GeneralizedValue::Node(lowest));
        assert_eq!(chain[3], GeneralizedValue::exact(1.0));
        assert_eq!(h.least_common_node(&[0.0, 1.0]).unwrap(), GeneralizedValue::Node(lowest));
        assert_eq!(h.least_common_node(&[0.0, 2.0]).unwrap(), GeneralizedValue::Node(h.node_by_label("low").unwrap()));
        assert_eq!(h.least_common_node(&[0.0, 5.0]).unwrap(), GeneralizedValue::Node(h.root()));
        assert_eq!(h.least_common_node(&[4.0]).unwrap(), GeneralizedValue::exact(4.0));
        assert!(matches!(h.least_common_node(&[9.0]), Err(Error::ValueOutsideDomain(_))));
    }

    #[test]
    fn node_contains_errors() {
        let h = small();
        assert!(matches!(h.node_contains(NodeId(99), 1.0), Err(Error::UnknownNode(_))));
        assert!(matches!(h.node_contains(h.root(), 7.0), Err(Error::ValueOutsideDomain(_))));
        assert!(h.node_contains(h.root(), 5.0).unwrap());
    }

    #[test]
    fn cell_relations() {
        let h = small();
        let low = GeneralizedValue::Node(h.node_by_label("low").unwrap());
        let high = GeneralizedValue::Node(h.node_by_label("high").unwrap());
        let root = GeneralizedValue::Node(h.root());
        assert!(h.cell_subset(&low, &root));
        assert!(!h.cell_subset(&root, &low));
        assert!(h.cell_subset(&GeneralizedValue::exact(2.0), &low));
        assert!(!h.cells_intersect(&low, &high));
        assert!(h.cells_intersect(&GeneralizedValue::exact(4.0), &high));
        assert_eq!(h.coarseness(&root), 3);
        assert_eq!(h.cell_depth(&GeneralizedValue::exact(0.0)), 3);
    }

    #[test]
    fn json_round_trip_and_cells() {
        let h = small();
        let back = Hierarchy::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(h, back);
        let cell = h.parse_cell("n:low").unwrap();
        assert_eq!(h.format_cell(&cell), "n:low");
        assert_eq!(h.parse_cell("v:3").unwrap(), GeneralizedValue::exact(3.0));
        assert!(h.parse_cell("v:12").is_err());
        assert!(h.parse_cell("x:1").is_err());
    }

    #[test]
    fn negative_zero_is_canonical() {
        assert_eq!(GeneralizedValue::exact(-0.0), GeneralizedValue::exact(0.0));
    }
}
