//! The two synthetic distributions attacked by the downcoding adversaries,
//! with their matched hierarchies.
//!
//! * **Clustered Gaussians**: `T` clusters on a line, each record picks a
//!   cluster and a noise level (small w.p. `1 - 1/k`, big w.p. `1/k`) and
//!   draws every coordinate from `N(c_t, σ²)`. The hierarchy splits each
//!   cluster cell `H_t = [A_t, A_{t+1})` into the inner interval
//!   `H_t.sml = [B_t, D_t)` and its complement `H_t.big`.
//! * **Prefix spikes**: each record picks a spike `t(x)` uniformly from
//!   `1..=T`; every coordinate is `t(x)` with probability `1/(2k)` and `0`
//!   otherwise. The hierarchy is the chain of prefixes `[0,T] ⊃ … ⊃ [0,1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{AttributeDomain, Hierarchy, NodeId, NodeSpec, ValueSet};
use crate::model::{Dataset, Record};

/// `1 / (√2 · erf⁻¹(1/2))`: the ratio between a normal's standard deviation
/// and its quartile half-width.
pub const ZETA: f64 = 1.482_602_218_505_602;

/// Independent generator stream `stream` of a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteredParams {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    /// Number of clusters `T`.
    pub clusters: usize,
    /// `c_1`; later centers are spaced `2Δ` apart so the cluster cells tile.
    pub first_center: f64,
    /// `Δ`: half-width of each cluster cell `H_t`.
    pub outer_half_width: f64,
    /// Half-width of the inner interval `H_t.sml`.
    pub inner_half_width: f64,
    pub sigma_sml: f64,
    pub sigma_big: f64,
    pub p_big: f64,
}

impl ClusteredParams {
    /// `c_t = 130t`, `Δ = 65`, inner half-width 6.6, `σ = 1` / `10`,
    /// `T = N/k`, big with probability `1/k`.
    pub fn desk(k: usize, n: usize, d: usize) -> Result<Self> {
        let p = ClusteredParams {
            k,
            n,
            d,
            clusters: (n / k.max(1)).max(1),
            first_center: 130.0,
            outer_half_width: 65.0,
            inner_half_width: 6.6,
            sigma_sml: 1.0,
            sigma_big: 10.0,
            p_big: 1.0 / k.max(1) as f64,
        };
        p.validate()?;
        Ok(p)
    }

    /// The asymptotic family: inner half-width `ln N`, `σ_big = ζ ln N`,
    /// `Δ = ζ ln² N`, `c_t = 2tΔ`.
    pub fn scaled(k: usize, n: usize, d: usize) -> Result<Self> {
        let ln = (n as f64).ln();
        let delta = ZETA * ln * ln;
        let p = ClusteredParams {
            k,
            n,
            d,
            clusters: (n / k.max(1)).max(1),
            first_center: 2.0 * delta,
            outer_half_width: delta,
            inner_half_width: ln,
            sigma_sml: 1.0,
            sigma_big: ZETA * ln,
            p_big: 1.0 / k.max(1) as f64,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_owned()));
        if self.k < 2 {
            return Err(Error::InvalidK(self.k));
        }
        if self.n == 0 || self.d == 0 || self.clusters == 0 {
            return bad("n, d and clusters must be positive");
        }
        let finite = [
            self.first_center,
            self.outer_half_width,
            self.inner_half_width,
            self.sigma_sml,
            self.sigma_big,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if !(self.inner_half_width > 0.0 && self.inner_half_width < self.outer_half_width) {
            return bad("inner half-width must lie in (0, Δ)");
        }
        if !(self.sigma_sml > 0.0 && self.sigma_big > 0.0) {
            return bad("standard deviations must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_big) {
            return bad("p_big must be a probability");
        }
        Ok(())
    }

    pub fn center(&self, t: usize) -> f64 {
        self.first_center + 2.0 * self.outer_half_width * (t as f64 - 1.0)
    }

    /// `(A_t, B_t, D_t, A_{t+1})` for cluster `t` (1-based).
    pub fn bounds(&self, t: usize) -> ClusterBounds {
        let c = self.center(t);
        ClusterBounds {
            a: self.edge(t),
            b: c - self.inner_half_width,
            d: c + self.inner_half_width,
            a_next: self.edge(t + 1),
        }
    }

    /// `A_t`; neighbouring cells share the same computed boundary.
    fn edge(&self, t: usize) -> f64 {
        self.first_center - self.outer_half_width + 2.0 * self.outer_half_width * (t as f64 - 1.0)
    }

    /// `[A_1, A_{T+1})`.
    pub fn support(&self) -> (f64, f64) {
        (self.bounds(1).a, self.bounds(self.clusters).a_next)
    }

    /// Cluster whose cell `[A_t, A_{t+1})` contains `v`.
    pub fn cluster_of(&self, v: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if !(lo <= v && v < hi) {
            return None;
        }
        let t = ((v - lo) / (2.0 * self.outer_half_width)).floor() as usize + 1;
        // guard against rounding at the cell boundaries
        (t.saturating_sub(1).max(1)..=(t + 1).min(self.clusters)).find(|&s| {
            let b = self.bounds(s);
            b.a <= v && v < b.a_next
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterBounds {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub a_next: f64,
}

impl ClusterBounds {
    pub fn in_cell(&self, v: f64) -> bool {
        self.a <= v && v < self.a_next
    }

    pub fn in_sml(&self, v: f64) -> bool {
        self.b <= v && v < self.d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixParams {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    /// Spike range `T`; defaults to `⌈N²/α⌉`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    /// Probability that a coordinate carries the spike; defaults to `1/(2k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_spike: Option<f64>,
}

impl PrefixParams {
    pub fn new(k: usize, n: usize, d: usize, alpha: f64) -> Result<Self> {
        let p = PrefixParams {
            k,
            n,
            d,
            alpha,
            t: None,
            p_spike: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn spikes(&self) -> u64 {
        self.t.unwrap_or_else(|| {
            let n = self.n as f64;
            // the tolerance absorbs representation error in α
            (n * n / self.alpha - 1e-9).ceil().max(1.0) as u64
        })
    }

    pub fn spike_probability(&self) -> f64 {
        self.p_spike.unwrap_or(1.0 / (2.0 * self.k as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidK(self.k));
        }
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidParams("n and d must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParams("alpha must lie in (0, 1]".into()));
        }
        if self.spikes() < (self.n * self.n) as u64 {
            return Err(Error::InvalidParams("T must be at least N²".into()));
        }
        if !(0.0..=1.0).contains(&self.spike_probability()) {
            return Err(Error::InvalidParams("p_spike must be a probability".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    Sml,
    Big,
}

/// Latent variables behind a sample; ground truth for evaluation, never
/// shown to an adversary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SampleProvenance {
    Clustered { cluster: Vec<usize>, size: Vec<Size> },
    Prefix { spike: Vec<u64> },
}

impl SampleProvenance {
    pub fn len(&self) -> usize {
        match self {
            SampleProvenance::Clustered { cluster, .. } => cluster.len(),
            SampleProvenance::Prefix { spike } => spike.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const CLUSTERED_ROOT: &str = "root";

pub fn cluster_label(t: usize) -> String {
    format!("H{t}")
}

pub fn sml_label(t: usize) -> String {
    format!("H{t}.sml")
}

pub fn big_label(t: usize) -> String {
    format!("H{t}.big")
}

/// Root `[A_1, A_{T+1})`, cluster cells `H_t`, and their `sml` / `big`
/// children.
pub fn build_clustered_hierarchy(p: &ClusteredParams) -> Result<Hierarchy> {
    p.validate()?;
    let (lo, hi) = p.support();
    let mut specs = vec![NodeSpec::new(CLUSTERED_ROOT, None, ValueSet::interval(lo, hi)?)];
    for t in 1..=p.clusters {
        let b = p.bounds(t);
        let cell = cluster_label(t);
        specs.push(NodeSpec::new(cell.clone(), Some(CLUSTERED_ROOT), ValueSet::interval(b.a, b.a_next)?));
        specs.push(NodeSpec::new(sml_label(t), Some(&cell), ValueSet::interval(b.b, b.d)?));
        specs.push(NodeSpec::new(
            big_label(t),
            Some(&cell),
            ValueSet::intervals([(b.a, b.b), (b.d, b.a_next)])?,
        ));
    }
    Ok(Hierarchy::new("clustered", AttributeDomain::real(lo, hi)?, specs)?)
}

/// Node ids of a clustered hierarchy, indexed by cluster (`cell[t - 1]`).
#[derive(Clone, Debug)]
pub struct ClusteredNodes {
    pub root: NodeId,
    pub cell: Vec<NodeId>,
    pub sml: Vec<NodeId>,
    pub big: Vec<NodeId>,
}

impl ClusteredNodes {
    pub fn locate(h: &Hierarchy, p: &ClusteredParams) -> Result<Self> {
        let find = |label: &str| {
            h.node_by_label(label)
                .ok_or_else(|| Error::Precondition(format!("not a clustered hierarchy: no node `{label}`")))
        };
        let root = find(CLUSTERED_ROOT)?;
        if root != h.root() {
            return Err(Error::Precondition("not a clustered hierarchy: wrong root".into()));
        }
        let mut out = ClusteredNodes {
            root,
            cell: Vec::new(),
            sml: Vec::new(),
            big: Vec::new(),
        };
        for t in 1..=p.clusters {
            out.cell.push(find(&cluster_label(t))?);
            out.sml.push(find(&sml_label(t))?);
            out.big.push(find(&big_label(t))?);
        }
        Ok(out)
    }
}

/// Draws one coordinate from `N(mean, sd²)` conditioned on `[lo, hi)`.
fn draw_inside<R: Rng + ?Sized>(rng: &mut R, normal: &Normal<f64>, lo: f64, hi: f64) -> f64 {
    loop {
        let v = normal.sample(rng);
        if lo <= v && v < hi {
            return v;
        }
    }
}

pub fn sample_clustered(p: &ClusteredParams, seed: u64) -> Result<(Dataset, SampleProvenance)> {
    sample_clustered_with(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// As [`sample_clustered`], drawing from a caller-supplied generator.
pub fn sample_clustered_with<R: Rng + ?Sized>(p: &ClusteredParams, rng: &mut R) -> Result<(Dataset, SampleProvenance)> {
    p.validate()?;
    let (lo, hi) = p.support();
    let mut rows = Vec::with_capacity(p.n);
    let mut cluster = Vec::with_capacity(p.n);
    let mut size = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let s = if rng.random_bool(p.p_big) { Size::Big } else { Size::Sml };
        let t = rng.random_range(1..=p.clusters);
        let sd = match s {
            Size::Sml => p.sigma_sml,
            Size::Big => p.sigma_big,
        };
        let normal = Normal::new(p.center(t), sd).map_err(|e| Error::InvalidParams(e.to_string()))?;
        rows.push(Record((0..p.d).map(|_| draw_inside(rng, &normal, lo, hi)).collect()));
        cluster.push(t);
        size.push(s);
    }
    Ok((Dataset::new(p.d, rows)?, SampleProvenance::Clustered { cluster, size }))
}

/// Domain `{0..T}` with nodes `[0,t]` for `t = T..1`; the exact values are
/// the leaves, so `[0,t]` has children `[0,t-1]` and `t`.
pub fn build_prefix_hierarchy(t_max: u64) -> Result<Hierarchy> {
    if t_max < 1 {
        return Err(Error::InvalidParams("T must be at least 1".into()));
    }
    let specs = (1..=t_max)
        .rev()
        .map(|t| {
            let parent = (t < t_max).then(|| prefix_label(t + 1));
            Ok(NodeSpec::new(
                prefix_label(t),
                parent.as_deref(),
                ValueSet::interval(0.0, t as f64 + 1.0)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Hierarchy::new("prefix", AttributeDomain::integers(t_max), specs)?)
}

pub fn prefix_label(t: u64) -> String {
    format!("[0,{t}]")
}

/// Node ids of a prefix hierarchy: `node[t - 1]` is `[0,t]`.
#[derive(Clone, Debug)]
pub struct PrefixNodes {
    pub t_max: u64,
    node: Vec<NodeId>,
    upper: Vec<u64>,
}

impl PrefixNodes {
    pub fn locate(h: &Hierarchy) -> Result<Self> {
        let not_prefix = |m: String| Error::Precondition(format!("not a prefix hierarchy: {m}"));
        let t_max = h.len() as u64;
        if *h.domain() != AttributeDomain::integers(t_max) {
            return Err(not_prefix("domain is not {0..T}".into()));
        }
        let mut node = Vec::with_capacity(h.len());
        for t in 1..=t_max {
            let id = h
                .node_by_label(&prefix_label(t))
                .ok_or_else(|| not_prefix(format!("no node `{}`", prefix_label(t))))?;
            if h.depth(id) as u64 != t_max - t {
                return Err(not_prefix(format!("node `{}` is misplaced", prefix_label(t))));
            }
            node.push(id);
        }
        let mut upper = vec![0; h.len()];
        for (i, id) in node.iter().enumerate() {
            upper[id.index()] = i as u64 + 1;
        }
        Ok(PrefixNodes { t_max, node, upper })
    }

    pub fn node(&self, t: u64) -> NodeId {
        self.node[(t - 1) as usize]
    }

    /// `t` for the node `[0,t]`.
    pub fn upper(&self, id: NodeId) -> u64 {
        self.upper[id.index()]
    }
}

pub fn sample_prefix(p: &PrefixParams, seed: u64) -> Result<(Dataset, SampleProvenance)> {
    sample_prefix_with(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_prefix_with<R: Rng + ?Sized>(p: &PrefixParams, rng: &mut R) -> Result<(Dataset, SampleProvenance)> {
    p.validate()?;
    let t_max = p.spikes();
    let q = p.spike_probability();
    let mut rows = Vec::with_capacity(p.n);
    let mut spike = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let t = rng.random_range(1..=t_max);
        rows.push(Record(
            (0..p.d)
                .map(|_| if rng.random_bool(q) { t as f64 } else { 0.0 })
                .collect(),
        ));
        spike.push(t);
    }
    Ok((Dataset::new(p.d, rows)?, SampleProvenance::Prefix { spike }))
}

/// Whether every spike value is distinct.
pub fn is_collision_free(prov: &SampleProvenance) -> Result<bool> {
    let SampleProvenance::Prefix { spike } = prov else {
        return Err(Error::Precondition("collision check needs prefix provenance".into()));
    };
    let mut seen = std::collections::HashSet::with_capacity(spike.len());
    Ok(spike.iter().all(|t| seen.insert(*t)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub t: usize,
    pub size: usize,
    pub big_count: usize,
    /// Exactly `k` members, exactly one of them big.
    pub x_good: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDiagnostics {
    pub clusters: Vec<ClusterStat>,
    /// Cluster of each row by containment in `H_t^D`, if any.
    pub membership: Vec<Option<usize>>,
    /// Whether each row has a coordinate in its cluster's `big` region.
    pub big: Vec<bool>,
}

impl ClusterDiagnostics {
    pub fn x_good_count(&self) -> usize {
        self.clusters.iter().filter(|c| c.x_good).count()
    }
}

/// The cluster `t` with `x ∈ H_t^D`, if any.
pub fn home_cluster(x: &Record, p: &ClusteredParams) -> Option<usize> {
    x.0.first()
        .and_then(|v| p.cluster_of(*v))
        .filter(|&t| x.0.iter().all(|v| p.bounds(t).in_cell(*v)))
}

/// Cluster sizes and goodness by actual containment, not by provenance.
pub fn classify_clusters(x: &Dataset, prov: &SampleProvenance, p: &ClusteredParams) -> Result<ClusterDiagnostics> {
    if !matches!(prov, SampleProvenance::Clustered { .. }) {
        return Err(Error::Precondition("cluster diagnostics need clustered provenance".into()));
    }
    if prov.len() != x.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} provenance entries", x.len(), prov.len())));
    }
    let mut stats: Vec<ClusterStat> = (1..=p.clusters)
        .map(|t| ClusterStat {
            t,
            size: 0,
            big_count: 0,
            x_good: false,
        })
        .collect();
    let mut membership = Vec::with_capacity(x.len());
    let mut big = Vec::with_capacity(x.len());
    for row in x.rows() {
        let t = home_cluster(row, p);
        let is_big = t.is_some_and(|t| row.0.iter().any(|v| !p.bounds(t).in_sml(*v)));
        if let Some(t) = t {
            stats[t - 1].size += 1;
            stats[t - 1].big_count += usize::from(is_big);
        }
        membership.push(t);
        big.push(is_big);
    }
    for s in stats.iter_mut() {
        s.x_good = s.size == p.k && s.big_count == 1;
    }
    Ok(ClusterDiagnostics {
        clusters: stats,
        membership,
        big,
    })
}
