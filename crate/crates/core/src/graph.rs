//! Loopless multigraphs, degree sequences and edge-list ingestion.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Vector of node degrees with an even sum.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegreeSequence(Vec<u32>);

impl DegreeSequence {
    pub fn new(degrees: Vec<u32>) -> Result<Self> {
        let total: u64 = degrees.iter().map(|&d| u64::from(d)).sum();
        if total % 2 == 1 {
            return Err(Error::OddDegreeSum(total));
        }
        Ok(Self(degrees))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of edges `m`, half the degree sum.
    pub fn edge_count(&self) -> u64 {
        self.0.iter().map(|&d| u64::from(d)).sum::<u64>() / 2
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&d| f64::from(d)).collect()
    }

    /// Index of the first zero entry, if any.
    pub fn first_zero(&self) -> Option<usize> {
        self.0.iter().position(|&d| d == 0)
    }

    /// True when some loopless multigraph realises the sequence, i.e. no
    /// node needs more edges than all other nodes together can absorb.
    pub fn is_realisable(&self) -> bool {
        let m = self.edge_count();
        self.0.iter().all(|&d| u64::from(d) <= m)
    }

    /// Adds one to the degrees of `i` and `j`.
    pub fn incremented(&self, i: usize, j: usize) -> Self {
        let mut d = self.0.clone();
        d[i] += 1;
        d[j] += 1;
        Self(d)
    }
}

/// Symmetric non-negative integer adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Multigraph {
    n: usize,
    w: Vec<u32>,
    m: u64,
}

impl Multigraph {
    /// Builds a graph from a list of node pairs, one entry per parallel edge.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut w = vec![0u32; n * n];
        for (position, &(i, j)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::InvalidAdjacency("edge endpoint out of range"));
            }
            if i == j {
                return Err(Error::SelfLoop { position });
            }
            w[i * n + j] += 1;
            w[j * n + i] += 1;
        }
        Ok(Self {
            n,
            w,
            m: edges.len() as u64,
        })
    }

    /// Builds a graph from a dense row-major `n * n` adjacency.
    pub fn from_adjacency(n: usize, w: Vec<u32>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: n * n,
                found: w.len(),
            });
        }
        let mut m = 0u64;
        for i in 0..n {
            if w[i * n + i] != 0 {
                return Err(Error::InvalidAdjacency("nonzero diagonal"));
            }
            for j in (i + 1)..n {
                if w[i * n + j] != w[j * n + i] {
                    return Err(Error::InvalidAdjacency("asymmetric adjacency"));
                }
                m += u64::from(w[i * n + j]);
            }
        }
        Ok(Self { n, w, m })
    }

    /// Deterministic realisation of `d`: repeatedly joins the two nodes with
    /// the largest remaining degree (lowest index on ties).
    pub fn realise(d: &DegreeSequence) -> Result<Self> {
        if !d.is_realisable() {
            return Err(Error::NotGraphical);
        }
        let n = d.len();
        let mut remaining: Vec<u32> = d.as_slice().to_vec();
        let mut w = vec![0u32; n * n];
        let top = |remaining: &[u32], skip: Option<usize>| {
            let mut best: Option<usize> = None;
            for (i, &r) in remaining.iter().enumerate() {
                if r > 0 && Some(i) != skip && best.is_none_or(|b| r > remaining[b]) {
                    best = Some(i);
                }
            }
            best
        };
        while let Some(a) = top(&remaining, None) {
            let b = top(&remaining, Some(a)).ok_or(Error::NotGraphical)?;
            remaining[a] -= 1;
            remaining[b] -= 1;
            w[a * n + b] += 1;
            w[b * n + a] += 1;
        }
        Self::from_adjacency(n, w)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> u64 {
        self.m
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.w[i * self.n + j]
    }

    /// Row-major dense adjacency.
    pub fn adjacency(&self) -> &[u32] {
        &self.w
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn degrees(&self) -> Vec<u32> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn degree_sequence(&self) -> DegreeSequence {
        DegreeSequence(self.degrees())
    }

    /// Edge multiset as `(i, j)` with `i < j`, one entry per parallel edge,
    /// in row-major order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.m as usize);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for _ in 0..self.weight(i, j) {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn is_simple(&self) -> bool {
        self.w.iter().all(|&x| x <= 1)
    }

    /// Adjacency as a dense `f64` matrix.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| f64::from(self.weight(i, j)))
    }
}

/// The simple graph obtained by merging parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapsedStats {
    n: usize,
    /// Row-major indicator of `w_ij >= 1`.
    pub x: Vec<bool>,
    /// Number of distinct neighbours of each node.
    pub b: Vec<u32>,
    /// Number of distinct adjacent pairs.
    pub y: u64,
}

impl CollapsedStats {
    pub fn indicator(&self, i: usize, j: usize) -> bool {
        self.x[i * self.n + j]
    }
}

pub fn collapse(g: &Multigraph) -> CollapsedStats {
    let n = g.node_count();
    let x: Vec<bool> = g.adjacency().iter().map(|&w| w >= 1).collect();
    let b: Vec<u32> = (0..n)
        .map(|i| x[i * n..(i + 1) * n].iter().filter(|&&v| v).count() as u32)
        .collect();
    let y = b.iter().map(|&v| u64::from(v)).sum::<u64>() / 2;
    CollapsedStats { n, x, b, y }
}

/// One interaction `u -- v` observed at time `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRecord<K> {
    pub u: K,
    pub v: K,
    pub t: Option<i64>,
}

impl<K> EdgeRecord<K> {
    pub fn new(u: K, v: K, t: Option<i64>) -> Self {
        Self { u, v, t }
    }
}

/// A multigraph together with the original node identifiers, `ids[i]` being
/// the identifier of dense index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledGraph<K> {
    pub graph: Multigraph,
    pub ids: Vec<K>,
}

/// Accumulates records into a multigraph. Node identifiers are densely
/// re-indexed in order of first appearance.
pub fn from_edge_list<K: Ord + Clone>(
    records: &[EdgeRecord<K>],
    skip_self_loops: bool,
) -> Result<LabelledGraph<K>> {
    if records.is_empty() {
        return Err(Error::EmptyEdgeList);
    }
    let mut index: BTreeMap<K, usize> = BTreeMap::new();
    let mut ids: Vec<K> = Vec::new();
    let mut pairs = Vec::with_capacity(records.len());
    for (position, rec) in records.iter().enumerate() {
        if rec.u == rec.v {
            if skip_self_loops {
                continue;
            }
            return Err(Error::SelfLoop { position });
        }
        let mut lookup = |key: &K| {
            *index.entry(key.clone()).or_insert_with(|| {
                ids.push(key.clone());
                ids.len() - 1
            })
        };
        let i = lookup(&rec.u);
        let j = lookup(&rec.v);
        pairs.push((i, j));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let graph = Multigraph::from_edges(ids.len(), &pairs)?;
    Ok(LabelledGraph { graph, ids })
}

/// Keeps the most recent `ceil(fraction * len)` records, plus every record
/// tied with the earliest kept timestamp. The result is sorted by time.
pub fn temporal_threshold<K: Clone>(
    records: &[EdgeRecord<K>],
    fraction: f64,
) -> Result<Vec<EdgeRecord<K>>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let mut stamped: Vec<(i64, usize)> = Vec::with_capacity(records.len());
    for (position, rec) in records.iter().enumerate() {
        match rec.t {
            Some(t) => stamped.push((t, position)),
            None => return Err(Error::MissingTimestamp { position }),
        }
    }
    if stamped.is_empty() {
        return Ok(Vec::new());
    }
    stamped.sort();
    let len = stamped.len();
    // Guard against 0.05 * 100 landing a hair above 5.
    let keep = (libm::ceil(fraction * len as f64 - 1e-9) as usize).clamp(1, len);
    let cut = stamped[len - keep].0;
    Ok(stamped
        .iter()
        .filter(|(t, _)| *t >= cut)
        .map(|&(_, position)| records[position].clone())
        .collect())
}

/// Position of pair `(i, j)`, `i < j`, in a packed upper triangle.
#[inline]
pub(crate) fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(u: &'static str, v: &'static str, t: i64) -> EdgeRecord<&'static str> {
        EdgeRecord::new(u, v, Some(t))
    }

    #[test]
    fn accumulates_multiplicities() {
        let g = from_edge_list(&[rec("a", "b", 1), rec("a", "b", 2), rec("b", "c", 3)], false)
            .unwrap();
        assert_eq!(g.ids, vec!["a", "b", "c"]);
        assert_eq!(g.graph.weight(0, 1), 2);
        assert_eq!(g.graph.weight(1, 0), 2);
        assert_eq!(g.graph.weight(1, 2), 1);
        assert_eq!(g.graph.edge_count(), 3);
        assert_eq!(g.graph.degrees(), vec![2, 3, 1]);
    }

    #[test]
    fn empty_and_self_loop_inputs() {
        let none: [EdgeRecord<&str>; 0] = [];
        assert_eq!(from_edge_list(&none, false), Err(Error::EmptyEdgeList));
        assert_eq!(
            from_edge_list(&[rec("a", "a", 1)], true),
            Err(Error::EmptyGraph)
        );
        assert_eq!(
            from_edge_list(&[rec("a", "a", 1)], false),
            Err(Error::SelfLoop { position: 0 })
        );
    }

    #[test]
    fn threshold_keeps_suffix() {
        let records: Vec<_> = (0..100)
            .map(|t| EdgeRecord::new(t as u32, t as u32 + 1, Some(t)))
            .collect();
        let kept = temporal_threshold(&records, 0.05).unwrap();
        assert_eq!(kept.len(), 5);
        assert!(kept.iter().all(|r| r.t.unwrap() >= 95));
        assert_eq!(temporal_threshold(&records, 1.0).unwrap().len(), 100);
        assert!(temporal_threshold(&records, 0.0).is_err());
        assert!(temporal_threshold(&records, 1.5).is_err());
    }

    #[test]
    fn threshold_includes_ties() {
        let mut records: Vec<_> = (0..10).map(|t| EdgeRecord::new(0u8, 1u8, Some(t))).collect();
        records.push(EdgeRecord::new(2, 3, Some(9)));
        records.push(EdgeRecord::new(3, 4, Some(8)));
        // 3 of 12 requested: timestamps 9, 9, 8 -> cut 8 keeps both records at 8.
        let kept = temporal_threshold(&records, 0.25).unwrap();
        assert_eq!(kept.len(), 4);
    }

    #[test]
    fn collapse_examples() {
        let tri = Multigraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let c = collapse(&tri);
        assert_eq!(c.b, vec![2, 2, 2]);
        assert_eq!(c.y, 3);

        let double = Multigraph::from_edges(2, &[(0, 1), (0, 1)]).unwrap();
        let c = collapse(&double);
        assert_eq!(c.b, vec![1, 1]);
        assert_eq!(c.y, 1);

        let empty = Multigraph::from_edges(3, &[]).unwrap();
        let c = collapse(&empty);
        assert_eq!(c.b, vec![0, 0, 0]);
        assert_eq!(c.y, 0);
    }

    #[test]
    fn degree_sequence_parity() {
        assert_eq!(DegreeSequence::new(vec![1, 1, 1]), Err(Error::OddDegreeSum(3)));
        assert_eq!(DegreeSequence::new(vec![2, 2, 2]).unwrap().edge_count(), 3);
    }

    #[test]
    fn realise_matches_degrees() {
        for d in [vec![2u32, 2, 2], vec![5, 1, 1, 1, 1, 1], vec![6, 4, 2], vec![3, 3, 2, 2]] {
            let seq = DegreeSequence::new(d.clone()).unwrap();
            let g = Multigraph::realise(&seq).unwrap();
            assert_eq!(g.degrees(), d);
        }
        let bad = DegreeSequence::new(vec![4, 1, 1]).unwrap();
        assert_eq!(Multigraph::realise(&bad), Err(Error::NotGraphical));
    }

    #[test]
    fn adjacency_validation() {
        assert!(Multigraph::from_adjacency(2, vec![0, 1, 2, 0]).is_err());
        assert!(Multigraph::from_adjacency(2, vec![1, 0, 0, 0]).is_err());
        let g = Multigraph::from_adjacency(2, vec![0, 3, 3, 0]).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.edge_list(), vec![(0, 1); 3]);
    }

    #[test]
    fn packed_layout() {
        let n = 5;
        let mut seen = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                seen.push(packed_index(n, i, j));
            }
        }
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }
}
