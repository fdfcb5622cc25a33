//! Dependency graphs and their closed neighborhoods.
//!
//! A dependency graph encodes local dependence: two blocks of variables whose
//! index sets are not joined by any edge are independent. The dependency
//! neighborhood of a finite index set `J` is the closed neighborhood
//! `N(J) = J ∪ adj(J)`, and every sum in the remainder terms runs over chains
//! `i₂ ∈ N(i₁)`, `i₃ ∈ N(i₁, i₂)`, ….
//!
//! Vertices are stored in lexicographic order and every enumeration follows
//! that order, which keeps results reproducible. Internally vertices are
//! addressed by their position (`usize`) in that order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifier of a vertex: a plain integer or a lattice point.
///
/// An integer vertex is a one-coordinate tuple, so the two forms share one
/// total order (lexicographic on the coordinates). Lattice vertices print as
/// comma-joined coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct VertexId(Vec<i64>);

impl VertexId {
    /// An integer vertex.
    pub fn int(v: i64) -> Self {
        VertexId(vec![v])
    }

    /// A lattice vertex from its coordinates.
    pub fn point(coords: &[i64]) -> Self {
        VertexId(coords.to_vec())
    }

    /// The coordinates (a single entry for an integer vertex).
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Parses `"7"` or `"1,-2,3"`.
    pub fn parse(token: &str) -> Result<Self> {
        let coords: core::result::Result<Vec<i64>, _> =
            token.split(',').map(|c| c.trim().parse::<i64>()).collect();
        match coords {
            Ok(c) if !c.is_empty() => Ok(VertexId(c)),
            _ => Err(Error::InvalidArgument(format!("cannot parse vertex `{token}`"))),
        }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, c) in self.0.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl From<VertexId> for String {
    fn from(v: VertexId) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for VertexId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        VertexId::parse(&s)
    }
}

/// An undirected graph with symmetric adjacency and no self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    vertices: Vec<VertexId>,
    adj: Vec<Vec<usize>>,
}

/// How [`DependencyGraph::max_neighborhood_size`] should compute its answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeMethod {
    /// Enumerate every chain, visiting at most `budget` chain nodes.
    Exact {
        /// Node-visit cap; exceeding it is an error.
        budget: u64,
    },
    /// The bound `(q+1)·(maxdeg+1)`.
    Shortcut,
}

/// Result of [`DependencyGraph::max_neighborhood_size`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodSize {
    /// The computed size `M`.
    pub value: usize,
    /// `true` when `value` is only an upper bound (shortcut method).
    pub upper_bound: bool,
}

impl DependencyGraph {
    /// Builds a graph from an edge list.
    ///
    /// Without `vertices`, the vertex set is inferred from the edges. With an
    /// explicit list, isolated vertices are retained and every edge endpoint
    /// must be declared. Duplicate edges (in either orientation) collapse.
    /// Self-loops and repeated declarations are rejected.
    pub fn from_edge_list(
        edges: &[(VertexId, VertexId)],
        vertices: Option<&[VertexId]>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        if let Some(vs) = vertices {
            for v in vs {
                if !set.insert(v.clone()) {
                    return Err(Error::DuplicateVertex(v.to_string()));
                }
            }
        }
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(a.to_string()));
            }
            for v in [a, b] {
                if vertices.is_some() {
                    if !set.contains(v) {
                        return Err(Error::DanglingVertex(v.to_string()));
                    }
                } else {
                    set.insert(v.clone());
                }
            }
        }
        let vertices: Vec<VertexId> = set.into_iter().collect();
        let mut adj = vec![BTreeSet::new(); vertices.len()];
        for (a, b) in edges {
            let ia = vertices.binary_search(a).expect("vertex collected above");
            let ib = vertices.binary_search(b).expect("vertex collected above");
            adj[ia].insert(ib);
            adj[ib].insert(ia);
        }
        Ok(Self::from_sets(vertices, adj))
    }

    fn from_sets(vertices: Vec<VertexId>, adj: Vec<BTreeSet<usize>>) -> Self {
        DependencyGraph {
            vertices,
            adj: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    /// The m-dependent graph on a finite subset `T ⊂ Z^d`: distinct points are
    /// adjacent iff their max-norm distance is at most `m`.
    pub fn m_dependent_lattice(points: &[Vec<i64>], m: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidArgument(
                "lattice points must share a positive dimension".into(),
            ));
        }
        let mut uniq: BTreeSet<VertexId> = BTreeSet::new();
        for p in points {
            if !uniq.insert(VertexId::point(p)) {
                return Err(Error::DuplicateVertex(VertexId::point(p).to_string()));
            }
        }
        let vertices: Vec<VertexId> = uniq.into_iter().collect();
        let n = vertices.len();
        let mut adj = vec![BTreeSet::new(); n];
        let m = m as i64;
        // Probe the (2m+1)^d window when it is smaller than the point set,
        // otherwise compare all pairs.
        let window = (2 * m as u128 + 1).checked_pow(d as u32).unwrap_or(u128::MAX);
        if window < n as u128 {
            let mut offset = vec![-m; d];
            loop {
                if offset.iter().any(|&o| o != 0) {
                    for (i, v) in vertices.iter().enumerate() {
                        let probe: Vec<i64> =
                            v.coords().iter().zip(&offset).map(|(a, b)| a + b).collect();
                        if let Ok(j) = vertices.binary_search(&VertexId(probe)) {
                            adj[i].insert(j);
                        }
                    }
                }
                // Odometer increment over {-m..m}^d.
                let mut pos = 0;
                loop {
                    if pos == d {
                        return Ok(Self::from_sets(vertices, adj));
                    }
                    offset[pos] += 1;
                    if offset[pos] > m {
                        offset[pos] = -m;
                        pos += 1;
                    } else {
                        break;
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = vertices[i]
                    .coords()
                    .iter()
                    .zip(vertices[j].coords())
                    .map(|(a, b)| (a - b).abs())
                    .max()
                    .unwrap_or(0);
                if dist <= m {
                    adj[i].insert(j);
                    adj[j].insert(i);
                }
            }
        }
        Ok(Self::from_sets(vertices, adj))
    }

    /// The dependency graph of an order-`m` U-statistic over `[n] = {1,…,n}`.
    ///
    /// Vertices are the nondecreasing `m`-tuples (`include_diagonal = true`)
    /// or the strictly increasing ones (`false`, the index set of the
    /// classical Hoeffding statistic); two tuples are adjacent iff they share
    /// a coordinate value.
    pub fn u_stat(n: usize, m: usize, include_diagonal: bool) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("U-statistic order m = {m} must be at least 2")));
        }
        if m > n {
            return Err(Error::InvalidArgument(format!("U-statistic order m = {m} exceeds n = {n}")));
        }
        let mut tuples: Vec<Vec<i64>> = Vec::new();
        let mut cur: Vec<i64> = Vec::with_capacity(m);
        fn rec(n: i64, m: usize, diag: bool, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
            if cur.len() == m {
                out.push(cur.clone());
                return;
            }
            let start = match cur.last() {
                None => 1,
                Some(&l) if diag => l,
                Some(&l) => l + 1,
            };
            for v in start..=n {
                cur.push(v);
                rec(n, m, diag, cur, out);
                cur.pop();
            }
        }
        rec(n as i64, m, include_diagonal, &mut cur, &mut tuples);
        // Tuples come out in lexicographic order already.
        let vertices: Vec<VertexId> = tuples.iter().map(|t| VertexId::point(t)).collect();
        // Group tuples by the values they contain, then connect within groups.
        let mut by_value: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (idx, t) in tuples.iter().enumerate() {
            let mut vals = t.clone();
            vals.dedup();
            for v in vals {
                by_value.entry(v).or_default().push(idx);
            }
        }
        let mut adj = vec![BTreeSet::new(); vertices.len()];
        for members in by_value.values() {
            for &a in members {
                for &b in members {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        Ok(Self::from_sets(vertices, adj))
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    /// `true` when the graph has no vertices.
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Vertices in their canonical (lexicographic) order.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    /// Position of a vertex in the canonical order.
    pub fn index_of(&self, v: &VertexId) -> Result<usize> {
        self.vertices
            .binary_search(v)
            .map_err(|_| Error::UnknownVertex(v.to_string()))
    }

    /// Open adjacency of the vertex at position `i`, sorted.
    pub fn adj_idx(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Open adjacency of a vertex, sorted.
    pub fn adj(&self, v: &VertexId) -> Result<Vec<VertexId>> {
        let i = self.index_of(v)?;
        Ok(self.adj[i].iter().map(|&j| self.vertices[j].clone()).collect())
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as index pairs `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges_idx(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    /// Maximum open degree.
    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Closed neighborhood `N(J) = J ∪ ⋃_{j∈J} adj(j)`, sorted.
    pub fn neighborhood(&self, query: &[VertexId]) -> Result<Vec<VertexId>> {
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let idx: Result<Vec<usize>> = query.iter().map(|v| self.index_of(v)).collect();
        Ok(self
            .neighborhood_idx(&idx?)
            .into_iter()
            .map(|j| self.vertices[j].clone())
            .collect())
    }

    /// Closed neighborhood of a set of vertex positions, sorted.
    pub fn neighborhood_idx(&self, query: &[usize]) -> Vec<usize> {
        let mut acc: Vec<usize> = Vec::new();
        for &j in query {
            acc = self.extend_neighborhood(&acc, j);
        }
        acc
    }

    /// `N(J ∪ {j})` from a sorted `N(J)`: merges `{j} ∪ adj(j)` into `base`.
    pub fn extend_neighborhood(&self, base: &[usize], j: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(base.len() + self.adj[j].len() + 1);
        let closed = ClosedIter { own: Some(j), rest: &self.adj[j] };
        let mut a = base.iter().copied().peekable();
        let mut b = closed.peekable();
        loop {
            match (a.peek().copied(), b.peek().copied()) {
                (None, None) => break,
                (Some(x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(y)) => {
                    out.push(y);
                    b.next();
                }
                (Some(x), Some(y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
            }
        }
        out
    }

    /// `M = max |N(i₁,…,i_{q+1})|` over chains `i₁ ∈ I`, `i_{j+1} ∈ N(i_{1:j})`.
    ///
    /// `q` is the moment order (⌈p⌉); chains therefore have `q + 1` entries,
    /// which is the neighborhood size entering the Wasserstein-p bound. The
    /// shortcut returns `(q+1)·(maxdeg+1)`, an upper bound because each chain
    /// step adds at most one closed neighborhood.
    pub fn max_neighborhood_size(&self, q: usize, method: SizeMethod) -> Result<NeighborhoodSize> {
        if q == 0 {
            return Err(Error::InvalidArgument("order q must be at least 1".into()));
        }
        match method {
            SizeMethod::Shortcut => Ok(NeighborhoodSize {
                value: (q + 1).saturating_mul(self.max_degree() + 1).min(self.len()),
                upper_bound: true,
            }),
            SizeMethod::Exact { budget } => {
                let mut best = 0usize;
                let mut visits = 0u64;
                let mut chain = Vec::with_capacity(q + 1);
                for i in 0..self.len() {
                    let base = self.extend_neighborhood(&[], i);
                    chain.push(i);
                    self.max_rec(&base, q, &mut chain, &mut best, &mut visits, budget)?;
                    chain.pop();
                }
                Ok(NeighborhoodSize { value: best, upper_bound: false })
            }
        }
    }

    fn max_rec(
        &self,
        nb: &[usize],
        q: usize,
        chain: &mut Vec<usize>,
        best: &mut usize,
        visits: &mut u64,
        budget: u64,
    ) -> Result<()> {
        *visits += 1;
        if *visits > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if chain.len() == q + 1 || nb.len() == self.len() {
            *best = (*best).max(nb.len());
            return Ok(());
        }
        for &j in nb {
            let next = self.extend_neighborhood(nb, j);
            chain.push(j);
            self.max_rec(&next, q, chain, best, visits, budget)?;
            chain.pop();
        }
        Ok(())
    }
}

struct ClosedIter<'a> {
    own: Option<usize>,
    rest: &'a [usize],
}

impl Iterator for ClosedIter<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        match (self.own, self.rest.first()) {
            (Some(o), Some(&r)) if r < o => {
                self.rest = &self.rest[1..];
                Some(r)
            }
            (Some(o), _) => {
                self.own = None;
                Some(o)
            }
            (None, Some(&r)) => {
                self.rest = &self.rest[1..];
                Some(r)
            }
            (None, None) => None,
        }
    }
}
