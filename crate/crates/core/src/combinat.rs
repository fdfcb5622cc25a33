//! Compositions, restricted compositions, sign sequences and neighborhood
//! index chains — the index sets of every sum in the remainder terms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::depgraph::{DependencyGraph, VertexId};
use crate::{Error, Result};

/// An integer composition `(η₁,…,η_ℓ)`: positive parts in a fixed order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Composition(Vec<usize>);

impl Composition {
    /// Wraps `parts`, rejecting empty input and zero parts.
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid composition {parts:?}")));
        }
        Ok(Composition(parts))
    }

    /// The parts.
    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    /// The sum of the parts.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// `true` when every part but the last is at least 2.
    pub fn is_restricted(&self) -> bool {
        self.0[..self.0.len() - 1].iter().all(|&p| p >= 2)
    }

    /// Half-open position ranges of the blocks: `[0,η₁)`, `[η₁,η₁+η₂)`, ….
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.0
            .iter()
            .map(|&p| {
                let r = start..start + p;
                start += p;
                r
            })
            .collect()
    }
}

/// All `2^{t−1}` compositions of `t`, in reverse-lexicographic order
/// (`(t)` first, `(1,…,1)` last).
pub fn compositions(t: usize) -> Result<Vec<Composition>> {
    if t == 0 {
        return Err(Error::InvalidArgument("compositions need t ≥ 1".into()));
    }
    let mut out = Vec::with_capacity(1 << (t - 1).min(30));
    let mut cur = Vec::new();
    comp_rec(t, &mut cur, &mut out, |_, _| true);
    Ok(out)
}

/// The restricted compositions `C*(t)`: every part except possibly the last
/// is at least 2. Same ordering as [`compositions`].
pub fn compositions_star(t: usize) -> Result<Vec<Composition>> {
    if t < 2 {
        return Err(Error::InvalidArgument("restricted compositions need t ≥ 2".into()));
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    // A part smaller than 2 is only allowed when it exhausts the remainder.
    comp_rec(t, &mut cur, &mut out, |part, remaining| part >= 2 || part == remaining);
    Ok(out)
}

fn comp_rec(
    remaining: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Composition>,
    allow: impl Fn(usize, usize) -> bool + Copy,
) {
    if remaining == 0 {
        out.push(Composition(cur.clone()));
        return;
    }
    for part in (1..=remaining).rev() {
        if allow(part, remaining) {
            cur.push(part);
            comp_rec(remaining - part, cur, out, allow);
            cur.pop();
        }
    }
}

/// A sequence `(t₁,…,t_K)` with `t₁ = 0` and `|t_j| ≤ j−1`.
///
/// The absolute value of `t_j` selects the index set of the `j`-th summation
/// index, `N(i_{1:|t_j|})`, and the strictly positive entries mark where a new
/// expectation factor starts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignSequence(Vec<i64>);

impl SignSequence {
    /// Validates `t₁ = 0` and `|t_j| ≤ j − 1`.
    pub fn new(t: Vec<i64>) -> Result<Self> {
        if t.first() != Some(&0) {
            return Err(Error::InvalidArgument("sign sequence must start with 0".into()));
        }
        for (j, &v) in t.iter().enumerate() {
            if v.unsigned_abs() as usize > j {
                return Err(Error::InvalidArgument(format!(
                    "entry {} of sign sequence has |t| = {} > {}",
                    j + 1,
                    v.unsigned_abs(),
                    j
                )));
            }
        }
        Ok(SignSequence(t))
    }

    /// The entries.
    pub fn values(&self) -> &[i64] {
        &self.0
    }

    /// Length `K`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always `false`: a sign sequence holds at least `t₁`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based positions `q₁ < … < q_z` of the strictly positive entries.
    pub fn positive_positions(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(j, _)| j + 1)
            .collect()
    }

    /// The factorisation `[q₁−q₀, …, q_{z+1}−q_z]` with `q₀ = 1`,
    /// `q_{z+1} = K+1`.
    pub fn blocks(&self) -> Composition {
        let mut qs = vec![1];
        qs.extend(self.positive_positions());
        qs.push(self.len() + 1);
        Composition(qs.windows(2).map(|w| w[1] - w[0]).collect())
    }

    /// `true` when some `t_j` with `j ≥ 2` is zero (the sum is then empty).
    pub fn has_empty_range(&self) -> bool {
        self.0[1..].contains(&0)
    }

    /// Membership in `M_{1,K}`: `t_{j+1} = ±j` and `min(t_j, t_{j+1}) < 0`.
    pub fn is_in_m1(&self) -> bool {
        (1..self.len())
            .all(|j| self.0[j].unsigned_abs() as usize == j && self.0[j - 1].min(self.0[j]) < 0)
    }

    /// The member of `M_{1,K}` whose block structure is `c ∈ C*(K)`.
    pub fn from_restricted(c: &Composition) -> Result<Self> {
        if !c.is_restricted() {
            return Err(Error::InvalidArgument(format!("{:?} is not in C*", c.parts())));
        }
        let k = c.total();
        let mut t: Vec<i64> = (0..k as i64).map(|j| -j).collect();
        let mut pos = 0;
        for &p in &c.parts()[..c.parts().len() - 1] {
            pos += p;
            t[pos] = pos as i64;
        }
        SignSequence::new(t)
    }
}

/// All members of `M_{1,k+2}`, positive signs explored first.
///
/// Each member has `t₂ = −1`; the map `t ↦ t.blocks()` is a bijection onto
/// `C*(k+2)`.
pub fn sign_sequences(k: usize) -> Result<Vec<SignSequence>> {
    if k == 0 {
        return Err(Error::InvalidArgument("sign sequences need k ≥ 1".into()));
    }
    let len = k + 2;
    let mut out = Vec::new();
    let mut cur = vec![0i64];
    sign_rec(len, &mut cur, &mut out);
    Ok(out)
}

fn sign_rec(len: usize, cur: &mut Vec<i64>, out: &mut Vec<SignSequence>) {
    let j = cur.len();
    if j == len {
        out.push(SignSequence(cur.clone()));
        return;
    }
    let prev = cur[j - 1];
    for cand in [j as i64, -(j as i64)] {
        if prev.min(cand) < 0 {
            cur.push(cand);
            sign_rec(len, cur, out);
            cur.pop();
        }
    }
}

/// Lazy stream of neighborhood index chains `(i₁,…,i_q)` as vertex
/// positions.
///
/// With the default orders, `i₁` ranges over all vertices and
/// `i_{j+1} ∈ N(i_{1:j})`. With a sign sequence, `i_j` ranges over
/// `N(i_{1:|t_j|})` (empty when `t_j = 0`). Enumeration is depth-first in
/// vertex order, so the stream is deterministic; restricting `i₁` to a range
/// partitions it.
pub struct Chains<'g> {
    g: &'g DependencyGraph,
    q: usize,
    orders: Vec<usize>,
    first: Range<usize>,
    chain: Vec<usize>,
    prefix: Vec<Vec<usize>>,
    frames: Vec<(Vec<usize>, usize)>,
    state: ChainState,
}

#[derive(PartialEq)]
enum ChainState {
    Fresh,
    Yielded,
    Done,
}

/// Enumerates chains of length `q`; see [`Chains`].
pub fn enumerate_chains<'g>(
    g: &'g DependencyGraph,
    q: usize,
    signs: Option<&SignSequence>,
) -> Result<Chains<'g>> {
    enumerate_chains_from(g, q, signs, 0..g.len())
}

/// Like [`enumerate_chains`] with `i₁` restricted to `first`.
pub fn enumerate_chains_from<'g>(
    g: &'g DependencyGraph,
    q: usize,
    signs: Option<&SignSequence>,
    first: Range<usize>,
) -> Result<Chains<'g>> {
    if q == 0 {
        return Err(Error::InvalidArgument("chains need q ≥ 1".into()));
    }
    let orders: Vec<usize> = match signs {
        Some(t) => {
            if t.len() < q {
                return Err(Error::InvalidArgument(format!(
                    "sign sequence of length {} is shorter than q = {q}",
                    t.len()
                )));
            }
            t.values()[..q].iter().map(|v| v.unsigned_abs() as usize).collect()
        }
        None => (0..q).collect(),
    };
    let empty = orders[1..].contains(&0) || first.start >= first.end.min(g.len());
    let first = first.start..first.end.min(g.len());
    Ok(Chains {
        g,
        q,
        orders,
        first,
        chain: Vec::with_capacity(q),
        prefix: Vec::with_capacity(q),
        frames: Vec::with_capacity(q),
        state: if empty { ChainState::Done } else { ChainState::Fresh },
    })
}

impl Iterator for Chains<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        match self.state {
            ChainState::Done => return None,
            ChainState::Fresh => {
                self.frames.push((self.first.clone().collect(), 0));
                self.state = ChainState::Yielded;
            }
            ChainState::Yielded => {
                self.chain.pop();
                self.prefix.pop();
            }
        }
        loop {
            let Some((cands, cursor)) = self.frames.last_mut() else {
                self.state = ChainState::Done;
                return None;
            };
            if *cursor < cands.len() {
                let v = cands[*cursor];
                *cursor += 1;
                let nb = match self.prefix.last() {
                    Some(prev) => self.g.extend_neighborhood(prev, v),
                    None => self.g.extend_neighborhood(&[], v),
                };
                self.chain.push(v);
                self.prefix.push(nb);
                if self.chain.len() == self.q {
                    return Some(self.chain.clone());
                }
                let order = self.orders[self.chain.len()];
                self.frames.push((self.prefix[order - 1].clone(), 0));
            } else {
                self.frames.pop();
                if self.frames.is_empty() {
                    self.state = ChainState::Done;
                    return None;
                }
                self.chain.pop();
                self.prefix.pop();
            }
        }
    }
}

/// `true` when `chain` satisfies `i_{j+1} ∈ N(i_{1:j})` for every `j`.
pub fn is_valid_chain(g: &DependencyGraph, chain: &[usize]) -> bool {
    (1..chain.len()).all(|j| g.neighborhood_idx(&chain[..j]).binary_search(&chain[j]).is_ok())
}

/// Maps a chain of vertex positions to vertex identifiers.
pub fn chain_vertices(g: &DependencyGraph, chain: &[usize]) -> Vec<VertexId> {
    chain.iter().map(|&i| g.vertices()[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(cs: &[Composition]) -> Vec<Vec<usize>> {
        cs.iter().map(|c| c.parts().to_vec()).collect()
    }

    #[test]
    fn composition_examples() {
        assert_eq!(parts(&compositions(1).unwrap()), vec![vec![1]]);
        assert_eq!(
            parts(&compositions(3).unwrap()),
            vec![vec![3], vec![2, 1], vec![1, 2], vec![1, 1, 1]]
        );
        assert_eq!(compositions(5).unwrap().len(), 16);
        assert!(compositions(0).is_err());
    }

    #[test]
    fn restricted_examples() {
        assert_eq!(parts(&compositions_star(2).unwrap()), vec![vec![2]]);
        assert_eq!(parts(&compositions_star(3).unwrap()), vec![vec![3], vec![2, 1]]);
        assert_eq!(
            parts(&compositions_star(4).unwrap()),
            vec![vec![4], vec![3, 1], vec![2, 2]]
        );
        assert!(compositions_star(1).is_err());
    }

    #[test]
    fn restricted_count_matches_filter() {
        for t in 2..=12 {
            let filtered = compositions(t).unwrap().into_iter().filter(|c| c.is_restricted());
            let filtered: Vec<_> = filtered.collect();
            assert_eq!(compositions_star(t).unwrap(), filtered, "t = {t}");
        }
    }

    #[test]
    fn sign_sequence_examples() {
        let s1: Vec<Vec<i64>> =
            sign_sequences(1).unwrap().iter().map(|s| s.values().to_vec()).collect();
        assert_eq!(s1, vec![vec![0, -1, 2], vec![0, -1, -2]]);
        let s2: Vec<Vec<i64>> =
            sign_sequences(2).unwrap().iter().map(|s| s.values().to_vec()).collect();
        assert_eq!(s2, vec![vec![0, -1, 2, -3], vec![0, -1, -2, 3], vec![0, -1, -2, -3]]);
        for k in 1..=8 {
            let all = sign_sequences(k).unwrap();
            assert!(all.len() < 1 << (k + 1));
            for s in &all {
                assert_eq!(s.values()[1], -1);
                assert!(s.is_in_m1());
            }
        }
    }

    #[test]
    fn sign_sequences_brute_force() {
        // Filter all ±j assignments by the membership rule.
        for k in 1..=8usize {
            let len = k + 2;
            let mut count = 0;
            for mask in 0u32..(1 << (len - 1)) {
                let mut t = vec![0i64];
                for j in 1..len {
                    let sign = if mask >> (j - 1) & 1 == 1 { 1 } else { -1 };
                    t.push(sign * j as i64);
                }
                if (1..len).all(|j| t[j - 1].min(t[j]) < 0) {
                    count += 1;
                    assert!(SignSequence::new(t).unwrap().is_in_m1());
                }
            }
            assert_eq!(count, sign_sequences(k).unwrap().len());
        }
    }

    #[test]
    fn sign_sequence_composition_bijection() {
        for k in 1..=8 {
            let from_signs: Vec<Composition> =
                sign_sequences(k).unwrap().iter().map(SignSequence::blocks).collect();
            let mut sorted = from_signs.clone();
            sorted.sort();
            let mut star = compositions_star(k + 2).unwrap();
            star.sort();
            assert_eq!(sorted, star);
            for c in compositions_star(k + 2).unwrap() {
                assert_eq!(SignSequence::from_restricted(&c).unwrap().blocks(), c);
            }
        }
    }

    #[test]
    fn sign_sequence_validation() {
        assert!(SignSequence::new(vec![1]).is_err());
        assert!(SignSequence::new(vec![0, 2]).is_err());
        assert!(SignSequence::new(vec![0, -1, 0]).unwrap().has_empty_range());
        assert!(!SignSequence::new(vec![0, 1, -2]).unwrap().is_in_m1());
    }

    fn path() -> DependencyGraph {
        let v = VertexId::int;
        DependencyGraph::from_edge_list(&[(v(1), v(2)), (v(2), v(3))], None).unwrap()
    }

    #[test]
    fn chain_examples() {
        let single = DependencyGraph::from_edge_list(&[], Some(&[VertexId::int(4)])).unwrap();
        let chains: Vec<_> = enumerate_chains(&single, 3, None).unwrap().collect();
        assert_eq!(chains, vec![vec![0, 0, 0]]);
        let g = path();
        let chains: Vec<_> = enumerate_chains(&g, 2, None).unwrap().collect();
        assert_eq!(chains.len(), 7);
        assert_eq!(chains[0], vec![0, 0]);
        let zero = SignSequence::new(vec![0, 0, -1]).unwrap();
        assert_eq!(enumerate_chains(&g, 3, Some(&zero)).unwrap().count(), 0);
    }

    #[test]
    fn chains_respect_sign_orders() {
        let pts: Vec<Vec<i64>> = (0..7).map(|i| vec![i]).collect();
        let g = DependencyGraph::m_dependent_lattice(&pts, 1).unwrap();
        // t = (0,-1,1): i₃ ranges over N(i₁) only.
        let t = SignSequence::new(vec![0, -1, 1]).unwrap();
        let mut brute = Vec::new();
        for a in 0..g.len() {
            for &b in &g.neighborhood_idx(&[a]) {
                for &c in &g.neighborhood_idx(&[a]) {
                    brute.push(vec![a, b, c]);
                }
            }
        }
        let got: Vec<_> = enumerate_chains(&g, 3, Some(&t)).unwrap().collect();
        assert_eq!(got, brute);
    }

    #[test]
    fn chains_partition_by_first_index() {
        let pts: Vec<Vec<i64>> = (0..9).map(|i| vec![i]).collect();
        let g = DependencyGraph::m_dependent_lattice(&pts, 2).unwrap();
        let all: Vec<_> = enumerate_chains(&g, 3, None).unwrap().collect();
        let mut parts = Vec::new();
        for r in [0..3, 3..4, 4..9] {
            parts.extend(enumerate_chains_from(&g, 3, None, r).unwrap());
        }
        assert_eq!(all, parts);
        for c in &all {
            assert!(is_valid_chain(&g, c));
        }
    }
}
