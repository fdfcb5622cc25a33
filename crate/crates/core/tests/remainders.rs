//! Remainder terms against independent nested-loop evaluations, plus
//! structural properties: monotonicity in the graph, the `n^{-1/2}` decay
//! along an MA(1) line, and agreement of sampled with exact models.

use wpcert_core::depgraph::{DependencyGraph, VertexId};
use wpcert_core::rsums::{self, JointModel};
use wpcert_core::sim::{GeneratorSpec, InnovationLaw};

const BUDGET: u64 = 1 << 32;

/// Outcome table `(probability, values)` with standardised values.
struct Table {
    rows: Vec<(f64, Vec<f64>)>,
    adj: Vec<Vec<bool>>,
}

impl Table {
    fn new(rows: Vec<(f64, Vec<f64>)>, edges: &[(usize, usize)]) -> Self {
        let n = rows[0].1.len();
        let var: f64 = rows.iter().map(|(p, v)| p * v.iter().sum::<f64>().powi(2)).sum();
        let sigma = var.sqrt();
        let rows = rows.into_iter().map(|(p, v)| (p, v.into_iter().map(|x| x / sigma).collect())).collect();
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        Table { rows, adj }
    }

    fn model(&self, raw: &[(f64, Vec<f64>)], edges: &[(usize, usize)]) -> JointModel {
        let n = self.adj.len();
        let vertices: Vec<VertexId> = (0..n).map(|i| VertexId::int(i as i64)).collect();
        let edges: Vec<_> = edges.iter().map(|&(a, b)| (vertices[a].clone(), vertices[b].clone())).collect();
        let graph = DependencyGraph::from_edge_list(&edges, Some(&vertices)).unwrap();
        JointModel::exact(graph, raw).unwrap()
    }

    fn nbhd(&self, set: &[usize]) -> Vec<usize> {
        (0..self.adj.len()).filter(|&v| set.iter().any(|&u| u == v || self.adj[u][v])).collect()
    }

    fn e_abs(&self, idx: &[usize]) -> f64 {
        self.rows.iter().map(|(p, v)| p * idx.iter().map(|&i| v[i]).product::<f64>().abs()).sum()
    }

    fn r11(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.adj.len() {
            for j in self.nbhd(&[i]) {
                for k in self.nbhd(&[i, j]) {
                    total += self.e_abs(&[i, j, k]) + self.e_abs(&[i, j]) * self.e_abs(&[k]);
                }
            }
        }
        total
    }

    fn r21(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.adj.len() {
            for j in self.nbhd(&[i]) {
                for k in self.nbhd(&[i, j]) {
                    for l in self.nbhd(&[i, j, k]) {
                        total += self.e_abs(&[i, j, k, l])
                            + self.e_abs(&[i, j, k]) * self.e_abs(&[l])
                            + self.e_abs(&[i, j]) * self.e_abs(&[k, l]);
                    }
                }
            }
        }
        total
    }
}

/// `X_i = (ε_i + ε_{i+1})/√2` for `i < n` with Rademacher innovations: every
/// one of the `2^{n+1}` sign patterns as an outcome.
fn ma1_outcomes(n: usize) -> Vec<(f64, Vec<f64>)> {
    let total = 1usize << (n + 1);
    (0..total)
        .map(|code| {
            let eps: Vec<f64> = (0..=n).map(|b| if code >> b & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let x = (0..n).map(|i| (eps[i] + eps[i + 1]) / 2f64.sqrt()).collect();
            (1.0 / total as f64, x)
        })
        .collect()
}

fn path_edges(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

#[test]
fn ma1_line_matches_nested_loops() {
    for n in 1..=6 {
        let raw = ma1_outcomes(n);
        let edges = path_edges(n);
        let t = Table::new(raw.clone(), &edges);
        let model = t.model(&raw, &edges);
        let r11 = rsums::remainder(&model, 1, 1.0, BUDGET).unwrap();
        let r21 = rsums::remainder(&model, 2, 1.0, BUDGET).unwrap();
        assert!(r11.std_error.is_none());
        assert!((r11.value - t.r11()).abs() <= 1e-12 * t.r11().max(1.0), "n = {n}");
        assert!((r21.value - t.r21()).abs() <= 1e-12 * t.r21().max(1.0), "n = {n}");
    }
}

#[test]
fn skewed_triangle_matches_nested_loops() {
    // A three-outcome law on a triangle with an isolated fourth vertex whose
    // value is an independent coin folded into the table.
    let base = [(0.2, [1.6, -0.4, 0.9]), (0.5, [-0.2, 0.3, -0.8]), (0.3, [-0.7, -0.3, 0.7])];
    let mut raw = Vec::new();
    for (p, v) in base {
        let mean: Vec<f64> = (0..3).map(|i| base.iter().map(|(q, w)| q * w[i]).sum()).collect();
        for coin in [-1.0, 1.0] {
            raw.push((p * 0.5, vec![v[0] - mean[0], v[1] - mean[1], v[2] - mean[2], coin]));
        }
    }
    let edges = [(0, 1), (1, 2), (0, 2)];
    let t = Table::new(raw.clone(), &edges);
    let model = t.model(&raw, &edges);
    assert!((rsums::remainder(&model, 1, 1.0, BUDGET).unwrap().value - t.r11()).abs() <= 1e-12);
    assert!((rsums::remainder(&model, 2, 1.0, BUDGET).unwrap().value - t.r21()).abs() <= 1e-12);
}

#[test]
fn remainders_grow_with_the_graph() {
    // Every R-sum term is non-negative, so a larger graph (larger
    // neighborhoods) can only increase the remainder.
    let n = 5;
    let raw = ma1_outcomes(n);
    let path = path_edges(n);
    let mut denser = path.clone();
    denser.extend([(0, 2), (1, 3), (2, 4)]);
    let complete: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    for (k, omega) in [(1, 1.0), (2, 1.0), (2, 0.5), (3, 0.25)] {
        let values: Vec<f64> = [&path, &denser, &complete]
            .iter()
            .map(|e| {
                let t = Table::new(raw.clone(), e);
                rsums::remainder(&t.model(&raw, e), k, omega, BUDGET).unwrap().value
            })
            .collect();
        assert!(values[0] < values[1] && values[1] < values[2], "k = {k}, ω = {omega}: {values:?}");
    }
}

#[test]
fn ma1_remainder_decays_like_inverse_sqrt_n() {
    // R_{1,1} ~ c/√n along the MA(1) line: √n R_{1,1} stays within a
    // narrow band as n grows.
    let scaled: Vec<f64> = [4usize, 6, 8, 10]
        .iter()
        .map(|&n| {
            let raw = ma1_outcomes(n);
            let edges = path_edges(n);
            let t = Table::new(raw.clone(), &edges);
            (n as f64).sqrt() * rsums::remainder(&t.model(&raw, &edges), 1, 1.0, BUDGET).unwrap().value
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 1.5, "√n R_11 = {scaled:?}");
}

#[test]
fn sampled_model_agrees_with_exact_model() {
    let n = 6;
    let spec = GeneratorSpec::MdepMa { d: 1, side: n, m: 1, law: InnovationLaw::Rademacher };
    let raw = ma1_outcomes(n);
    let edges = path_edges(n);
    let t = Table::new(raw.clone(), &edges);
    let exact = t.model(&raw, &edges);
    let sampled = JointModel::sampled(spec.graph().unwrap(), 20_000, 7, |s, out| {
        out.copy_from_slice(&spec.sample_field(s).unwrap());
    })
    .unwrap();
    assert!(sampled.sigma_estimated());
    assert!((sampled.sigma() - exact.sigma()).abs() < 0.05 * exact.sigma());
    for (k, omega) in [(1, 1.0), (2, 1.0), (2, 0.5)] {
        let e = rsums::remainder(&exact, k, omega, BUDGET).unwrap().value;
        let s = rsums::remainder(&sampled, k, omega, BUDGET).unwrap();
        let se = s.std_error.expect("sampled estimates carry a standard error");
        assert!(se > 0.0);
        assert!((s.value - e).abs() <= 5.0 * se, "k = {k}, ω = {omega}: {} vs {e} (se {se})", s.value);
    }
}

#[test]
fn remainder_table_covers_required_entries() {
    let raw = ma1_outcomes(4);
    let edges = path_edges(4);
    let model = Table::new(raw.clone(), &edges).model(&raw, &edges);
    for p in [1.0, 1.5, 2.0, 3.25] {
        let table = rsums::remainder_table(&model, p, BUDGET).unwrap();
        let want = rsums::required_entries(p).unwrap();
        assert_eq!(table.entries.len(), want.len());
        for (j, omega) in want {
            let e = table.get(j, omega).expect("entry present");
            assert_eq!(e.value, rsums::remainder(&model, j, omega, BUDGET).unwrap().value);
        }
    }
}
