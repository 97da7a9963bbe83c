//! Layer graphs and the duplex coupling structure.
//!
//! Node indices are 0-based inside the crate. Constructors that take edge
//! lists from users ([`build_graph`]) expect 1-based labels, and every
//! exported document converts back to 1-based labels.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph stored as a dense 0/1 adjacency matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<u8>,
}

impl Graph {
    /// Graph on `n` nodes without edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: vec![0; n * n],
        }
    }

    /// Builds a graph from 0-based edges, rejecting loops and repeats.
    pub fn from_edges0(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j) + 1,
                    n,
                });
            }
            if i == j {
                return Err(Error::SelfLoop(i + 1));
            }
            if g.adj[i * n + j] != 0 {
                return Err(Error::DuplicateEdge(i + 1, j + 1));
            }
            g.adj[i * n + j] = 1;
            g.adj[j * n + i] = 1;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    g.adj[i * n + j] = 1;
                }
            }
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges0(n, &edges).expect("cycle edges are valid for n >= 3")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges0(n, &edges).expect("path edges are valid")
    }

    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Graph::from_edges0(n, &edges).expect("star edges are valid")
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j] != 0
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> u8 {
        self.adj[i * self.n + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i * self.n..(i + 1) * self.n]
            .iter()
            .map(|&a| a as usize)
            .sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    /// Edge list with `i < j`, 0-based.
    pub fn edges0(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Edge list with 1-based labels, as written in config files.
    pub fn edges1(&self) -> Vec<[usize; 2]> {
        self.edges0().into_iter().map(|(i, j)| [i + 1, j + 1]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|&a| a as usize).sum::<usize>() / 2
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j) as f64)
    }

    /// Whether every node has the same degree.
    pub fn is_regular(&self) -> bool {
        let d = self.degrees();
        d.windows(2).all(|w| w[0] == w[1])
    }
}

/// Builds a graph from 1-based edge pairs.
pub fn build_graph(n_nodes: usize, edges: &[[usize; 2]]) -> Result<Graph> {
    if n_nodes == 0 {
        return Err(Error::InvalidArgument("a graph needs at least one node".into()));
    }
    let mut zero_based = Vec::with_capacity(edges.len());
    for &[i, j] in edges {
        for idx in [i, j] {
            if idx == 0 || idx > n_nodes {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    n: n_nodes,
                });
            }
        }
        zero_based.push((i - 1, j - 1));
    }
    Graph::from_edges0(n_nodes, &zero_based)
}

/// Integer Laplacian `D - A`, row-major.
pub fn laplacian_int(g: &Graph) -> Vec<i64> {
    let n = g.n_nodes();
    let mut l = vec![0i64; n * n];
    for i in 0..n {
        for j in 0..n {
            l[i * n + j] = -(g.entry(i, j) as i64);
        }
        l[i * n + i] = g.degree(i) as i64;
    }
    l
}

pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n_nodes();
    let l = laplacian_int(g);
    DMatrix::from_fn(n, n, |i, j| l[i * n + j] as f64)
}

/// The diagonal of `K`: `kappa[i] == true` means bottom node `i` is driven
/// by top node `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterLayerCoupling {
    kappa: Vec<bool>,
}

impl InterLayerCoupling {
    pub fn from_ints(values: &[i64]) -> Result<Self> {
        let mut kappa = Vec::with_capacity(values.len());
        for (index, &value) in values.iter().enumerate() {
            match value {
                0 => kappa.push(false),
                1 => kappa.push(true),
                _ => {
                    return Err(Error::NonBinaryKappa {
                        index: index + 1,
                        value,
                    })
                }
            }
        }
        Ok(InterLayerCoupling { kappa })
    }

    pub fn from_bools(kappa: Vec<bool>) -> Self {
        InterLayerCoupling { kappa }
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    #[inline]
    pub fn driven(&self, i: usize) -> bool {
        self.kappa[i]
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        if self.kappa[i] {
            1.0
        } else {
            0.0
        }
    }

    pub fn as_ints(&self) -> Vec<u8> {
        self.kappa.iter().map(|&k| k as u8).collect()
    }

    /// `K = I`: every bottom node receives a link.
    pub fn is_identity(&self) -> bool {
        self.kappa.iter().all(|&k| k)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.value(i) } else { 0.0 })
    }
}

/// Two layers on the same node set plus the diagonal inter-layer links.
#[derive(Clone, Debug, PartialEq)]
pub struct DuplexTopology {
    pub top: Graph,
    pub bottom: Graph,
    pub inter: InterLayerCoupling,
}

impl DuplexTopology {
    pub fn n_nodes(&self) -> usize {
        self.top.n_nodes()
    }
}

pub fn build_duplex(top: Graph, bottom: Graph, kappa: &[i64]) -> Result<DuplexTopology> {
    let n = top.n_nodes();
    if bottom.n_nodes() != n {
        return Err(Error::SizeMismatch {
            what: "bottom layer",
            expected: n,
            found: bottom.n_nodes(),
        });
    }
    if kappa.len() != n {
        return Err(Error::SizeMismatch {
            what: "kappa",
            expected: n,
            found: kappa.len(),
        });
    }
    let inter = InterLayerCoupling::from_ints(kappa)?;
    Ok(DuplexTopology { top, bottom, inter })
}

/// Intra-layer strengths `alpha` (top), `beta` (bottom) and the
/// inter-layer strength `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingStrengths {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl CouplingStrengths {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("sigma", sigma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(CouplingStrengths { alpha, beta, sigma })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_from_one_based_edges() {
        let g = build_graph(3, &[[1, 2], [2, 3]]).unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(!g.has_edge(0, 2));
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn empty_graph_is_all_zero() {
        let g = build_graph(4, &[]).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!((0..4).all(|i| g.degree(i) == 0));
    }

    #[test]
    fn five_cycle_rows_sum_to_two() {
        let g = build_graph(5, &[[1, 2], [2, 3], [3, 4], [4, 5], [5, 1]]).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert_eq!(g, Graph::cycle(5));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            build_graph(3, &[[1, 4]]),
            Err(Error::IndexOutOfRange { index: 4, n: 3 })
        ));
        assert!(matches!(
            build_graph(3, &[[0, 1]]),
            Err(Error::IndexOutOfRange { index: 0, .. })
        ));
        assert!(matches!(build_graph(3, &[[2, 2]]), Err(Error::SelfLoop(2))));
        assert!(matches!(
            build_graph(3, &[[1, 2], [2, 1]]),
            Err(Error::DuplicateEdge(2, 1))
        ));
    }

    #[test]
    fn laplacian_examples() {
        assert_eq!(laplacian(&Graph::empty(3)), DMatrix::zeros(3, 3));

        let l = laplacian_int(&Graph::path(3));
        assert_eq!(l, vec![1, -1, 0, -1, 2, -1, 0, -1, 1]);

        let c5 = laplacian(&Graph::cycle(5));
        for i in 0..5 {
            assert_eq!(c5[(i, i)], 2.0);
        }
        let ones = DMatrix::from_element(5, 1, 1.0);
        assert_eq!(&c5 * ones, DMatrix::zeros(5, 1));
    }

    #[test]
    fn duplex_validation() {
        let kappa = [1, 0, 1, 1, 0];
        let d = build_duplex(Graph::cycle(5), Graph::path(5), &kappa).unwrap();
        assert_eq!(d.inter.as_ints(), vec![1, 0, 1, 1, 0]);
        let k = d.inter.matrix();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 0.0);
        assert_eq!(k[(4, 4)], 0.0);
        assert!(!d.inter.is_identity());

        assert!(matches!(
            build_duplex(Graph::cycle(5), Graph::path(4), &kappa),
            Err(Error::SizeMismatch { .. })
        ));
        assert!(matches!(
            build_duplex(Graph::cycle(5), Graph::path(5), &[1, 2, 0, 0, 0]),
            Err(Error::NonBinaryKappa { index: 2, value: 2 })
        ));
    }

    #[test]
    fn coupling_strengths_reject_negative() {
        assert!(CouplingStrengths::new(0.1, 0.3, 0.5).is_ok());
        assert!(CouplingStrengths::new(-0.1, 0.3, 0.5).is_err());
        assert!(CouplingStrengths::new(0.1, f64::NAN, 0.5).is_err());
    }
}
