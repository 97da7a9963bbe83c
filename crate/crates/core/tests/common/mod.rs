//! Independent brute-force oracles and fixtures shared by the integration
//! tests. Nothing here calls the search routines it is used to check.

#![allow(dead_code)]

use std::collections::BTreeSet;

use duplex_core::experiment::presets::PRESETS;
use duplex_core::symmetry::Partition;
use duplex_core::topology::{build_graph, Graph};

/// All permutations of `0..n` in lexicographic order, as image vectors.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let n = used.len();
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// `A[p(i)][p(j)] == A[i][j]` for all pairs.
pub fn preserves(g: &Graph, p: &[usize]) -> bool {
    let n = g.n_nodes();
    (0..n).all(|i| (0..n).all(|j| g.entry(p[i], p[j]) == g.entry(i, j)))
}

/// Automorphisms by checking every one of the `N!` permutations.
pub fn brute_automorphisms(g: &Graph) -> BTreeSet<Vec<usize>> {
    all_permutations(g.n_nodes()).into_iter().filter(|p| preserves(g, p)).collect()
}

/// Orbits of a set of permutations by repeated closure from each node.
pub fn brute_orbits(n: usize, perms: &BTreeSet<Vec<usize>>) -> Partition {
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut orbit = BTreeSet::from([start]);
        loop {
            let grown: BTreeSet<usize> = orbit.iter().flat_map(|&i| perms.iter().map(move |p| p[i])).collect();
            let merged: BTreeSet<usize> = orbit.union(&grown).copied().collect();
            if merged.len() == orbit.len() {
                break;
            }
            orbit = merged;
        }
        for i in orbit {
            label[i] = next;
        }
        next += 1;
    }
    Partition::from_labels(&label)
}

/// Dense 0/1 permutation matrix with `P[p(i)][i] = 1`.
pub fn perm_matrix(p: &[usize]) -> Vec<Vec<i64>> {
    let n = p.len();
    let mut m = vec![vec![0; n]; n];
    for (i, &pi) in p.iter().enumerate() {
        m[pi][i] = 1;
    }
    m
}

pub fn matmul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn diag(kappa: &[i64]) -> Vec<Vec<i64>> {
    let n = kappa.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { kappa[i] } else { 0 }).collect())
        .collect()
}

/// Every `(p_top, p_bottom)` in `G_T x G_B` with `P_B K = K P_T`.
pub fn brute_compatible_pairs(
    g_top: &BTreeSet<Vec<usize>>,
    g_bottom: &BTreeSet<Vec<usize>>,
    kappa: &[i64],
) -> BTreeSet<(Vec<usize>, Vec<usize>)> {
    let k = diag(kappa);
    let mut out = BTreeSet::new();
    for pt in g_top {
        let kpt = matmul(&k, &perm_matrix(pt));
        for pb in g_bottom {
            if matmul(&perm_matrix(pb), &k) == kpt {
                out.insert((pt.clone(), pb.clone()));
            }
        }
    }
    out
}

/// Identity, inverses and closure under composition, checked on image
/// vectors.
pub fn is_group(set: &BTreeSet<Vec<usize>>, n: usize) -> bool {
    let id: Vec<usize> = (0..n).collect();
    let compose = |a: &[usize], b: &[usize]| -> Vec<usize> { (0..n).map(|i| a[b[i]]).collect() };
    let inverse = |a: &[usize]| -> Vec<usize> {
        let mut inv = vec![0; n];
        for (i, &ai) in a.iter().enumerate() {
            inv[ai] = i;
        }
        inv
    };
    set.contains(&id)
        && set.iter().all(|a| set.contains(&inverse(a)))
        && set.iter().all(|a| set.iter().all(|b| set.contains(&compose(a, b))))
}

pub fn graph(n: usize, edges: &[[usize; 2]]) -> Graph {
    build_graph(n, edges).unwrap()
}

/// Graphs on at most six nodes: the standard families, a few irregular
/// ones, and both layers of every preset.
pub fn corpus() -> Vec<(String, Graph)> {
    let mut out: Vec<(String, Graph)> = Vec::new();
    for n in 1..=6 {
        out.push((format!("empty{n}"), Graph::empty(n)));
        out.push((format!("complete{n}"), Graph::complete(n)));
        out.push((format!("path{n}"), Graph::path(n)));
        if n >= 3 {
            out.push((format!("cycle{n}"), Graph::cycle(n)));
        }
        if n >= 2 {
            out.push((format!("star{n}"), Graph::star(n)));
        }
    }
    let extra: [(&str, usize, &[[usize; 2]]); 8] = [
        ("paw", 4, &[[1, 2], [2, 3], [1, 3], [3, 4]]),
        ("diamond", 4, &[[1, 2], [1, 3], [2, 3], [2, 4], [3, 4]]),
        ("bull", 5, &[[1, 2], [2, 3], [1, 3], [2, 4], [3, 5]]),
        ("house", 5, &[[1, 2], [2, 3], [3, 4], [4, 5], [5, 1], [2, 5]]),
        ("k23", 5, &[[1, 3], [1, 4], [1, 5], [2, 3], [2, 4], [2, 5]]),
        ("prism", 6, &[[1, 2], [2, 3], [3, 1], [4, 5], [5, 6], [6, 4], [1, 4], [2, 5], [3, 6]]),
        ("two_triangles", 6, &[[1, 2], [2, 3], [3, 1], [4, 5], [5, 6], [6, 4]]),
        ("asymmetric6", 6, &[[1, 2], [2, 3], [3, 4], [4, 5], [2, 6], [3, 6], [5, 6], [1, 3]]),
    ];
    for (name, n, edges) in extra {
        out.push((name.to_string(), graph(n, edges)));
    }
    for p in PRESETS {
        out.push((format!("{}_top", p.name), graph(p.n_nodes, p.top_edges)));
        out.push((format!("{}_bottom", p.name), graph(p.n_nodes, p.bottom_edges)));
    }
    out
}
