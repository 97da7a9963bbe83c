//! Permutation groups acting on layer nodes: automorphism search, the
//! subgroup lattice, orbit partitions and the catalogue of
//! symmetry-induced pattern states of one layer.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Graph;

/// Largest graph handed to the automorphism search.
pub const MAX_AUTOMORPHISM_NODES: usize = 16;
/// Default cap on the order of a group whose subgroups are enumerated.
pub const DEFAULT_ORDER_CAP: usize = 10_000;

/// A bijection of `{0, .., n-1}`; `image(i)` is where node `i` goes.
///
/// The matching permutation matrix has `P[i][image(i)] = 1`, so
/// `(P x)_i = x_{image(i)}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "{images:?} is not a bijection"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation(images))
    }

    /// Transposition of two 0-based nodes.
    pub fn swap(n: usize, a: usize, b: usize) -> Self {
        let mut p: Vec<usize> = (0..n).collect();
        p.swap(a, b);
        Permutation(p)
    }

    /// Builds a permutation from 1-based cycles, e.g. `[[1, 3]]`.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut p: Vec<usize> = (0..n).collect();
        for cycle in cycles {
            for (k, &from) in cycle.iter().enumerate() {
                let to = cycle[(k + 1) % cycle.len()];
                if from == 0 || from > n || to == 0 || to > n {
                    return Err(Error::IndexOutOfRange {
                        index: from.max(to),
                        n,
                    });
                }
                p[from - 1] = to - 1;
            }
        }
        Permutation::from_images(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Permutation(inv)
    }

    /// Dense 0/1 permutation matrix, row-major.
    pub fn matrix(&self) -> Vec<u8> {
        let n = self.len();
        let mut m = vec![0u8; n * n];
        for (i, &p) in self.0.iter().enumerate() {
            m[i * n + p] = 1;
        }
        m
    }

    /// Whether `P A Pᵀ = A`, i.e. the permutation preserves adjacency.
    pub fn preserves(&self, g: &Graph) -> bool {
        let n = g.n_nodes();
        (0..n).all(|i| (0..n).all(|j| g.entry(i, j) == g.entry(self.0[i], self.0[j])))
    }

    /// Cycle decomposition with 1-based labels, fixed points omitted.
    pub fn cycles1(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.0[start] == start {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i + 1);
                i = self.0[i];
            }
            out.push(cycle);
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles1();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            let parts: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            write!(f, "({})", parts.join(" "))?;
        }
        Ok(())
    }
}

/// A finite permutation group, stored by listing its elements.
#[derive(Clone, Debug)]
pub struct PermGroup {
    n: usize,
    elements: Vec<Permutation>,
    index: HashMap<Permutation, usize>,
}

impl PermGroup {
    /// The trivial group on `n` points.
    pub fn trivial(n: usize) -> Self {
        PermGroup::from_elements_unchecked(n, vec![Permutation::identity(n)])
    }

    /// The group generated by `generators`.
    pub fn generated_by(n: usize, generators: &[Permutation]) -> Self {
        let id = Permutation::identity(n);
        let mut elements = vec![id.clone()];
        let mut seen: HashSet<Permutation> = HashSet::from([id]);
        let mut frontier = 0;
        while frontier < elements.len() {
            let current = elements[frontier].clone();
            frontier += 1;
            for g in generators {
                let next = current.compose(g);
                if seen.insert(next.clone()) {
                    elements.push(next);
                }
            }
        }
        PermGroup::from_elements_unchecked(n, elements)
    }

    /// Wraps an element list that is already known to be a group. The
    /// identity is moved to the front.
    pub fn from_elements_unchecked(n: usize, mut elements: Vec<Permutation>) -> Self {
        elements.sort();
        elements.dedup();
        if let Some(pos) = elements.iter().position(Permutation::is_identity) {
            elements.swap(0, pos);
        }
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        PermGroup { n, elements, index }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.index.contains_key(p)
    }

    pub fn position(&self, p: &Permutation) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn is_subset_of(&self, other: &PermGroup) -> bool {
        self.elements.iter().all(|p| other.contains(p))
    }

    /// Checks identity, closure under composition and inverses by brute
    /// force over the composition table.
    pub fn satisfies_group_axioms(&self) -> bool {
        if !self.contains(&Permutation::identity(self.n)) {
            return false;
        }
        self.elements.iter().all(|a| {
            self.contains(&a.inverse()) && self.elements.iter().all(|b| self.contains(&a.compose(b)))
        })
    }
}

impl PartialEq for PermGroup {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.elements == other.elements
    }
}

impl Eq for PermGroup {}

/// Which layer a pattern or partition belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Top,
    Bottom,
}

impl Layer {
    pub fn suffix(self) -> &'static str {
        match self {
            Layer::Top => "T",
            Layer::Bottom => "B",
        }
    }
}

/// A set partition of `{0, .., n-1}` in canonical form: clusters sorted by
/// their smallest element, elements ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn singletons(n: usize) -> Self {
        Partition {
            n,
            clusters: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn one_cluster(n: usize) -> Self {
        Partition {
            n,
            clusters: vec![(0..n).collect()],
        }
    }

    /// Validates and canonicalizes 0-based clusters.
    pub fn from_clusters(n: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut out = Vec::with_capacity(clusters.len());
        for mut c in clusters {
            if c.is_empty() {
                return Err(Error::InvalidArgument("empty cluster".into()));
            }
            c.sort_unstable();
            for &i in &c {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i + 1, n });
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "node {} appears in two clusters",
                        i + 1
                    )));
                }
                seen[i] = true;
            }
            out.push(c);
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidArgument(format!(
                "node {} is not covered by any cluster",
                missing + 1
            )));
        }
        out.sort_by_key(|c| c[0]);
        Ok(Partition { n, clusters: out })
    }

    /// Same as [`Partition::from_clusters`] with 1-based labels.
    pub fn from_clusters1(n: usize, clusters: &[Vec<usize>]) -> Result<Self> {
        let mut zero = Vec::with_capacity(clusters.len());
        for c in clusters {
            let mut z = Vec::with_capacity(c.len());
            for &i in c {
                if i == 0 || i > n {
                    return Err(Error::IndexOutOfRange { index: i, n });
                }
                z.push(i - 1);
            }
            zero.push(z);
        }
        Partition::from_clusters(n, zero)
    }

    /// Builds the partition whose clusters are the classes of `labels`.
    pub fn from_labels<T: Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut by_label: HashMap<&T, usize> = HashMap::new();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let k = *by_label.entry(l).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[k].push(i);
        }
        Partition {
            n: labels.len(),
            clusters,
        }
    }

    /// Parses a letter string such as `"abbcd"`: equal letters share a cluster.
    pub fn from_letters(s: &str) -> Self {
        let chars: Vec<char> = s.chars().collect();
        Partition::from_labels(&chars)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, l: usize) -> &[usize] {
        &self.clusters[l]
    }

    /// `membership()[i]` is the index of the cluster containing node `i`.
    pub fn membership(&self) -> Vec<usize> {
        let mut m = vec![0; self.n];
        for (l, c) in self.clusters.iter().enumerate() {
            for &i in c {
                m[i] = l;
            }
        }
        m
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Clusters with at least two nodes.
    pub fn nontrivial(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() > 1)
            .map(|(l, c)| (l, c.as_slice()))
    }

    pub fn n_nontrivial(&self) -> usize {
        self.nontrivial().count()
    }

    pub fn is_trivial(&self) -> bool {
        self.clusters.len() == self.n
    }

    /// Whether every cluster of `self` lies inside a cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let m = coarser.membership();
        self.clusters
            .iter()
            .all(|c| c.iter().all(|&i| m[i] == m[c[0]]))
    }

    /// Clusters with 1-based labels.
    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.clusters
            .iter()
            .map(|c| c.iter().map(|i| i + 1).collect())
            .collect()
    }

    /// Letter notation, e.g. `abbcd` for `{1}{2,3}{4}{5}`.
    pub fn letters(&self) -> String {
        let m = self.membership();
        m.iter()
            .map(|&l| {
                if l < 26 {
                    (b'a' + l as u8) as char
                } else {
                    '?'
                }
            })
            .collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: Vec<String> = self.letters().chars().map(String::from).collect();
        write!(f, "({})", letters.join(", "))
    }
}

/// A named pattern state of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternState {
    pub label: String,
    pub layer: Layer,
    pub partition: Partition,
}

/// Node invariant used to prune the automorphism search.
fn node_signature(g: &Graph, i: usize) -> (usize, Vec<usize>) {
    let mut nd: Vec<usize> = g.neighbors(i).map(|j| g.degree(j)).collect();
    nd.sort_unstable();
    (g.degree(i), nd)
}

/// All automorphisms of `g` by depth-first backtracking.
///
/// Nodes are assigned in index order; a candidate image must carry the same
/// degree/neighbour-degree signature and agree on adjacency with every
/// node already placed.
pub fn automorphisms(g: &Graph) -> Result<PermGroup> {
    let n = g.n_nodes();
    if n > MAX_AUTOMORPHISM_NODES {
        return Err(Error::TooManyNodes {
            n,
            cap: MAX_AUTOMORPHISM_NODES,
        });
    }
    let sig: Vec<_> = (0..n).map(|i| node_signature(g, i)).collect();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| sig[i] == sig[j]).collect())
        .collect();

    let mut found = Vec::new();
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    backtrack(g, &candidates, 0, &mut image, &mut used, &mut found);

    debug_assert!(found.iter().all(|p: &Permutation| p.preserves(g)));
    Ok(PermGroup::from_elements_unchecked(n, found))
}

fn backtrack(
    g: &Graph,
    candidates: &[Vec<usize>],
    u: usize,
    image: &mut Vec<usize>,
    used: &mut Vec<bool>,
    found: &mut Vec<Permutation>,
) {
    let n = g.n_nodes();
    if u == n {
        found.push(Permutation(image.clone()));
        return;
    }
    for &v in &candidates[u] {
        if used[v] {
            continue;
        }
        let consistent = (0..u).all(|w| g.entry(u, w) == g.entry(v, image[w]));
        if !consistent {
            continue;
        }
        image[u] = v;
        used[v] = true;
        backtrack(g, candidates, u + 1, image, used, found);
        used[v] = false;
    }
    image[u] = usize::MAX;
}

/// Fixed-size bitset over the elements of a group.
type Bits = Vec<u64>;

fn bit_get(b: &Bits, i: usize) -> bool {
    b[i / 64] >> (i % 64) & 1 == 1
}

fn bit_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

struct Multiplier<'a> {
    group: &'a PermGroup,
    table: Option<Vec<u32>>,
}

impl<'a> Multiplier<'a> {
    const TABLE_LIMIT: usize = 1024;

    fn new(group: &'a PermGroup) -> Self {
        let m = group.order();
        let table = (m <= Self::TABLE_LIMIT).then(|| {
            let mut t = vec![0u32; m * m];
            for (a, pa) in group.elements.iter().enumerate() {
                for (b, pb) in group.elements.iter().enumerate() {
                    t[a * m + b] = group.index[&pa.compose(pb)] as u32;
                }
            }
            t
        });
        Multiplier { group, table }
    }

    fn mul(&self, a: usize, b: usize) -> usize {
        match &self.table {
            Some(t) => t[a * self.group.order() + b] as usize,
            None => self.group.index[&self.group.elements[a].compose(&self.group.elements[b])],
        }
    }

    fn closure(&self, generators: &[usize]) -> Bits {
        let m = self.group.order();
        let mut bits = vec![0u64; m.div_ceil(64)];
        let mut stack = vec![0usize];
        bit_set(&mut bits, 0);
        while let Some(x) = stack.pop() {
            for &g in generators {
                let y = self.mul(x, g);
                if !bit_get(&bits, y) {
                    bit_set(&mut bits, y);
                    stack.push(y);
                }
            }
        }
        bits
    }
}

/// Every subgroup of `group`, smallest order first.
///
/// Cyclic subgroups are generated from each element, then joined with
/// further cyclic subgroups until no new subgroup appears. Every finite
/// subgroup is a join of cyclic ones, so the fixpoint is complete.
pub fn subgroups(group: &PermGroup, order_cap: usize) -> Result<Vec<PermGroup>> {
    if group.order() > order_cap {
        return Err(Error::GroupTooLarge {
            order: group.order(),
            cap: order_cap,
        });
    }
    let mult = Multiplier::new(group);

    let mut seen: HashSet<Bits> = HashSet::new();
    let mut found: Vec<(Bits, Vec<usize>)> = Vec::new();
    let mut cyclic_gens: Vec<usize> = Vec::new();
    for g in 0..group.order() {
        let bits = mult.closure(&[g]);
        if seen.insert(bits.clone()) {
            cyclic_gens.push(g);
            found.push((bits, vec![g]));
        }
    }

    let mut next = 0;
    while next < found.len() {
        let (bits, gens) = found[next].clone();
        next += 1;
        for &c in &cyclic_gens {
            if bit_get(&bits, c) {
                continue;
            }
            let mut joined_gens = gens.clone();
            joined_gens.push(c);
            let joined = mult.closure(&joined_gens);
            if seen.insert(joined.clone()) {
                found.push((joined, joined_gens));
            }
        }
    }

    let mut out: Vec<PermGroup> = found
        .into_iter()
        .map(|(bits, _)| {
            let elements = (0..group.order())
                .filter(|&i| bit_get(&bits, i))
                .map(|i| group.elements[i].clone())
                .collect();
            PermGroup::from_elements_unchecked(group.n, elements)
        })
        .collect();
    out.sort_by_key(PermGroup::order);
    Ok(out)
}

/// Orbits of the group action, canonicalized.
pub fn orbit_partition(group: &PermGroup) -> Partition {
    orbit_partition_of(group.n, group.elements.iter())
}

/// Orbits of the group generated by `perms` (the set need not be closed).
pub fn orbit_partition_of<'a>(n: usize, perms: impl Iterator<Item = &'a Permutation>) -> Partition {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for p in perms {
        for i in 0..n {
            let (a, b) = (find(&mut parent, i), find(&mut parent, p.image(i)));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Partition::from_labels(&roots)
}

/// The symmetry-induced patterns of one layer together with the subgroups
/// realizing each of them.
#[derive(Clone, Debug)]
pub struct PatternCatalogue {
    pub layer: Layer,
    pub group: PermGroup,
    pub subgroups: Vec<PermGroup>,
    pub patterns: Vec<PatternState>,
    /// `realizers[k]` lists indices into `subgroups` whose orbit partition
    /// equals `patterns[k]`.
    pub realizers: Vec<Vec<usize>>,
}

impl PatternCatalogue {
    pub fn build(g: &Graph, layer: Layer, order_cap: usize) -> Result<Self> {
        let group = automorphisms(g)?;
        let subgroups = subgroups(&group, order_cap)?;

        let mut by_partition: HashMap<Partition, Vec<usize>> = HashMap::new();
        for (k, h) in subgroups.iter().enumerate() {
            by_partition.entry(orbit_partition(h)).or_default().push(k);
        }
        let mut distinct: Vec<Partition> = by_partition.keys().cloned().collect();
        // Finest patterns first, then by letter notation; the all-singleton
        // pattern always ends up as P0.
        distinct.sort_by(|a, b| {
            b.n_clusters()
                .cmp(&a.n_clusters())
                .then_with(|| a.letters().cmp(&b.letters()))
        });

        let mut patterns = Vec::with_capacity(distinct.len());
        let mut realizers = Vec::with_capacity(distinct.len());
        for (i, p) in distinct.into_iter().enumerate() {
            realizers.push(by_partition[&p].clone());
            patterns.push(PatternState {
                label: format!("P{i}_{}", layer.suffix()),
                layer,
                partition: p,
            });
        }
        Ok(PatternCatalogue {
            layer,
            group,
            subgroups,
            patterns,
            realizers,
        })
    }

    pub fn find(&self, label: &str) -> Option<&PatternState> {
        self.patterns.iter().find(|p| p.label == label)
    }

    pub fn find_partition(&self, partition: &Partition) -> Option<usize> {
        self.patterns.iter().position(|p| &p.partition == partition)
    }

    /// Subgroups whose orbit partition is `partition`.
    pub fn realizing_subgroups(&self, partition: &Partition) -> Vec<&PermGroup> {
        match self.find_partition(partition) {
            Some(k) => self.realizers[k].iter().map(|&s| &self.subgroups[s]).collect(),
            None => Vec::new(),
        }
    }
}

/// Orbit partitions of every subgroup of `Aut(g)`, deduplicated and labeled.
pub fn enumerate_patterns(g: &Graph, layer: Layer) -> Result<Vec<PatternState>> {
    Ok(PatternCatalogue::build(g, layer, DEFAULT_ORDER_CAP)?.patterns)
}

/// Set of partitions, for quick membership checks in tests and reports.
pub fn partition_set(patterns: &[PatternState]) -> BTreeSet<Partition> {
    patterns.iter().map(|p| p.partition.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm1(n: usize, cycles: &[&[usize]]) -> Permutation {
        Permutation::from_cycles(n, cycles).unwrap()
    }

    #[test]
    fn permutation_algebra() {
        let p = perm1(4, &[&[1, 2, 3]]);
        assert_eq!(p.images(), &[1, 2, 0, 3]);
        assert!(p.compose(&p.inverse()).is_identity());
        assert_eq!(p.compose(&p).compose(&p), Permutation::identity(4));
        assert_eq!(p.to_string(), "(1 2 3)");
        assert_eq!(Permutation::identity(3).to_string(), "()");
        assert!(Permutation::from_images(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn path_automorphisms() {
        let g = Graph::path(3);
        let aut = automorphisms(&g).unwrap();
        assert_eq!(aut.order(), 2);
        assert!(aut.contains(&perm1(3, &[&[1, 3]])));
    }

    #[test]
    fn complete_graph_has_full_symmetric_group() {
        assert_eq!(automorphisms(&Graph::complete(4)).unwrap().order(), 24);
    }

    #[test]
    fn five_cycle_is_dihedral() {
        let aut = automorphisms(&Graph::cycle(5)).unwrap();
        assert_eq!(aut.order(), 10);
        assert!(aut.satisfies_group_axioms());
        assert!(aut.contains(&perm1(5, &[&[1, 2, 3, 4, 5]])));
    }

    #[test]
    fn automorphism_cap() {
        assert!(matches!(
            automorphisms(&Graph::empty(17)),
            Err(Error::TooManyNodes { .. })
        ));
    }

    #[test]
    fn subgroup_counts() {
        let z2 = automorphisms(&Graph::path(3)).unwrap();
        assert_eq!(subgroups(&z2, 100).unwrap().len(), 2);

        let d5 = automorphisms(&Graph::cycle(5)).unwrap();
        let subs = subgroups(&d5, 100).unwrap();
        assert_eq!(subs.len(), 8);
        let orders: Vec<usize> = subs.iter().map(PermGroup::order).collect();
        assert_eq!(orders, vec![1, 2, 2, 2, 2, 2, 5, 10]);
        assert!(subs.iter().all(PermGroup::satisfies_group_axioms));

        assert_eq!(subgroups(&PermGroup::trivial(4), 100).unwrap().len(), 1);
        assert!(matches!(
            subgroups(&d5, 5),
            Err(Error::GroupTooLarge { order: 10, cap: 5 })
        ));
    }

    #[test]
    fn orbit_examples() {
        assert_eq!(
            orbit_partition(&PermGroup::trivial(5)),
            Partition::singletons(5)
        );
        let z2 = PermGroup::generated_by(3, &[perm1(3, &[&[1, 3]])]);
        assert_eq!(
            orbit_partition(&z2),
            Partition::from_clusters1(3, &[vec![1, 3], vec![2]]).unwrap()
        );
        let d5 = automorphisms(&Graph::cycle(5)).unwrap();
        assert_eq!(orbit_partition(&d5), Partition::one_cluster(5));
    }

    #[test]
    fn pattern_catalogues() {
        let empty3 = enumerate_patterns(&Graph::empty(3), Layer::Bottom).unwrap();
        assert_eq!(empty3.len(), 5);
        assert_eq!(empty3[0].partition, Partition::singletons(3));
        assert_eq!(empty3[0].label, "P0_B");
        assert!(partition_set(&empty3).contains(&Partition::one_cluster(3)));

        let path = enumerate_patterns(&Graph::path(3), Layer::Top).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[1].partition.letters(), "aba");
        assert_eq!(path[1].label, "P1_T");
    }

    #[test]
    fn partition_canonical_form() {
        let p = Partition::from_clusters(5, vec![vec![4, 3], vec![2, 1], vec![0]]).unwrap();
        assert_eq!(p.clusters(), &[vec![0], vec![1, 2], vec![3, 4]]);
        assert_eq!(p.letters(), "abbcc");
        assert_eq!(p.to_string(), "(a, b, b, c, c)");
        assert_eq!(Partition::from_letters("abbcc"), p);
        assert_eq!(p.n_nontrivial(), 2);
        assert!(Partition::singletons(5).refines(&p));
        assert!(!p.refines(&Partition::singletons(5)));

        assert!(Partition::from_clusters(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::from_clusters(3, vec![vec![0, 1]]).is_err());
    }
}
