//! Which bottom-layer symmetries survive the inter-layer coupling.
//!
//! A bottom symmetry `P_B` is compatible when some top symmetry `P_T`
//! satisfies `P_B K = K P_T`. The compatible elements form subgroups
//! `H_T`, `H_B`; grouping them by the shared product matrix gives the
//! paired equivalence classes whose block-diagonal pairs act on the duplex.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmetry::{
    orbit_partition_of, Layer, Partition, PatternCatalogue, PatternState, PermGroup, Permutation,
    DEFAULT_ORDER_CAP,
};
use crate::topology::{DuplexTopology, InterLayerCoupling};

/// `K P_T`, row-major 0/1.
fn k_times_p(kappa: &InterLayerCoupling, p: &Permutation) -> Vec<u8> {
    let n = p.len();
    let mut m = p.matrix();
    for i in 0..n {
        if !kappa.driven(i) {
            m[i * n..(i + 1) * n].fill(0);
        }
    }
    m
}

/// `P_B K`, row-major 0/1.
fn p_times_k(p: &Permutation, kappa: &InterLayerCoupling) -> Vec<u8> {
    let n = p.len();
    let mut m = p.matrix();
    for i in 0..n {
        for j in 0..n {
            if !kappa.driven(j) {
                m[i * n + j] = 0;
            }
        }
    }
    m
}

/// Whether `P_B K == K P_T` entrywise.
pub fn conjugacy_holds(p_bottom: &Permutation, p_top: &Permutation, kappa: &InterLayerCoupling) -> bool {
    p_times_k(p_bottom, kappa) == k_times_p(kappa, p_top)
}

/// One pair of matched classes: every top element has `K P_T = product`
/// and every bottom element has `P_B K = product`.
#[derive(Clone, Debug)]
pub struct CompatClass {
    pub product: Vec<u8>,
    pub top: Vec<Permutation>,
    pub bottom: Vec<Permutation>,
}

#[derive(Clone, Debug)]
pub struct CompatibilityClasses {
    pub h_top: PermGroup,
    pub h_bottom: PermGroup,
    pub classes: Vec<CompatClass>,
}

impl CompatibilityClasses {
    /// All `(P_T, P_B)` pairs of the duplex symmetry group.
    pub fn pairs(&self) -> impl Iterator<Item = (&Permutation, &Permutation)> {
        self.classes
            .iter()
            .flat_map(|c| c.top.iter().flat_map(move |t| c.bottom.iter().map(move |b| (t, b))))
    }
}

pub fn compatibility_classes(
    g_top: &PermGroup,
    g_bottom: &PermGroup,
    kappa: &InterLayerCoupling,
) -> Result<CompatibilityClasses> {
    let n = kappa.len();
    if g_top.degree() != n || g_bottom.degree() != n {
        return Err(Error::SizeMismatch {
            what: "permutation group degree",
            expected: n,
            found: if g_top.degree() != n {
                g_top.degree()
            } else {
                g_bottom.degree()
            },
        });
    }

    let mut top_by: BTreeMap<Vec<u8>, Vec<Permutation>> = BTreeMap::new();
    for p in g_top.elements() {
        top_by.entry(k_times_p(kappa, p)).or_default().push(p.clone());
    }
    let mut bottom_by: BTreeMap<Vec<u8>, Vec<Permutation>> = BTreeMap::new();
    for p in g_bottom.elements() {
        bottom_by.entry(p_times_k(p, kappa)).or_default().push(p.clone());
    }

    let mut classes = Vec::new();
    for (product, top) in top_by {
        if let Some(bottom) = bottom_by.remove(&product) {
            classes.push(CompatClass {
                product,
                top,
                bottom,
            });
        }
    }

    let h_top = PermGroup::from_elements_unchecked(
        n,
        classes.iter().flat_map(|c| c.top.iter().cloned()).collect(),
    );
    let h_bottom = PermGroup::from_elements_unchecked(
        n,
        classes.iter().flat_map(|c| c.bottom.iter().cloned()).collect(),
    );
    if !h_top.satisfies_group_axioms() || !h_bottom.satisfies_group_axioms() {
        return Err(Error::Internal(
            "compatible symmetries do not form subgroups".into(),
        ));
    }
    Ok(CompatibilityClasses {
        h_top,
        h_bottom,
        classes,
    })
}

/// Top and bottom clusters induced by the duplex symmetry group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DuplexClusters {
    pub top: Partition,
    pub bottom: Partition,
}

impl DuplexClusters {
    pub fn new(top: Partition, bottom: Partition) -> Result<Self> {
        if top.n_nodes() != bottom.n_nodes() {
            return Err(Error::SizeMismatch {
                what: "bottom partition",
                expected: top.n_nodes(),
                found: bottom.n_nodes(),
            });
        }
        Ok(DuplexClusters { top, bottom })
    }

    /// The `k_T <= k_B` count bound.
    pub fn satisfies_count_bound(&self) -> bool {
        self.top.n_clusters() <= self.bottom.n_clusters()
    }
}

/// Orbits of the duplex group acting diagonally on both node sets.
pub fn duplex_orbit_partition(classes: &CompatibilityClasses) -> DuplexClusters {
    let n = classes.h_top.degree();
    DuplexClusters {
        top: orbit_partition_of(n, classes.pairs().map(|(t, _)| t)),
        bottom: orbit_partition_of(n, classes.pairs().map(|(_, b)| b)),
    }
}

/// How a bottom cluster is fed by the top layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveStatus {
    Undriven,
    DrivenOneToOne,
}

/// A bottom cluster must be entirely driven or entirely undriven.
pub fn all_or_nothing(cluster: &[usize], kappa: &InterLayerCoupling) -> Result<DriveStatus> {
    let Some(&first) = cluster.first() else {
        return Err(Error::InvalidArgument("empty cluster".into()));
    };
    let driven = kappa.driven(first);
    if cluster.iter().all(|&i| kappa.driven(i) == driven) {
        Ok(if driven {
            DriveStatus::DrivenOneToOne
        } else {
            DriveStatus::Undriven
        })
    } else {
        Err(Error::MixedCluster {
            cluster: cluster.iter().map(|i| i + 1).collect(),
        })
    }
}

/// Why a bottom pattern loses flow invariance once the layers are coupled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// A cluster mixes driven and undriven nodes (1-based labels).
    MixedCluster { cluster: Vec<usize> },
    /// A bottom symmetry needed for the pattern has no top partner.
    NoCompatibleTop { bottom_symmetry: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Invariance {
    /// Invariant; the witnesses are the top partitions induced by the
    /// top partners of each compatible realizing subgroup.
    Invariant { witnesses: Vec<Partition> },
    NotInvariant(FailureReason),
}

impl Invariance {
    pub fn is_invariant(&self) -> bool {
        matches!(self, Invariance::Invariant { .. })
    }
}

/// Cached symmetry data of a duplex: both catalogues and the classes.
#[derive(Clone, Debug)]
pub struct CompatAnalysis {
    pub duplex: DuplexTopology,
    pub top: PatternCatalogue,
    pub bottom: PatternCatalogue,
    pub classes: CompatibilityClasses,
}

impl CompatAnalysis {
    pub fn new(duplex: &DuplexTopology) -> Result<Self> {
        let top = PatternCatalogue::build(&duplex.top, Layer::Top, DEFAULT_ORDER_CAP)?;
        let bottom = PatternCatalogue::build(&duplex.bottom, Layer::Bottom, DEFAULT_ORDER_CAP)?;
        let classes = compatibility_classes(&top.group, &bottom.group, &duplex.inter)?;
        Ok(CompatAnalysis {
            duplex: duplex.clone(),
            top,
            bottom,
            classes,
        })
    }

    pub fn duplex_clusters(&self) -> DuplexClusters {
        duplex_orbit_partition(&self.classes)
    }

    /// Invariance of a bottom partition under the coupled dynamics.
    ///
    /// Mixed clusters are rejected first. Otherwise the partition must be
    /// the orbit partition of a bottom subgroup all of whose elements have
    /// a top partner.
    pub fn invariance(&self, partition: &Partition) -> Result<Invariance> {
        let kappa = &self.duplex.inter;
        for c in partition.clusters() {
            if let Err(Error::MixedCluster { cluster }) = all_or_nothing(c, kappa) {
                return Ok(Invariance::NotInvariant(FailureReason::MixedCluster { cluster }));
            }
        }

        let realizers = self.bottom.realizing_subgroups(partition);
        if realizers.is_empty() {
            return Err(Error::NotRealizable(partition.to_string()));
        }

        let mut witnesses: Vec<Partition> = Vec::new();
        let mut first_failure = None;
        for h in realizers {
            match h.elements().iter().find(|p| !self.classes.h_bottom.contains(p)) {
                Some(bad) => {
                    first_failure.get_or_insert_with(|| bad.clone());
                }
                None => {
                    let w = self.top_partner_partition(h);
                    if !witnesses.contains(&w) {
                        witnesses.push(w);
                    }
                }
            }
        }
        if witnesses.is_empty() {
            let bad = first_failure.expect("a realizer failed");
            Ok(Invariance::NotInvariant(FailureReason::NoCompatibleTop {
                bottom_symmetry: bad.to_string(),
            }))
        } else {
            witnesses.sort();
            Ok(Invariance::Invariant { witnesses })
        }
    }

    /// Orbits of every top element paired with some element of `h`.
    fn top_partner_partition(&self, h: &PermGroup) -> Partition {
        let n = h.degree();
        let tops = self
            .classes
            .classes
            .iter()
            .filter(|c| c.bottom.iter().any(|b| h.contains(b)))
            .flat_map(|c| c.top.iter());
        orbit_partition_of(n, tops)
    }

    /// Bottom catalogue patterns that stay invariant, with witnesses.
    pub fn invariant_bottom_patterns(&self) -> Result<Vec<(&PatternState, Vec<Partition>)>> {
        let mut out = Vec::new();
        for p in &self.bottom.patterns {
            if let Invariance::Invariant { witnesses } = self.invariance(&p.partition)? {
                out.push((p, witnesses));
            }
        }
        Ok(out)
    }
}

/// Invariance of one bottom pattern under the duplex dynamics.
pub fn is_pattern_invariant(pattern: &PatternState, duplex: &DuplexTopology) -> Result<Invariance> {
    if pattern.layer != Layer::Bottom {
        return Err(Error::InvalidArgument(format!(
            "{} is not a bottom-layer pattern",
            pattern.label
        )));
    }
    CompatAnalysis::new(duplex)?.invariance(&pattern.partition)
}

/// False only when `K = I` and the top layer admits complete
/// synchronization (constant row sums of `A`).
pub fn complete_sync_excluded(duplex: &DuplexTopology) -> bool {
    !(duplex.inter.is_identity() && duplex.top.is_regular())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::automorphisms;
    use crate::topology::{build_duplex, Graph};

    fn kappa(v: &[i64]) -> InterLayerCoupling {
        InterLayerCoupling::from_ints(v).unwrap()
    }

    fn all_perms(n: usize) -> Vec<Permutation> {
        automorphisms(&Graph::empty(n)).unwrap().elements().to_vec()
    }

    #[test]
    fn conjugacy_examples() {
        let k = kappa(&[1, 0, 1, 1, 0]);
        let id = Permutation::identity(5);
        assert!(conjugacy_holds(&id, &id, &k));
        assert!(conjugacy_holds(&id, &id, &kappa(&[1, 1, 1, 1, 1])));

        let swap25 = Permutation::from_cycles(5, &[&[2, 5]]).unwrap();
        assert!(conjugacy_holds(&swap25, &id, &k));

        let swap12 = Permutation::from_cycles(5, &[&[1, 2]]).unwrap();
        let perms = all_perms(5);
        assert_eq!(perms.len(), 120);
        assert!(perms.iter().all(|pt| !conjugacy_holds(&swap12, pt, &k)));
    }

    #[test]
    fn identity_coupling_pairs_equal_symmetries() {
        let g = automorphisms(&Graph::cycle(4)).unwrap();
        let cc = compatibility_classes(&g, &g, &kappa(&[1, 1, 1, 1])).unwrap();
        assert_eq!(cc.classes.len(), g.order());
        for c in &cc.classes {
            assert_eq!(c.top.len(), 1);
            assert_eq!(c.top, c.bottom);
        }
    }

    #[test]
    fn zero_coupling_makes_one_class() {
        let gt = automorphisms(&Graph::path(4)).unwrap();
        let gb = automorphisms(&Graph::cycle(4)).unwrap();
        let cc = compatibility_classes(&gt, &gb, &kappa(&[0, 0, 0, 0])).unwrap();
        assert_eq!(cc.classes.len(), 1);
        assert_eq!(cc.h_top, gt);
        assert_eq!(cc.h_bottom, gb);
    }

    #[test]
    fn swap_lands_with_identity() {
        let k = kappa(&[1, 0, 1, 1, 0]);
        let swap25 = Permutation::from_cycles(5, &[&[2, 5]]).unwrap();
        let gb = PermGroup::generated_by(5, &[swap25.clone()]);
        let gt = PermGroup::trivial(5);
        let cc = compatibility_classes(&gt, &gb, &k).unwrap();
        assert_eq!(cc.classes.len(), 1);
        assert!(cc.classes[0].bottom.contains(&swap25));
        assert!(cc.classes[0].bottom.contains(&Permutation::identity(5)));
    }

    #[test]
    fn trivial_classes_give_singletons() {
        let g = PermGroup::trivial(4);
        let cc = compatibility_classes(&g, &g, &kappa(&[1, 0, 1, 0])).unwrap();
        let dc = duplex_orbit_partition(&cc);
        assert_eq!(dc.top, Partition::singletons(4));
        assert_eq!(dc.bottom, Partition::singletons(4));
    }

    #[test]
    fn all_or_nothing_examples() {
        let k = kappa(&[1, 0, 1, 1, 0]);
        assert_eq!(all_or_nothing(&[1, 4], &k).unwrap(), DriveStatus::Undriven);
        assert_eq!(all_or_nothing(&[2, 3], &k).unwrap(), DriveStatus::DrivenOneToOne);
        match all_or_nothing(&[0, 1], &k) {
            Err(Error::MixedCluster { cluster }) => assert_eq!(cluster, vec![1, 2]),
            other => panic!("expected mixed cluster, got {other:?}"),
        }
    }

    #[test]
    fn singleton_and_complete_sync_patterns() {
        let d = build_duplex(Graph::cycle(5), Graph::cycle(5), &[1, 0, 1, 1, 0]).unwrap();
        let a = CompatAnalysis::new(&d).unwrap();
        assert!(a.invariance(&Partition::singletons(5)).unwrap().is_invariant());
        assert!(matches!(
            a.invariance(&Partition::one_cluster(5)).unwrap(),
            Invariance::NotInvariant(FailureReason::MixedCluster { .. })
        ));
    }

    #[test]
    fn complete_sync_exclusion_cases() {
        let mk = |k: &[i64]| build_duplex(Graph::complete(5), Graph::cycle(5), k).unwrap();
        assert!(complete_sync_excluded(&mk(&[1, 0, 1, 1, 0])));
        assert!(!complete_sync_excluded(&mk(&[1, 1, 1, 1, 1])));
        assert!(complete_sync_excluded(&mk(&[0, 0, 0, 0, 0])));
    }

    #[test]
    fn count_bound_needs_driven_top_clusters() {
        // An undriven asymmetric top layer over a symmetric bottom layer
        // has more top clusters than bottom clusters.
        let d = build_duplex(Graph::path(3), Graph::empty(3), &[0, 0, 0]).unwrap();
        let dc = CompatAnalysis::new(&d).unwrap().duplex_clusters();
        assert_eq!(dc.top.n_clusters(), 2);
        assert_eq!(dc.bottom.n_clusters(), 1);
        assert!(!dc.satisfies_count_bound());
    }
}
