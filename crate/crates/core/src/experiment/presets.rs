//! Named duplex topologies used by the shipped experiment configs.
//!
//! `five_node_switching`: the bottom graph is a hub (node 1) joined to all
//! other nodes plus the edge 2-3, so its automorphisms are generated by
//! (2 3) and (4 5) and its patterns are exactly the singletons,
//! `abbcd`, `abcdd` and `abbcc`. The top graph joins {1,4,5} to {2,3}
//! completely and adds a triangle on {1,4,5}; every node but the hub is
//! driven.
//!
//! `six_node_stability`: a top triangle {1,2,3} and an edge 4-5, all
//! joined to node 6; a bottom triangle {1,2,3} with leaves 4, 5, 6 on
//! node 1. Top clusters {1,2,3}, {4,5}, {6} and bottom clusters {1},
//! {2,3}, {4,5}, {6} under the duplex group, with only nodes 4 and 5
//! driven.

use crate::error::{Error, Result};
use crate::topology::{build_duplex, build_graph, DuplexTopology};

pub struct Preset {
    pub name: &'static str,
    pub n_nodes: usize,
    pub top_edges: &'static [[usize; 2]],
    pub bottom_edges: &'static [[usize; 2]],
    pub kappa: &'static [i64],
}

pub const FIVE_NODE: Preset = Preset {
    name: "five_node_switching",
    n_nodes: 5,
    top_edges: &[[1, 2], [1, 3], [4, 2], [4, 3], [5, 2], [5, 3], [1, 4], [1, 5], [4, 5]],
    bottom_edges: &[[1, 2], [1, 3], [1, 4], [1, 5], [2, 3]],
    kappa: &[0, 1, 1, 1, 1],
};

pub const SIX_NODE: Preset = Preset {
    name: "six_node_stability",
    n_nodes: 6,
    top_edges: &[[1, 2], [2, 3], [1, 3], [1, 6], [2, 6], [3, 6], [4, 6], [5, 6], [4, 5]],
    bottom_edges: &[[1, 2], [1, 3], [2, 3], [1, 4], [1, 5], [1, 6]],
    kappa: &[0, 0, 0, 1, 1, 0],
};

pub const PRESETS: [&Preset; 2] = [&FIVE_NODE, &SIX_NODE];

impl Preset {
    pub fn duplex(&self) -> Result<DuplexTopology> {
        build_duplex(
            build_graph(self.n_nodes, self.top_edges)?,
            build_graph(self.n_nodes, self.bottom_edges)?,
            self.kappa,
        )
    }
}

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().copied().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown topology preset {name:?}; known presets: {}", known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::{complete_sync_excluded, CompatAnalysis};
    use crate::symmetry::Partition;

    #[test]
    fn five_node_catalogue() {
        let a = CompatAnalysis::new(&FIVE_NODE.duplex().unwrap()).unwrap();
        let letters: Vec<String> = a.bottom.patterns.iter().map(|p| p.partition.letters()).collect();
        assert_eq!(letters, ["abcde", "abbcd", "abcdd", "abbcc"]);
        assert_eq!(a.bottom.group.order(), 4);
        assert!(a.invariant_bottom_patterns().unwrap().len() == 4);
        assert!(complete_sync_excluded(&a.duplex));
        let d = a.duplex_clusters();
        assert_eq!(d.bottom, Partition::from_letters("abbcc"));
        assert_eq!(d.top, Partition::from_letters("abbcc"));
    }

    #[test]
    fn six_node_duplex_clusters() {
        let a = CompatAnalysis::new(&SIX_NODE.duplex().unwrap()).unwrap();
        let d = a.duplex_clusters();
        assert_eq!(d.top.to_one_based(), vec![vec![1, 2, 3], vec![4, 5], vec![6]]);
        assert_eq!(d.bottom.to_one_based(), vec![vec![1], vec![2, 3], vec![4, 5], vec![6]]);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("nope"), Err(Error::Config(_))));
    }
}
