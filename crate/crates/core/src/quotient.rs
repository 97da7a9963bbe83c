//! Characteristic matrices, projectors and the reduced dynamics on a
//! cluster pattern.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::compat::DuplexClusters;
use crate::dynamics::{intra_coupling, node, DuplexModel, SigmaSchedule, VectorField, NODE_DIM};
use crate::error::{Error, Result};
use crate::symmetry::Partition;
use crate::topology::laplacian;

/// Residual above which a defining relation counts as violated.
pub const EQUITABLE_TOLERANCE: f64 = 1e-10;

/// Cluster indicator vectors as the columns of an `N x k` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicMatrix {
    pub e: DMatrix<f64>,
    sizes: Vec<usize>,
}

impl CharacteristicMatrix {
    pub fn n_nodes(&self) -> usize {
        self.e.nrows()
    }

    pub fn n_clusters(&self) -> usize {
        self.e.ncols()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `(EᵀE)⁻¹Eᵀ`; `EᵀE` is the diagonal of cluster sizes.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let mut p = self.e.transpose();
        for (l, &size) in self.sizes.iter().enumerate() {
            p.row_mut(l).scale_mut(1.0 / size as f64);
        }
        p
    }
}

pub fn characteristic_matrix(p: &Partition) -> CharacteristicMatrix {
    let mut e = DMatrix::zeros(p.n_nodes(), p.n_clusters());
    for (l, cluster) in p.clusters().iter().enumerate() {
        for &i in cluster {
            e[(i, l)] = 1.0;
        }
    }
    CharacteristicMatrix {
        e,
        sizes: p.sizes(),
    }
}

/// Orthogonal projector onto the column space of a characteristic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    pub pi: DMatrix<f64>,
}

pub fn projector(e: &CharacteristicMatrix) -> Projector {
    Projector {
        pi: &e.e * e.pseudo_inverse(),
    }
}

/// Dense row-major matrix for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for DenseMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        DenseMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

/// Reduced coupling matrices of a duplex pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientSystem {
    pub clusters: DuplexClusters,
    pub a_r: DMatrix<f64>,
    pub l_s: DMatrix<f64>,
    pub k_r: DMatrix<f64>,
    pub k_s: DMatrix<f64>,
    pub e_top: CharacteristicMatrix,
    pub e_bottom: CharacteristicMatrix,
}

/// Serializable view of a [`QuotientSystem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub top_clusters: Vec<Vec<usize>>,
    pub bottom_clusters: Vec<Vec<usize>>,
    pub a_r: DenseMatrix,
    pub l_s: DenseMatrix,
    pub k_r: DenseMatrix,
    pub k_s: DenseMatrix,
}

impl QuotientSystem {
    pub fn n_top(&self) -> usize {
        self.a_r.nrows()
    }

    pub fn n_bottom(&self) -> usize {
        self.l_s.nrows()
    }

    /// Flat reduced state dimension `3 (k_T + k_B)`.
    pub fn dim(&self) -> usize {
        NODE_DIM * (self.n_top() + self.n_bottom())
    }

    pub fn report(&self) -> QuotientReport {
        QuotientReport {
            top_clusters: self.clusters.top.to_one_based(),
            bottom_clusters: self.clusters.bottom.to_one_based(),
            a_r: (&self.a_r).into(),
            l_s: (&self.l_s).into(),
            k_r: (&self.k_r).into(),
            k_s: (&self.k_s).into(),
        }
    }

    /// Full flat state `[x; y]` with every node set to its cluster's
    /// representative.
    pub fn lift(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.dim() {
            return Err(Error::SizeMismatch {
                what: "reduced state",
                expected: self.dim(),
                found: reduced.len(),
            });
        }
        let (r, s) = reduced.split_at(NODE_DIM * self.n_top());
        let mut out = Vec::with_capacity(2 * NODE_DIM * self.clusters.top.n_nodes());
        for l in self.clusters.top.membership() {
            out.extend_from_slice(&r[NODE_DIM * l..NODE_DIM * (l + 1)]);
        }
        for l in self.clusters.bottom.membership() {
            out.extend_from_slice(&s[NODE_DIM * l..NODE_DIM * (l + 1)]);
        }
        Ok(out)
    }

    /// Cluster averages of a full flat state.
    pub fn project(&self, full: &[f64]) -> Result<Vec<f64>> {
        let n = self.clusters.top.n_nodes();
        if full.len() != 2 * NODE_DIM * n {
            return Err(Error::SizeMismatch {
                what: "full state",
                expected: 2 * NODE_DIM * n,
                found: full.len(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        let offset = NODE_DIM * self.n_top();
        for (base, p, layer) in [
            (0, &self.clusters.top, 0),
            (offset, &self.clusters.bottom, NODE_DIM * n),
        ] {
            for (l, cluster) in p.clusters().iter().enumerate() {
                for &i in cluster {
                    for k in 0..NODE_DIM {
                        out[base + NODE_DIM * l + k] += full[layer + NODE_DIM * i + k];
                    }
                }
                for k in 0..NODE_DIM {
                    out[base + NODE_DIM * l + k] /= cluster.len() as f64;
                }
            }
        }
        Ok(out)
    }
}

fn residual(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    (lhs - rhs).amax()
}

pub fn quotient_matrices(
    duplex: &crate::topology::DuplexTopology,
    clusters: &DuplexClusters,
) -> Result<QuotientSystem> {
    let n = duplex.n_nodes();
    for p in [&clusters.top, &clusters.bottom] {
        if p.n_nodes() != n {
            return Err(Error::SizeMismatch {
                what: "cluster partition",
                expected: n,
                found: p.n_nodes(),
            });
        }
    }
    let e_top = characteristic_matrix(&clusters.top);
    let e_bottom = characteristic_matrix(&clusters.bottom);
    let et_plus = e_top.pseudo_inverse();
    let eb_plus = e_bottom.pseudo_inverse();

    let a = duplex.top.adjacency_matrix();
    let l = laplacian(&duplex.bottom);
    let k = duplex.inter.matrix();

    let a_r = &et_plus * &a * &e_top.e;
    let l_s = &eb_plus * &l * &e_bottom.e;
    let k_r = &eb_plus * &k * &e_top.e;
    let k_s = &eb_plus * &k * &e_bottom.e;

    let checks = [
        ("A E_T = E_T A_r", residual(&(&a * &e_top.e), &(&e_top.e * &a_r))),
        ("L E_B = E_B L_s", residual(&(&l * &e_bottom.e), &(&e_bottom.e * &l_s))),
        ("K E_T = E_B K_r", residual(&(&k * &e_top.e), &(&e_bottom.e * &k_r))),
        ("K E_B = E_B K_s", residual(&(&k * &e_bottom.e), &(&e_bottom.e * &k_s))),
    ];
    for (relation, res) in checks {
        if res > EQUITABLE_TOLERANCE {
            return Err(Error::NotEquitable {
                relation,
                residual: res,
            });
        }
    }

    Ok(QuotientSystem {
        clusters: clusters.clone(),
        a_r,
        l_s,
        k_r,
        k_s,
        e_top,
        e_bottom,
    })
}

/// Reduced equations on `[r; s]` for a given model and sigma.
pub fn quotient_rhs_with_sigma(
    q: &QuotientSystem,
    model: &DuplexModel,
    sigma: f64,
    state: &[f64],
    out: &mut [f64],
) {
    let kt = q.n_top();
    let kb = q.n_bottom();
    let alpha = model.strengths.alpha;
    let beta = model.strengths.beta;
    let (r, s) = state.split_at(NODE_DIM * kt);
    let (dr, ds) = out.split_at_mut(NODE_DIM * kt);

    for l in 0..kt {
        let mut f = model.top.field(&node(r, l));
        for m in 0..kt {
            let w = q.a_r[(l, m)];
            if w != 0.0 {
                let u = intra_coupling(&node(r, m));
                for k in 0..NODE_DIM {
                    f[k] += alpha * w * u[k];
                }
            }
        }
        dr[NODE_DIM * l..NODE_DIM * (l + 1)].copy_from_slice(&f);
    }

    for l in 0..kb {
        let sl = node(s, l);
        let mut f = model.bottom.field(&sl);
        for m in 0..kb {
            let w = q.l_s[(l, m)];
            if w != 0.0 {
                let c = intra_coupling(&node(s, m));
                for k in 0..NODE_DIM {
                    f[k] -= beta * w * c[k];
                }
            }
        }
        if sigma != 0.0 {
            for m in 0..kt {
                let w = q.k_r[(l, m)];
                if w != 0.0 {
                    let push = model.d.apply(&node(r, m));
                    for k in 0..NODE_DIM {
                        f[k] += sigma * w * push[k];
                    }
                }
            }
            for m in 0..kb {
                let w = q.k_s[(l, m)];
                if w != 0.0 {
                    let push = model.d.apply(&node(s, m));
                    for k in 0..NODE_DIM {
                        f[k] -= sigma * w * push[k];
                    }
                }
            }
        }
        ds[NODE_DIM * l..NODE_DIM * (l + 1)].copy_from_slice(&f);
    }
}

/// Reduced right-hand side at stacked cluster states `r` and `s`, using
/// the model's own sigma.
pub fn quotient_rhs(q: &QuotientSystem, model: &DuplexModel, r: &[f64], s: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if r.len() != NODE_DIM * q.n_top() || s.len() != NODE_DIM * q.n_bottom() {
        return Err(Error::SizeMismatch {
            what: "reduced state",
            expected: q.dim(),
            found: r.len() + s.len(),
        });
    }
    let state: Vec<f64> = r.iter().chain(s).copied().collect();
    let mut out = vec![0.0; state.len()];
    quotient_rhs_with_sigma(q, model, model.strengths.sigma, &state, &mut out);
    let ds = out.split_off(r.len());
    Ok((out, ds))
}

/// The reduced equations as a [`VectorField`].
#[derive(Clone, Debug)]
pub struct QuotientField<'a> {
    pub q: &'a QuotientSystem,
    pub model: &'a DuplexModel,
    pub schedule: SigmaSchedule,
    active_sigma: f64,
}

impl<'a> QuotientField<'a> {
    pub fn new(q: &'a QuotientSystem, model: &'a DuplexModel, schedule: SigmaSchedule) -> Self {
        QuotientField {
            q,
            model,
            schedule,
            active_sigma: schedule.sigma_for_step(0),
        }
    }

    pub fn constant(q: &'a QuotientSystem, model: &'a DuplexModel) -> Self {
        Self::new(q, model, SigmaSchedule::constant(model.strengths.sigma))
    }
}

impl VectorField for QuotientField<'_> {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        quotient_rhs_with_sigma(self.q, self.model, self.active_sigma, y, dy);
    }

    fn begin_step(&mut self, step: u64, _t: f64) {
        self.active_sigma = self.schedule.sigma_for_step(step);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{HRParams, InterCouplingMatrix, NodeModel};
    use crate::topology::{build_duplex, CouplingStrengths, Graph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &DMatrix<f64>, b: &[f64]) -> bool {
        a.transpose().as_slice().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn characteristic_examples() {
        let p = Partition::from_clusters1(3, &[vec![1, 2], vec![3]]).unwrap();
        let e = characteristic_matrix(&p);
        assert!(close(&e.e, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]));
        let ete = e.e.transpose() * &e.e;
        assert!(close(&ete, &[2.0, 0.0, 0.0, 1.0]));

        let id = characteristic_matrix(&Partition::singletons(4));
        assert_eq!(id.e, DMatrix::identity(4, 4));

        let one = characteristic_matrix(&Partition::one_cluster(4));
        assert_eq!(one.e, DMatrix::from_element(4, 1, 1.0));
    }

    #[test]
    fn projector_examples() {
        let p = Partition::from_clusters1(3, &[vec![1, 2], vec![3]]).unwrap();
        let pi = projector(&characteristic_matrix(&p)).pi;
        assert!(close(&pi, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0]));
        assert!((&pi * &pi - &pi).amax() < 1e-12);
        assert!((&pi - pi.transpose()).amax() < 1e-12);

        let one = projector(&characteristic_matrix(&Partition::one_cluster(4))).pi;
        assert!(one.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn quotient_of_driven_pairs() {
        let duplex = build_duplex(Graph::cycle(4), Graph::cycle(4), &[1, 1, 0, 0]).unwrap();
        let p = Partition::from_clusters1(4, &[vec![1, 2], vec![3, 4]]).unwrap();
        let q = quotient_matrices(&duplex, &DuplexClusters::new(p.clone(), p).unwrap()).unwrap();
        assert!(close(&q.k_s, &[1.0, 0.0, 0.0, 0.0]));
        assert!(close(&q.k_r, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn singletons_reproduce_original_matrices() {
        let duplex = build_duplex(Graph::cycle(5), Graph::path(5), &[1, 0, 1, 1, 0]).unwrap();
        let s = Partition::singletons(5);
        let q = quotient_matrices(&duplex, &DuplexClusters::new(s.clone(), s).unwrap()).unwrap();
        assert_eq!(q.a_r, duplex.top.adjacency_matrix());
        assert_eq!(q.l_s, laplacian(&duplex.bottom));
        assert_eq!(q.k_r, duplex.inter.matrix());
        assert_eq!(q.k_s, duplex.inter.matrix());
    }

    #[test]
    fn one_cluster_on_empty_bottom() {
        let duplex = build_duplex(Graph::complete(3), Graph::empty(3), &[0, 0, 0]).unwrap();
        let one = Partition::one_cluster(3);
        let q = quotient_matrices(&duplex, &DuplexClusters::new(one.clone(), one).unwrap()).unwrap();
        assert_eq!(q.l_s, DMatrix::zeros(1, 1));
        assert_eq!(q.a_r, DMatrix::from_element(1, 1, 2.0));
    }

    #[test]
    fn non_equitable_partition_rejected() {
        let duplex = build_duplex(Graph::path(3), Graph::path(3), &[0, 0, 0]).unwrap();
        let bad = Partition::from_clusters1(3, &[vec![1, 2], vec![3]]).unwrap();
        let good = Partition::singletons(3);
        let err = quotient_matrices(&duplex, &DuplexClusters::new(bad, good).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotEquitable { .. }));
    }

    #[test]
    fn lifted_quotient_rhs_matches_full_rhs() {
        let duplex = build_duplex(Graph::cycle(6), Graph::cycle(6), &[1, 0, 1, 0, 1, 0]).unwrap();
        let top = Partition::from_clusters1(6, &[vec![1, 3, 5], vec![2, 4, 6]]).unwrap();
        let clusters = DuplexClusters::new(top.clone(), top).unwrap();
        let q = quotient_matrices(&duplex, &clusters).unwrap();
        let model = DuplexModel::new(
            duplex,
            CouplingStrengths::new(0.3, 0.4, 0.7).unwrap(),
            NodeModel::HindmarshRose(HRParams::new(3.2, 0.01)),
            NodeModel::HindmarshRose(HRParams::new(3.27, 0.01)),
            InterCouplingMatrix::default(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reduced: Vec<f64> = (0..q.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut dred = vec![0.0; q.dim()];
        quotient_rhs_with_sigma(&q, &model, 0.7, &reduced, &mut dred);
        let lifted = q.lift(&reduced).unwrap();
        let mut dfull = vec![0.0; lifted.len()];
        model.rhs_with_sigma(0.7, &lifted, &mut dfull);
        let dlift = q.lift(&dred).unwrap();
        for (a, b) in dfull.iter().zip(&dlift) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = q.project(&lifted).unwrap();
        for (a, b) in back.iter().zip(&reduced) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
