//! Linear stability of cluster patterns: block-diagonalizing bases, the
//! variational flow in those coordinates, transverse Lyapunov exponents
//! per cluster and stability maps over the coupling plane.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compat::DuplexClusters;
use crate::dynamics::{
    cluster_bases, node, DuplexModel, Mat3, Rk4, VectorField, INTRA_COUPLING_JACOBIAN, NODE_DIM,
};
use crate::error::{Error, Result};
use crate::quotient::{quotient_matrices, quotient_rhs_with_sigma, QuotientSystem};
use crate::symmetry::{Layer, Partition};
use crate::topology::laplacian;

/// Largest admissible entry in an off-diagonal block after the change of
/// basis.
pub const BLOCK_TOLERANCE: f64 = 1e-10;
const SUPPORT_TOLERANCE: f64 = 1e-12;
const GRAM_SCHMIDT_KEEP: f64 = 1e-8;
const COUPLING_ZERO: f64 = 1e-14;
/// Relative drift of the running exponent over the second half of the
/// horizon above which an estimate is flagged as unconverged.
pub const CONVERGENCE_DRIFT: f64 = 0.05;
/// Exponents smaller than this in magnitude are judged by absolute drift.
pub const CONVERGENCE_FLOOR: f64 = 1e-3;

/// Orthogonal change of coordinates for one layer: the first `parallel`
/// columns span the synchronization manifold, the rest are transverse.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerBasis {
    pub t: DMatrix<f64>,
    pub parallel: usize,
    /// Cluster index perturbed by each transverse column.
    pub direction_cluster: Vec<usize>,
    /// Largest entry coupling parallel and transverse coordinates.
    pub block_residual: f64,
}

impl LayerBasis {
    pub fn n_transverse(&self) -> usize {
        self.direction_cluster.len()
    }
}

/// Bases for both layers.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityBasis {
    pub top: LayerBasis,
    pub bottom: LayerBasis,
}

fn off_block_max(m: &DMatrix<f64>, split: usize) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..m.ncols() {
            if (a < split) != (b < split) {
                worst = worst.max(m[(a, b)].abs());
            }
        }
    }
    worst
}

/// Builds the basis for `partition` and checks that `coupling` (adjacency
/// or Laplacian of the layer) does not mix parallel and transverse
/// coordinates.
pub fn stability_basis(partition: &Partition, coupling: &DMatrix<f64>) -> Result<LayerBasis> {
    let n = partition.n_nodes();
    if coupling.nrows() != n || coupling.ncols() != n {
        return Err(Error::SizeMismatch {
            what: "coupling matrix",
            expected: n,
            found: coupling.nrows(),
        });
    }
    let mut columns: Vec<Vec<f64>> = partition
        .clusters()
        .iter()
        .map(|c| {
            let w = 1.0 / (c.len() as f64).sqrt();
            let mut v = vec![0.0; n];
            for &i in c {
                v[i] = w;
            }
            v
        })
        .collect();
    let parallel = columns.len();

    for i in 0..n {
        if columns.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for _ in 0..2 {
            for c in &columns {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vk, ck) in v.iter_mut().zip(c) {
                    *vk -= dot * ck;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > GRAM_SCHMIDT_KEEP {
            v.iter_mut().for_each(|x| *x /= norm);
            columns.push(v);
        }
    }
    if columns.len() != n {
        return Err(Error::Internal(format!(
            "Gram-Schmidt produced {} of {n} basis vectors",
            columns.len()
        )));
    }

    let membership = partition.membership();
    let mut direction_cluster = Vec::with_capacity(n - parallel);
    for v in &columns[parallel..] {
        let mut owners = v
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() > SUPPORT_TOLERANCE)
            .map(|(i, _)| membership[i]);
        let first = owners.next().ok_or_else(|| Error::Internal("empty transverse vector".into()))?;
        if owners.any(|l| l != first) {
            return Err(Error::Internal("transverse vector spans several clusters".into()));
        }
        direction_cluster.push(first);
    }

    let t = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    let transformed = t.transpose() * coupling * &t;
    let block_residual = off_block_max(&transformed, parallel);
    if block_residual > BLOCK_TOLERANCE {
        return Err(Error::NotOrbitPartition(block_residual));
    }
    Ok(LayerBasis {
        t,
        parallel,
        direction_cluster,
        block_residual,
    })
}

/// Bases for the top partition (against `A`) and bottom partition
/// (against `L`).
pub fn duplex_basis(model: &DuplexModel, clusters: &DuplexClusters) -> Result<StabilityBasis> {
    Ok(StabilityBasis {
        top: stability_basis(&clusters.top, &model.duplex.top.adjacency_matrix())?,
        bottom: stability_basis(&clusters.bottom, &laplacian(&model.duplex.bottom))?,
    })
}

fn kron3(m: &DMatrix<f64>, j: &Mat3) -> DMatrix<f64> {
    m.kronecker(&DMatrix::from_fn(3, 3, |a, b| j[a][b]))
}

fn scale3(m: &Mat3, s: f64) -> Mat3 {
    m.map(|row| row.map(|v| v * s))
}

fn add3(a: &mut Mat3, b: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] += b[r][c];
        }
    }
}

fn is_zero3(m: &Mat3) -> bool {
    m.iter().flatten().all(|v| v.abs() <= COUPLING_ZERO)
}

/// One transverse perturbation direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Direction {
    pub layer: Layer,
    pub cluster: usize,
}

/// Variational equations of a duplex pattern in block coordinates.
#[derive(Clone, Debug)]
pub struct VariationalSystem {
    pub model: DuplexModel,
    pub quotient: QuotientSystem,
    pub basis: StabilityBasis,
    pub sigma: f64,
    /// `T_Tᵀ A T_T`
    pub b: DMatrix<f64>,
    /// `T_Bᵀ L T_B`
    pub m: DMatrix<f64>,
    /// `T_Bᵀ K T_T`
    pub k_top: DMatrix<f64>,
    /// `T_Bᵀ K T_B`
    pub k_bottom: DMatrix<f64>,
    g_top: Vec<DMatrix<f64>>,
    g_bottom: Vec<DMatrix<f64>>,
}

fn indicator_conjugate(t: &DMatrix<f64>, cluster: &[usize]) -> DMatrix<f64> {
    let n = t.nrows();
    let mut f = DMatrix::zeros(n, n);
    for &i in cluster {
        f[(i, i)] = 1.0;
    }
    t.transpose() * f * t
}

impl VariationalSystem {
    pub fn new(model: &DuplexModel, clusters: &DuplexClusters, sigma: f64) -> Result<Self> {
        let quotient = quotient_matrices(&model.duplex, clusters)?;
        let basis = duplex_basis(model, clusters)?;
        let (tt, tb) = (&basis.top.t, &basis.bottom.t);
        let k = model.duplex.inter.matrix();
        let b = tt.transpose() * model.duplex.top.adjacency_matrix() * tt;
        let m = tb.transpose() * laplacian(&model.duplex.bottom) * tb;
        let k_top = tb.transpose() * &k * tt;
        let k_bottom = tb.transpose() * &k * tb;

        // The transverse subsystem is closed only if the drive terms map
        // parallel coordinates to parallel coordinates.
        let (pt, pb) = (basis.top.parallel, basis.bottom.parallel);
        let leak_top = k_top.view((pb, 0), (k_top.nrows() - pb, pt)).amax();
        let leak_bottom = k_bottom.view((pb, 0), (k_bottom.nrows() - pb, pb)).amax();
        for (relation, residual) in [
            ("transverse drive from parallel top", leak_top),
            ("transverse drive from parallel bottom", leak_bottom),
        ] {
            if residual > BLOCK_TOLERANCE {
                return Err(Error::NotEquitable { relation, residual });
            }
        }

        let g_top = clusters.top.clusters().iter().map(|c| indicator_conjugate(tt, c)).collect();
        let g_bottom = clusters
            .bottom
            .clusters()
            .iter()
            .map(|c| indicator_conjugate(tb, c))
            .collect();
        Ok(VariationalSystem {
            model: model.clone(),
            quotient,
            basis,
            sigma,
            b,
            m,
            k_top,
            k_bottom,
            g_top,
            g_bottom,
        })
    }

    fn n(&self) -> usize {
        self.model.n_nodes()
    }

    /// The full `6N x 6N` variational matrix in block coordinates at the
    /// reduced state `[r; s]`.
    pub fn full_matrix(&self, reduced: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let (alpha, beta) = (self.model.strengths.alpha, self.model.strengths.beta);
        let kt = self.quotient.n_top();
        let (r, s) = reduced.split_at(NODE_DIM * kt);
        let mut out = DMatrix::zeros(6 * n, 6 * n);

        let mut top = DMatrix::zeros(3 * n, 3 * n);
        for (l, g) in self.g_top.iter().enumerate() {
            top += kron3(g, &self.model.top.jacobian(&node(r, l)));
            top += kron3(&(&self.b * g), &INTRA_COUPLING_JACOBIAN) * alpha;
        }
        let mut bottom = DMatrix::zeros(3 * n, 3 * n);
        for (l, g) in self.g_bottom.iter().enumerate() {
            bottom += kron3(g, &self.model.bottom.jacobian(&node(s, l)));
            bottom -= kron3(&(&self.m * g), &INTRA_COUPLING_JACOBIAN) * beta;
        }
        bottom -= kron3(&self.k_bottom, &self.model.d.0) * self.sigma;
        let drive = kron3(&self.k_top, &self.model.d.0) * self.sigma;

        out.view_mut((0, 0), (3 * n, 3 * n)).copy_from(&top);
        out.view_mut((3 * n, 3 * n), (3 * n, 3 * n)).copy_from(&bottom);
        out.view_mut((3 * n, 0), (3 * n, 3 * n)).copy_from(&drive);
        out
    }

    /// Time derivative of a perturbation `xi` (flat, `6N`) in block
    /// coordinates.
    pub fn rhs(&self, reduced: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if xi.len() != 6 * n || reduced.len() != self.quotient.dim() {
            return Err(Error::SizeMismatch {
                what: "perturbation",
                expected: 6 * n,
                found: xi.len(),
            });
        }
        let v = self.full_matrix(reduced) * nalgebra::DVector::from_column_slice(xi);
        Ok(v.as_slice().to_vec())
    }

    /// Indices into the full block-coordinate vector of every transverse
    /// direction, top first.
    pub fn transverse_indices(&self) -> Vec<usize> {
        let n = self.n();
        let top = (self.basis.top.parallel..n).flat_map(|c| (0..3).map(move |k| 3 * c + k));
        let bottom = (self.basis.bottom.parallel..n).flat_map(|c| (0..3).map(move |k| 3 * (n + c) + k));
        top.chain(bottom).collect()
    }

    pub fn transverse(&self) -> TransverseSystem {
        let (alpha, beta) = (self.model.strengths.alpha, self.model.strengths.beta);
        let (pt, pb) = (self.basis.top.parallel, self.basis.bottom.parallel);
        let nt = self.basis.top.n_transverse();
        let nb = self.basis.bottom.n_transverse();
        let mut directions: Vec<Direction> = self
            .basis
            .top
            .direction_cluster
            .iter()
            .map(|&cluster| Direction {
                layer: Layer::Top,
                cluster,
            })
            .collect();
        directions.extend(self.basis.bottom.direction_cluster.iter().map(|&cluster| Direction {
            layer: Layer::Bottom,
            cluster,
        }));

        let mut couplings: Vec<Vec<(usize, Mat3)>> = vec![Vec::new(); nt + nb];
        let mut push = |p: usize, q: usize, c: Mat3| {
            if !is_zero3(&c) {
                couplings[p].push((q, c));
            }
        };
        for p in 0..nt {
            for q in 0..nt {
                push(p, q, scale3(&INTRA_COUPLING_JACOBIAN, alpha * self.b[(pt + p, pt + q)]));
            }
        }
        for p in 0..nb {
            for q in 0..nb {
                let mut c = scale3(&INTRA_COUPLING_JACOBIAN, -beta * self.m[(pb + p, pb + q)]);
                add3(&mut c, &scale3(&self.model.d.0, -self.sigma * self.k_bottom[(pb + p, pb + q)]));
                push(nt + p, nt + q, c);
            }
            for q in 0..nt {
                push(nt + p, q, scale3(&self.model.d.0, self.sigma * self.k_top[(pb + p, pt + q)]));
            }
        }
        TransverseSystem {
            directions,
            k_top: self.quotient.n_top(),
            couplings,
        }
    }
}

/// The closed linear system on transverse directions only.
#[derive(Clone, Debug)]
pub struct TransverseSystem {
    pub directions: Vec<Direction>,
    k_top: usize,
    /// For each direction `p`, the constant coupling blocks `(q, C_pq)`.
    couplings: Vec<Vec<(usize, Mat3)>>,
}

impl TransverseSystem {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    fn own_jacobian(&self, model: &DuplexModel, reduced: &[f64], p: usize) -> Mat3 {
        let d = self.directions[p];
        match d.layer {
            Layer::Top => model.top.jacobian(&node(reduced, d.cluster)),
            Layer::Bottom => model.bottom.jacobian(&node(reduced, self.k_top + d.cluster)),
        }
    }

    /// Dense `3d x 3d` matrix of the transverse system.
    pub fn matrix(&self, model: &DuplexModel, reduced: &[f64]) -> DMatrix<f64> {
        let d = self.len();
        let mut out = DMatrix::zeros(3 * d, 3 * d);
        for p in 0..d {
            let j = self.own_jacobian(model, reduced, p);
            for a in 0..3 {
                for b in 0..3 {
                    out[(3 * p + a, 3 * p + b)] += j[a][b];
                }
            }
            for (q, c) in &self.couplings[p] {
                for a in 0..3 {
                    for b in 0..3 {
                        out[(3 * p + a, 3 * q + b)] += c[a][b];
                    }
                }
            }
        }
        out
    }

    /// `reach[u][v]`: perturbations along `u` feed into `v`.
    fn reachability(&self) -> Vec<Vec<bool>> {
        let d = self.len();
        let mut reach = vec![vec![false; d]; d];
        for (p, row) in self.couplings.iter().enumerate() {
            reach[p][p] = true;
            for (q, _) in row {
                reach[*q][p] = true;
            }
        }
        for k in 0..d {
            for i in 0..d {
                if reach[i][k] {
                    for j in 0..d {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        reach
    }

    /// Strongly connected groups of directions, ordered by first member.
    fn components(&self, reach: &[Vec<bool>]) -> Vec<Vec<usize>> {
        let d = self.len();
        let mut assigned = vec![false; d];
        let mut out = Vec::new();
        for p in 0..d {
            if assigned[p] {
                continue;
            }
            let comp: Vec<usize> = (p..d).filter(|&q| reach[p][q] && reach[q][p]).collect();
            for &q in &comp {
                assigned[q] = true;
            }
            out.push(comp);
        }
        out
    }
}

/// Numerical settings for transverse exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSettings {
    pub dt: f64,
    pub transient: f64,
    pub horizon: f64,
    pub renorm_interval: f64,
    pub seed: u64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        LyapunovSettings {
            dt: 0.01,
            transient: 1000.0,
            horizon: 5000.0,
            renorm_interval: 1.0,
            seed: 0,
        }
    }
}

/// A node set in one layer, 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRef {
    pub layer: Layer,
    pub nodes: Vec<usize>,
}

/// Largest transverse exponent of one nontrivial cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterExponent {
    pub cluster: ClusterRef,
    /// Including directions upstream of this cluster.
    pub lambda: f64,
    /// From this cluster's own direction groups only.
    pub own_lambda: f64,
    /// Same-layer clusters whose directions cannot be separated from this one.
    pub intertwined_with: Vec<ClusterRef>,
    /// Clusters in other direction groups that feed this one.
    pub driven_by: Vec<ClusterRef>,
    pub converged: bool,
}

/// Lyapunov spectrum of one strongly connected group of directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockExponents {
    pub layer: Layer,
    pub clusters: Vec<Vec<usize>>,
    pub n_directions: usize,
    /// Descending.
    pub exponents: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterExponents {
    pub clusters: Vec<ClusterExponent>,
    pub blocks: Vec<BlockExponents>,
    pub settings: LyapunovSettings,
}

impl ClusterExponents {
    pub fn layer(&self, layer: Layer) -> impl Iterator<Item = &ClusterExponent> {
        self.clusters.iter().filter(move |c| c.cluster.layer == layer)
    }

    pub fn find(&self, layer: Layer, nodes1: &[usize]) -> Option<&ClusterExponent> {
        self.layer(layer).find(|c| c.cluster.nodes == nodes1)
    }

    /// Every nontrivial cluster of `layer` has a negative exponent.
    pub fn layer_stable(&self, layer: Layer) -> bool {
        self.layer(layer).all(|c| c.lambda < 0.0)
    }

    pub fn converged(&self) -> bool {
        self.clusters.iter().all(|c| c.converged)
    }
}

struct Block {
    dirs: Vec<usize>,
    /// `(p_local, q_local, C)` including diagonal couplings.
    terms: Vec<(usize, usize, Mat3)>,
}

struct TangentField<'a> {
    model: &'a DuplexModel,
    quotient: &'a QuotientSystem,
    system: &'a TransverseSystem,
    sigma: f64,
    blocks: &'a [Block],
    offsets: Vec<usize>,
}

impl VectorField for TangentField<'_> {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let qd = self.quotient.dim();
        quotient_rhs_with_sigma(self.quotient, self.model, self.sigma, &y[..qd], &mut dy[..qd]);
        let reduced = &y[..qd];
        for (b, block) in self.blocks.iter().enumerate() {
            let dim = 3 * block.dirs.len();
            let off = self.offsets[b];
            let own: Vec<Mat3> = block
                .dirs
                .iter()
                .map(|&p| self.system.own_jacobian(self.model, reduced, p))
                .collect();
            for col in 0..dim {
                let xi = &y[off + col * dim..off + (col + 1) * dim];
                let out = &mut dy[off + col * dim..off + (col + 1) * dim];
                for (p, j) in own.iter().enumerate() {
                    let v = [xi[3 * p], xi[3 * p + 1], xi[3 * p + 2]];
                    for a in 0..3 {
                        out[3 * p + a] = j[a][0] * v[0] + j[a][1] * v[1] + j[a][2] * v[2];
                    }
                }
                for (p, q, c) in &block.terms {
                    let v = [xi[3 * q], xi[3 * q + 1], xi[3 * q + 2]];
                    for a in 0..3 {
                        out[3 * p + a] += c[a][0] * v[0] + c[a][1] * v[1] + c[a][2] * v[2];
                    }
                }
            }
        }
    }
}

fn drift_converged(history: &[f64]) -> bool {
    let Some(&last) = history.last() else {
        return true;
    };
    let tail = &history[history.len() / 2..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo <= CONVERGENCE_DRIFT * last.abs().max(CONVERGENCE_FLOOR)
}

/// Largest transverse Lyapunov exponent of every nontrivial cluster of a
/// duplex pattern, obtained by co-integrating the quotient dynamics and
/// the transverse variational flow with periodic QR renormalization.
pub fn transverse_lyapunov(
    model: &DuplexModel,
    clusters: &DuplexClusters,
    settings: &LyapunovSettings,
) -> Result<ClusterExponents> {
    let LyapunovSettings {
        dt,
        transient,
        horizon,
        renorm_interval,
        seed,
    } = *settings;
    if !(dt > 0.0 && transient >= 0.0 && horizon > 0.0 && renorm_interval >= dt) {
        return Err(Error::InvalidArgument(
            "Lyapunov settings need dt > 0, transient >= 0, horizon > 0, renorm_interval >= dt".into(),
        ));
    }
    let sigma = model.strengths.sigma;
    let var = VariationalSystem::new(model, clusters, sigma)?;
    let system = var.transverse();
    let reach = system.reachability();
    let components = system.components(&reach);

    let blocks: Vec<Block> = components
        .iter()
        .map(|dirs| {
            let local = |q: usize| dirs.iter().position(|&d| d == q);
            let mut terms = Vec::new();
            for (pl, &p) in dirs.iter().enumerate() {
                for (q, c) in &system.couplings[p] {
                    if let Some(ql) = local(*q) {
                        terms.push((pl, ql, *c));
                    }
                }
            }
            Block {
                dirs: dirs.clone(),
                terms,
            }
        })
        .collect();

    let qd = var.quotient.dim();
    let mut offsets = vec![qd];
    for b in &blocks {
        let dim = 3 * b.dirs.len();
        offsets.push(offsets.last().unwrap() + dim * dim);
    }
    let mut field = TangentField {
        model,
        quotient: &var.quotient,
        system: &system,
        sigma,
        blocks: &blocks,
        offsets,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; field.dim()];
    let init: Vec<f64> = cluster_bases(var.quotient.n_top(), &mut rng)
        .into_iter()
        .chain(cluster_bases(var.quotient.n_bottom(), &mut rng))
        .flatten()
        .collect();
    y[..qd].copy_from_slice(&init);

    // Transient on the quotient only.
    {
        let mut qf = crate::quotient::QuotientField::new(
            &var.quotient,
            model,
            crate::dynamics::SigmaSchedule::constant(sigma),
        );
        let mut rk = Rk4::new(qd);
        let steps = (transient / dt).round() as u64;
        let mut state = init;
        for k in 0..steps {
            qf.begin_step(k, k as f64 * dt);
            rk.step(&qf, k as f64 * dt, dt, &mut state);
            if k % 1000 == 999 && !state.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { time: (k + 1) as f64 * dt });
            }
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { time: transient });
        }
        y[..qd].copy_from_slice(&state);
    }

    for (b, block) in blocks.iter().enumerate() {
        let dim = 3 * block.dirs.len();
        let off = field.offsets[b];
        for i in 0..dim {
            y[off + i * dim + i] = 1.0;
        }
    }

    let renorm_steps = ((renorm_interval / dt).round() as u64).max(1);
    let total_steps = (horizon / dt).round() as u64;
    let n_renorm = (total_steps / renorm_steps).max(1);
    let mut sums: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; 3 * b.dirs.len()]).collect();
    let mut history: Vec<Vec<f64>> = vec![Vec::with_capacity(n_renorm as usize); blocks.len()];
    let mut rk = Rk4::new(field.dim());
    let mut step = 0u64;
    for _ in 0..n_renorm {
        for _ in 0..renorm_steps {
            let t = transient + step as f64 * dt;
            field.begin_step(step, t);
            rk.step(&field, t, dt, &mut y);
            step += 1;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                time: transient + step as f64 * dt,
            });
        }
        let elapsed = step as f64 * dt;
        for (b, block) in blocks.iter().enumerate() {
            let dim = 3 * block.dirs.len();
            let off = field.offsets[b];
            let m = DMatrix::from_column_slice(dim, dim, &y[off..off + dim * dim]);
            let qr = m.qr();
            let r = qr.r();
            for i in 0..dim {
                sums[b][i] += r[(i, i)].abs().ln();
            }
            y[off..off + dim * dim].copy_from_slice(qr.q().as_slice());
            let running = sums[b].iter().fold(f64::NEG_INFINITY, |a, &s| a.max(s)) / elapsed;
            history[b].push(running);
        }
    }
    let elapsed = step as f64 * dt;

    let one_based = |layer: Layer, l: usize| -> ClusterRef {
        let p = match layer {
            Layer::Top => &clusters.top,
            Layer::Bottom => &clusters.bottom,
        };
        ClusterRef {
            layer,
            nodes: p.cluster(l).iter().map(|i| i + 1).collect(),
        }
    };

    let block_results: Vec<BlockExponents> = blocks
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let mut exponents: Vec<f64> = sums[b].iter().map(|s| s / elapsed).collect();
            exponents.sort_by(|a, b| b.total_cmp(a));
            let mut cl: Vec<usize> = block.dirs.iter().map(|&p| system.directions[p].cluster).collect();
            cl.sort_unstable();
            cl.dedup();
            let layer = system.directions[block.dirs[0]].layer;
            BlockExponents {
                layer,
                clusters: cl.iter().map(|&l| one_based(layer, l).nodes).collect(),
                n_directions: block.dirs.len(),
                exponents,
                converged: drift_converged(&history[b]),
            }
        })
        .collect();

    let block_of: Vec<usize> = {
        let mut v = vec![0; system.len()];
        for (b, block) in blocks.iter().enumerate() {
            for &p in &block.dirs {
                v[p] = b;
            }
        }
        v
    };

    let mut out = Vec::new();
    for (layer, partition) in [(Layer::Top, &clusters.top), (Layer::Bottom, &clusters.bottom)] {
        for (l, _) in partition.nontrivial() {
            let own_dirs: Vec<usize> = (0..system.len())
                .filter(|&p| system.directions[p] == Direction { layer, cluster: l })
                .collect();
            let mut own_blocks: Vec<usize> = own_dirs.iter().map(|&p| block_of[p]).collect();
            own_blocks.sort_unstable();
            own_blocks.dedup();
            let mut all_blocks: Vec<usize> = (0..system.len())
                .filter(|&u| own_dirs.iter().any(|&p| reach[u][p]))
                .map(|u| block_of[u])
                .collect();
            all_blocks.sort_unstable();
            all_blocks.dedup();

            let top_of = |bs: &[usize]| {
                bs.iter()
                    .map(|&b| block_results[b].exponents[0])
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let mut intertwined: Vec<usize> = own_blocks
                .iter()
                .flat_map(|&b| blocks[b].dirs.iter().map(|&p| system.directions[p].cluster))
                .filter(|&c| c != l)
                .collect();
            intertwined.sort_unstable();
            intertwined.dedup();
            let mut drivers: Vec<Direction> = all_blocks
                .iter()
                .filter(|b| !own_blocks.contains(b))
                .flat_map(|&b| blocks[b].dirs.iter().map(|&p| system.directions[p]))
                .collect();
            drivers.sort_by_key(|d| (d.layer == Layer::Bottom, d.cluster));
            drivers.dedup();

            out.push(ClusterExponent {
                cluster: one_based(layer, l),
                lambda: top_of(&all_blocks),
                own_lambda: top_of(&own_blocks),
                intertwined_with: intertwined.into_iter().map(|c| one_based(layer, c)).collect(),
                driven_by: drivers.into_iter().map(|d| one_based(d.layer, d.cluster)).collect(),
                converged: all_blocks.iter().all(|&b| block_results[b].converged),
            });
        }
    }

    Ok(ClusterExponents {
        clusters: out,
        blocks: block_results,
        settings: *settings,
    })
}

/// A labelled duplex pattern to evaluate on a stability map.
#[derive(Clone, Debug, PartialEq)]
pub struct MapPattern {
    pub label: String,
    pub clusters: DuplexClusters,
}

/// Per-cluster exponents of one pattern at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub alpha: f64,
    pub sigma: f64,
    pub pattern: String,
    /// Every nontrivial bottom cluster has a negative exponent.
    pub stable: bool,
    pub converged: bool,
    pub exponents: Vec<ClusterExponent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub beta: f64,
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub patterns: Vec<String>,
    /// Ordered by alpha, then sigma, then pattern.
    pub records: Vec<MapRecord>,
}

impl StabilityMap {
    pub fn record(&self, ia: usize, is: usize, pattern: usize) -> &MapRecord {
        let np = self.patterns.len();
        &self.records[(ia * self.sigmas.len() + is) * np + pattern]
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} grid is empty")));
    }
    if axis.iter().any(|v| !v.is_finite() || *v < 0.0) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "{name} grid must be finite, non-negative and strictly increasing"
        )));
    }
    Ok(())
}

/// Evaluates pattern stability on the `(alpha, sigma)` grid at the model's
/// `beta`. Grid points run in parallel.
pub fn stability_map(
    model: &DuplexModel,
    patterns: &[MapPattern],
    alphas: &[f64],
    sigmas: &[f64],
    settings: &LyapunovSettings,
) -> Result<StabilityMap> {
    check_axis("alpha", alphas)?;
    check_axis("sigma", sigmas)?;
    let beta = model.strengths.beta;
    let jobs: Vec<(f64, f64, usize)> = alphas
        .iter()
        .flat_map(|&a| sigmas.iter().flat_map(move |&s| (0..patterns.len()).map(move |p| (a, s, p))))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(alpha, sigma, p)| {
            let strengths = crate::topology::CouplingStrengths::new(alpha, beta, sigma)?;
            let point = model.with_strengths(strengths);
            let ex = transverse_lyapunov(&point, &patterns[p].clusters, settings)?;
            Ok(MapRecord {
                alpha,
                sigma,
                pattern: patterns[p].label.clone(),
                stable: ex.layer_stable(Layer::Bottom),
                converged: ex.converged(),
                exponents: ex.clusters,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityMap {
        beta,
        alphas: alphas.to_vec(),
        sigmas: sigmas.to_vec(),
        patterns: patterns.iter().map(|p| p.label.clone()).collect(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{HRParams, InterCouplingMatrix, NodeModel};
    use crate::topology::{build_duplex, build_graph, CouplingStrengths, Graph};
    use rand::{Rng, SeedableRng};

    fn hr_model(top: Graph, bottom: Graph, kappa: &[i64], a: f64, b: f64, s: f64) -> DuplexModel {
        DuplexModel::new(
            build_duplex(top, bottom, kappa).unwrap(),
            CouplingStrengths::new(a, b, s).unwrap(),
            NodeModel::HindmarshRose(HRParams::new(3.2, 0.01)),
            NodeModel::HindmarshRose(HRParams::new(3.27, 0.01)),
            InterCouplingMatrix::default(),
        )
    }

    #[test]
    fn singleton_basis_is_identity() {
        let b = stability_basis(&Partition::singletons(4), &Graph::cycle(4).adjacency_matrix()).unwrap();
        assert_eq!(b.t, DMatrix::identity(4, 4));
        assert_eq!(b.n_transverse(), 0);
    }

    #[test]
    fn pair_basis_by_hand() {
        // Path 1 - 3 - 2: the end nodes form an orbit.
        let g = build_graph(3, &[[1, 3], [3, 2]]).unwrap();
        let p = Partition::from_clusters1(3, &[vec![1, 2], vec![3]]).unwrap();
        let b = stability_basis(&p, &g.adjacency_matrix()).unwrap();
        let h = 0.5f64.sqrt();
        let expect = [[h, 0.0, h], [h, 0.0, -h], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((b.t[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(b.direction_cluster, vec![0]);
    }

    #[test]
    fn one_cluster_on_cycle() {
        let l = laplacian(&Graph::cycle(5));
        let b = stability_basis(&Partition::one_cluster(5), &l).unwrap();
        assert_eq!(b.parallel, 1);
        assert_eq!(b.n_transverse(), 4);
        let m = b.t.transpose() * &l * &b.t;
        assert!(m[(0, 0)].abs() < 1e-12);
        assert!(b.block_residual < 1e-12);
        let gram = b.t.transpose() * &b.t;
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-12);
    }

    #[test]
    fn non_orbit_partition_rejected() {
        let g = Graph::path(3);
        let p = Partition::from_clusters1(3, &[vec![1, 2], vec![3]]).unwrap();
        assert!(matches!(
            stability_basis(&p, &g.adjacency_matrix()),
            Err(Error::NotOrbitPartition(_))
        ));
    }

    fn five_node_pattern() -> (DuplexModel, DuplexClusters) {
        let top = build_graph(5, &[[1, 2], [1, 3], [4, 2], [4, 3], [5, 2], [5, 3]]).unwrap();
        let bottom = build_graph(5, &[[1, 2], [1, 3], [1, 4], [1, 5], [2, 3]]).unwrap();
        let m = hr_model(top, bottom, &[0, 1, 1, 1, 1], 0.2, 0.3, 0.5);
        let p = Partition::from_clusters1(5, &[vec![1], vec![2, 3], vec![4, 5]]).unwrap();
        (m, DuplexClusters::new(p.clone(), p).unwrap())
    }

    #[test]
    fn block_variational_matrix_is_conjugated_jacobian() {
        let (m, clusters) = five_node_pattern();
        let var = VariationalSystem::new(&m, &clusters, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reduced: Vec<f64> = (0..var.quotient.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let lifted = var.quotient.lift(&reduced).unwrap();
        let jac = m.jacobian_with_sigma(0.5, &lifted);
        let n = m.n_nodes();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        t.view_mut((0, 0), (n, n)).copy_from(&var.basis.top.t);
        t.view_mut((n, n), (n, n)).copy_from(&var.basis.bottom.t);
        let tt = t.kronecker(&DMatrix::<f64>::identity(3, 3));
        let oracle = tt.transpose() * jac * &tt;
        let ours = var.full_matrix(&reduced);
        assert!((oracle - &ours).amax() < 1e-12);

        // Bottom perturbations never reach the top layer.
        assert_eq!(ours.view((0, 3 * n), (3 * n, 3 * n)).amax(), 0.0);

        let idx = var.transverse_indices();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| ours[(idx[a], idx[b])]);
        let ts = var.transverse().matrix(&m, &reduced);
        assert!((sub - ts).amax() < 1e-12);
    }

    #[test]
    fn drive_block_vanishes_without_sigma() {
        let (m, clusters) = five_node_pattern();
        let var = VariationalSystem::new(&m, &clusters, 0.0).unwrap();
        let reduced = vec![0.3; var.quotient.dim()];
        let n = m.n_nodes();
        assert_eq!(var.full_matrix(&reduced).view((3 * n, 0), (3 * n, 3 * n)).amax(), 0.0);
        let with = VariationalSystem::new(&m, &clusters, 0.5).unwrap();
        assert!(with.full_matrix(&reduced).view((3 * n, 0), (3 * n, 3 * n)).amax() > 0.0);
    }

    #[test]
    fn linear_decay_exponents() {
        let duplex = build_duplex(Graph::empty(2), Graph::empty(2), &[0, 0]).unwrap();
        let m = DuplexModel::new(
            duplex,
            CouplingStrengths::new(0.0, 0.0, 0.0).unwrap(),
            NodeModel::LinearDecay { rate: 1.0 },
            NodeModel::LinearDecay { rate: 1.0 },
            InterCouplingMatrix::default(),
        );
        let one = Partition::one_cluster(2);
        let settings = LyapunovSettings {
            transient: 10.0,
            horizon: 200.0,
            ..Default::default()
        };
        let ex = transverse_lyapunov(&m, &DuplexClusters::new(one.clone(), one).unwrap(), &settings).unwrap();
        assert_eq!(ex.clusters.len(), 2);
        for c in &ex.clusters {
            assert!((c.lambda + 1.0).abs() < 1e-3, "{}", c.lambda);
        }
        for b in &ex.blocks {
            assert!(b.exponents.iter().all(|e| (e + 1.0).abs() < 1e-3));
        }
    }

    #[test]
    fn intertwining_and_drive_are_reported() {
        let (m, clusters) = five_node_pattern();
        let settings = LyapunovSettings {
            transient: 50.0,
            horizon: 50.0,
            ..Default::default()
        };
        let ex = transverse_lyapunov(&m, &clusters, &settings).unwrap();
        assert_eq!(ex.layer(Layer::Top).count(), 2);
        assert_eq!(ex.layer(Layer::Bottom).count(), 2);
        let b23 = ex.find(Layer::Bottom, &[2, 3]).unwrap();
        assert!(b23.driven_by.iter().any(|c| c.layer == Layer::Top && c.nodes == vec![2, 3]));
        assert!(b23.lambda >= b23.own_lambda);
    }

    #[test]
    fn map_axes_validated() {
        let (m, clusters) = five_node_pattern();
        let p = [MapPattern {
            label: "x".into(),
            clusters,
        }];
        let s = LyapunovSettings::default();
        assert!(stability_map(&m, &p, &[], &[0.0], &s).is_err());
        assert!(stability_map(&m, &p, &[0.2, 0.1], &[0.0], &s).is_err());
    }
}
