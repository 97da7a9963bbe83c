//! Node dynamics, the coupled duplex vector field and fixed-step RK4.
//!
//! State vectors are flat: top nodes first (`3 * i + component`), then the
//! bottom nodes at offset `3 * N`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmetry::Partition;
use crate::topology::{CouplingStrengths, DuplexTopology};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Dimension of a node state.
pub const NODE_DIM: usize = 3;

fn default_a() -> f64 {
    1.0
}
fn default_b() -> f64 {
    3.0
}
fn default_c() -> f64 {
    1.0
}
fn default_d() -> f64 {
    5.0
}
fn default_s() -> f64 {
    4.0
}
fn default_t() -> f64 {
    -0.5 * (1.0 + 5f64.sqrt())
}

/// Hindmarsh-Rose parameters. Only `I` and `r` differ between layers in
/// the shipped experiments; the remaining ones default to the standard
/// bursting regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HRParams {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(rename = "I")]
    pub current: f64,
    pub r: f64,
}

impl HRParams {
    pub fn new(current: f64, r: f64) -> Self {
        HRParams {
            a: default_a(),
            b: default_b(),
            c: default_c(),
            d: default_d(),
            s: default_s(),
            t: default_t(),
            current,
            r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.c,
            self.d,
            self.s,
            self.t,
            self.current,
            self.r,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("HR parameters must be finite".into()))
        }
    }
}

/// `(w - a v³ + b v² - z + I, c - d v² - w, r (s (v - t) - z))`.
#[inline]
pub fn hr_field(p: &HRParams, u: &Vec3) -> Vec3 {
    let [v, w, z] = *u;
    let v2 = v * v;
    [
        w - p.a * v2 * v + p.b * v2 - z + p.current,
        p.c - p.d * v2 - w,
        p.r * (p.s * (v - p.t) - z),
    ]
}

#[inline]
pub fn hr_jacobian(p: &HRParams, u: &Vec3) -> Mat3 {
    let v = u[0];
    [
        [-3.0 * p.a * v * v + 2.0 * p.b * v, 1.0, -1.0],
        [-2.0 * p.d * v, -1.0, 0.0],
        [p.r * p.s, 0.0, -p.r],
    ]
}

/// Isolated node dynamics of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NodeModel {
    HindmarshRose(HRParams),
    /// `u' = -rate * u`; used to check the stability machinery against
    /// closed-form exponents.
    LinearDecay { rate: f64 },
}

impl NodeModel {
    #[inline]
    pub fn field(&self, u: &Vec3) -> Vec3 {
        match self {
            NodeModel::HindmarshRose(p) => hr_field(p, u),
            NodeModel::LinearDecay { rate } => [-rate * u[0], -rate * u[1], -rate * u[2]],
        }
    }

    #[inline]
    pub fn jacobian(&self, u: &Vec3) -> Mat3 {
        match self {
            NodeModel::HindmarshRose(p) => hr_jacobian(p, u),
            NodeModel::LinearDecay { rate } => {
                [[-rate, 0.0, 0.0], [0.0, -rate, 0.0], [0.0, 0.0, -rate]]
            }
        }
    }
}

/// Intra-layer coupling function: only the first component is exchanged.
#[inline]
pub fn intra_coupling(u: &Vec3) -> Vec3 {
    [u[0], 0.0, 0.0]
}

/// Jacobian of [`intra_coupling`].
pub const INTRA_COUPLING_JACOBIAN: Mat3 = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];

/// Inter-layer coupling matrix `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterCouplingMatrix(pub Mat3);

impl Default for InterCouplingMatrix {
    /// Couples the second component only.
    fn default() -> Self {
        InterCouplingMatrix([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    }
}

impl InterCouplingMatrix {
    #[inline]
    pub fn apply(&self, u: &Vec3) -> Vec3 {
        mat3_vec(&self.0, u)
    }
}

#[inline]
pub fn mat3_vec(m: &Mat3, u: &Vec3) -> Vec3 {
    [
        m[0][0] * u[0] + m[0][1] * u[1] + m[0][2] * u[2],
        m[1][0] * u[0] + m[1][1] * u[1] + m[1][2] * u[2],
        m[2][0] * u[0] + m[2][1] * u[1] + m[2][2] * u[2],
    ]
}

#[inline]
pub(crate) fn node(y: &[f64], i: usize) -> Vec3 {
    [y[3 * i], y[3 * i + 1], y[3 * i + 2]]
}

/// Snapshot of both layers.
#[derive(Clone, Debug, PartialEq)]
pub struct DuplexState {
    pub x: Vec<Vec3>,
    pub y: Vec<Vec3>,
    pub time: f64,
}

impl DuplexState {
    pub fn to_flat(&self) -> Vec<f64> {
        self.x.iter().chain(self.y.iter()).flatten().copied().collect()
    }

    pub fn from_flat(flat: &[f64], time: f64) -> Result<Self> {
        if flat.len() % 6 != 0 {
            return Err(Error::SizeMismatch {
                what: "flat duplex state",
                expected: flat.len() / 6 * 6,
                found: flat.len(),
            });
        }
        let n = flat.len() / 6;
        let x = (0..n).map(|i| node(flat, i)).collect();
        let y = (0..n).map(|i| node(flat, n + i)).collect();
        Ok(DuplexState { x, y, time })
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).flatten().all(|v| v.is_finite())
    }
}

/// Everything that defines the coupled equations apart from the state.
#[derive(Clone, Debug)]
pub struct DuplexModel {
    pub duplex: DuplexTopology,
    pub strengths: CouplingStrengths,
    pub top: NodeModel,
    pub bottom: NodeModel,
    pub d: InterCouplingMatrix,
    top_neighbors: Vec<Vec<usize>>,
    bottom_neighbors: Vec<Vec<usize>>,
}

impl DuplexModel {
    pub fn new(
        duplex: DuplexTopology,
        strengths: CouplingStrengths,
        top: NodeModel,
        bottom: NodeModel,
        d: InterCouplingMatrix,
    ) -> Self {
        let n = duplex.n_nodes();
        let top_neighbors = (0..n).map(|i| duplex.top.neighbors(i).collect()).collect();
        let bottom_neighbors = (0..n).map(|i| duplex.bottom.neighbors(i).collect()).collect();
        DuplexModel {
            duplex,
            strengths,
            top,
            bottom,
            d,
            top_neighbors,
            bottom_neighbors,
        }
    }

    pub fn with_strengths(&self, strengths: CouplingStrengths) -> Self {
        DuplexModel {
            strengths,
            ..self.clone()
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.duplex.n_nodes()
    }

    /// Flat state dimension `6 N`.
    pub fn dim(&self) -> usize {
        2 * NODE_DIM * self.n_nodes()
    }

    /// Writes the right-hand side at `state` into `out`, using `sigma` in
    /// place of the configured inter-layer strength.
    pub fn rhs_with_sigma(&self, sigma: f64, state: &[f64], out: &mut [f64]) {
        let n = self.n_nodes();
        let CouplingStrengths { alpha, beta, .. } = self.strengths;
        let (xs, ys) = state.split_at(3 * n);
        let (dx, dy) = out.split_at_mut(3 * n);

        for i in 0..n {
            let xi = node(xs, i);
            let mut f = self.top.field(&xi);
            for &j in &self.top_neighbors[i] {
                f[0] += alpha * intra_coupling(&node(xs, j))[0];
            }
            dx[3 * i..3 * i + 3].copy_from_slice(&f);
        }

        for i in 0..n {
            let yi = node(ys, i);
            let mut f = self.bottom.field(&yi);
            // -beta * sum_j L_ij c(y_j) with L = Deg - A
            let deg = self.bottom_neighbors[i].len() as f64;
            let mut lap = intra_coupling(&yi).map(|c| deg * c);
            for &j in &self.bottom_neighbors[i] {
                let cj = intra_coupling(&node(ys, j));
                for k in 0..3 {
                    lap[k] -= cj[k];
                }
            }
            for k in 0..3 {
                f[k] -= beta * lap[k];
            }
            if self.duplex.inter.driven(i) && sigma != 0.0 {
                let xi = node(xs, i);
                let diff = [xi[0] - yi[0], xi[1] - yi[1], xi[2] - yi[2]];
                let push = self.d.apply(&diff);
                for k in 0..3 {
                    f[k] += sigma * push[k];
                }
            }
            dy[3 * i..3 * i + 3].copy_from_slice(&f);
        }
    }
}

impl DuplexModel {
    /// Jacobian of [`DuplexModel::rhs_with_sigma`] at a flat state.
    pub fn jacobian_with_sigma(&self, sigma: f64, state: &[f64]) -> DMatrix<f64> {
        let n = self.n_nodes();
        let off = NODE_DIM * n;
        let CouplingStrengths { alpha, beta, .. } = self.strengths;
        let mut jac = DMatrix::zeros(2 * off, 2 * off);
        let mut put = |row: usize, col: usize, m: &Mat3, scale: f64| {
            for a in 0..NODE_DIM {
                for b in 0..NODE_DIM {
                    jac[(row + a, col + b)] += scale * m[a][b];
                }
            }
        };
        for i in 0..n {
            put(3 * i, 3 * i, &self.top.jacobian(&node(state, i)), 1.0);
            for &j in &self.top_neighbors[i] {
                put(3 * i, 3 * j, &INTRA_COUPLING_JACOBIAN, alpha);
            }
            let (ri, ci) = (off + 3 * i, off + 3 * i);
            put(ri, ci, &self.bottom.jacobian(&node(state, n + i)), 1.0);
            let deg = self.bottom_neighbors[i].len() as f64;
            put(ri, ci, &INTRA_COUPLING_JACOBIAN, -beta * deg);
            for &j in &self.bottom_neighbors[i] {
                put(ri, off + 3 * j, &INTRA_COUPLING_JACOBIAN, beta);
            }
            if self.duplex.inter.driven(i) {
                put(ri, 3 * i, &self.d.0, sigma);
                put(ri, ci, &self.d.0, -sigma);
            }
        }
        jac
    }
}

/// Right-hand side of the coupled duplex equations at `state`.
pub fn full_rhs(model: &DuplexModel, state: &DuplexState) -> Result<DuplexState> {
    let n = model.n_nodes();
    if state.x.len() != n || state.y.len() != n {
        return Err(Error::SizeMismatch {
            what: "duplex state",
            expected: n,
            found: state.x.len().min(state.y.len()),
        });
    }
    let flat = state.to_flat();
    let mut out = vec![0.0; flat.len()];
    model.rhs_with_sigma(model.strengths.sigma, &flat, &mut out);
    DuplexState::from_flat(&out, state.time)
}

/// An autonomous or scheduled vector field on a flat state.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Called before step `step` (starting at time `t`) is taken. Fields
    /// with piecewise-constant parameters switch here so that a switch
    /// always falls on a step boundary.
    fn begin_step(&mut self, _step: u64, _t: f64) {}
}

/// Inter-layer strength that is zero before a switch-on step and the
/// configured value from then on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaSchedule {
    pub sigma: f64,
    /// Requested switch-on time.
    pub t_on: f64,
    /// First step (counted from the start of the run) with `sigma` active.
    pub on_step: u64,
}

impl SigmaSchedule {
    pub fn constant(sigma: f64) -> Self {
        SigmaSchedule {
            sigma,
            t_on: 0.0,
            on_step: 0,
        }
    }

    #[inline]
    pub fn sigma_for_step(&self, step: u64) -> f64 {
        if step >= self.on_step {
            self.sigma
        } else {
            0.0
        }
    }

    /// Time at which `sigma` actually turns on for a run starting at `t0`.
    pub fn effective_t_on(&self, t0: f64, dt: f64) -> f64 {
        t0 + self.on_step as f64 * dt
    }
}

/// Builds a step-aligned schedule. A `t_on` that is not a whole number of
/// steps past `t0` is snapped to the nearest step; the returned warning
/// says so.
pub fn sigma_schedule(t_on: f64, sigma: f64, t0: f64, dt: f64) -> Result<(SigmaSchedule, Option<String>)> {
    if !(t_on >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma schedule needs t_on >= 0 and dt > 0 (t_on = {t_on}, dt = {dt})"
        )));
    }
    let steps = ((t_on - t0) / dt).max(0.0);
    let on_step = steps.round() as u64;
    let warning = ((steps - steps.round()).abs() > 1e-6).then(|| {
        let snapped = t0 + on_step as f64 * dt;
        log::warn!("sigma switch-on time {t_on} snapped to step boundary {snapped}");
        format!("t_on = {t_on} is not a multiple of dt = {dt}; snapped to {snapped}")
    });
    Ok((
        SigmaSchedule {
            sigma,
            t_on,
            on_step,
        },
        warning,
    ))
}

/// The duplex equations as a [`VectorField`] with a sigma schedule.
#[derive(Clone, Debug)]
pub struct DuplexField<'a> {
    pub model: &'a DuplexModel,
    pub schedule: SigmaSchedule,
    active_sigma: f64,
}

impl<'a> DuplexField<'a> {
    pub fn new(model: &'a DuplexModel, schedule: SigmaSchedule) -> Self {
        DuplexField {
            model,
            schedule,
            active_sigma: schedule.sigma_for_step(0),
        }
    }

    /// Constant-sigma field using the model's own `sigma`.
    pub fn constant(model: &'a DuplexModel) -> Self {
        DuplexField::new(model, SigmaSchedule::constant(model.strengths.sigma))
    }
}

impl VectorField for DuplexField<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.model.rhs_with_sigma(self.active_sigma, y, dy);
    }

    fn begin_step(&mut self, step: u64, _t: f64) {
        self.active_sigma = self.schedule.sigma_for_step(step);
    }
}

/// Classic four-stage Runge-Kutta with preallocated stage buffers.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn step<F: VectorField + ?Sized>(&mut self, field: &F, t: f64, dt: f64, y: &mut [f64]) {
        let h2 = 0.5 * dt;
        field.eval(t, y, &mut self.k1);
        for (tmp, (yi, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k1)) {
            *tmp = yi + h2 * k;
        }
        field.eval(t + h2, &self.tmp, &mut self.k2);
        for (tmp, (yi, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k2)) {
            *tmp = yi + h2 * k;
        }
        field.eval(t + h2, &self.tmp, &mut self.k3);
        for (tmp, (yi, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k3)) {
            *tmp = yi + dt * k;
        }
        field.eval(t + dt, &self.tmp, &mut self.k4);
        let h6 = dt / 6.0;
        for i in 0..y.len() {
            y[i] += h6 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Time grid and recording options for [`integrate`]. Times are absolute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpan {
    pub dt: f64,
    pub t_end: f64,
    /// Samples before this time are discarded.
    pub transient: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for IntegrationSpan {
    fn default() -> Self {
        IntegrationSpan {
            dt: 0.01,
            t_end: 3000.0,
            transient: 1000.0,
            stride: 10,
        }
    }
}

impl IntegrationSpan {
    pub fn steps_from(&self, t0: f64) -> u64 {
        ((self.t_end - t0) / self.dt).round().max(0.0) as u64
    }
}

/// Recorded samples of a flat state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    data: Vec<f64>,
    /// State at `t_end`, whether or not it was recorded.
    pub final_state: Vec<f64>,
    pub final_time: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.data.chunks_exact(self.dim))
    }

    /// Indices of samples with `t0 <= t < t1`.
    pub fn window(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let start = self.times.partition_point(|&t| t < t0);
        let end = self.times.partition_point(|&t| t < t1);
        start..end
    }
}

/// Integrates `field` from `initial` at `t0` with fixed-step RK4.
pub fn integrate<F: VectorField + ?Sized>(
    field: &mut F,
    initial: &[f64],
    t0: f64,
    span: &IntegrationSpan,
) -> Result<Trajectory> {
    let dim = field.dim();
    if initial.len() != dim {
        return Err(Error::SizeMismatch {
            what: "initial state",
            expected: dim,
            found: initial.len(),
        });
    }
    if !(span.dt > 0.0) || span.stride == 0 {
        return Err(Error::InvalidArgument(
            "integration needs dt > 0 and stride >= 1".into(),
        ));
    }
    if !(span.t_end > span.transient) || span.transient < 0.0 || span.t_end <= t0 {
        return Err(Error::InvalidArgument(format!(
            "empty trajectory: t_end = {} must exceed both transient = {} and t0 = {t0}",
            span.t_end, span.transient
        )));
    }

    let n_steps = span.steps_from(t0);
    let first_recorded = (((span.transient - t0) / span.dt).ceil().max(0.0)) as u64;
    let expected = ((n_steps.saturating_sub(first_recorded)) / span.stride as u64 + 1) as usize;

    let mut times = Vec::with_capacity(expected);
    let mut data = Vec::with_capacity(expected * dim);
    let mut y = initial.to_vec();
    let mut rk = Rk4::new(dim);

    let record = |k: u64, y: &[f64], times: &mut Vec<f64>, data: &mut Vec<f64>| {
        if k >= first_recorded && (k - first_recorded) % span.stride as u64 == 0 {
            times.push(t0 + k as f64 * span.dt);
            data.extend_from_slice(y);
        }
    };

    record(0, &y, &mut times, &mut data);
    for k in 0..n_steps {
        let t = t0 + k as f64 * span.dt;
        field.begin_step(k, t);
        rk.step(field, t, span.dt, &mut y);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                time: t + span.dt,
            });
        }
        record(k + 1, &y, &mut times, &mut data);
    }

    Ok(Trajectory {
        dim,
        times,
        data,
        final_time: t0 + n_steps as f64 * span.dt,
        final_state: y,
    })
}

/// Cluster base states whose first coordinates are at least 0.5 apart.
pub fn cluster_bases<R: Rng>(k: usize, rng: &mut R) -> Vec<Vec3> {
    let mut slots: Vec<usize> = (0..k).collect();
    // Fisher-Yates so that cluster order does not correlate with v.
    for i in (1..k).rev() {
        let j = rng.gen_range(0..=i);
        slots.swap(i, j);
    }
    slots
        .into_iter()
        .map(|slot| {
            let v = -1.5 + 0.5 * slot as f64 + rng.gen_range(0.0..0.2);
            let w = 1.0 - 5.0 * v * v + rng.gen_range(-0.5..0.5);
            let z = rng.gen_range(2.9..3.3);
            [v, w, z]
        })
        .collect()
}

/// Node states close to a pattern: node `i` in cluster `l` gets
/// `bases[l]` plus independent uniform noise in `[-epsilon, epsilon]³`.
pub fn pattern_initial_condition<R: Rng>(
    partition: &Partition,
    bases: &[Vec3],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    if bases.len() != partition.n_clusters() {
        return Err(Error::SizeMismatch {
            what: "cluster bases",
            expected: partition.n_clusters(),
            found: bases.len(),
        });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument("epsilon must be non-negative".into()));
    }
    let membership = partition.membership();
    Ok(membership
        .iter()
        .map(|&l| {
            let mut s = bases[l];
            if epsilon > 0.0 {
                for v in &mut s {
                    *v += rng.gen_range(-epsilon..=epsilon);
                }
            }
            s
        })
        .collect())
}
