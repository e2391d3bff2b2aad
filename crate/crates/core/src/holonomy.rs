//! Comparison matrices as holonomies of connections on a simplex.
//!
//! Vertices `s_0..s_n` of the simplex are the standard basis of `ℝ^{n+1}`.
//! An edge-supported connection carries, on each edge `[s_i, s_j]`, the form
//! `f(s)·v_ij ds` where `f` is a bump supported in `[1/3, 2/3]` with unit
//! integral and `exp(v_ij) = a_ij`. The horizontal lift `g⁻¹dg = θ(dγ)` is the
//! ordered product of `exp(h·θ)` factors, read left to right; since every
//! edge integrand stays on the line `ℝ·v_ij`, the lift over one edge is
//! exactly `exp(v_ij)`.
//!
//! The gauge `s̃_i = Hol(γ_i)` follows the chain path
//! `γ_i = [s_0,s_1]*…*[s_{i−1},s_i]` from the base vertex, and coefficients are
//! read back as `a_ij = s̃_i⁻¹·Hol(γ_i*[s_i,s_j]*γ_j⁻¹)·s̃_j`, with the
//! holonomy based at `(s_0, 1_G)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::group::{AlgebraElement, GroupDescriptor, GroupElement, GroupError, GroupKind};
use crate::matrix::{MatrixError, PcMatrix, WeightVector, is_consistent};

/// Sub-intervals per edge for the numerical lift.
pub const DEFAULT_STEPS: usize = 256;

/// Tubular radius of the edge supports.
pub const DEFAULT_EPSILON: f64 = 1.0 / 6.0;

/// Tolerance used when checking face holonomies of flat connections.
pub const FLATNESS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HolonomyError {
    #[error("path is disconnected: edge ending at s_{end} followed by edge starting at s_{next}")]
    Disconnected { end: usize, next: usize },
    #[error("vertex s_{vertex} is not in a simplex with {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("degenerate edge [s_{0}, s_{0}]")]
    DegenerateEdge(usize),
    #[error("not consistent; no flat potential (residual {0})")]
    NotConsistent(f64),
    #[error("operation requires an abelian (R*)^J group, found {0}")]
    NotAbelianPower(String),
    #[error("geometric support check is limited to simplexes with at most 5 vertices, got {0}")]
    TooLarge(usize),
    #[error("gauge has {found} elements, connection has {expected} vertices")]
    GaugeSize { expected: usize, found: usize },
    #[error("malformed connection document: {0}")]
    Malformed(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// The standard simplex `Δ_n` with vertices `e_0..e_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simplex {
    dim: usize,
}

impl Simplex {
    pub fn new(dim: usize) -> Self {
        Simplex { dim }
    }

    pub fn with_vertices(count: usize) -> Self {
        Simplex {
            dim: count.saturating_sub(1),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.dim + 1
    }

    pub fn vertex(&self, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.vertex_count()];
        p[i] = 1.0;
        p
    }

    /// `(1 − s)·s_i + s·s_j`; barycentric coordinates summing to one.
    pub fn point_on_edge(&self, i: usize, j: usize, s: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.vertex_count()];
        p[i] += 1.0 - s;
        p[j] += s;
        p
    }
}

/// A path along simplex edges, stored as its vertex sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgePath {
    vertices: Vec<usize>,
}

impl EdgePath {
    pub fn empty() -> Self {
        EdgePath::default()
    }

    pub fn constant(v: usize) -> Self {
        EdgePath { vertices: vec![v] }
    }

    pub fn edge(i: usize, j: usize) -> Self {
        EdgePath { vertices: vec![i, j] }
    }

    pub fn through(vertices: Vec<usize>) -> Self {
        EdgePath { vertices }
    }

    /// Joins directed edges; consecutive edges must share endpoints.
    pub fn from_edges(edges: &[(usize, usize)]) -> Result<Self, HolonomyError> {
        let mut path = EdgePath::empty();
        for &(i, j) in edges {
            path = path.concat(&EdgePath::edge(i, j))?;
        }
        Ok(path)
    }

    /// `γ_target` as a chain of consecutive indices starting at `base`.
    pub fn chain(base: usize, target: usize) -> Self {
        let vertices = if target >= base {
            (base..=target).collect()
        } else {
            (target..=base).rev().collect()
        };
        EdgePath { vertices }
    }

    /// `[s_i,s_j]*[s_j,s_k]*[s_k,s_i]`.
    pub fn triad_loop(i: usize, j: usize, k: usize) -> Self {
        EdgePath {
            vertices: vec![i, j, k, i],
        }
    }

    pub fn start(&self) -> Option<usize> {
        self.vertices.first().copied()
    }

    pub fn end(&self) -> Option<usize> {
        self.vertices.last().copied()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_loop(&self) -> bool {
        self.start() == self.end()
    }

    /// Path composition `self * other`.
    pub fn concat(&self, other: &EdgePath) -> Result<EdgePath, HolonomyError> {
        match (self.end(), other.start()) {
            (None, _) => Ok(other.clone()),
            (_, None) => Ok(self.clone()),
            (Some(end), Some(next)) if end == next => {
                let mut vertices = self.vertices.clone();
                vertices.extend_from_slice(&other.vertices[1..]);
                Ok(EdgePath { vertices })
            }
            (Some(end), Some(next)) => Err(HolonomyError::Disconnected { end, next }),
        }
    }

    pub fn reverse(&self) -> EdgePath {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        EdgePath { vertices }
    }
}

/// `f(s) = 3·140·(u(1−u))³`, `u = 3s − 1`, on `[1/3, 2/3]`; zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BumpProfile;

impl BumpProfile {
    pub const SUPPORT: (f64, f64) = (1.0 / 3.0, 2.0 / 3.0);

    pub fn value(&self, s: f64) -> f64 {
        let (a, b) = Self::SUPPORT;
        if s <= a || s >= b {
            return 0.0;
        }
        let u = (s - a) / (b - a);
        let w = u * (1.0 - u);
        140.0 * w * w * w / (b - a)
    }

    /// `∫_0^1 f = 140·B(4, 4) = 1`.
    pub fn integral(&self) -> f64 {
        1.0
    }
}

/// Anything that can be pulled back to the edges of a simplex.
pub trait EdgeConnection {
    fn group(&self) -> &GroupDescriptor;

    fn vertex_count(&self) -> usize;

    /// `θ(dγ/ds)` at parameter `s` along the directed edge `[s_from, s_to]`.
    fn pullback(&self, from: usize, to: usize, s: f64) -> AlgebraElement;

    /// `∫_0^1 θ(dγ/ds) ds` along the directed edge.
    fn edge_integral(&self, from: usize, to: usize) -> AlgebraElement;

    /// Parameter interval outside of which the pullback vanishes.
    fn edge_support(&self, _from: usize, _to: usize) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// How the lift along each edge is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// One exponential of the edge integral; exact when the integrand keeps
    /// one algebra direction, which holds for every connection in this module.
    #[default]
    Exact,
    /// Composite midpoint rule with ordered products over the edge support.
    Midpoint(usize),
}

/// An edge-supported connection 1-form with bump profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    group: GroupDescriptor,
    vertex_count: usize,
    forms: BTreeMap<(usize, usize), AlgebraElement>,
    epsilon: f64,
    profile: BumpProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFormRecord {
    pub edge: [usize; 2],
    pub v: Value,
    pub epsilon: f64,
}

impl Connection {
    pub fn zero(group: GroupDescriptor, vertex_count: usize) -> Self {
        Connection {
            group,
            vertex_count,
            forms: BTreeMap::new(),
            epsilon: DEFAULT_EPSILON,
            profile: BumpProfile,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn profile(&self) -> BumpProfile {
        self.profile
    }

    /// Installs `v` on `[s_i, s_j]`; `v_ji = −v_ij` is implied.
    pub fn set_edge(&mut self, i: usize, j: usize, v: AlgebraElement) -> Result<(), HolonomyError> {
        for vertex in [i, j] {
            if vertex >= self.vertex_count {
                return Err(HolonomyError::VertexOutOfRange {
                    vertex,
                    count: self.vertex_count,
                });
            }
        }
        if i == j {
            return Err(HolonomyError::DegenerateEdge(i));
        }
        // Validate the algebra element against the group.
        self.group.exp(&v)?;
        if i < j {
            self.forms.insert((i, j), v);
        } else {
            self.forms.insert((j, i), v.neg());
        }
        Ok(())
    }

    /// `v_ij` for the directed edge, zero where no form is installed.
    pub fn edge_vector(&self, i: usize, j: usize) -> AlgebraElement {
        if i < j {
            self.forms.get(&(i, j)).cloned().unwrap_or_else(|| self.group.zero_algebra())
        } else {
            self.forms
                .get(&(j, i))
                .map(AlgebraElement::neg)
                .unwrap_or_else(|| self.group.zero_algebra())
        }
    }

    pub fn is_zero(&self) -> bool {
        self.forms.values().all(|v| v.norm() == 0.0)
    }

    pub fn edge_forms(&self) -> impl Iterator<Item = (&(usize, usize), &AlgebraElement)> {
        self.forms.iter()
    }

    pub fn to_records(&self) -> Vec<EdgeFormRecord> {
        self.forms
            .iter()
            .map(|(&(i, j), v)| EdgeFormRecord {
                edge: [i, j],
                v: v.to_payload(),
                epsilon: self.epsilon,
            })
            .collect()
    }

    pub fn from_records(
        group: GroupDescriptor,
        vertex_count: usize,
        records: &[EdgeFormRecord],
    ) -> Result<Self, HolonomyError> {
        let mut c = Connection::zero(group, vertex_count);
        if let Some(first) = records.first() {
            c.epsilon = first.epsilon;
        }
        for r in records {
            if r.epsilon != c.epsilon {
                return Err(HolonomyError::Malformed("edge forms disagree on epsilon".into()));
            }
            let v = group.algebra_from_payload(&r.v)?;
            c.set_edge(r.edge[0], r.edge[1], v)?;
        }
        Ok(c)
    }

    /// Support segment of the form on `[s_i, s_j]`, as its two endpoints.
    pub fn support_segment(&self, i: usize, j: usize) -> (Vec<f64>, Vec<f64>) {
        let simplex = Simplex::with_vertices(self.vertex_count);
        let (a, b) = BumpProfile::SUPPORT;
        (simplex.point_on_edge(i, j, a), simplex.point_on_edge(i, j, b))
    }
}

impl EdgeConnection for Connection {
    fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    fn pullback(&self, from: usize, to: usize, s: f64) -> AlgebraElement {
        self.edge_vector(from, to).scale(self.profile.value(s))
    }

    fn edge_integral(&self, from: usize, to: usize) -> AlgebraElement {
        self.edge_vector(from, to).scale(self.profile.integral())
    }

    fn edge_support(&self, _from: usize, _to: usize) -> (f64, f64) {
        BumpProfile::SUPPORT
    }
}

fn check_path(c: &dyn EdgeConnection, p: &EdgePath) -> Result<(), HolonomyError> {
    let count = c.vertex_count();
    for &v in p.vertices() {
        if v >= count {
            return Err(HolonomyError::VertexOutOfRange { vertex: v, count });
        }
    }
    for (i, j) in p.edges() {
        if i == j {
            return Err(HolonomyError::DegenerateEdge(i));
        }
    }
    Ok(())
}

/// Lift across one directed edge.
fn edge_transport(c: &dyn EdgeConnection, i: usize, j: usize, q: Quadrature) -> GroupElement {
    let g = c.group();
    match q {
        Quadrature::Exact => g.exp(&c.edge_integral(i, j)).expect("algebra element of the group"),
        Quadrature::Midpoint(steps) => {
            let mut acc = g.identity();
            for_each_factor(c, i, j, steps, |factor| acc = g.mul(&acc, &factor));
            acc
        }
    }
}

fn for_each_factor(c: &dyn EdgeConnection, i: usize, j: usize, steps: usize, mut f: impl FnMut(GroupElement)) {
    let g = c.group();
    let (lo, hi) = c.edge_support(i, j);
    let steps = steps.max(1);
    let h = (hi - lo) / steps as f64;
    for k in 0..steps {
        let s = lo + (k as f64 + 0.5) * h;
        let factor = g.exp(&c.pullback(i, j, s).scale(h)).expect("algebra element of the group");
        f(factor);
    }
}

/// `Hol(p) = g(0)⁻¹·g(1)` for the lift starting at `1_G`.
pub fn holonomy_of_path(c: &dyn EdgeConnection, p: &EdgePath, q: Quadrature) -> Result<GroupElement, HolonomyError> {
    check_path(c, p)?;
    let g = c.group();
    Ok(p
        .edges()
        .fold(g.identity(), |acc, (i, j)| g.mul(&acc, &edge_transport(c, i, j, q))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub edge: [usize; 2],
    pub step: usize,
    pub partial: GroupElement,
}

/// Partial products after each quadrature sub-interval.
pub fn holonomy_trace(c: &dyn EdgeConnection, p: &EdgePath, steps: usize) -> Result<Vec<TraceEntry>, HolonomyError> {
    check_path(c, p)?;
    let g = c.group();
    let mut acc = g.identity();
    let mut trace = Vec::new();
    for (i, j) in p.edges() {
        let mut step = 0;
        for_each_factor(c, i, j, steps, |factor| {
            acc = g.mul(&acc, &factor);
            trace.push(TraceEntry {
                edge: [i, j],
                step,
                partial: acc.clone(),
            });
            step += 1;
        });
    }
    Ok(trace)
}

/// End point `g(1)` of the horizontal lift starting at `g(0) = start`.
pub fn lift_endpoint(
    c: &dyn EdgeConnection,
    p: &EdgePath,
    start: &GroupElement,
    q: Quadrature,
) -> Result<GroupElement, HolonomyError> {
    c.group().check(start)?;
    Ok(c.group().mul(start, &holonomy_of_path(c, p, q)?))
}

/// Holonomy of a loop read in the trivialization, `g(1)·g(0)⁻¹`; moving the
/// basepoint value from `1_G` to `g₀` conjugates it by `g₀`.
pub fn trivialized_loop_holonomy(
    c: &dyn EdgeConnection,
    p: &EdgePath,
    start: &GroupElement,
    q: Quadrature,
) -> Result<GroupElement, HolonomyError> {
    let end = lift_endpoint(c, p, start, q)?;
    Ok(c.group().mul(&end, &c.group().inv(start)))
}

/// Reference group elements at the vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gauge {
    pub elements: Vec<GroupElement>,
    /// Vertex carrying `1_G`.
    pub base: usize,
    pub origin: i64,
}

/// `s̃_base = 1_G`, `s̃_i = a_{base,base+1}⋯a_{i−1,i}` above the base and the
/// mirrored product `a_{base,base−1}⋯a_{i+1,i}` below it.
pub fn build_gauge(m: &PcMatrix) -> Gauge {
    let g = m.group();
    let n = m.size();
    let base = m.base_index();
    let mut elements = vec![g.identity(); n];
    for i in base + 1..n {
        elements[i] = g.mul(&elements[i - 1], &m.get(i - 1, i));
    }
    for i in (0..base).rev() {
        elements[i] = g.mul(&elements[i + 1], &m.get(i + 1, i));
    }
    Gauge {
        elements,
        base,
        origin: m.origin(),
    }
}

/// Gauge of a connection: `s̃_i = Hol(γ_i)`.
pub fn gauge_from_connection(c: &dyn EdgeConnection, base: usize, q: Quadrature) -> Result<Gauge, HolonomyError> {
    let elements = (0..c.vertex_count())
        .map(|i| holonomy_of_path(c, &EdgePath::chain(base, i), q))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Gauge {
        elements,
        base,
        origin: -(base as i64),
    })
}

/// Chooses `v_ij = log a_ij` on every edge `i < j`.
pub fn connection_from_pc(m: &PcMatrix) -> Result<Connection, HolonomyError> {
    let g = *m.group();
    let mut c = Connection::zero(g, m.size());
    for i in 0..m.size() {
        for j in i + 1..m.size() {
            c.set_edge(i, j, g.log(&m.get(i, j))?)?;
        }
    }
    Ok(c)
}

/// `a_ij = s̃_i⁻¹·Hol(γ_i*[s_i,s_j]*γ_j⁻¹)·s̃_j`.
pub fn pc_from_connection(c: &dyn EdgeConnection, gauge: &Gauge, q: Quadrature) -> Result<PcMatrix, HolonomyError> {
    let n = c.vertex_count();
    if gauge.elements.len() != n {
        return Err(HolonomyError::GaugeSize {
            expected: n,
            found: gauge.elements.len(),
        });
    }
    let g = *c.group();
    for s in &gauge.elements {
        g.check(s)?;
    }
    let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let path = EdgePath::chain(gauge.base, i)
                .concat(&EdgePath::edge(i, j))?
                .concat(&EdgePath::chain(gauge.base, j).reverse())?;
            let hol = holonomy_of_path(c, &path, q)?;
            upper.push(g.mul(&g.mul(&g.inv(&gauge.elements[i]), &hol), &gauge.elements[j]));
        }
    }
    Ok(PcMatrix::from_upper(g, n, upper)?.with_origin(gauge.origin))
}

/// Largest entry distance after `m → connection → m` with `m`'s own gauge.
pub fn roundtrip_residual(m: &PcMatrix, q: Quadrature) -> Result<f64, HolonomyError> {
    let c = connection_from_pc(m)?;
    let back = pc_from_connection(&c, &build_gauge(m), q)?;
    Ok(back.max_entry_distance(m)?)
}

/// Holonomy of every 2-face loop `γ_ijk`, `i < j < k`.
pub fn face_holonomies(
    c: &dyn EdgeConnection,
    q: Quadrature,
) -> Result<Vec<([usize; 3], GroupElement)>, HolonomyError> {
    let n = c.vertex_count();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.push(([i, j, k], holonomy_of_path(c, &EdgePath::triad_loop(i, j, k), q)?));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportCheck {
    pub min_distance: f64,
    pub required: f64,
    pub disjoint: bool,
}

/// Pairwise distance between edge support segments must be at least `2ε`
/// in the ambient Euclidean metric. Only run for up to 5 vertices.
pub fn check_disjoint_supports(c: &Connection) -> Result<SupportCheck, HolonomyError> {
    let n = c.vertex_count;
    if n > 5 {
        return Err(HolonomyError::TooLarge(n));
    }
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut min_distance = f64::INFINITY;
    for (a, &(i, j)) in edges.iter().enumerate() {
        for &(k, l) in &edges[a + 1..] {
            let (p0, p1) = c.support_segment(i, j);
            let (q0, q1) = c.support_segment(k, l);
            min_distance = min_distance.min(segment_distance(&p0, &p1, &q0, &q1));
        }
    }
    let required = 2.0 * c.epsilon;
    Ok(SupportCheck {
        min_distance,
        required,
        disjoint: min_distance >= required,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Closest distance between segments `[p0, p1]` and `[q0, q1]` in `ℝ^d`.
pub fn segment_distance(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return dot(&r, &r).sqrt();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let cp: Vec<f64> = p0.iter().zip(&d1).map(|(x, d)| x + s * d).collect();
    let cq: Vec<f64> = q0.iter().zip(&d2).map(|(x, d)| x + t * d).collect();
    let diff = sub(&cp, &cq);
    dot(&diff, &diff).sqrt()
}

/// `θ = df` for an affine potential `f` on the simplex, valued in `ℝ^J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatConnection {
    group: GroupDescriptor,
    /// `f(s_i)`, one `J`-vector per vertex.
    potential: Vec<Vec<f64>>,
    base: usize,
    origin: i64,
}

fn power_dim(group: &GroupDescriptor) -> Result<usize, HolonomyError> {
    match group.kind {
        GroupKind::PositiveReals => Ok(1),
        GroupKind::PositiveRealsPower { dim } => Ok(dim),
        _ => Err(HolonomyError::NotAbelianPower(group.to_string())),
    }
}

fn to_algebra(group: &GroupDescriptor, v: Vec<f64>) -> AlgebraElement {
    match group.kind {
        GroupKind::PositiveReals => AlgebraElement::Real(v[0]),
        _ => AlgebraElement::Vector(v),
    }
}

fn element_logs(g: &GroupElement) -> Vec<f64> {
    match g {
        GroupElement::PositiveReal(x) => vec![x.ln()],
        GroupElement::PositiveVector(v) => v.iter().map(|x| x.ln()).collect(),
        _ => unreachable!("power group element"),
    }
}

impl FlatConnection {
    pub fn potential(&self) -> &[Vec<f64>] {
        &self.potential
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// `λ_i = e^{f(s_i)}`.
    pub fn weights(&self) -> WeightVector {
        let weights = self
            .potential
            .iter()
            .map(|f| {
                self.group
                    .exp(&to_algebra(&self.group, f.clone()))
                    .expect("potential values are finite")
            })
            .collect();
        WeightVector {
            group: self.group,
            origin: self.origin,
            weights,
        }
    }

    /// Gauge `s̃_i = e^{f(s_i) − f(s_base)}`, which is `λ_i` under the normalization.
    pub fn gauge(&self) -> Gauge {
        Gauge {
            elements: self.weights().weights,
            base: self.base,
            origin: self.origin,
        }
    }
}

impl EdgeConnection for FlatConnection {
    fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    fn vertex_count(&self) -> usize {
        self.potential.len()
    }

    fn pullback(&self, from: usize, to: usize, _s: f64) -> AlgebraElement {
        self.edge_integral(from, to)
    }

    fn edge_integral(&self, from: usize, to: usize) -> AlgebraElement {
        let diff = self.potential[to]
            .iter()
            .zip(&self.potential[from])
            .map(|(b, a)| b - a)
            .collect();
        to_algebra(&self.group, diff)
    }
}

/// Solves `f(s_i) − f(s_{i+1}) = −ln a_{i,i+1}` with `f(s_base) = 0`,
/// componentwise for `(ℝ₊*)^J`.
pub fn flat_connection_from_consistent(m: &PcMatrix, tol: f64) -> Result<FlatConnection, HolonomyError> {
    let dim = power_dim(m.group())?;
    let residual = m.consistency_residual();
    if residual > tol {
        return Err(HolonomyError::NotConsistent(residual));
    }
    let n = m.size();
    let base = m.base_index();
    let mut potential = vec![vec![0.0; dim]; n];
    for i in base..n.saturating_sub(1) {
        let step = element_logs(&m.get(i, i + 1));
        potential[i + 1] = potential[i].iter().zip(&step).map(|(f, l)| f + l).collect();
    }
    for i in (1..=base).rev() {
        let step = element_logs(&m.get(i - 1, i));
        potential[i - 1] = potential[i].iter().zip(&step).map(|(f, l)| f - l).collect();
    }
    Ok(FlatConnection {
        group: *m.group(),
        potential,
        base,
        origin: m.origin(),
    })
}

/// Abelian face test: `∫θ(ds_ij) + ∫θ(ds_jk) + ∫θ(ds_ki) = 0` on every 2-face.
pub fn flatness_implies_consistency_check(c: &dyn EdgeConnection) -> Result<bool, HolonomyError> {
    power_dim(c.group())?;
    let n = c.vertex_count();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let sum = c
                    .edge_integral(i, j)
                    .add(&c.edge_integral(j, k))
                    .and_then(|s| s.add(&c.edge_integral(k, i)))
                    .expect("edge integrals share one algebra");
                if sum.norm() > FLATNESS_TOLERANCE {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Consistency read off the connection: every 2-face holonomy is `1_G`.
pub fn faces_are_trivial(c: &dyn EdgeConnection, tol: f64, q: Quadrature) -> Result<bool, HolonomyError> {
    let g = *c.group();
    let e = g.identity();
    Ok(face_holonomies(c, q)?.iter().all(|(_, h)| g.dist(&e, h) <= tol))
}

/// `is_consistent` and `faces_are_trivial(connection_from_pc(m))` agree.
pub fn consistency_agrees_with_faces(m: &PcMatrix, tol: f64) -> Result<bool, HolonomyError> {
    let c = connection_from_pc(m)?;
    Ok(is_consistent(m, tol) == faces_are_trivial(&c, tol, Quadrature::Exact)?)
}
