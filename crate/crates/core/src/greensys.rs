//! Green systems `{H, B; A, G0, G1}` for three model problems, and the
//! boundary-driven wave equation solved through the Dirichlet operator.
//!
//! Inner-space coordinates are unitary: a nodal function `u` with weights `mu`
//! is stored as `sqrt(mu) u`, so the weighted inner product is Euclidean.
//! A domain element is stored as `u = Pi b + w` with `b = G0 u` and `w` in the
//! domain of the Dirichlet operator `L`; then `A u = L w` and
//! `G1 u = dtn b + g1l w`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::finmetric::{FiniteMetricSpace, PointSet};
use crate::hilbertlat::{spectral_norm, Subspace};
use crate::template::Template;
use crate::wavedyn::{directional_filters, profile_duhamel, snapshot_span, Dictionary, SpectralOperator};

/// Geometry of a model problem.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Dirichlet Laplacian on `[0, length]` by its first `modes` sine modes.
    IntervalSpectral { length: f64, modes: usize },
    /// Finite-difference Laplacian on a metric graph; edges are split into
    /// segments no longer than `spacing`; Dirichlet data at `boundary`.
    MetricGraph {
        vertices: Vec<String>,
        edges: Vec<(String, String, f64)>,
        boundary: Vec<String>,
        spacing: f64,
    },
    /// Five-point Laplacian on an `nx x ny` interior grid of a rectangle.
    Grid2d { nx: usize, ny: usize, spacing: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::IntervalSpectral { length, modes } => {
                if !(*length > 0.0) || !length.is_finite() {
                    return invalid(format!("length must be positive, got {length}"));
                }
                if *modes < 4 {
                    return invalid(format!("need at least 4 modes, got {modes}"));
                }
            }
            ModelSpec::MetricGraph { edges, boundary, spacing, .. } => {
                if !(*spacing > 0.0) {
                    return invalid(format!("spacing must be positive, got {spacing}"));
                }
                if boundary.is_empty() {
                    return invalid("metric graph needs at least one boundary vertex");
                }
                if let Some(e) = edges.iter().find(|e| !(e.2 > 0.0) || !e.2.is_finite()) {
                    return invalid(format!("edge {}-{} has non-positive length {}", e.0, e.1, e.2));
                }
            }
            ModelSpec::Grid2d { nx, ny, spacing } => {
                if !(*spacing > 0.0) {
                    return invalid(format!("spacing must be positive, got {spacing}"));
                }
                if *nx < 2 || *ny < 2 || nx * ny < 4 {
                    return invalid(format!("grid needs at least 2 x 2 interior points, got {nx} x {ny}"));
                }
            }
        }
        Ok(())
    }
}

/// Finite-difference data behind a nodal model: `K = [[K_II, K_IB], [K_BI, K_BB]]`
/// and lumped masses of the interior nodes.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub k_ii: DMatrix<f64>,
    pub k_ib: DMatrix<f64>,
    pub k_bb: DMatrix<f64>,
    pub mass: DVector<f64>,
}

impl Stencil {
    /// `A` on nodal values `(u_I, u_B)`, returned in unitary coordinates.
    pub fn apply(&self, u_i: &DVector<f64>, u_b: &DVector<f64>) -> DVector<f64> {
        let r = &self.k_ii * u_i + &self.k_ib * u_b;
        DVector::from_iterator(r.len(), r.iter().zip(self.mass.iter()).map(|(r, m)| r / m.sqrt()))
    }

    /// Outward flux `sum_i w_ib (u_b - u_i)` at each boundary node.
    pub fn flux(&self, u_i: &DVector<f64>, u_b: &DVector<f64>) -> DVector<f64> {
        &self.k_ib.transpose() * u_i + &self.k_bb * u_b
    }
}

/// A Green system with its paired metric space.
#[derive(Clone, Debug)]
pub struct GreenSystem {
    pub spec: ModelSpec,
    /// Dirichlet operator.
    pub op: SpectralOperator,
    /// Harmonic extension `B -> H`.
    pub pi: DMatrix<f64>,
    /// `G1` restricted to the domain of `L`.
    pub g1l: DMatrix<f64>,
    /// Dirichlet-to-Neumann map `G1 Pi`.
    pub dtn: DMatrix<f64>,
    /// `Pi* Pi`.
    pub pi_gram: DMatrix<f64>,
    /// Inner points with their metric; the boundary is the layer of points next to the boundary.
    pub space: FiniteMetricSpace,
    /// Distance from each inner point to the boundary.
    pub boundary_distance: Vec<f64>,
    /// Distance from each inner point to each boundary channel (`n x |B|`).
    pub channel_distance: DMatrix<f64>,
    pub boundary_ids: Vec<String>,
    /// Grid cell size.
    pub cell: f64,
    pub stencil: Option<Stencil>,
}

/// Builds the Green system and its paired metric space.
pub fn build_model(spec: &ModelSpec) -> Result<GreenSystem> {
    spec.validate()?;
    match spec {
        ModelSpec::IntervalSpectral { length, modes } => interval_spectral(spec, *length, *modes),
        ModelSpec::MetricGraph { vertices, edges, boundary, spacing } => {
            metric_graph(spec, vertices, edges, boundary, *spacing)
        }
        ModelSpec::Grid2d { nx, ny, spacing } => grid2d(spec, *nx, *ny, *spacing),
    }
}

fn interval_spectral(spec: &ModelSpec, ell: f64, n: usize) -> Result<GreenSystem> {
    let np1 = (n + 1) as f64;
    let h = ell / np1;
    let lam = DVector::from_fn(n, |k, _| ((k + 1) as f64 * PI / ell).powi(2));
    // Sampled sine modes; orthogonal because the sampling is the DST-I.
    let q = DMatrix::from_fn(n, n, |j, k| (2.0 / np1).sqrt() * ((k + 1) as f64 * PI * (j + 1) as f64 / np1).sin());
    let op = SpectralOperator::new(lam, q.clone())?;
    let c = (2.0 / ell).sqrt();
    let sgn = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    // Modal coefficients of the linear interpolants of the boundary data.
    let pi_modal = DMatrix::from_fn(n, 2, |k, b| {
        let kk = (k + 1) as f64;
        let base = c * ell / (kk * PI);
        if b == 0 { base } else { -base * sgn(k + 1) }
    });
    // Outward normal derivatives of the modes at 0 and at ell.
    let g_modal = DMatrix::from_fn(2, n, |b, k| {
        let kk = (k + 1) as f64;
        let base = c * kk * PI / ell;
        if b == 0 { -base } else { base * sgn(k + 1) }
    });
    let dtn = DMatrix::from_row_slice(2, 2, &[1.0 / ell, -1.0 / ell, -1.0 / ell, 1.0 / ell]);
    let pi_gram = DMatrix::from_row_slice(2, 2, &[ell / 3.0, ell / 6.0, ell / 6.0, ell / 3.0]);

    let xs: Vec<f64> = (1..=n).map(|j| j as f64 * h).collect();
    let ids: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
    let dist = DMatrix::from_fn(n, n, |i, j| (xs[i] - xs[j]).abs());
    let space = FiniteMetricSpace::new(ids, dist, PointSet::from_indices(n, [0, n - 1]), vec![h; n])?;
    Ok(GreenSystem {
        spec: spec.clone(),
        pi: &q * pi_modal,
        g1l: g_modal * q.transpose(),
        op,
        dtn,
        pi_gram,
        space,
        boundary_distance: xs.iter().map(|&x| x.min(ell - x)).collect(),
        channel_distance: DMatrix::from_fn(n, 2, |i, b| if b == 0 { xs[i] } else { ell - xs[i] }),
        boundary_ids: vec!["0".into(), "L".into()],
        cell: h,
        stencil: None,
    })
}

/// Nodal graph: node ids, segments `(a, b, conductance, length)`, Dirichlet node indices.
struct NodalGraph {
    ids: Vec<String>,
    segments: Vec<(usize, usize, f64, f64)>,
    dirichlet: Vec<usize>,
}

/// Assembles `K` from the segments. Masses are half the incident lengths
/// unless `fixed_mass` is given.
fn from_nodal(spec: &ModelSpec, g: NodalGraph, dist_full: DMatrix<f64>, cell: f64, fixed_mass: Option<f64>) -> Result<GreenSystem> {
    let total = g.ids.len();
    let is_b: Vec<bool> = (0..total).map(|i| g.dirichlet.contains(&i)).collect();
    let interior: Vec<usize> = (0..total).filter(|&i| !is_b[i]).collect();
    let (n, nb) = (interior.len(), g.dirichlet.len());
    if n == 0 {
        return invalid("model has no interior nodes");
    }
    let mut pos = vec![0; total];
    interior.iter().enumerate().for_each(|(k, &i)| pos[i] = k);
    g.dirichlet.iter().enumerate().for_each(|(k, &b)| pos[b] = k);
    let mut k_ii = DMatrix::zeros(n, n);
    let mut k_ib = DMatrix::zeros(n, nb);
    let mut k_bb = DMatrix::zeros(nb, nb);
    let mut mass = DVector::zeros(n);
    for &(a, b, w, len) in &g.segments {
        for (p, q) in [(a, b), (b, a)] {
            match (is_b[p], is_b[q]) {
                (false, false) => {
                    k_ii[(pos[p], pos[p])] += w;
                    k_ii[(pos[p], pos[q])] -= w;
                }
                (false, true) => {
                    k_ii[(pos[p], pos[p])] += w;
                    k_ib[(pos[p], pos[q])] -= w;
                }
                (true, false) => k_bb[(pos[p], pos[p])] += w,
                (true, true) => {
                    k_bb[(pos[p], pos[p])] += w;
                    k_bb[(pos[p], pos[q])] -= w;
                }
            }
            if !is_b[p] {
                mass[pos[p]] += 0.5 * len;
            }
        }
    }
    if let Some(m) = fixed_mass {
        mass.fill(m);
    }
    finish_nodal(spec, g, interior, Stencil { k_ii, k_ib, k_bb, mass }, dist_full, cell)
}

fn finish_nodal(
    spec: &ModelSpec,
    g: NodalGraph,
    interior: Vec<usize>,
    st: Stencil,
    dist_full: DMatrix<f64>,
    cell: f64,
) -> Result<GreenSystem> {
    let n = interior.len();
    let nb = g.dirichlet.len();
    let s_inv = st.mass.map(|m| 1.0 / m.sqrt());
    let s = st.mass.map(f64::sqrt);
    let l = DMatrix::from_fn(n, n, |i, j| s_inv[i] * st.k_ii[(i, j)] * s_inv[j]);
    let op = SpectralOperator::from_symmetric(&l)?;
    let chol = st
        .k_ii
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("stiffness matrix is singular; is every component attached to the boundary?".into()))?;
    let harmonic = -chol.solve(&st.k_ib);
    let pi = DMatrix::from_fn(n, nb, |i, b| s[i] * harmonic[(i, b)]);
    let g1l = DMatrix::from_fn(nb, n, |b, i| st.k_ib[(i, b)] * s_inv[i]);
    let dtn = &st.k_bb + st.k_ib.transpose() * &harmonic;
    let dtn = (&dtn + dtn.transpose()) * 0.5;
    let pi_gram = pi.transpose() * &pi;

    let dist = dist_full.select_rows(&interior).select_columns(&interior);
    let layer: Vec<usize> = (0..n).filter(|&i| (0..nb).any(|b| st.k_ib[(i, b)] != 0.0)).collect();
    let ids: Vec<String> = interior.iter().map(|&i| g.ids[i].clone()).collect();
    let space = FiniteMetricSpace::new(ids, dist, PointSet::from_indices(n, layer), st.mass.iter().copied().collect())?;
    let channel_distance = DMatrix::from_fn(n, nb, |i, b| dist_full[(interior[i], g.dirichlet[b])]);
    let boundary_distance = (0..n).map(|i| channel_distance.row(i).min()).collect();
    Ok(GreenSystem {
        spec: spec.clone(),
        op,
        pi,
        g1l,
        dtn,
        pi_gram,
        space,
        boundary_distance,
        channel_distance,
        boundary_ids: g.dirichlet.iter().map(|&b| g.ids[b].clone()).collect(),
        cell,
        stencil: Some(st),
    })
}

fn metric_graph(
    spec: &ModelSpec,
    vertices: &[String],
    edges: &[(String, String, f64)],
    boundary: &[String],
    spacing: f64,
) -> Result<GreenSystem> {
    let mut ids: Vec<String> = vertices.to_vec();
    let index = |v: &str| vertices.iter().position(|x| x == v).ok_or_else(|| Error::Invalid(format!("unknown vertex {v:?}")));
    let mut segments = Vec::new();
    let mut cell: f64 = 0.0;
    for (a, b, len) in edges {
        let (ia, ib) = (index(a)?, index(b)?);
        let m = (len / spacing - 1e-9).ceil().max(1.0) as usize;
        let seg = len / m as f64;
        cell = cell.max(seg);
        let mut prev = ia;
        for k in 1..m {
            ids.push(format!("{a}-{b}:{k}"));
            let cur = ids.len() - 1;
            segments.push((prev, cur, 1.0 / seg, seg));
            prev = cur;
        }
        segments.push((prev, ib, 1.0 / seg, seg));
    }
    let dirichlet = boundary.iter().map(|v| index(v)).collect::<Result<Vec<_>>>()?;
    let seg_edges: Vec<(String, String, f64)> =
        segments.iter().map(|&(a, b, _, l)| (ids[a].clone(), ids[b].clone(), l)).collect();
    let full = FiniteMetricSpace::from_weighted_graph(&ids, &seg_edges, &[])?;
    let dist_full = full.dist().clone();
    from_nodal(spec, NodalGraph { ids, segments, dirichlet }, dist_full, cell, None)
}

fn grid2d(spec: &ModelSpec, nx: usize, ny: usize, h: f64) -> Result<GreenSystem> {
    // Interior nodes (i, j), 1 <= i <= nx, 1 <= j <= ny. Each interior node on
    // the rim gets one boundary datum shared by its ghost neighbors, so a
    // corner node's two ghosts carry the same value and Pi stays injective.
    let mut ids = Vec::new();
    let mut coord = Vec::new();
    for i in 1..=nx {
        for j in 1..=ny {
            ids.push(format!("{i},{j}"));
            coord.push((i as f64 * h, j as f64 * h));
        }
    }
    let n = ids.len();
    let at = |i: usize, j: usize| (i - 1) * ny + (j - 1);
    let mut segments = Vec::new();
    let mut ghosts: Vec<Vec<(f64, f64)>> = Vec::new();
    for i in 1..=nx {
        for j in 1..=ny {
            if i < nx {
                segments.push((at(i, j), at(i + 1, j), 1.0, h));
            }
            if j < ny {
                segments.push((at(i, j), at(i, j + 1), 1.0, h));
            }
            let outside: Vec<(f64, f64)> = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                .into_iter()
                .filter(|&(a, b)| a == 0 || b == 0 || a == nx + 1 || b == ny + 1)
                .map(|(a, b)| (a as f64 * h, b as f64 * h))
                .collect();
            if !outside.is_empty() {
                let g = n + ghosts.len();
                ids.push(format!("ghost {i},{j}"));
                segments.push((at(i, j), g, outside.len() as f64, h));
                ghosts.push(outside);
            }
        }
    }
    let dirichlet: Vec<usize> = (n..ids.len()).collect();
    let total = ids.len();
    let euclid = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
    let pts = |k: usize| if k < n { vec![coord[k]] } else { ghosts[k - n].clone() };
    let dist_full = DMatrix::from_fn(total, total, |a, b| {
        let (pa, pb) = (pts(a), pts(b));
        pa.iter().flat_map(|&p| pb.iter().map(move |&q| euclid(p, q))).fold(f64::INFINITY, f64::min)
    });
    // Unit conductances with mass h^2 give the five-point stencil (4u - sum) / h^2.
    from_nodal(spec, NodalGraph { ids, segments, dirichlet }, dist_full, h, Some(h * h))
}

impl GreenSystem {
    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn boundary_dim(&self) -> usize {
        self.pi.ncols()
    }

    /// Dirichlet operator as a matrix.
    pub fn l_matrix(&self) -> DMatrix<f64> {
        self.op.matrix()
    }

    /// The directional subspace `Ran Pi`.
    pub fn directional(&self) -> Result<Subspace> {
        Subspace::from_spanning(&self.pi, 1e-12)
    }

    /// Directional subspace of a patch of boundary channels.
    pub fn directional_patch(&self, channels: &[usize]) -> Result<Subspace> {
        Subspace::from_spanning(&self.pi.select_columns(channels), 1e-12)
    }

    /// Time step with `sqrt(lambda_max) dt = 0.1`.
    pub fn default_dt(&self) -> f64 {
        0.1 / self.op.frequencies().max()
    }

    /// Points strictly closer than `t` to the boundary, or to the listed channels.
    pub fn near_boundary(&self, t: f64, channels: Option<&[usize]>) -> PointSet {
        let n = self.dim();
        let d = |i: usize| match channels {
            Some(ch) => ch.iter().map(|&b| self.channel_distance[(i, b)]).fold(f64::INFINITY, f64::min),
            None => self.boundary_distance[i],
        };
        PointSet::from_indices(n, (0..n).filter(|&i| d(i) < t))
    }

    /// `H Gamma^t` as a coordinate subspace.
    pub fn geometric_reach(&self, t: f64, channels: Option<&[usize]>) -> Subspace {
        Subspace::coordinate(self.dim(), self.near_boundary(t, channels).iter())
    }

    /// Largest distance from an inner point to the boundary.
    pub fn t_star(&self) -> f64 {
        self.boundary_distance.iter().cloned().fold(0.0, f64::max)
    }

    pub fn element(&self, b: DVector<f64>, w: DVector<f64>) -> Result<DomainElement> {
        if b.len() != self.boundary_dim() {
            return Err(Error::Dimension { expected: self.boundary_dim(), got: b.len() });
        }
        if w.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: w.len() });
        }
        Ok(DomainElement { b, w })
    }

    pub fn value(&self, u: &DomainElement) -> DVector<f64> {
        &self.pi * &u.b + &u.w
    }

    pub fn apply_a(&self, u: &DomainElement) -> DVector<f64> {
        self.op.apply_fn(|l| l, &u.w)
    }

    pub fn gamma0(&self, u: &DomainElement) -> DVector<f64> {
        u.b.clone()
    }

    pub fn gamma1(&self, u: &DomainElement) -> DVector<f64> {
        &self.dtn * &u.b + &self.g1l * &u.w
    }

    /// `(Au, v) - (u, Av) - (G0 u, G1 v) + (G1 u, G0 v)`.
    pub fn green_defect(&self, u: &DomainElement, v: &DomainElement) -> f64 {
        let (uu, vv) = (self.value(u), self.value(v));
        self.apply_a(u).dot(&vv) - uu.dot(&self.apply_a(v)) - self.gamma0(u).dot(&self.gamma1(v))
            + self.gamma1(u).dot(&self.gamma0(v))
    }

    /// `Dom L0 = L^-1 [H - D]`.
    pub fn minimal_domain(&self) -> Result<Subspace> {
        let perp = self.directional()?.complement();
        let inv = self.op.matrix_fn(|l| 1.0 / l);
        Subspace::from_spanning(&(inv * perp.basis()), 1e-12)
    }
}

/// `u = Pi b + w` with `w` in the domain of `L`.
#[derive(Clone, Debug)]
pub struct DomainElement {
    pub b: DVector<f64>,
    pub w: DVector<f64>,
}

/// `f(t) = profile(t) weights`, one term of a boundary control.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySource {
    pub weights: Vec<f64>,
    pub profile: Template,
}

impl BoundarySource {
    pub fn channel(nb: usize, c: usize, profile: Template) -> Self {
        let mut weights = vec![0.0; nb];
        weights[c] = 1.0;
        BoundarySource { weights, profile }
    }
}

/// Sampled solution of the boundary-driven problem.
#[derive(Clone, Debug)]
pub struct WaveTrajectory {
    pub dt: f64,
    /// `u^f(t_j)`, one column per node.
    pub states: DMatrix<f64>,
    /// `f(t_j)`.
    pub boundary: DMatrix<f64>,
    /// `G1 u^f(t_j)`.
    pub response: DMatrix<f64>,
}

fn check_source(gs: &GreenSystem, s: &BoundarySource) -> Result<()> {
    if s.weights.len() != gs.boundary_dim() {
        return Err(Error::Dimension { expected: gs.boundary_dim(), got: s.weights.len() });
    }
    if !s.profile.is_smooth() {
        return Err(Error::Control(format!("profile {:?} is not smooth", s.profile)));
    }
    if !(s.profile.support().0 > 0.0) {
        return Err(Error::Control(format!("profile {:?} does not vanish near t = 0", s.profile)));
    }
    Ok(())
}

/// Modal coefficients of `v^{Pi f''''}` on the grid for one source (`modes x nodes`).
fn source_duhamel(gs: &GreenSystem, s: &BoundarySource, dt: f64, nodes: usize) -> DMatrix<f64> {
    let p = s.profile;
    let scalar = profile_duhamel(&gs.op.frequencies(), move |t| p.derivative(4, t), p.support(), dt, nodes);
    let w = DVector::from_row_slice(&s.weights);
    let modal_pi = gs.op.eigenvectors().transpose() * (&gs.pi * w);
    let mut out = scalar;
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= modal_pi[k];
    }
    out
}

/// Solves `u'' + A u = 0`, `G0 u = f`, zero initial data, on `[0, horizon]`.
///
/// With `h = Pi f`, `u = h - v^{h''}`, and two integrations by parts give
/// `u = h - L^-1 h'' + L^-1 v^{h''''}` and
/// `G1 u = G1 Pi f + Pi* Pi f'' + G1 L^-1 v^{h''''}`, whose modal series
/// converge two orders faster than the direct ones.
pub fn solve_dsbc(gs: &GreenSystem, f: &[BoundarySource], dt: f64, horizon: f64) -> Result<WaveTrajectory> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return invalid("need dt > 0 and horizon >= 0");
    }
    for s in f {
        check_source(gs, s)?;
    }
    let nodes = (horizon / dt).round() as usize + 1;
    let nb = gs.boundary_dim();
    let sample = |m: usize| {
        DMatrix::from_fn(nb, nodes, |b, j| f.iter().map(|s| s.weights[b] * s.profile.derivative(m, j as f64 * dt)).sum())
    };
    let (boundary, second) = (sample(0), sample(2));
    let mut modal = f
        .par_iter()
        .map(|s| source_duhamel(gs, s, dt, nodes))
        .reduce(|| DMatrix::zeros(gs.op.modes(), nodes), |a, b| a + b);
    for (k, mut row) in modal.row_iter_mut().enumerate() {
        row /= gs.op.eigenvalues()[k];
    }
    let q = gs.op.eigenvectors();
    let linv_pi = gs.op.matrix_fn(|l| 1.0 / l) * &gs.pi;
    let states = &gs.pi * &boundary - linv_pi * &second + q * &modal;
    let response = &gs.dtn * &boundary + &gs.pi_gram * &second + (&gs.g1l * q) * &modal;
    Ok(WaveTrajectory { dt, states, boundary, response })
}

/// Closure of the states reachable at time `t` from the boundary, from
/// time-domain snapshots `u^f(t)` over the dictionary bumps on every channel.
pub fn boundary_reachable(gs: &GreenSystem, t: f64, dict: &Dictionary, dt: f64, tol: f64) -> Result<Subspace> {
    dict.validate()?;
    let n = gs.dim();
    if t <= 0.0 {
        return Ok(Subspace::zero(n));
    }
    let nodes = (t / dt).round() as usize + 1;
    let t_grid = (nodes - 1) as f64 * dt;
    let bumps: Vec<Template> = dict.bumps_at(t_grid).into_iter().filter(|b| b.support().0 > 0.0 && b.is_smooth()).collect();
    let nb = gs.boundary_dim();
    let cols: Vec<DVector<f64>> = (0..nb)
        .flat_map(|c| bumps.iter().map(move |&p| BoundarySource::channel(nb, c, p)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|s| {
            let traj = solve_dsbc(gs, std::slice::from_ref(s), dt, t_grid).expect("checked sources");
            let u = traj.states.column(nodes - 1).into_owned();
            let nrm = u.norm();
            if nrm > 0.0 { u / nrm } else { u }
        })
        .collect();
    if cols.is_empty() {
        return Ok(Subspace::zero(n));
    }
    Subspace::from_spanning(&DMatrix::from_columns(&cols), tol)
}

/// `U^t_D` from smooth directional controls by their spectral filters.
pub fn directional_reachable(gs: &GreenSystem, channels: Option<&[usize]>, t: f64, dict: &Dictionary, tol: f64) -> Result<Subspace> {
    if t <= 0.0 {
        return Ok(Subspace::zero(gs.dim()));
    }
    let d = match channels {
        Some(ch) => gs.directional_patch(ch)?,
        None => gs.directional()?,
    };
    snapshot_span(&gs.op, &d, &directional_filters(&gs.op, dict, t), tol)
}

/// One named diagnostic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomsReport {
    pub checks: Vec<AxiomCheck>,
    /// Finite stand-in for the defect index.
    pub directional_dim: usize,
}

impl AxiomsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, residual: f64, tolerance: f64, note: &str) -> AxiomCheck {
    AxiomCheck { name: name.into(), residual, tolerance, pass: residual <= tolerance, note: note.into() }
}

/// Residuals of the Green formula and of the structural identities.
pub fn axioms_report(gs: &GreenSystem, seed: u64) -> Result<AxiomsReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (n, nb) = (gs.dim(), gs.boundary_dim());
    let mut rv = |len: usize| DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0));
    let mut green: f64 = 0.0;
    for _ in 0..8 {
        let u = gs.element(rv(nb), rv(n))?;
        let v = gs.element(rv(nb), rv(n))?;
        let scale = gs.apply_a(&u).norm() * gs.value(&v).norm() + gs.gamma1(&u).norm() * v.b.norm() + 1.0;
        green = green.max(gs.green_defect(&u, &v).abs() / scale);
    }
    let linv = gs.op.matrix_fn(|l| 1.0 / l);
    let adj = (&gs.g1l * &linv).transpose();
    let pnorm = gs.pi.norm().max(1e-300);
    let adj_signed = (&gs.pi + &adj).norm() / pnorm;
    let adj_unsigned = (&gs.pi - &adj).norm() / pnorm;
    let d = gs.directional()?;
    let mut checks = vec![
        check("green_formula", green, 1e-8, "random domain pairs, relative to |Au||v| + |G1 u||G0 v|"),
        check("pi_adjoint", adj_signed, 1e-8, "Pi = -(G1 L^-1)^*; the unsigned identity has this residual instead"),
        check("dirichlet_positive", if gs.op.kappa() > 0.0 { 0.0 } else { 1.0 }, 0.0, "L^-1 bounded: lowest eigenvalue positive"),
        check("directional_dim", (d.rank() as f64 - nb as f64).abs(), 0.0, "dim D = dim B"),
        check("dtn_symmetric", (&gs.dtn - gs.dtn.transpose()).amax(), 1e-12, "G1 Pi is symmetric"),
        check("pi_gram", (gs.pi.transpose() * &gs.pi - &gs.pi_gram).amax() / gs.pi_gram.amax(), 1e-2, "Pi*Pi against its exact value; truncation error for spectral models"),
    ];
    checks.push(AxiomCheck {
        name: "pi_adjoint_unsigned".into(),
        residual: adj_unsigned,
        tolerance: f64::INFINITY,
        pass: true,
        note: "reported only".into(),
    });
    // Dom L0 = L^-1[H - D] is exactly the kernel of G1 in Dom L.
    let dom0 = gs.minimal_domain()?;
    let g1_on_dom0 = if dom0.is_zero() { 0.0 } else { spectral_norm(&(&gs.g1l * dom0.basis())) / spectral_norm(&gs.g1l) };
    checks.push(check("minimal_domain", g1_on_dom0, 1e-8, "G1 vanishes on L^-1[H - D]"));
    checks.push(check(
        "minimal_domain_dim",
        (dom0.rank() as f64 - (n - nb) as f64).abs(),
        0.0,
        "dim Dom L0 = dim H - dim B",
    ));
    match &gs.stencil {
        Some(st) => {
            let s_inv = st.mass.map(|m| 1.0 / m.sqrt());
            let l_nodal = DMatrix::from_fn(n, n, |i, j| s_inv[i] * st.k_ii[(i, j)] * s_inv[j]);
            let rel = (&l_nodal - gs.l_matrix()).amax() / l_nodal.amax();
            checks.push(check("l_equals_a_on_kernel", rel, 1e-10, "A on zero boundary data equals L"));
            let mut harm: f64 = 0.0;
            let mut flux: f64 = 0.0;
            for b in 0..nb {
                let mut e = DVector::zeros(nb);
                e[b] = 1.0;
                let u_i = DVector::from_fn(n, |i, _| gs.pi[(i, b)] * s_inv[i]);
                harm = harm.max(st.apply(&u_i, &e).amax() / l_nodal.amax().sqrt());
                flux = flux.max((st.flux(&u_i, &e) - gs.dtn.column(b)).amax());
            }
            checks.push(check("harmonic_extension", harm, 1e-10, "A Pi b = 0 on interior rows"));
            checks.push(check("dtn_from_stencil", flux, 1e-10, "G1 Pi from the boundary stencil"));
        }
        None => {
            // Modal coefficients of Pi e_0 against quadrature of (1 - x/l) phi_k.
            if let ModelSpec::IntervalSpectral { length, modes } = gs.spec {
                let (x, w) = crate::quad::composite_gl(0.0, length, 4 * modes, 8);
                let modal = gs.op.eigenvectors().transpose() * gs.pi.column(0);
                let mut err: f64 = 0.0;
                for k in 0..modes {
                    let kk = (k + 1) as f64;
                    let c: f64 = x
                        .iter()
                        .zip(&w)
                        .map(|(&x, &w)| w * (1.0 - x / length) * (2.0 / length).sqrt() * (kk * PI * x / length).sin())
                        .sum();
                    err = err.max((c - modal[k]).abs());
                }
                checks.push(check("harmonic_extension", err, 1e-10, "modes of Pi e_0 against quadrature of 1 - x/l"));
            }
        }
    }
    Ok(AxiomsReport { checks, directional_dim: d.rank() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_eigenvalues() {
        let gs = build_model(&ModelSpec::IntervalSpectral { length: PI, modes: 16 }).unwrap();
        assert!((gs.op.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((gs.op.eigenvalues()[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn small_spec_rejected() {
        assert!(build_model(&ModelSpec::IntervalSpectral { length: 1.0, modes: 3 }).is_err());
        assert!(build_model(&ModelSpec::Grid2d { nx: 1, ny: 5, spacing: 0.1 }).is_err());
    }

    #[test]
    fn zero_control_zero_wave() {
        let gs = build_model(&ModelSpec::IntervalSpectral { length: 1.0, modes: 16 }).unwrap();
        let traj = solve_dsbc(&gs, &[], 0.01, 0.5).unwrap();
        assert_eq!(traj.states.amax(), 0.0);
    }

    #[test]
    fn rough_control_rejected() {
        let gs = build_model(&ModelSpec::IntervalSpectral { length: 1.0, modes: 16 }).unwrap();
        let s = BoundarySource::channel(2, 0, Template::Step { at: 0.1 });
        assert!(matches!(solve_dsbc(&gs, &[s], 0.01, 0.5), Err(Error::Control(_))));
        let s = BoundarySource::channel(2, 0, Template::bump(0.05, 0.1));
        assert!(matches!(solve_dsbc(&gs, &[s], 0.01, 0.5), Err(Error::Control(_))));
    }
}
