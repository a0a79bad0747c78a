//! The abstract dynamical system `v'' + L v = h`, `v(0) = v'(0) = 0`, solved
//! mode by mode through the Duhamel integral
//! `v(t) = int_0^t L^(-1/2) sin((t - s) L^(1/2)) h(s) ds`.
//!
//! Also: the delta-prime controls that reproduce a state at a prescribed time,
//! reachable subspaces from snapshot dictionaries, and the dynamical inflation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbertlat::{orthonormalize, Subspace, SubspaceLattice};
use crate::latticekit::{Inflation, StepFunction};
use crate::quad::{composite_gl, cumulative_simpson, simpson_weights};
use crate::template::Template;

/// A positive definite operator by its eigenpairs (unitary coordinates).
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralOperator {
    pub fn new(eigenvalues: DVector<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.ncols() != n {
            return Err(Error::Dimension { expected: n, got: eigenvectors.ncols() });
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("eigenvalues".into()));
        }
        if eigenvalues.as_slice().windows(2).any(|w| w[1] < w[0]) {
            return invalid("eigenvalues must be ascending");
        }
        if n > 0 && !(eigenvalues[0] > 0.0) {
            return invalid(format!("operator is not positive definite (lowest eigenvalue {})", eigenvalues[0]));
        }
        let dev = (eigenvectors.transpose() * &eigenvectors - DMatrix::<f64>::identity(n, n)).amax();
        if dev > 1e-10 {
            return invalid(format!("eigenvectors are not orthonormal (Gram deviation {dev:e})"));
        }
        Ok(SpectralOperator { eigenvalues, eigenvectors })
    }

    /// Diagonalizes a symmetric positive definite matrix.
    pub fn from_symmetric(m: &DMatrix<f64>) -> Result<Self> {
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vecs = eig.eigenvectors.select_columns(&order);
        // Deterministic sign: largest-magnitude entry positive.
        for j in 0..vecs.ncols() {
            let col = vecs.column(j);
            let k = col.iamax();
            if col[k] < 0.0 {
                vecs.column_mut(j).neg_mut();
            }
        }
        SpectralOperator::new(vals, vecs)
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Lower bound of the spectrum.
    pub fn kappa(&self) -> f64 {
        self.eigenvalues.get(0).copied().unwrap_or(f64::INFINITY)
    }

    pub fn frequencies(&self) -> DVector<f64> {
        self.eigenvalues.map(f64::sqrt)
    }

    pub fn to_modes(&self, v: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.transpose() * v
    }

    pub fn from_modes(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.eigenvectors * c
    }

    /// `f(L) v`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64, v: &DVector<f64>) -> DVector<f64> {
        let c = self.to_modes(v);
        let g = DVector::from_iterator(c.len(), c.iter().zip(self.eigenvalues.iter()).map(|(c, &l)| c * f(l)));
        self.from_modes(&g)
    }

    /// `f(L)` as a matrix.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(l));
        }
        scaled * self.eigenvectors.transpose()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.matrix_fn(|l| l)
    }

    /// `Q^T L Q` for an orthogonal `Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> Result<Self> {
        SpectralOperator::new(self.eigenvalues.clone(), orthonormalize(&(q.transpose() * &self.eigenvectors)))
    }
}

/// Smoothness class of a control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlClass {
    /// Sampled from a smooth template and zero on an initial interval.
    Smooth,
    /// Any square-integrable samples.
    General,
}

/// A control sampled on the uniform grid `t_j = j dt`.
#[derive(Clone, Debug)]
pub struct Control {
    pub dt: f64,
    /// One column per time node.
    pub values: DMatrix<f64>,
    pub class: ControlClass,
}

impl Control {
    pub fn new(dt: f64, values: DMatrix<f64>, class: ControlClass) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control values".into()));
        }
        if class == ControlClass::Smooth && values.ncols() > 1 && values.columns(0, 2).amax() != 0.0 {
            return Err(Error::Control("smooth controls must vanish on an initial interval".into()));
        }
        Ok(Control { dt, values, class })
    }

    pub fn zero(dim: usize, dt: f64, nodes: usize) -> Self {
        Control { dt, values: DMatrix::zeros(dim, nodes), class: ControlClass::Smooth }
    }

    /// `h(t) = p(t) y` for a scalar profile.
    pub fn from_template(y: &DVector<f64>, profile: &Template, dt: f64, nodes: usize) -> Result<Self> {
        let class = if profile.is_smooth() && profile.support().0 > 0.0 { ControlClass::Smooth } else { ControlClass::General };
        let values = DMatrix::from_fn(y.len(), nodes, |i, j| y[i] * profile.value(j as f64 * dt));
        Control::new(dt, values, class)
    }

    pub fn nodes(&self) -> usize {
        self.values.ncols()
    }

    pub fn last_time(&self) -> f64 {
        (self.nodes().saturating_sub(1)) as f64 * self.dt
    }

    fn node_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if t < 0.0 || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t) || k as usize >= self.nodes() {
            return Err(Error::BeyondGrid { t, last: self.last_time() });
        }
        Ok(k as usize)
    }
}

/// `v^h(t)` at a single grid time, by composite Simpson in each mode.
pub fn trajectory(op: &SpectralOperator, h: &Control, t: f64) -> Result<DVector<f64>> {
    if h.values.nrows() != op.dim() {
        return Err(Error::Dimension { expected: op.dim(), got: h.values.nrows() });
    }
    let m = h.node_of(t)?;
    let w = simpson_weights(m, h.dt);
    let modal = op.eigenvectors().transpose() * h.values.columns(0, m + 1);
    let omega = op.frequencies();
    let v = DVector::from_iterator(
        op.modes(),
        (0..op.modes()).map(|k| {
            let om = omega[k];
            (0..=m).map(|j| w[j] * (om * (t - j as f64 * h.dt)).sin() / om * modal[(k, j)]).sum::<f64>()
        }),
    );
    Ok(op.from_modes(&v))
}

/// Modal coefficients of `v^h(t_j)` at every grid node (`modes x nodes`).
///
/// Uses `v_k(t) = (sin(w t) C_k(t) - cos(w t) S_k(t)) / w` with running
/// integrals `C_k = int cos(w s) h_k`, `S_k = int sin(w s) h_k`.
pub fn trajectory_modes(op: &SpectralOperator, h: &Control) -> Result<DMatrix<f64>> {
    if h.values.nrows() != op.dim() {
        return Err(Error::Dimension { expected: op.dim(), got: h.values.nrows() });
    }
    let modal = op.eigenvectors().transpose() * &h.values;
    let omega = op.frequencies();
    let nt = h.nodes();
    let rows: Vec<Vec<f64>> = (0..op.modes())
        .into_par_iter()
        .map(|k| {
            let om = omega[k];
            let c: Vec<f64> = (0..nt).map(|j| (om * j as f64 * h.dt).cos() * modal[(k, j)]).collect();
            let s: Vec<f64> = (0..nt).map(|j| (om * j as f64 * h.dt).sin() * modal[(k, j)]).collect();
            let ci = cumulative_simpson(&c, h.dt);
            let si = cumulative_simpson(&s, h.dt);
            (0..nt)
                .map(|j| {
                    let t = j as f64 * h.dt;
                    ((om * t).sin() * ci[j] - (om * t).cos() * si[j]) / om
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(op.modes(), nt, |k, j| rows[k][j]))
}

/// `int_0^{t_j} sin(w (t_j - s)) / w g(s) ds` for every frequency and node
/// (`modes x nodes`), for a scalar profile `g` supported in `support`.
/// Each grid step is integrated by 8-point Gauss-Legendre, clipped to the support.
pub fn profile_duhamel(
    omega: &DVector<f64>,
    g: impl Fn(f64) -> f64 + Sync,
    support: (f64, f64),
    dt: f64,
    nodes: usize,
) -> DMatrix<f64> {
    let (gx, gw) = crate::quad::gauss_legendre(8);
    // Quadrature nodes and weighted profile values per step.
    let steps: Vec<Vec<(f64, f64)>> = (0..nodes.saturating_sub(1))
        .map(|j| {
            let a = (j as f64 * dt).max(support.0);
            let b = ((j + 1) as f64 * dt).min(support.1);
            if b <= a {
                return Vec::new();
            }
            gx.iter()
                .zip(&gw)
                .map(|(x, w)| {
                    let s = a + 0.5 * (b - a) * (x + 1.0);
                    (s, 0.5 * (b - a) * w * g(s))
                })
                .collect()
        })
        .collect();
    let rows: Vec<Vec<f64>> = omega
        .as_slice()
        .par_iter()
        .map(|&om| {
            let (mut c, mut s) = (0.0, 0.0);
            let mut row = vec![0.0; nodes];
            for j in 1..nodes {
                for &(x, wg) in &steps[j - 1] {
                    c += (om * x).cos() * wg;
                    s += (om * x).sin() * wg;
                }
                let t = j as f64 * dt;
                row[j] = ((om * t).sin() * c - (om * t).cos() * s) / om;
            }
            row
        })
        .collect();
    DMatrix::from_fn(omega.len(), nodes, |k, j| rows[k][j])
}

/// `v^h(t_j)` at every node, in the original coordinates.
pub fn trajectory_all(op: &SpectralOperator, h: &Control) -> Result<DMatrix<f64>> {
    Ok(op.eigenvectors() * trajectory_modes(op, h)?)
}

/// `psi_eps(l) = (2 cos(sqrt(l) eps) - cos(2 sqrt(l) eps) - 1) / (eps^2 l)`,
/// the multiplier by which the delta-prime control reproduces a state.
pub fn psi_epsilon(lambda: f64, eps: f64) -> f64 {
    let x = lambda.max(0.0).sqrt() * eps;
    if x < 1e-3 {
        let x2 = x * x;
        return 1.0 - 7.0 / 12.0 * x2 + 62.0 / 720.0 * x2 * x2;
    }
    (2.0 * x.cos() - (2.0 * x).cos() - 1.0) / (x * x)
}

/// Scalar profile `phi_eps(t - r + eps)` with `phi_eps = eps^-2 sign(-t)` on `[-eps, eps]`.
pub fn delta_prime_profile(t: f64, r: f64, eps: f64) -> f64 {
    let s = t - r + eps;
    if s < -eps || s > eps {
        0.0
    } else if s < 0.0 {
        1.0 / (eps * eps)
    } else if s > 0.0 {
        -1.0 / (eps * eps)
    } else {
        0.0
    }
}

/// The control `phi_eps^r(t) y` on the grid `[0, r]`. Nodes on a jump take the mean value.
pub fn delta_prime_control(y: &DVector<f64>, r: f64, eps: f64, dt: f64) -> Result<Control> {
    if !(eps > 0.0) || eps >= r {
        return invalid(format!("need 0 < eps < r, got eps = {eps}, r = {r}"));
    }
    let nodes = (r / dt).round() as usize + 1;
    let at = |t: f64| {
        let tol = 1e-9 * dt;
        let l = delta_prime_profile(t - tol, r, eps);
        let rgt = delta_prime_profile(t + tol, r, eps);
        0.5 * (l + rgt)
    };
    let values = DMatrix::from_fn(y.len(), nodes, |i, j| y[i] * at(j as f64 * dt));
    Control::new(dt, values, ControlClass::General)
}

/// Exact `|| y - v^{h_eps}(r) ||` from the spectral representation.
pub fn delta_prime_error(op: &SpectralOperator, y: &DVector<f64>, eps: f64) -> f64 {
    let c = op.to_modes(y);
    c.iter()
        .zip(op.eigenvalues().iter())
        .map(|(c, &l)| (c * (1.0 - psi_epsilon(l, eps))).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Shape of the scalar profiles in a dictionary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Bump,
    BumpDerivative,
}

impl ProfileKind {
    fn order(self) -> usize {
        match self {
            ProfileKind::Bump => 0,
            ProfileKind::BumpDerivative => 1,
        }
    }
}

/// Scalar time profiles used to probe reachable sets.
///
/// At time `t` the dictionary holds bumps ending before `t` whose centers sit
/// at delays `(j + 1/2) spacing` before `t`, for each width and kind, plus
/// delta-prime controls with the listed absolute `eps`. Delays are measured
/// from the observation time, so the dictionary at `t` embeds into the one at
/// any later time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dictionary {
    pub spacing: f64,
    pub widths: Vec<f64>,
    pub kinds: Vec<ProfileKind>,
    pub delta_prime_eps: Vec<f64>,
}

impl Dictionary {
    /// Bumps on a grid of `spacing` with widths `spacing` and `2 spacing`,
    /// and the delta-prime family at four scales.
    pub fn standard(spacing: f64) -> Self {
        Dictionary {
            spacing,
            widths: vec![spacing, 2.0 * spacing],
            kinds: vec![ProfileKind::Bump],
            delta_prime_eps: vec![spacing / 8.0, spacing / 4.0, spacing / 2.0, spacing],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) {
            return invalid("dictionary spacing must be positive");
        }
        if self.widths.iter().any(|w| !(*w > 0.0)) {
            return invalid("dictionary widths must be positive");
        }
        if (self.widths.is_empty() || self.kinds.is_empty()) && self.delta_prime_eps.is_empty() {
            return invalid("dictionary is empty");
        }
        Ok(())
    }

    /// Bump templates (with their centers in absolute time) available at time `t`.
    pub fn bumps_at(&self, t: f64) -> Vec<Template> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &w in &self.widths {
                let mut j = 0usize;
                loop {
                    let delay = (j as f64 + 0.5) * self.spacing;
                    let center = t - delay;
                    if center - w < -1e-12 * t.max(1.0) {
                        break;
                    }
                    out.push(Template::Bump { center, half_width: w, order: kind.order() });
                    j += 1;
                }
            }
        }
        out
    }

    pub fn delta_prime_at(&self, t: f64) -> Vec<f64> {
        self.delta_prime_eps.iter().copied().filter(|&e| 2.0 * e <= t + 1e-12).collect()
    }
}

fn gl_panels(omega_max: f64, len: f64) -> usize {
    2 + (omega_max * len / std::f64::consts::PI).ceil() as usize
}

/// Modal multipliers `g(w_k)` with `v^{p y}(t) = g(L^(1/2)) y` for each bump
/// profile `p` truncated to `[0, t]`, and `psi_eps` for the delta-prime family.
/// Result is `modes x profiles`.
pub fn source_filters(op: &SpectralOperator, dict: &Dictionary, t: f64) -> DMatrix<f64> {
    let omega = op.frequencies();
    let bumps = dict.bumps_at(t);
    let eps = dict.delta_prime_at(t);
    let omax = omega.iter().cloned().fold(0.0, f64::max);
    let mut cols: Vec<Vec<f64>> = bumps
        .par_iter()
        .map(|b| {
            let (lo, hi) = b.support();
            let hi = hi.min(t);
            let (x, w) = composite_gl(lo.max(0.0), hi, gl_panels(omax, hi - lo), 8);
            let pv: Vec<f64> = x.iter().map(|&s| b.value(s)).collect();
            omega
                .iter()
                .map(|&om| x.iter().zip(&w).zip(&pv).map(|((&s, &wi), &p)| wi * (om * (t - s)).sin() * p).sum::<f64>() / om)
                .collect()
        })
        .collect();
    for e in eps {
        cols.push(op.eigenvalues().iter().map(|&l| psi_epsilon(l, e)).collect());
    }
    DMatrix::from_fn(op.modes(), cols.len(), |k, j| cols[j][k])
}

/// Modal multipliers of `u(t) = h(t) - v^{h''}(t)` for `h = p d`, the
/// smooth directional controls of the boundary nest.
pub fn directional_filters(op: &SpectralOperator, dict: &Dictionary, t: f64) -> DMatrix<f64> {
    let omega = op.frequencies();
    let omax = omega.iter().cloned().fold(0.0, f64::max);
    let bumps: Vec<Template> = dict.bumps_at(t).into_iter().filter(|b| b.support().0 > 0.0).collect();
    let cols: Vec<Vec<f64>> = bumps
        .par_iter()
        .map(|b| {
            let (lo, hi) = b.support();
            let hi = hi.min(t);
            let (x, w) = composite_gl(lo, hi, gl_panels(omax, hi - lo), 8);
            let p2: Vec<f64> = x.iter().map(|&s| b.derivative(2, s)).collect();
            let end = b.value(t);
            omega
                .iter()
                .map(|&om| end - x.iter().zip(&w).zip(&p2).map(|((&s, &wi), &p)| wi * (om * (t - s)).sin() * p).sum::<f64>() / om)
                .collect()
        })
        .collect();
    DMatrix::from_fn(op.modes(), cols.len(), |k, j| cols[j][k])
}

/// Span of `sum_k g_p(w_k) (a, phi_k) phi_k` over filters `g_p` and basis vectors `a`.
/// Before the rank decision each filter's group of columns is scaled to unit
/// Frobenius norm per source dimension; unlike scaling single columns, this
/// does not depend on the choice of basis of `source`.
pub fn snapshot_span(op: &SpectralOperator, source: &Subspace, filters: &DMatrix<f64>, tol: f64) -> Result<Subspace> {
    let n = op.dim();
    if source.is_zero() || filters.ncols() == 0 {
        return Ok(Subspace::zero(n));
    }
    let modal = op.eigenvectors().transpose() * source.basis();
    let (p, r) = (filters.ncols(), modal.ncols());
    let mut cols = DMatrix::zeros(op.modes(), p * r);
    for j in 0..p {
        let mut group = cols.columns_mut(j * r, r);
        for i in 0..r {
            for k in 0..op.modes() {
                group[(k, i)] = filters[(k, j)] * modal[(k, i)];
            }
        }
        let nrm = group.norm() / (r as f64).sqrt();
        if nrm > 0.0 {
            group /= nrm;
        }
    }
    let span = Subspace::from_spanning(&cols, tol)?;
    Ok(Subspace::from_orthonormal(orthonormalize(&(op.eigenvectors() * span.basis())))?)
}

/// Closure of the set of states reachable at time `t` with controls valued in `source`.
pub fn reachable_subspace(op: &SpectralOperator, source: &Subspace, t: f64, dict: &Dictionary, tol: f64) -> Result<Subspace> {
    dict.validate()?;
    if t < 0.0 {
        return invalid(format!("time must be nonnegative, got {t}"));
    }
    if t == 0.0 || source.is_zero() {
        return Ok(source.clone());
    }
    snapshot_span(op, source, &source_filters(op, dict, t), tol)
}

/// Dynamical inflation sampled on the grid `t_i = i step`: the value on
/// `(t_i, t_(i+1)]` is the reachable subspace at the midpoint, joined with all
/// earlier values so the result is a nest.
#[derive(Clone)]
pub struct DynamicalInflation {
    pub op: SpectralOperator,
    pub dict: Dictionary,
    pub tol: f64,
    pub step: f64,
    pub horizon: f64,
    filters: Vec<DMatrix<f64>>,
}

impl DynamicalInflation {
    pub fn new(op: SpectralOperator, dict: Dictionary, tol: f64, step: f64, horizon: f64) -> Result<Self> {
        dict.validate()?;
        if !(step > 0.0) || !(horizon >= step) {
            return invalid("inflation grid needs 0 < step <= horizon");
        }
        let m = (horizon / step).round() as usize;
        let filters = (0..m).map(|i| source_filters(&op, &dict, (i as f64 + 0.5) * step)).collect();
        Ok(DynamicalInflation { op, dict, tol, step, horizon, filters })
    }

    pub fn intervals(&self) -> usize {
        self.filters.len()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        (1..self.filters.len()).map(|i| i as f64 * self.step).collect()
    }

    /// Raw (not yet joined) reachable subspace on interval `i`.
    pub fn sample(&self, a: &Subspace, i: usize) -> Subspace {
        snapshot_span(&self.op, a, &self.filters[i], self.tol).expect("validated dimensions")
    }

    pub fn inflate_subspace(&self, a: &Subspace) -> StepFunction<Subspace> {
        let n = self.op.dim();
        if a.is_zero() {
            return StepFunction::constant(Subspace::zero(n));
        }
        let raw: Vec<Subspace> = (0..self.filters.len()).into_par_iter().map(|i| self.sample(a, i)).collect();
        let mut values: Vec<Subspace> = Vec::with_capacity(raw.len());
        for v in raw {
            let joined = match values.last() {
                Some(prev) => prev.join(&v, self.tol).expect("same dimension"),
                None => v.join(a, self.tol).expect("same dimension"),
            };
            values.push(joined);
        }
        StepFunction::new(a.clone(), self.breakpoints(), values).expect("grid breakpoints")
    }
}

impl Inflation<SubspaceLattice> for DynamicalInflation {
    fn inflate(&self, _l: &SubspaceLattice, a: &Subspace) -> StepFunction<Subspace> {
        self.inflate_subspace(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(vals: &[f64]) -> SpectralOperator {
        let n = vals.len();
        SpectralOperator::new(DVector::from_row_slice(vals), DMatrix::identity(n, n)).unwrap()
    }

    #[test]
    fn psi_reference_value() {
        assert!((psi_epsilon(1.0, 0.1) - 0.994_175_3).abs() < 5e-8);
        assert!((psi_epsilon(1e-12, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let op = diag_op(&[1.0, 4.0]);
        let h = Control::zero(2, 0.01, 101);
        assert_eq!(trajectory(&op, &h, 1.0).unwrap().amax(), 0.0);
    }

    #[test]
    fn linear_forcing_closed_form() {
        let op = diag_op(&[4.0, 9.0]);
        let dt = 1e-3;
        let values = DMatrix::from_fn(2, 1001, |i, j| if i == 0 { j as f64 * dt } else { 0.0 });
        let h = Control::new(dt, values, ControlClass::General).unwrap();
        let v = trajectory(&op, &h, 1.0).unwrap();
        let exact = (1.0 - (2.0f64).sin() / 2.0) / 4.0;
        assert!((v[0] - exact).abs() < 1e-12);
        let all = trajectory_all(&op, &h).unwrap();
        assert!((all[(0, 1000)] - exact).abs() < 1e-11);
    }

    #[test]
    fn off_grid_time_rejected() {
        let op = diag_op(&[1.0]);
        let h = Control::zero(1, 0.1, 11);
        assert!(matches!(trajectory(&op, &h, 1.5), Err(Error::BeyondGrid { .. })));
    }

    #[test]
    fn delta_prime_needs_eps_below_r() {
        let y = DVector::from_element(2, 1.0);
        assert!(delta_prime_control(&y, 1.0, 1.0, 0.01).is_err());
        assert!(delta_prime_control(&y, 1.0, 0.1, 0.01).is_ok());
    }

    #[test]
    fn reachable_at_zero_is_source() {
        let op = diag_op(&[1.0, 4.0, 9.0]);
        let a = Subspace::coordinate(3, [1]);
        let d = Dictionary::standard(0.1);
        assert!(reachable_subspace(&op, &a, 0.0, &d, 1e-9).unwrap().same_as(&a, 1e-12));
        assert!(reachable_subspace(&op, &Subspace::zero(3), 1.0, &d, 1e-9).unwrap().is_zero());
    }
}
