//! Inverse data: control and response operators, the connecting operator
//! recovered from the response, the model operator built from it, the Weyl
//! function, and the Fourier images obtained from spectral data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greensys::{solve_dsbc, BoundarySource, GreenSystem};
use crate::hilbertlat::Subspace;
use crate::quad::{composite_gl, simpson_weights};
use crate::template::Template;
use crate::wavedyn::SpectralOperator;

/// `u^{f_i}(T)` for each basis control, as columns.
pub fn control_operator(gs: &GreenSystem, t: f64, basis: &[BoundarySource], dt: f64) -> Result<DMatrix<f64>> {
    let cols = basis
        .par_iter()
        .map(|f| {
            let traj = solve_dsbc(gs, std::slice::from_ref(f), dt, t)?;
            Ok(traj.states.column(traj.states.ncols() - 1).into_owned())
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    if cols.is_empty() {
        return Ok(DMatrix::zeros(gs.dim(), 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Responses `G1 u^p(t)` of a family of probe controls on `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct ResponseData {
    pub horizon: f64,
    pub dt: f64,
    pub channels: usize,
    pub probes: Vec<BoundarySource>,
    /// One `channels x nodes` block per probe.
    pub responses: Vec<DMatrix<f64>>,
}

impl ResponseData {
    pub fn nodes(&self) -> usize {
        (self.horizon / self.dt).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return invalid("response data needs positive horizon and time step");
        }
        if self.probes.len() != self.responses.len() {
            return Err(Error::Dimension { expected: self.probes.len(), got: self.responses.len() });
        }
        for (p, r) in self.probes.iter().zip(&self.responses) {
            if p.weights.len() != self.channels {
                return Err(Error::Dimension { expected: self.channels, got: p.weights.len() });
            }
            if r.nrows() != self.channels || r.ncols() != self.nodes() {
                return Err(Error::Dimension { expected: self.channels * self.nodes(), got: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("response samples".into()));
            }
        }
        Ok(())
    }

    fn find(&self, s: &BoundarySource) -> Result<usize> {
        self.probes
            .iter()
            .position(|p| p.profile.same_as(&s.profile) && p.weights.iter().zip(&s.weights).all(|(a, b)| (a - b).abs() < 1e-12))
            .ok_or_else(|| Error::Invalid(format!("response data has no probe {:?} on weights {:?}", s.profile, s.weights)))
    }

    /// Response to `s`, assembled from the probes on the same profile.
    pub fn response_to(&self, s: &BoundarySource) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.channels, self.nodes());
        for (c, &w) in s.weights.iter().enumerate() {
            if w != 0.0 {
                let unit = BoundarySource::channel(self.channels, c, s.profile);
                out += &self.responses[self.find(&unit)?] * w;
            }
        }
        Ok(out)
    }
}

/// Samples `G1 u^p` for every probe.
pub fn response_operator(gs: &GreenSystem, horizon: f64, probes: &[BoundarySource], dt: f64) -> Result<ResponseData> {
    let responses = probes
        .par_iter()
        .map(|p| Ok(solve_dsbc(gs, std::slice::from_ref(p), dt, horizon)?.response))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResponseData { horizon, dt, channels: gs.boundary_dim(), probes: probes.to_vec(), responses })
}

/// Centers of bumps of half width `half_width` on a grid of `spacing`, all
/// supported strictly inside `(0, t)`.
pub fn bump_centers(t: f64, spacing: f64, half_width: f64) -> Vec<f64> {
    let n = ((t - 2.0 * half_width) / spacing).floor().max(0.0) as usize;
    (0..n)
        .map(|i| half_width + 1e-3 + (i as f64 + 0.5) * spacing)
        .filter(|&c| c + half_width < t)
        .collect()
}

/// Largest step not above the model's default that puts a node on `t`.
pub fn response_dt(gs: &GreenSystem, t: f64) -> f64 {
    t / (t / gs.default_dt()).ceil()
}

/// `order`-th derivatives of bumps at `centers`, on every channel.
pub fn bump_basis(channels: usize, centers: &[f64], half_width: f64, order: usize) -> Vec<BoundarySource> {
    (0..channels)
        .flat_map(|c| {
            centers
                .iter()
                .map(move |&center| BoundarySource::channel(channels, c, Template::Bump { center, half_width, order }))
        })
        .collect()
}

/// Probes needed to apply the connecting-operator formula to `basis` at time `t`:
/// the antiderivatives of the basis bumps and of their reflections about `t`.
pub fn probes_for(basis: &[BoundarySource], t: f64) -> Result<Vec<BoundarySource>> {
    let mut out: Vec<BoundarySource> = Vec::new();
    for f in basis {
        let (a, b) = js_parts(f, t)?;
        for p in [a, b] {
            for c in 0..f.weights.len() {
                if f.weights[c] != 0.0 {
                    let unit = BoundarySource::channel(f.weights.len(), c, p.profile);
                    if !out.iter().any(|q| q.profile.same_as(&unit.profile) && q.weights == unit.weights) {
                        out.push(unit);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `J S f` for `f` the `o`-th derivative of a bump inside `(0, t)`:
/// `B^(o-1) + (-1)^(o+1) B~^(o-1)` with `B~` the bump reflected about `t`.
fn js_parts(f: &BoundarySource, t: f64) -> Result<(BoundarySource, BoundarySource)> {
    match f.profile {
        Template::Bump { center, half_width, order } if order >= 1 => {
            if center - half_width <= 0.0 || center + half_width > t + 1e-12 {
                return invalid(format!("basis bump at {center} does not lie inside (0, {t})"));
            }
            let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
            let lo = Template::Bump { center, half_width, order: order - 1 };
            let hi = Template::Bump { center: 2.0 * t - center, half_width, order: order - 1 };
            Ok((
                BoundarySource { weights: f.weights.clone(), profile: lo },
                BoundarySource { weights: f.weights.iter().map(|w| sign * w).collect(), profile: hi },
            ))
        }
        _ => invalid("formula basis must consist of bump derivatives of order >= 1"),
    }
}

/// Samples of the odd extension `S g` about `t` on the grid of `[0, 2t]`.
fn odd_extension(g: &BoundarySource, t: f64, dt: f64, nodes: usize) -> DMatrix<f64> {
    let nb = g.weights.len();
    DMatrix::from_fn(nb, nodes, |c, j| {
        let s = j as f64 * dt;
        let v = if s <= t { g.profile.value(s) } else { -g.profile.value(2.0 * t - s) };
        g.weights[c] * v
    })
}

/// `C^T` on a basis of `F^T`, with the asymmetry of the raw formula.
#[derive(Clone, Debug)]
pub struct ConnectingOperator {
    pub matrix: DMatrix<f64>,
    pub asymmetry: f64,
}

/// `(C f_a, g_b) = 1/2 int_0^{2T} (R J S f_a)(t) . (S g_b)(t) dt`.
pub fn connecting_cross(rd: &ResponseData, left: &[BoundarySource], right: &[BoundarySource]) -> Result<DMatrix<f64>> {
    rd.validate()?;
    let t = 0.5 * rd.horizon;
    let nodes = rd.nodes();
    if (nodes - 1) % 2 != 0 {
        return invalid("the grid must have a node at T = horizon / 2");
    }
    let w = simpson_weights(nodes - 1, rd.dt);
    let lefts = left
        .par_iter()
        .map(|f| {
            let (a, b) = js_parts(f, t)?;
            Ok(rd.response_to(&a)? + rd.response_to(&b)?)
        })
        .collect::<Result<Vec<DMatrix<f64>>>>()?;
    let rights: Vec<DMatrix<f64>> = right.iter().map(|g| odd_extension(g, t, rd.dt, nodes)).collect();
    let rows: Vec<Vec<f64>> = lefts
        .par_iter()
        .map(|r| {
            rights
                .iter()
                .map(|s| 0.5 * (0..nodes).map(|j| w[j] * r.column(j).dot(&s.column(j))).sum::<f64>())
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(left.len(), right.len(), |a, b| rows[a][b]))
}

/// The connecting operator from the response on `[0, 2T]`, symmetrized.
pub fn connecting_via_formula(rd: &ResponseData, basis: &[BoundarySource]) -> Result<ConnectingOperator> {
    let c = connecting_cross(rd, basis, basis)?;
    let asym = (&c - c.transpose()).norm() / c.norm().max(1e-300);
    Ok(ConnectingOperator { matrix: (&c + c.transpose()) * 0.5, asymmetry: asym })
}

/// Gram matrix `int_0^T f_a . f_b dt` of the controls themselves.
pub fn control_gram(basis: &[BoundarySource], t: f64) -> DMatrix<f64> {
    let (x, w) = composite_gl(0.0, t, 400, 8);
    let samples: Vec<Vec<f64>> = basis.iter().map(|f| x.iter().map(|&s| f.profile.value(s)).collect()).collect();
    DMatrix::from_fn(basis.len(), basis.len(), |a, b| {
        let dot: f64 = basis[a].weights.iter().zip(&basis[b].weights).map(|(p, q)| p * q).sum();
        if dot == 0.0 {
            return 0.0;
        }
        dot * w.iter().zip(&samples[a]).zip(&samples[b]).map(|((w, p), q)| w * p * q).sum::<f64>()
    })
}

/// A model operator pair reconstructed from inverse data.
#[derive(Clone, Debug)]
pub struct ModelPair {
    pub op: SpectralOperator,
    pub directional: Subspace,
    /// Images of the boundary channels in the model space (columns), spanning `directional`.
    pub channel_images: DMatrix<f64>,
    /// Numerical rank of the connecting operator.
    pub rank: usize,
    /// Asymmetry of the raw model operator.
    pub asymmetry: f64,
    /// Relative residual of the graph identity on held-out controls, when measured.
    pub graph_residual: Option<f64>,
}

/// Options of [`model_from_response`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    /// Eigenvalues of `C^T` below `rank_cutoff * max` are discarded.
    pub rank_cutoff: f64,
    /// Rank below which the data count as not controllable.
    pub min_rank: usize,
}

/// Builds `(L~, D~)` in the coordinates of `|W^T|`.
///
/// `basis` must consist of first derivatives of bumps inside `(0, T)`; their
/// states lie in `Dom L`, so the graph pairs `(|W| f, |W| (-f''))` give `L~`.
/// `Dom L~0` is cut out by `(R f)(T) = 0`, read off the probe responses, and
/// `D~ = H~ - L~ Dom L~0`, computed as the span of `L~^-1 G^T`.
pub fn model_from_response(rd: &ResponseData, basis: &[BoundarySource], opts: ModelOptions) -> Result<ModelPair> {
    let t = 0.5 * rd.horizon;
    let minus_dd: Vec<BoundarySource> = basis
        .iter()
        .map(|f| match f.profile {
            Template::Bump { center, half_width, order } => Ok(BoundarySource {
                weights: f.weights.iter().map(|w| -w).collect(),
                profile: Template::Bump { center, half_width, order: order + 2 },
            }),
            _ => invalid("model basis must consist of bump derivatives"),
        })
        .collect::<Result<_>>()?;
    let c = connecting_via_formula(rd, basis)?.matrix;
    let c2 = connecting_cross(rd, basis, &minus_dd)?;
    let eig = SymmetricEigen::new(c.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > opts.rank_cutoff * top).collect();
    keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let r = keep.len();
    if r < opts.min_rank || r == 0 {
        return Err(Error::RankDeficient { achieved: r, required: opts.min_rank });
    }
    let v = eig.eigenvectors.select_columns(&keep);
    let isq = DVector::from_iterator(r, keep.iter().map(|&i| 1.0 / eig.eigenvalues[i].sqrt()));
    // Coordinates of W(-f'') are Y = Lambda^-1/2 V^T C2.
    let mut y = v.transpose() * &c2;
    for (i, mut row) in y.row_iter_mut().enumerate() {
        row *= isq[i];
    }
    // L~ = Lambda^-1/2 (V^T C2 V) Lambda^-1/2.
    let mut lt = &y * &v;
    for (j, mut col) in lt.column_iter_mut().enumerate() {
        col *= isq[j];
    }
    let asym = (&lt - lt.transpose()).norm() / lt.norm();
    let op = SpectralOperator::from_symmetric(&((&lt + lt.transpose()) * 0.5))?;

    // (R f_a)(T) by differentiating the response to the antiderivative bump at T.
    let nodes = rd.nodes();
    let jt = (nodes - 1) / 2;
    let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    let nb = rd.channels;
    let mut rt = DMatrix::zeros(nb, basis.len());
    for (a, f) in basis.iter().enumerate() {
        let (lo, _) = js_parts(f, t)?;
        let resp = rd.response_to(&lo)?;
        for c in 0..nb {
            rt[(c, a)] = (0..5).map(|k| d1[k] * resp[(c, jt + k - 2)]).sum::<f64>() / rd.dt;
        }
    }
    // Green's formula with u in Dom L and v harmonic gives (L u, v) = -(G1 u, G0 v),
    // so D~ is spanned by L~^-1 G^T with G the map from model coordinates to (R f)(T).
    let mut coords = v.clone();
    for (j, mut col) in coords.column_iter_mut().enumerate() {
        col *= isq[j];
    }
    let g = rt * coords;
    let images = op.matrix_fn(|l| 1.0 / l) * g.transpose();
    let dir = Subspace::from_spanning(&images, 1e-8)?;
    Ok(ModelPair { op, directional: dir, channel_images: images, rank: r, asymmetry: asym, graph_residual: None })
}

/// Weyl function `W(z) = G1 u_z` with `(A - z) u_z = 0`, `G0 u_z = phi`:
/// `W(z) = G1 Pi - z Pi* Pi + z^2 G1 L^-1 (L - z)^-1 Pi`.
pub fn weyl_function(gs: &GreenSystem, z: f64) -> Result<DMatrix<f64>> {
    let lam = gs.op.eigenvalues();
    let gap = lam.iter().map(|l| (l - z).abs()).fold(f64::INFINITY, f64::min);
    if gap < 1e-6 * lam[0] {
        return Err(Error::NearSpectrum(gap));
    }
    let q = gs.op.eigenvectors();
    let g = &gs.g1l * q;
    let p = q.transpose() * &gs.pi;
    let mut gp = g.clone();
    for (k, mut col) in gp.column_iter_mut().enumerate() {
        col /= lam[k] * (lam[k] - z);
    }
    Ok(&gs.dtn - &gs.pi_gram * z + gp * p * (z * z))
}

/// Truncated spectral data: eigenvalues and boundary traces `G1 phi_k`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Row `k` holds `G1 phi_k`.
    pub traces: DMatrix<f64>,
}

impl SpectralData {
    pub fn from_system(gs: &GreenSystem, n: usize) -> Result<Self> {
        if n == 0 || n > gs.op.modes() {
            return invalid(format!("cannot take {n} of {} modes", gs.op.modes()));
        }
        let g = &gs.g1l * gs.op.eigenvectors();
        Ok(SpectralData {
            eigenvalues: gs.op.eigenvalues().iter().take(n).copied().collect(),
            traces: g.columns(0, n).transpose(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.traces.nrows() != self.eigenvalues.len() {
            return Err(Error::Dimension { expected: self.eigenvalues.len(), got: self.traces.nrows() });
        }
        if self.eigenvalues.first().is_some_and(|&l| !(l > 0.0)) {
            return invalid("eigenvalues must be positive");
        }
        if self.eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return invalid("eigenvalues must be ascending");
        }
        if self.traces.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("traces".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn partial(&self, z: f64, m: usize) -> DMatrix<f64> {
        let nb = self.traces.ncols();
        let mut s = DMatrix::zeros(nb, nb);
        for k in 0..m {
            let l = self.eigenvalues[k];
            let g = self.traces.row(k).transpose();
            s += &g * g.transpose() * (1.0 / (l * (l - z)));
        }
        s
    }
}

/// `W(z) = W(0) - z sum_k g_k g_k^T / (lambda_k (lambda_k - z))` from
/// spectral data, with Richardson extrapolation of the partial sums at
/// `N/4`, `N/2`, `N`. The constant `W(0)` is not fixed by the series and is
/// an input.
pub fn weyl_from_spectral(sigma: &SpectralData, w0: &DMatrix<f64>, z: f64) -> Result<DMatrix<f64>> {
    sigma.validate()?;
    let n = sigma.len();
    let gap = sigma.eigenvalues.iter().map(|l| (l - z).abs()).fold(f64::INFINITY, f64::min);
    if gap < 1e-6 * sigma.eigenvalues[0] {
        return Err(Error::NearSpectrum(gap));
    }
    let sum = if n >= 16 && n % 4 == 0 {
        // Tails behave like a/N + b/N^2 + ...; eliminate both terms.
        let (s1, s2, s4) = (sigma.partial(z, n / 4), sigma.partial(z, n / 2), sigma.partial(z, n));
        (&s4 * 8.0 - &s2 * 6.0 + s1) / 3.0
    } else {
        sigma.partial(z, n)
    };
    Ok(w0 - sum * z)
}

/// Fourier images of boundary functions, `(a, phi_k) = -(1/lambda_k) (a, G1 phi_k)`.
/// Columns of the result are the images of the columns of `boundary`.
pub fn fourier_coefficients(sigma: &SpectralData, boundary: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sigma.validate()?;
    if boundary.nrows() != sigma.traces.ncols() {
        return Err(Error::Dimension { expected: sigma.traces.ncols(), got: boundary.nrows() });
    }
    let mut c = &sigma.traces * boundary;
    for (k, mut row) in c.row_iter_mut().enumerate() {
        row *= -1.0 / sigma.eigenvalues[k];
    }
    Ok(c)
}

/// `(L~, D~, Dom L~0)` in the eigenbasis: `L~ = diag(lambda_k)`, `D~` spanned
/// by the Fourier images of `boundary`, `Dom L~0 = L~^-1 [H~ - D~]`.
pub fn fourier_images_from_spectral_data(
    sigma: &SpectralData,
    boundary: &DMatrix<f64>,
) -> Result<(SpectralOperator, Subspace, Subspace)> {
    let c = fourier_coefficients(sigma, boundary)?;
    let d = Subspace::from_spanning(&c, 1e-12)?;
    if d.rank() < boundary.ncols() {
        return Err(Error::RankDeficient { achieved: d.rank(), required: boundary.ncols() });
    }
    let n = sigma.len();
    let op = SpectralOperator::new(DVector::from_row_slice(&sigma.eigenvalues), DMatrix::identity(n, n))?;
    let inv = op.matrix_fn(|l| 1.0 / l);
    let dom0 = Subspace::from_spanning(&(inv * d.complement().basis()), 1e-12)?;
    Ok((op, d, dom0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greensys::{build_model, ModelSpec};

    #[test]
    fn zero_response_gives_zero_connecting_operator() {
        let basis = bump_basis(2, &[0.2], 0.1, 1);
        let probes = probes_for(&basis, 0.4).unwrap();
        let rd = ResponseData {
            horizon: 0.8,
            dt: 0.01,
            channels: 2,
            responses: vec![DMatrix::zeros(2, 81); probes.len()],
            probes,
        };
        assert_eq!(connecting_via_formula(&rd, &basis).unwrap().matrix.amax(), 0.0);
    }

    #[test]
    fn weyl_at_zero_is_dtn() {
        let gs = build_model(&ModelSpec::IntervalSpectral { length: 1.0, modes: 32 }).unwrap();
        let w = weyl_function(&gs, 0.0).unwrap();
        assert!((w - &gs.dtn).amax() < 1e-14);
        assert!(matches!(weyl_function(&gs, gs.op.eigenvalues()[0]), Err(Error::NearSpectrum(_))));
    }

    #[test]
    fn basis_outside_horizon_rejected() {
        let basis = bump_basis(1, &[0.39], 0.1, 1);
        assert!(probes_for(&basis, 0.4).is_err());
    }
}
