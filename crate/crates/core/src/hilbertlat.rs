//! Subspace lattice of a finite-dimensional Hilbert space.
//!
//! Vectors are stored in unitary coordinates: a function `y` on a weighted
//! point set is represented by `sqrt(mu_i) y_i`, so the weighted inner product
//! becomes the Euclidean one and orthogonal projections are `Q Q^T`.
//! Geometric subspaces are coordinate subspaces in these coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::finmetric::{FiniteMetricSpace, PointSet};
use crate::latticekit::{Lattice, StepFunction};

/// Default relative singular-value cutoff for rank decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A subspace given by an orthonormal basis (columns).
#[derive(Clone, Debug)]
pub struct Subspace {
    dim: usize,
    basis: DMatrix<f64>,
    tol: f64,
}

impl Subspace {
    pub fn zero(dim: usize) -> Self {
        Subspace { dim, basis: DMatrix::zeros(dim, 0), tol: DEFAULT_TOL }
    }

    pub fn full(dim: usize) -> Self {
        Subspace { dim, basis: DMatrix::identity(dim, dim), tol: DEFAULT_TOL }
    }

    /// Span of coordinate directions.
    pub fn coordinate(dim: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let idx: Vec<usize> = idx.into_iter().collect();
        let mut basis = DMatrix::zeros(dim, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            basis[(i, c)] = 1.0;
        }
        Subspace { dim, basis, tol: DEFAULT_TOL }
    }

    /// Wraps columns that are already orthonormal (checked to 1e-10).
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let k = basis.ncols();
        let dev = (basis.transpose() * &basis - DMatrix::<f64>::identity(k, k)).amax();
        if dev > 1e-10 {
            return invalid(format!("basis is not orthonormal (Gram deviation {dev:e})"));
        }
        Ok(Subspace { dim: basis.nrows(), basis, tol: DEFAULT_TOL })
    }

    /// Orthonormalized column span, keeping singular values above `tol * max`.
    pub fn from_spanning(vectors: &DMatrix<f64>, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spanning vectors".into()));
        }
        let dim = vectors.nrows();
        if vectors.ncols() == 0 {
            return Ok(Subspace { dim, basis: DMatrix::zeros(dim, 0), tol });
        }
        let (u, s) = left_singular(vectors);
        let smax = s.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return Ok(Subspace { dim, basis: DMatrix::zeros(dim, 0), tol });
        }
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > tol * smax).collect();
        Ok(Subspace { dim, basis: u.select_columns(&keep), tol })
    }

    pub fn ambient(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// `|| (I - P) B ||_2` for the columns of `b`.
    pub fn residual(&self, b: &DMatrix<f64>) -> f64 {
        if b.ncols() == 0 {
            return 0.0;
        }
        let r = b - &self.basis * (self.basis.transpose() * b);
        spectral_norm(&r)
    }

    /// Containment `other <= self`, judged by the projection residual.
    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.residual(&other.basis) <= tol
    }

    /// Equality as projections (largest principal angle sine below `tol`).
    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.rank() == other.rank() && self.contains(other, tol) && other.contains(self, tol)
    }

    pub fn complement(&self) -> Subspace {
        if self.rank() == 0 {
            return Subspace::full(self.dim);
        }
        if self.rank() == self.dim {
            return Subspace::zero(self.dim);
        }
        let p = self.projector();
        let eig = SymmetricEigen::new(p);
        let keep: Vec<usize> = (0..self.dim).filter(|&i| eig.eigenvalues[i] < 0.5).collect();
        let basis = eig.eigenvectors.select_columns(&keep);
        Subspace { dim: self.dim, basis: orthonormalize(&basis), tol: self.tol }
    }

    pub fn join(&self, other: &Subspace, tol: f64) -> Result<Subspace> {
        same_dim(self, other)?;
        let mut m = DMatrix::zeros(self.dim, self.rank() + other.rank());
        m.columns_mut(0, self.rank()).copy_from(&self.basis);
        m.columns_mut(self.rank(), other.rank()).copy_from(&other.basis);
        Subspace::from_spanning(&m, tol)
    }

    /// Meet by De Morgan: complement of the join of complements.
    pub fn meet(&self, other: &Subspace, tol: f64) -> Result<Subspace> {
        Ok(self.complement().join(&other.complement(), tol)?.complement())
    }

    /// Meet as the null space of the stacked matrix `[P_A - I; P_B - I]`.
    pub fn meet_nullspace(&self, other: &Subspace, tol: f64) -> Result<Subspace> {
        same_dim(self, other)?;
        check_tol(tol)?;
        let n = self.dim;
        let id = DMatrix::<f64>::identity(n, n);
        let mut stack = DMatrix::zeros(2 * n, n);
        stack.rows_mut(0, n).copy_from(&(self.projector() - &id));
        stack.rows_mut(n, n).copy_from(&(other.projector() - &id));
        let svd = SVD::new(stack, false, true);
        let vt = svd.v_t.expect("requested");
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
        let rows = vt.select_rows(&keep);
        Ok(Subspace { dim: n, basis: orthonormalize(&rows.transpose()), tol })
    }

    /// Meet by principal vectors: directions of `self` at cosine `>= cos_min` to `other`.
    pub fn meet_by_angles(&self, other: &Subspace, cos_min: f64) -> Result<Subspace> {
        same_dim(self, other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Subspace::zero(self.dim));
        }
        let m = self.basis.transpose() * &other.basis;
        let (u, s) = left_singular(&m);
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= cos_min).collect();
        Ok(Subspace { dim: self.dim, basis: &self.basis * u.select_columns(&keep), tol: self.tol })
    }

    /// Cosines of the principal angles, descending; length `min(rank)`.
    pub fn cosines(&self, other: &Subspace) -> Vec<f64> {
        if self.is_zero() || other.is_zero() {
            return Vec::new();
        }
        let m = self.basis.transpose() * &other.basis;
        let mut s: Vec<f64> = SVD::new(m, false, false).singular_values.iter().map(|c| c.min(1.0)).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Principal angles in radians, ascending.
    pub fn principal_angles(&self, other: &Subspace) -> Vec<f64> {
        self.cosines(other).into_iter().map(f64::acos).collect()
    }

    /// Largest cosine between the two subspaces (0 if either is zero).
    pub fn max_cosine(&self, other: &Subspace) -> f64 {
        self.cosines(other).first().copied().unwrap_or(0.0)
    }

    pub fn transform(&self, q: &DMatrix<f64>) -> Subspace {
        Subspace { dim: self.dim, basis: orthonormalize(&(q * &self.basis)), tol: self.tol }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return invalid(format!("tolerance must lie in (0, 1), got {tol}"));
    }
    Ok(())
}

fn same_dim(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::Dimension { expected: a.dim, got: b.dim });
    }
    Ok(())
}

/// Left singular vectors and values; thin, sorted descending.
pub fn left_singular(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    if m.nrows() <= m.ncols() {
        // Eigen route on the small Gram keeps wide snapshot matrices cheap.
        let g = m * m.transpose();
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..m.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let s: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
        let u = eig.eigenvectors.select_columns(&order);
        return (u, s);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    (u.select_columns(&order), s)
}

/// Re-orthonormalizes nearly orthonormal columns (QR, sign-fixed).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols().min(r.nrows()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.columns(0, m.ncols().min(q.ncols())).into_owned()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let g = if m.nrows() <= m.ncols() { m * m.transpose() } else { m.transpose() * m };
    SymmetricEigen::new(g).eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
}

/// The geometric subspace of `A`: functions supported in `A`.
pub fn geometric_subspace(space: &FiniteMetricSpace, a: &PointSet) -> Subspace {
    Subspace::coordinate(space.len(), a.iter())
}

/// Subspace lattice with a fixed tolerance for rank and order decisions.
#[derive(Clone, Copy, Debug)]
pub struct SubspaceLattice {
    pub dim: usize,
    pub tol: f64,
}

impl Lattice for SubspaceLattice {
    type Elem = Subspace;
    fn zero(&self) -> Subspace {
        Subspace::zero(self.dim)
    }
    fn one(&self) -> Subspace {
        Subspace::full(self.dim)
    }
    fn meet(&self, a: &Subspace, b: &Subspace) -> Subspace {
        a.meet(b, self.tol).expect("same ambient dimension")
    }
    fn join(&self, a: &Subspace, b: &Subspace) -> Subspace {
        a.join(b, self.tol).expect("same ambient dimension")
    }
    fn complement(&self, a: &Subspace) -> Subspace {
        a.complement()
    }
    fn leq(&self, a: &Subspace, b: &Subspace) -> bool {
        b.contains(a, self.tol.sqrt())
    }
    fn is_zero(&self, a: &Subspace) -> bool {
        a.is_zero()
    }
}

/// A symmetric positive semidefinite operator `int t dP_t` built from a nest.
#[derive(Clone, Debug)]
pub struct Eikonal {
    pub matrix: DMatrix<f64>,
}

impl Eikonal {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-10 * matrix.amax().max(1.0) {
            return invalid(format!("eikonal is not symmetric (deviation {asym:e})"));
        }
        let e = Eikonal { matrix };
        let lo = e.min_eigenvalue();
        if lo < -1e-9 * e.matrix.amax().max(1.0) {
            return invalid(format!("eikonal has negative eigenvalue {lo:e}"));
        }
        Ok(e)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.matrix.nrows() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Operator-norm distance.
    pub fn distance(&self, other: &Eikonal) -> f64 {
        let d = &self.matrix - &other.matrix;
        if d.nrows() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(d).eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadratic-form order `self <= other`.
    pub fn leq(&self, other: &Eikonal) -> bool {
        let d = &other.matrix - &self.matrix;
        d.nrows() == 0 || SymmetricEigen::new(d).eigenvalues.iter().all(|&v| v >= -1e-9)
    }
}

/// Options for assembling an eikonal.
#[derive(Clone, Copy, Debug)]
pub struct EikonalOptions {
    /// Time charged to the part of the space never reached; required when the
    /// nest does not exhaust the space.
    pub horizon: Option<f64>,
    /// Containment residual accepted between consecutive nest values.
    pub monotone_tol: f64,
}

impl Default for EikonalOptions {
    fn default() -> Self {
        EikonalOptions { horizon: None, monotone_tol: 1e-8 }
    }
}

fn stieltjes(nest: &StepFunction<Subspace>, opts: EikonalOptions, weight: impl Fn(f64) -> f64) -> Result<Eikonal> {
    let n = nest.initial().ambient();
    let vals = nest.values();
    let mut prev = nest.initial();
    for (i, v) in vals.iter().enumerate() {
        if !v.contains(prev, opts.monotone_tol) {
            return Err(Error::NotMonotone(format!(
                "nest value on interval {i} does not contain its predecessor (residual {:e})",
                v.residual(prev.basis())
            )));
        }
        prev = v;
    }
    let mut e = DMatrix::zeros(n, n);
    let mut p_prev = vals[0].projector();
    for (i, &b) in nest.breakpoints().iter().enumerate() {
        let p = vals[i + 1].projector();
        e += (&p - &p_prev) * weight(b);
        p_prev = p;
    }
    if nest.last().rank() < n {
        let Some(h) = opts.horizon else {
            return invalid("nest does not exhaust the space and no horizon was given");
        };
        e += (DMatrix::<f64>::identity(n, n) - p_prev) * weight(h);
    }
    let e = (&e + e.transpose()) * 0.5;
    Eikonal::new(e)
}

/// `E = sum_i t_i (P_{t_i} - P_{t_(i-1)})`, exact for step nests.
pub fn eikonal(nest: &StepFunction<Subspace>, opts: EikonalOptions) -> Result<Eikonal> {
    stieltjes(nest, opts, |t| t)
}

/// `E^eps` with weight `t / (1 + eps t)`.
pub fn regularized_eikonal(nest: &StepFunction<Subspace>, eps: f64, opts: EikonalOptions) -> Result<Eikonal> {
    if !(eps > 0.0) {
        return invalid(format!("regularization must be positive, got {eps}"));
    }
    stieltjes(nest, opts, |t| t / (1.0 + eps * t))
}

/// Indices of the maximal members of a family under the quadratic-form order.
pub fn maximal_eikonals(family: &[Eikonal]) -> Vec<usize> {
    (0..family.len())
        .filter(|&i| {
            !(0..family.len()).any(|j| {
                j != i
                    && family[i].leq(&family[j])
                    && (!family[j].leq(&family[i]) || j < i)
            })
        })
        .collect()
}

/// Order relations of a pair of nests under plain and regularized eikonals.
#[derive(Clone, Debug, Serialize)]
pub struct OrderReport {
    pub plain_leq: bool,
    pub plain_geq: bool,
    pub regularized_leq: bool,
    pub regularized_geq: bool,
}

pub fn order_report(a: &Eikonal, b: &Eikonal, a_eps: &Eikonal, b_eps: &Eikonal) -> OrderReport {
    OrderReport {
        plain_leq: a.leq(b),
        plain_geq: b.leq(a),
        regularized_leq: a_eps.leq(b_eps),
        regularized_geq: b_eps.leq(a_eps),
    }
}

/// Basis matrix as CSV rows.
pub fn write_matrix_csv<W: std::io::Write>(m: &DMatrix<f64>, w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.nrows() {
        wr.write_record((0..m.ncols()).map(|j| format!("{}", m[(i, j)])))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: std::io::Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Invalid(format!("bad matrix entry: {e}")))?);
    }
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return invalid("ragged matrix CSV");
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_nest(d: &[f64]) -> StepFunction<Subspace> {
        let n = d.len();
        let mut bps: Vec<f64> = d.iter().copied().filter(|&x| x > 0.0).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let init = Subspace::coordinate(n, (0..n).filter(|&i| d[i] == 0.0));
        let mut values = vec![init.clone()];
        for &b in &bps {
            values.push(Subspace::coordinate(n, (0..n).filter(|&i| d[i] <= b)));
        }
        StepFunction::new(init, bps, values).unwrap()
    }

    #[test]
    fn coordinate_meet_join() {
        let a = Subspace::coordinate(5, [0, 1, 2]);
        let b = Subspace::coordinate(5, [2, 3]);
        assert!(a.meet(&b, 1e-9).unwrap().same_as(&Subspace::coordinate(5, [2]), 1e-9));
        assert_eq!(a.join(&b, 1e-9).unwrap().rank(), 4);
        assert!(a.complement().complement().same_as(&a, 1e-9));
    }

    #[test]
    fn eikonal_examples() {
        let e = eikonal(&diag_nest(&[0.0, 1.0, 3.0]), EikonalOptions::default()).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 3.0]));
        assert!((e.matrix - expect).amax() < 1e-12);
        let jump = StepFunction::new(Subspace::zero(2), vec![1.0], vec![Subspace::zero(2), Subspace::full(2)]).unwrap();
        let e1 = eikonal(&jump, EikonalOptions::default()).unwrap();
        assert!((e1.matrix.clone() - DMatrix::identity(2, 2)).amax() < 1e-12);
        let half = regularized_eikonal(&jump, 1.0, EikonalOptions::default()).unwrap();
        assert!((half.matrix - DMatrix::identity(2, 2) * 0.5).amax() < 1e-12);
        assert!(regularized_eikonal(&jump, 0.0, EikonalOptions::default()).is_err());
        let full = StepFunction::constant(Subspace::full(3));
        assert!(eikonal(&full, EikonalOptions::default()).unwrap().matrix.amax() < 1e-12);
    }

    #[test]
    fn maximal_examples() {
        let a = Eikonal::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).unwrap();
        let b = Eikonal::new(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]))).unwrap();
        assert_eq!(maximal_eikonals(&[a.clone(), b.clone()]), vec![0, 1]);
        let c = Eikonal::new(DMatrix::identity(2, 2) * 2.0).unwrap();
        assert_eq!(maximal_eikonals(&[a.clone(), b, c]), vec![2]);
        assert_eq!(maximal_eikonals(&[a]), vec![0]);
        assert!(maximal_eikonals(&[]).is_empty());
    }

    #[test]
    fn tolerance_range_checked() {
        let a = Subspace::coordinate(3, [0]);
        assert!(a.join(&a, 0.0).is_err());
        assert!(a.join(&a, 1.0).is_err());
        assert!(a.join(&Subspace::zero(4), 1e-9).is_err());
    }
}
