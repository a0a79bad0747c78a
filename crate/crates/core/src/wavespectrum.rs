//! Boundary nests, wave spectra and the reconstruction pipeline.
//!
//! Two inflation modes are supported. The geometric mode works on a finite
//! metric space with exact set arithmetic. The dynamical mode works on
//! subspaces of a model Hilbert space, with reachable sets computed from
//! spectral filters. In both modes the lattice generated by the boundary nest
//! under an additive inflation is atomic, and its atoms are found as the
//! blocks of a partition refined by nest values and by inflations of blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align, IsometryReport};
use crate::bcinverse::{fourier_images_from_spectral_data, model_from_response, ModelOptions, ResponseData, SpectralData};
use crate::error::{invalid, Error, Result};
use crate::finmetric::{FiniteMetricSpace, PointSet};
use crate::greensys::{BoundarySource, GreenSystem};
use crate::hilbertlat::{eikonal, geometric_subspace, maximal_eikonals, Eikonal, EikonalOptions, Subspace};
use crate::latticekit::{kernel, refine_partition, sample_times, tau_matrix, StepFunction};
use crate::wavedyn::{directional_filters, snapshot_span, Dictionary, DynamicalInflation, SpectralOperator};

/// The boundary nest `t -> U^t` on a uniform grid, with optional patch nests.
#[derive(Clone, Debug)]
pub struct BoundaryNest {
    pub step: f64,
    pub main: StepFunction<Subspace>,
    pub patches: Vec<StepFunction<Subspace>>,
}

impl BoundaryNest {
    pub fn intervals(&self) -> usize {
        self.main.values().len()
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.intervals() as f64
    }
}

fn grid_breakpoints(m: usize, step: f64) -> Vec<f64> {
    (1..m).map(|i| i as f64 * step).collect()
}

/// Nest of closures of states reachable from the directional subspace `dir`:
/// the value on `(i step, (i+1) step]` is the join of the snapshot spans at
/// the midpoints up to `i`.
pub fn directional_nest(
    op: &SpectralOperator,
    dir: &Subspace,
    dict: &Dictionary,
    step: f64,
    horizon: f64,
    tol: f64,
) -> Result<StepFunction<Subspace>> {
    dict.validate()?;
    if !(step > 0.0) || !(horizon >= step) {
        return invalid("nest grid needs 0 < step <= horizon");
    }
    if dir.ambient() != op.dim() {
        return Err(Error::Dimension { expected: op.dim(), got: dir.ambient() });
    }
    let m = (horizon / step).round() as usize;
    let raw: Vec<Subspace> = (0..m)
        .into_par_iter()
        .map(|i| snapshot_span(op, dir, &directional_filters(op, dict, (i as f64 + 0.5) * step), tol))
        .collect::<Result<_>>()?;
    let mut values: Vec<Subspace> = Vec::with_capacity(m);
    for v in raw {
        let next = match values.last() {
            Some(prev) => prev.join(&v, tol)?,
            None => v,
        };
        values.push(next);
    }
    StepFunction::new(Subspace::zero(op.dim()), grid_breakpoints(m, step), values)
}

/// Boundary nest of a model pair; `patches` lists directional subspaces of boundary patches.
pub fn model_nest(
    op: &SpectralOperator,
    dir: &Subspace,
    patches: &[Subspace],
    dict: &Dictionary,
    step: f64,
    horizon: f64,
    tol: f64,
) -> Result<BoundaryNest> {
    let main = directional_nest(op, dir, dict, step, horizon, tol)?;
    let patches = patches.iter().map(|p| directional_nest(op, p, dict, step, horizon, tol)).collect::<Result<_>>()?;
    Ok(BoundaryNest { step, main, patches })
}

/// Boundary nest of a Green system, with one patch nest per listed channel group.
pub fn boundary_nest(
    gs: &GreenSystem,
    dict: &Dictionary,
    step: f64,
    horizon: f64,
    tol: f64,
    patches: &[Vec<usize>],
) -> Result<BoundaryNest> {
    let dirs = patches.iter().map(|p| gs.directional_patch(p)).collect::<Result<Vec<_>>>()?;
    model_nest(&gs.op, &gs.directional()?, &dirs, dict, step, horizon, tol)
}

/// How an inflated atom is judged to meet a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeetRule {
    /// Largest principal cosine at least `meet`.
    MaxCosine,
    /// At least the fraction `meet` of the block's energy captured.
    Energy,
    /// Largest principal cosine at least `meet` times its peak over the
    /// horizon, and the peak itself at least `RELATIVE_FLOOR`. Reach from a
    /// thin block is radially symmetric, so the peak is about `1/sqrt(k)`
    /// for `k` points at equal distance; normalizing removes that factor.
    Relative,
}

/// Peak cosine below which the relative rule never reports a meet.
pub const RELATIVE_FLOOR: f64 = 0.2;

/// Tuning of the dynamical spectrum.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumOptions {
    /// Relative singular-value cutoff of snapshot spans of inflations.
    pub tol: f64,
    /// Principal cosines at or above `split` count as inside a generator,
    /// at or below `1 - split` as outside; anything between blocks the split.
    pub split: f64,
    pub meet: f64,
    pub meet_rule: MeetRule,
    /// Grid steps of slack allowed in the boundary test `a(t) <= U^(t + slack)`.
    pub boundary_slack: usize,
    /// Rounds of refinement by inflations of blocks. Off by default: the
    /// reach of a thin block is radially symmetric about it, so its values
    /// split mirror pairs into even and odd parts that no geometry supports.
    pub max_rounds: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { tol: 1e-2, split: 0.8, meet: 0.45, meet_rule: MeetRule::Relative, boundary_slack: 1, max_rounds: 0 }
    }
}

impl SpectrumOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol", self.tol), ("split", self.split), ("meet", self.meet)] {
            if !(v > 0.0 && v < 1.0) {
                return invalid(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.split <= 0.5 {
            return invalid("split must exceed 1/2");
        }
        Ok(())
    }
}

/// A wave spectrum in the dynamical mode.
#[derive(Clone, Debug)]
pub struct DynamicalSpectrum {
    pub blocks: Vec<Subspace>,
    pub atoms: Vec<StepFunction<Subspace>>,
    pub tau: DMatrix<f64>,
    pub boundary: Vec<bool>,
    pub converged: bool,
    pub rounds: usize,
    /// Splits skipped because a principal cosine fell between the thresholds.
    pub ambiguous_splits: usize,
    pub log: Vec<String>,
}

/// A wave spectrum in the geometric mode.
#[derive(Clone, Debug)]
pub struct GeometricSpectrum {
    pub blocks: Vec<PointSet>,
    pub atoms: Vec<StepFunction<PointSet>>,
    pub kernels: Vec<PointSet>,
    pub tau: DMatrix<f64>,
    pub boundary: Vec<bool>,
    pub converged: bool,
    pub rounds: usize,
}

/// Result of trying to split `block` by `by`.
enum Split {
    Keep,
    Ambiguous,
    Parts(Subspace, Subspace),
}

fn split_subspace(block: &Subspace, by: &Subspace, thr: f64) -> Split {
    if block.is_zero() || by.is_zero() {
        return Split::Keep;
    }
    let q = block.basis();
    let m = by.basis().transpose() * q;
    let g = m.transpose() * m;
    let eig = SymmetricEigen::new((&g + g.transpose()) * 0.5);
    let (hi, lo) = (thr * thr, (1.0 - thr) * (1.0 - thr));
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (i, &c2) in eig.eigenvalues.iter().enumerate() {
        if c2 >= hi {
            inside.push(i);
        } else if c2 <= lo {
            outside.push(i);
        } else {
            return Split::Ambiguous;
        }
    }
    if inside.is_empty() || outside.is_empty() {
        return Split::Keep;
    }
    let part = |idx: &[usize]| {
        Subspace::from_orthonormal(crate::hilbertlat::orthonormalize(&(q * eig.eigenvectors.select_columns(idx))))
            .expect("orthonormal by construction")
    };
    Split::Parts(part(&inside), part(&outside))
}

fn split_all(blocks: Vec<Subspace>, by: &Subspace, thr: f64, ambiguous: &mut usize) -> Vec<Subspace> {
    let mut out = Vec::with_capacity(blocks.len() + 1);
    for b in blocks {
        match split_subspace(&b, by, thr) {
            Split::Keep => out.push(b),
            Split::Ambiguous => {
                *ambiguous += 1;
                out.push(b);
            }
            Split::Parts(i, o) => {
                out.push(o);
                out.push(i);
            }
        }
    }
    out
}

/// Smallest principal cosine of `a` into `b` (1 when `a` is zero).
pub fn containment(a: &Subspace, b: &Subspace) -> f64 {
    if a.is_zero() {
        return 1.0;
    }
    if b.rank() < a.rank() {
        return 0.0;
    }
    let m = b.basis().transpose() * a.basis();
    let g = m.transpose() * m;
    SymmetricEigen::new((&g + g.transpose()) * 0.5).eigenvalues.min().max(0.0).sqrt()
}

/// Share of the energy of `a` captured by `b`: `||P_b Q_a||_F^2 / rank a` (1 when `a` is zero).
pub fn energy_fraction(a: &Subspace, b: &Subspace) -> f64 {
    if a.is_zero() {
        return 1.0;
    }
    (b.basis().transpose() * a.basis()).norm_squared() / a.rank() as f64
}

fn centroid_key(b: &Subspace) -> (usize, f64) {
    // Canonical ordering by the coordinate of largest weight, then its weight.
    let p = b.basis();
    let w: Vec<f64> = (0..p.nrows()).map(|i| p.row(i).norm_squared()).collect();
    let (k, v) = w.iter().enumerate().fold((0, -1.0), |acc, (i, &x)| if x > acc.1 + 1e-12 { (i, x) } else { acc });
    (k, v)
}

/// The wave spectrum of the model `(op, nest)` under dynamical inflation.
pub fn wave_spectrum(op: &SpectralOperator, nest: &BoundaryNest, dict: &Dictionary, opts: SpectrumOptions) -> Result<DynamicalSpectrum> {
    opts.validate()?;
    let n = op.dim();
    let infl = DynamicalInflation::new(op.clone(), dict.clone(), opts.tol, nest.step, nest.horizon())?;
    let mut log = Vec::new();
    let mut ambiguous = 0usize;
    let mut blocks = vec![Subspace::full(n)];
    for f in std::iter::once(&nest.main).chain(&nest.patches) {
        for v in f.values() {
            blocks = split_all(blocks, v, opts.split, &mut ambiguous);
        }
    }
    log.push(format!("nest generators: {} blocks, {} ambiguous splits", blocks.len(), ambiguous));
    let mut rounds = 0;
    let mut converged = false;
    while rounds < opts.max_rounds {
        rounds += 1;
        let before = blocks.len();
        let inflations: Vec<StepFunction<Subspace>> = blocks.par_iter().map(|b| infl.inflate_subspace(b)).collect();
        for f in &inflations {
            for v in f.values() {
                blocks = split_all(blocks, v, opts.split, &mut ambiguous);
            }
        }
        log.push(format!("round {rounds}: {} blocks, {} ambiguous splits so far", blocks.len(), ambiguous));
        if blocks.len() == before {
            converged = true;
            break;
        }
    }
    if opts.max_rounds == 0 {
        log.push("refinement by inflations disabled".into());
    } else if !converged {
        log.push(format!("refinement budget of {} rounds exhausted", opts.max_rounds));
    }
    blocks.sort_by(|a, b| {
        let (ka, wa) = centroid_key(a);
        let (kb, wb) = centroid_key(b);
        ka.cmp(&kb).then(a.rank().cmp(&b.rank())).then(wb.total_cmp(&wa))
    });
    let atoms: Vec<StepFunction<Subspace>> = blocks.par_iter().map(|b| infl.inflate_subspace(b)).collect();
    let tau = dynamical_tau(&atoms, opts.meet, opts.meet_rule);
    let boundary = atoms.iter().map(|a| below_nest(a, &nest.main, opts.boundary_slack, opts.split)).collect();
    Ok(DynamicalSpectrum { blocks, atoms, tau, boundary, converged, rounds, ambiguous_splits: ambiguous, log })
}

/// Interaction times of subspace atoms: `t_ab` is the start of the first
/// interval on which `a(t)` meets the block `b(0)`.
pub fn dynamical_tau(atoms: &[StepFunction<Subspace>], meet: f64, rule: MeetRule) -> DMatrix<f64> {
    let n = atoms.len();
    let one: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                return 0.0;
            }
            let germ = atoms[j].initial();
            let score: Vec<f64> = std::iter::once(atoms[i].initial())
                .chain(atoms[i].values())
                .map(|v| match rule {
                    MeetRule::Energy => energy_fraction(germ, v),
                    _ => v.max_cosine(germ),
                })
                .collect();
            let thr = match rule {
                MeetRule::Relative => {
                    let peak = score.iter().cloned().fold(0.0, f64::max);
                    if peak < RELATIVE_FLOOR {
                        return f64::INFINITY;
                    }
                    meet * peak
                }
                _ => meet,
            };
            if score[0] >= thr {
                return 0.0;
            }
            match score[1..].iter().position(|&c| c >= thr) {
                Some(s) => atoms[i].interval_start(s),
                None => f64::INFINITY,
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| one[i * n + j].max(one[j * n + i]))
}

/// `a <= U` on the grid, allowing `slack` intervals of delay; containment
/// means that `U` captures at least the fraction `thr` of the energy.
fn below_nest(a: &StepFunction<Subspace>, nest: &StepFunction<Subspace>, slack: usize, thr: f64) -> bool {
    let nv = nest.values();
    let m = nv.len();
    if m == 0 {
        return false;
    }
    let at = |i: usize| &nv[(i + slack).min(m - 1)];
    a.values().iter().enumerate().all(|(i, v)| energy_fraction(v, at(i)) >= thr)
}

/// The wave spectrum of a finite metric space under metric inflation.
pub fn geometric_spectrum(space: &FiniteMetricSpace, max_rounds: usize) -> Result<GeometricSpectrum> {
    let n = space.len();
    if space.boundary().is_empty() {
        return invalid("the boundary is empty");
    }
    let nest = space.metric_inflation(space.boundary());
    let mut seeds = vec![nest.initial().clone()];
    seeds.extend(nest.values().iter().cloned());
    let r = refine_partition(n, &seeds, |a| space.metric_inflation(a), max_rounds);
    let atoms: Vec<StepFunction<PointSet>> = r.blocks.iter().map(|b| space.metric_inflation(b)).collect();
    let kernels = atoms.iter().map(kernel).collect::<Result<_>>()?;
    let tau = tau_matrix(&atoms, |a, b| a.intersects(b));
    let boundary = atoms
        .iter()
        .map(|a| sample_times(a, &nest).into_iter().chain([0.0]).all(|t| a.at(t).is_subset(nest.at(t))))
        .collect();
    Ok(GeometricSpectrum { blocks: r.blocks, atoms, kernels, tau, boundary, converged: r.converged, rounds: r.rounds })
}

/// Whether the boundary lattice of `space` separates points, with the atom classes.
pub fn is_simple(space: &FiniteMetricSpace) -> Result<(bool, Vec<PointSet>)> {
    let g = geometric_spectrum(space, 64)?;
    Ok((g.blocks.iter().all(|b| b.count() == 1), g.blocks))
}

/// The three spectra of one family of atoms.
#[derive(Clone, Debug)]
pub struct SpectraTriplet {
    /// Interaction times.
    pub tau: DMatrix<f64>,
    /// `||E_a - E_b||`.
    pub nest_distance: DMatrix<f64>,
    /// Indices of maximal eikonals.
    pub maximal: Vec<usize>,
    /// Indices `a` with `E_a >= E^boundary`.
    pub eikonal_boundary: Vec<usize>,
}

/// Eikonals of subspace nests and the derived spectra.
pub fn spectra_triplet(
    atoms: &[StepFunction<Subspace>],
    tau: &DMatrix<f64>,
    boundary_nest: &StepFunction<Subspace>,
    horizon: Option<f64>,
) -> Result<SpectraTriplet> {
    let opts = EikonalOptions { horizon, ..EikonalOptions::default() };
    let eik: Vec<Eikonal> = atoms.par_iter().map(|a| eikonal(a, opts)).collect::<Result<_>>()?;
    let eb = eikonal(boundary_nest, opts)?;
    let n = atoms.len();
    let nest_distance = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { eik[i].distance(&eik[j]) });
    let maximal = maximal_eikonals(&eik);
    let eikonal_boundary = (0..n).filter(|&i| eb.leq(&eik[i])).collect();
    Ok(SpectraTriplet { tau: tau.clone(), nest_distance, maximal, eikonal_boundary })
}

/// Geometric atoms as coordinate-subspace nests.
pub fn geometric_nests(space: &FiniteMetricSpace, atoms: &[StepFunction<PointSet>]) -> Vec<StepFunction<Subspace>> {
    atoms.iter().map(|a| a.map(|s| geometric_subspace(space, s))).collect()
}

/// Wave image of `f`: its projection onto each germ `a(0+)`; `None` where the germ is zero.
pub fn wave_images(f: &DVector<f64>, atoms: &[StepFunction<Subspace>]) -> Vec<Option<DVector<f64>>> {
    atoms
        .iter()
        .map(|a| {
            let g = a.germ();
            if g.is_zero() {
                None
            } else {
                Some(g.project(f))
            }
        })
        .collect()
}

/// Serializable view of a spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveSpectrumResult {
    pub mode: String,
    pub atoms: Vec<AtomSummary>,
    /// Interaction times; `null` for atoms that never meet.
    pub tau: Vec<Vec<Option<f64>>>,
    pub boundary: Vec<bool>,
    pub converged: bool,
    pub rounds: usize,
    pub log: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomSummary {
    pub breakpoints: Vec<f64>,
    /// Rank of the value on each interval (first entry is the value at 0).
    pub ranks: Vec<usize>,
    /// Point ids of the kernel, in the geometric mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel: Option<Vec<String>>,
}

fn tau_rows(tau: &DMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    (0..tau.nrows()).map(|i| (0..tau.ncols()).map(|j| Some(tau[(i, j)]).filter(|t| t.is_finite())).collect()).collect()
}

/// `tau` back from its serialized rows.
pub fn tau_from_rows(rows: &[Vec<Option<f64>>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().flatten().unwrap_or(f64::INFINITY))
}

impl DynamicalSpectrum {
    pub fn to_result(&self) -> WaveSpectrumResult {
        let mut log = self.log.clone();
        log.push(format!("ambiguous splits: {}", self.ambiguous_splits));
        WaveSpectrumResult {
            mode: "dynamical".into(),
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomSummary {
                    breakpoints: a.breakpoints().to_vec(),
                    ranks: std::iter::once(a.initial()).chain(a.values()).map(Subspace::rank).collect(),
                    kernel: None,
                })
                .collect(),
            tau: tau_rows(&self.tau),
            boundary: self.boundary.clone(),
            converged: self.converged,
            rounds: self.rounds,
            log,
        }
    }
}

impl GeometricSpectrum {
    pub fn to_result(&self, space: &FiniteMetricSpace) -> WaveSpectrumResult {
        WaveSpectrumResult {
            mode: "geometric".into(),
            atoms: self
                .atoms
                .iter()
                .zip(&self.kernels)
                .map(|(a, k)| AtomSummary {
                    breakpoints: a.breakpoints().to_vec(),
                    ranks: std::iter::once(a.initial()).chain(a.values()).map(PointSet::count).collect(),
                    kernel: Some(k.iter().map(|i| space.ids()[i].clone()).collect()),
                })
                .collect(),
            tau: tau_rows(&self.tau),
            boundary: self.boundary.clone(),
            converged: self.converged,
            rounds: self.rounds,
            log: Vec::new(),
        }
    }
}

/// Settings of the reconstruction pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    pub dictionary: Dictionary,
    /// Relative singular-value cutoff of the boundary nest snapshots.
    pub nest_tol: f64,
    /// Grid step of nests and inflations.
    pub step: f64,
    /// Horizon of nests and inflations.
    pub horizon: f64,
    pub spectrum: SpectrumOptions,
}

impl PipelineOptions {
    /// Defaults for a model with grid cell `cell`: dictionary bumps every
    /// half cell with widths of one and two cells, nests on the cell grid.
    pub fn for_cell(cell: f64, horizon: f64) -> Self {
        PipelineOptions {
            dictionary: Dictionary {
                spacing: 0.5 * cell,
                widths: vec![cell, 2.0 * cell],
                kinds: vec![crate::wavedyn::ProfileKind::Bump],
                delta_prime_eps: Vec::new(),
            },
            nest_tol: 1e-2,
            step: cell,
            horizon,
            spectrum: SpectrumOptions::default(),
        }
    }
}

/// Model pair plus its spectrum.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub op: SpectralOperator,
    pub directional: Subspace,
    pub nest: BoundaryNest,
    pub spectrum: DynamicalSpectrum,
    /// Rank of the model space.
    pub rank: usize,
}

/// Reconstruction from the response operator: build `(L~, D~)` from
/// `R^(2T)` and compute the wave spectrum of the model. `patches` groups
/// boundary channels whose own nests enrich the generators.
pub fn reconstruct_from_response(
    rd: &ResponseData,
    basis: &[BoundarySource],
    model: ModelOptions,
    patches: &[Vec<usize>],
    opts: &PipelineOptions,
) -> Result<Reconstruction> {
    let pair = model_from_response(rd, basis, model)?;
    let mut patch_dirs = Vec::new();
    for p in patches {
        if p.iter().any(|&c| c >= rd.channels) {
            return invalid("patch refers to a missing channel");
        }
        patch_dirs.push(Subspace::from_spanning(&pair.channel_images.select_columns(p), 1e-8)?);
    }
    let nest = model_nest(&pair.op, &pair.directional, &patch_dirs, &opts.dictionary, opts.step, opts.horizon, opts.nest_tol)?;
    let spectrum = wave_spectrum(&pair.op, &nest, &opts.dictionary, opts.spectrum)?;
    Ok(Reconstruction { rank: pair.rank, op: pair.op, directional: pair.directional, nest, spectrum })
}

/// Reconstruction from truncated spectral data. `boundary` holds boundary
/// functions as columns; `patches` groups its columns into boundary patches
/// whose nests enrich the generators.
pub fn reconstruct_from_spectral(
    sigma: &SpectralData,
    boundary: &DMatrix<f64>,
    patches: &[Vec<usize>],
    opts: &PipelineOptions,
) -> Result<Reconstruction> {
    let (op, dir, _) = fourier_images_from_spectral_data(sigma, boundary)?;
    let mut patch_dirs = Vec::new();
    for p in patches {
        if p.iter().any(|&c| c >= boundary.ncols()) {
            return invalid("patch refers to a missing boundary function");
        }
        let (_, d, _) = fourier_images_from_spectral_data(sigma, &boundary.select_columns(p))?;
        patch_dirs.push(d);
    }
    let nest = model_nest(&op, &dir, &patch_dirs, &opts.dictionary, opts.step, opts.horizon, opts.nest_tol)?;
    let spectrum = wave_spectrum(&op, &nest, &opts.dictionary, opts.spectrum)?;
    let rank = op.dim();
    Ok(Reconstruction { op, directional: dir, nest, spectrum, rank })
}

/// Blind comparison of a reconstructed spectrum with the geometric spectrum
/// of the reference space. The reference points are the geometric atoms, so
/// symmetric spaces are compared class by class.
pub fn isometry_report(spectrum: &DynamicalSpectrum, reference: &GeometricSpectrum, cell: f64) -> IsometryReport {
    align(&spectrum.tau, &spectrum.boundary, &reference.tau, &reference.boundary, cell)
}

/// Applies an orthogonal change of coordinates to a model pair.
pub fn conjugate_model(op: &SpectralOperator, dirs: &[Subspace], q: &DMatrix<f64>) -> Result<(SpectralOperator, Vec<Subspace>)> {
    let qt = q.transpose();
    Ok((op.conjugate(q)?, dirs.iter().map(|d| d.transform(&qt)).collect()))
}

/// Relabeling of atoms `b` matching atoms `a` after mapping `a` by `q`,
/// by the germ blocks, and the largest entrywise `tau` mismatch under it.
/// Entries infinite in both count as equal.
pub fn relabeled_distance(a: &DynamicalSpectrum, b: &DynamicalSpectrum, q: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = a.blocks.len();
    if n != b.blocks.len() {
        return (Vec::new(), f64::INFINITY);
    }
    let cost = DMatrix::from_fn(n, n, |i, j| 1.0 - containment(&a.blocks[i].transform(q), &b.blocks[j]));
    let perm = crate::align::hungarian(&cost);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a.tau[(i, j)], b.tau[(perm[i], perm[j])]);
            let e = if x.is_infinite() && y.is_infinite() { 0.0 } else { (x - y).abs() };
            worst = worst.max(e);
        }
    }
    (perm, worst)
}

/// Orthogonal direct sum of two model pairs.
pub fn direct_sum(a: &SpectralOperator, b: &SpectralOperator) -> Result<SpectralOperator> {
    let (na, nb) = (a.dim(), b.dim());
    let mut vals: Vec<(f64, DVector<f64>)> = Vec::with_capacity(na + nb);
    for k in 0..a.modes() {
        let mut v = DVector::zeros(na + nb);
        v.rows_mut(0, na).copy_from(&a.eigenvectors().column(k));
        vals.push((a.eigenvalues()[k], v));
    }
    for k in 0..b.modes() {
        let mut v = DVector::zeros(na + nb);
        v.rows_mut(na, nb).copy_from(&b.eigenvectors().column(k));
        vals.push((b.eigenvalues()[k], v));
    }
    vals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let lam = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.0));
    let cols: Vec<DVector<f64>> = vals.into_iter().map(|v| v.1).collect();
    SpectralOperator::new(lam, DMatrix::from_columns(&cols))
}

/// Embeds subspaces of the two summands into their direct sum.
pub fn direct_sum_subspace(a: &Subspace, b: &Subspace) -> Result<Subspace> {
    let (na, nb) = (a.ambient(), b.ambient());
    let mut m = DMatrix::zeros(na + nb, a.rank() + b.rank());
    m.view_mut((0, 0), (na, a.rank())).copy_from(a.basis());
    m.view_mut((na, a.rank()), (nb, b.rank())).copy_from(b.basis());
    Subspace::from_orthonormal(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(lengths: &[f64], boundary: &[usize]) -> FiniteMetricSpace {
        let n = lengths.len() + 1;
        let v: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let e: Vec<(String, String, f64)> = lengths.iter().enumerate().map(|(i, &l)| (v[i].clone(), v[i + 1].clone(), l)).collect();
        let b: Vec<String> = boundary.iter().map(|&i| v[i].clone()).collect();
        FiniteMetricSpace::from_weighted_graph(&v, &e, &b).unwrap()
    }

    #[test]
    fn asymmetric_path_is_simple_with_exact_distances() {
        let s = path(&[1.0, 2.0], &[0, 2]);
        let g = geometric_spectrum(&s, 16).unwrap();
        assert_eq!(g.atoms.len(), 3);
        for (a, k) in g.kernels.iter().enumerate() {
            assert_eq!(k.count(), 1);
            let x = k.iter().next().unwrap();
            for (b, l) in g.kernels.iter().enumerate() {
                let y = l.iter().next().unwrap();
                assert_eq!(g.tau[(a, b)], s.d(x, y));
            }
            assert_eq!(g.boundary[a], s.boundary().contains(x));
        }
    }

    #[test]
    fn symmetric_path_gives_mirror_classes() {
        let s = path(&[1.0; 4], &[0, 4]);
        let (simple, classes) = is_simple(&s).unwrap();
        assert!(!simple);
        let sizes: Vec<usize> = classes.iter().map(PointSet::count).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
    }

    #[test]
    fn split_by_nested_generator_is_exact() {
        let full = Subspace::full(4);
        let g = Subspace::coordinate(4, [1, 2]);
        match split_subspace(&full, &g, 0.9) {
            Split::Parts(i, o) => {
                assert!(i.same_as(&g, 1e-12));
                assert!(o.same_as(&g.complement(), 1e-12));
            }
            _ => panic!("expected a split"),
        }
    }
}
