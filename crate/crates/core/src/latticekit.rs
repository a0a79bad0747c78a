//! Lattices with inflation: step functions of time, generated lattices,
//! atoms, interaction time, kernels, quotients and the rho/sigma topologies.
//!
//! A step function stores its value at `t = 0` separately from its values on
//! the half-open intervals `(0, b_1], (b_1, b_2], ..., (b_m, inf)`. This matches
//! the strict inequality in `A^t = {x : d(x, A) < t}`: at a breakpoint the
//! frontier is not yet included.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::finmetric::{FiniteMetricSpace, PointSet};

/// Right-continuous-from-above step function `[0, inf) -> lattice`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction<E> {
    initial: E,
    breakpoints: Vec<f64>,
    values: Vec<E>,
}

impl<E: Clone> StepFunction<E> {
    /// `values[0]` holds on `(0, b_1]`, `values[i]` on `(b_i, b_{i+1}]`.
    pub fn new(initial: E, breakpoints: Vec<f64>, values: Vec<E>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return invalid(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            ));
        }
        if breakpoints.iter().any(|b| !(*b > 0.0) || !b.is_finite())
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return invalid("breakpoints must be positive, finite and strictly increasing");
        }
        Ok(StepFunction { initial, breakpoints, values })
    }

    pub fn constant(value: E) -> Self {
        StepFunction { initial: value.clone(), breakpoints: Vec::new(), values: vec![value] }
    }

    pub fn initial(&self) -> &E {
        &self.initial
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[E] {
        &self.values
    }

    /// Value on the first positive interval, standing in for `f(0+)`.
    pub fn germ(&self) -> &E {
        &self.values[0]
    }

    pub fn last(&self) -> &E {
        self.values.last().expect("at least one value")
    }

    /// Value at time `t`; `t = inf` returns the final value.
    pub fn at(&self, t: f64) -> &E {
        if t <= 0.0 {
            return &self.initial;
        }
        let k = self.breakpoints.partition_point(|&b| b < t);
        &self.values[k]
    }

    /// Left end of the interval on which `values[i]` holds.
    pub fn interval_start(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.breakpoints[i - 1]
        }
    }

    pub fn map<F: Clone>(&self, f: impl Fn(&E) -> F) -> StepFunction<F> {
        StepFunction {
            initial: f(&self.initial),
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }
}

/// Sample times that visit every constancy interval of both functions:
/// 0, each merged breakpoint (closing its interval) and infinity.
pub fn sample_times<A: Clone, B: Clone>(f: &StepFunction<A>, g: &StepFunction<B>) -> Vec<f64> {
    let mut ts: Vec<f64> = f.breakpoints.iter().chain(g.breakpoints.iter()).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut out = Vec::with_capacity(ts.len() + 2);
    out.push(0.0);
    out.extend(ts);
    out.push(f64::INFINITY);
    out
}

/// A bounded lattice with complement.
pub trait Lattice {
    type Elem: Clone;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn meet(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn complement(&self, a: &Self::Elem) -> Self::Elem;
    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> bool {
        self.leq(a, b) && self.leq(b, a)
    }
    /// Exact hash key when the representation is canonical.
    fn key(&self, _a: &Self::Elem) -> Option<Vec<u64>> {
        None
    }
}

/// An inflation: each element goes to a monotone step function with value `a` at 0.
pub trait Inflation<L: Lattice> {
    fn inflate(&self, lattice: &L, a: &L::Elem) -> StepFunction<L::Elem>;
}

/// The power-set lattice of `n` points.
#[derive(Clone, Copy, Debug)]
pub struct SetLattice {
    pub n: usize,
}

impl Lattice for SetLattice {
    type Elem = PointSet;
    fn zero(&self) -> PointSet {
        PointSet::empty(self.n)
    }
    fn one(&self) -> PointSet {
        PointSet::full(self.n)
    }
    fn meet(&self, a: &PointSet, b: &PointSet) -> PointSet {
        a.intersection(b)
    }
    fn join(&self, a: &PointSet, b: &PointSet) -> PointSet {
        a.union(b)
    }
    fn complement(&self, a: &PointSet) -> PointSet {
        a.complement()
    }
    fn leq(&self, a: &PointSet, b: &PointSet) -> bool {
        a.is_subset(b)
    }
    fn is_zero(&self, a: &PointSet) -> bool {
        a.is_empty()
    }
    fn equal(&self, a: &PointSet, b: &PointSet) -> bool {
        a == b
    }
    fn key(&self, a: &PointSet) -> Option<Vec<u64>> {
        Some(a.iter().map(|i| i as u64).collect())
    }
}

/// Metric inflation `A -> (t -> A^t)` on a finite metric space.
pub struct MetricInflation<'a> {
    pub space: &'a FiniteMetricSpace,
}

impl Inflation<SetLattice> for MetricInflation<'_> {
    fn inflate(&self, _l: &SetLattice, a: &PointSet) -> StepFunction<PointSet> {
        self.space.metric_inflation(a)
    }
}

/// Pointwise order of step functions.
pub fn step_leq<L: Lattice>(l: &L, f: &StepFunction<L::Elem>, g: &StepFunction<L::Elem>) -> bool {
    sample_times(f, g).into_iter().all(|t| l.leq(f.at(t), g.at(t)))
}

pub fn step_equal<L: Lattice>(l: &L, f: &StepFunction<L::Elem>, g: &StepFunction<L::Elem>) -> bool {
    sample_times(f, g).into_iter().all(|t| l.equal(f.at(t), g.at(t)))
}

pub fn step_is_zero<L: Lattice>(l: &L, f: &StepFunction<L::Elem>) -> bool {
    l.is_zero(f.initial()) && f.values().iter().all(|v| l.is_zero(v))
}

/// Pointwise join of a nonempty family of step functions.
pub fn step_join<L: Lattice>(l: &L, family: &[&StepFunction<L::Elem>]) -> Option<StepFunction<L::Elem>> {
    let first = family.first()?;
    let mut bps: Vec<f64> = family.iter().flat_map(|f| f.breakpoints().iter().copied()).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let join_at = |t: f64| {
        family.iter().skip(1).fold(first.at(t).clone(), |acc, f| l.join(&acc, f.at(t)))
    };
    let initial = join_at(0.0);
    let mut values: Vec<L::Elem> = bps.iter().map(|&b| join_at(b)).collect();
    values.push(join_at(f64::INFINITY));
    Some(StepFunction::new(initial, bps, values).expect("merged breakpoints are increasing"))
}

/// Closure budget.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Budget {
    pub max_elements: usize,
    pub max_rounds: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_elements: 20_000, max_rounds: 50 }
    }
}

/// Result of closing a generator family under the lattice operations and inflation.
#[derive(Clone, Debug)]
pub struct GeneratedLattice<E> {
    pub elements: Vec<E>,
    pub converged: bool,
    pub rounds: usize,
    pub log: Vec<String>,
}

impl<E: Clone> GeneratedLattice<E> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Minimal nonzero elements of the lattice itself.
    pub fn atom_elements<L: Lattice<Elem = E>>(&self, l: &L) -> Vec<E> {
        minimal_nonzero(&self.elements, |a| l.is_zero(a), |a, b| l.leq(a, b))
            .into_iter()
            .map(|i| self.elements[i].clone())
            .collect()
    }

    /// Sorted canonical keys; equal for equal lattices whatever the generator order.
    pub fn canonical<L: Lattice<Elem = E>>(&self, l: &L) -> Option<Vec<Vec<u64>>> {
        let mut keys: Vec<Vec<u64>> = self.elements.iter().map(|e| l.key(e)).collect::<Option<_>>()?;
        keys.sort();
        Some(keys)
    }
}

struct ElementStore<'a, L: Lattice> {
    l: &'a L,
    elems: Vec<L::Elem>,
    index: HashMap<Vec<u64>, usize>,
}

impl<'a, L: Lattice> ElementStore<'a, L> {
    fn insert(&mut self, e: L::Elem) -> bool {
        if let Some(k) = self.l.key(&e) {
            if self.index.contains_key(&k) {
                return false;
            }
            self.index.insert(k, self.elems.len());
        } else if self.elems.iter().any(|x| self.l.equal(x, &e)) {
            return false;
        }
        self.elems.push(e);
        true
    }
}

/// Minimal lattice containing `generators`, closed under meet, join,
/// complement and the values of the inflation at all its breakpoints.
///
/// Closure is semi-naive: each round combines the elements found in the
/// previous round with everything known so far.
pub fn generate<L: Lattice, I: Inflation<L>>(
    l: &L,
    generators: &[L::Elem],
    inflation: &I,
    budget: Budget,
) -> GeneratedLattice<L::Elem> {
    let mut store = ElementStore { l, elems: Vec::new(), index: HashMap::new() };
    store.insert(l.zero());
    store.insert(l.one());
    for g in generators {
        store.insert(g.clone());
    }
    let mut log = Vec::new();
    let mut frontier_start = 0;
    let mut rounds = 0;
    let mut converged = false;
    'outer: while rounds < budget.max_rounds {
        rounds += 1;
        let end = store.elems.len();
        let mut fresh = Vec::new();
        for i in frontier_start..end {
            let a = store.elems[i].clone();
            fresh.push(l.complement(&a));
            let f = inflation.inflate(l, &a);
            fresh.extend(f.values().iter().cloned());
            for j in 0..end {
                let b = &store.elems[j];
                fresh.push(l.meet(&a, b));
                fresh.push(l.join(&a, b));
            }
        }
        let mut added = 0;
        for e in fresh {
            if store.insert(e) {
                added += 1;
                if store.elems.len() > budget.max_elements {
                    log.push(format!("round {rounds}: element budget {} exhausted", budget.max_elements));
                    break 'outer;
                }
            }
        }
        log.push(format!("round {rounds}: {added} new elements, {} total", store.elems.len()));
        frontier_start = end;
        if added == 0 {
            converged = true;
            break;
        }
    }
    if !converged && rounds >= budget.max_rounds {
        log.push(format!("round budget {} exhausted", budget.max_rounds));
    }
    GeneratedLattice { elements: store.elems, converged, rounds, log }
}

fn minimal_nonzero<E>(items: &[E], is_zero: impl Fn(&E) -> bool, leq: impl Fn(&E, &E) -> bool) -> Vec<usize> {
    let nz: Vec<usize> = (0..items.len()).filter(|&i| !is_zero(&items[i])).collect();
    let mut out: Vec<usize> = Vec::new();
    for &i in &nz {
        let dominated = nz.iter().any(|&j| {
            j != i && leq(&items[j], &items[i]) && !(leq(&items[i], &items[j]) && j > i)
        });
        if !dominated {
            out.push(i);
        }
    }
    out
}

/// Minimal nonzero members of a family of step functions under the pointwise
/// order. Equal members are reported once (first occurrence).
pub fn atoms<L: Lattice>(l: &L, family: &[StepFunction<L::Elem>]) -> Vec<StepFunction<L::Elem>> {
    minimal_nonzero(family, |f| step_is_zero(l, f), |f, g| step_leq(l, f, g))
        .into_iter()
        .map(|i| family[i].clone())
        .collect()
}

/// One-sided time `t_ab = inf {t : a(t) meets b(0+)}`, infinite when never.
///
/// On the interval `(b_i, b_{i+1}]` the infimum is its left end `b_i`.
pub fn one_sided_time<E: Clone>(
    alpha: &StepFunction<E>,
    beta: &StepFunction<E>,
    meets: impl Fn(&E, &E) -> bool,
) -> f64 {
    let germ = beta.germ();
    if meets(alpha.initial(), germ) {
        return 0.0;
    }
    for (i, v) in alpha.values().iter().enumerate() {
        if meets(v, germ) {
            return alpha.interval_start(i);
        }
    }
    f64::INFINITY
}

/// Interaction time `tau(a, b) = max(t_ab, t_ba)`.
pub fn interaction_time<E: Clone>(
    alpha: &StepFunction<E>,
    beta: &StepFunction<E>,
    meets: impl Fn(&E, &E) -> bool,
) -> f64 {
    one_sided_time(alpha, beta, &meets).max(one_sided_time(beta, alpha, &meets))
}

/// Pairwise interaction times of a family.
pub fn tau_matrix<E: Clone + Sync>(
    family: &[StepFunction<E>],
    meets: impl Fn(&E, &E) -> bool + Sync,
) -> DMatrix<f64> {
    use rayon::prelude::*;
    let n = family.len();
    let one_sided: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                0.0
            } else {
                one_sided_time(&family[i], &family[j], &meets)
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| one_sided[i * n + j].max(one_sided[j * n + i]))
}

/// Kernel `a-dot = intersection of a(t) over t > 0`.
pub fn kernel(alpha: &StepFunction<PointSet>) -> Result<PointSet> {
    let mut k = alpha.germ().clone();
    for v in alpha.values() {
        k = k.intersection(v);
    }
    if k.is_empty() && alpha.values().iter().all(|v| v.is_empty()) {
        return invalid("the zero function has no kernel");
    }
    Ok(k)
}

/// Classes of atoms at zero interaction time with the induced class metric.
#[derive(Clone, Debug, Serialize)]
pub struct Quotient {
    pub classes: Vec<Vec<usize>>,
    pub dist: Vec<Vec<f64>>,
}

/// Quotient of an atom family by `tau = 0`. Every representative pair of two
/// classes must give the same distance (within 1e-12 relative).
pub fn quotient_by_zero_tau(tau: &DMatrix<f64>) -> Result<Quotient> {
    let n = tau.nrows();
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        let c = classes.len();
        let mut members = vec![i];
        class_of[i] = c;
        let mut k = 0;
        while k < members.len() {
            let a = members[k];
            for j in 0..n {
                if class_of[j] == usize::MAX && tau[(a, j)] == 0.0 {
                    class_of[j] = c;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        classes.push(members);
    }
    let m = classes.len();
    let mut dist = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            let reference = tau[(classes[a][0], classes[b][0])];
            for &i in &classes[a] {
                for &j in &classes[b] {
                    let t = tau[(i, j)];
                    let same = (t.is_infinite() && reference.is_infinite())
                        || (t - reference).abs() <= 1e-12 * reference.abs().max(1.0);
                    if !same {
                        return Err(Error::Quotient(format!(
                            "classes {a} and {b}: representatives give {reference} and {t}"
                        )));
                    }
                }
            }
            dist[a][b] = reference;
        }
    }
    Ok(Quotient { classes, dist })
}

/// Rho-closure `{a : join of W dominates a}` (indices into `family`).
pub fn closure_rho<L: Lattice>(l: &L, family: &[StepFunction<L::Elem>], w: &[usize]) -> Vec<usize> {
    let members: Vec<&StepFunction<L::Elem>> = w.iter().map(|&i| &family[i]).collect();
    let Some(j) = step_join(l, &members) else {
        return Vec::new();
    };
    (0..family.len()).filter(|&i| step_leq(l, &family[i], &j)).collect()
}

/// Sigma-ball `{b : b(t0) <= a(r) for some t0 > 0}`; by monotonicity this is `b(0+) <= a(r)`.
pub fn sigma_ball<L: Lattice>(l: &L, family: &[StepFunction<L::Elem>], alpha: usize, r: f64) -> Vec<usize> {
    let ar = family[alpha].at(r);
    (0..family.len()).filter(|&j| l.leq(family[j].germ(), ar)).collect()
}

/// Factor lattice of regular open sets modulo null differences. With the
/// discrete topology of a finite space every set is regular and the factor
/// map is injective, so the classes are the sets themselves.
#[derive(Clone, Copy, Debug)]
pub struct RegularFactor {
    pub n: usize,
}

impl RegularFactor {
    pub fn of(space: &FiniteMetricSpace) -> Self {
        RegularFactor { n: space.len() }
    }

    /// `int(closure(A))`, the identity in the discrete topology.
    pub fn class_of(&self, a: &PointSet) -> PointSet {
        a.clone()
    }

    /// `[A]^perp = [A*]` with `A* = int(complement of A)`.
    pub fn perp(&self, a: &PointSet) -> PointSet {
        a.complement()
    }

    pub fn meet(&self, a: &PointSet, b: &PointSet) -> PointSet {
        a.intersection(b)
    }

    pub fn join(&self, a: &PointSet, b: &PointSet) -> PointSet {
        a.union(b)
    }

    pub fn zero(&self) -> PointSet {
        PointSet::empty(self.n)
    }

    pub fn one(&self) -> PointSet {
        PointSet::full(self.n)
    }
}

/// Outcome of partition refinement.
#[derive(Clone, Debug)]
pub struct Refinement<E> {
    pub blocks: Vec<E>,
    pub converged: bool,
    pub rounds: usize,
}

/// Atoms of the Boolean algebra generated by `seeds` and closed under an
/// inflation that is additive over joins (true for metric inflation, and for
/// dynamical inflation by linearity). The blocks of the final partition are
/// the atoms of the generated lattice.
pub fn refine_partition(
    n: usize,
    seeds: &[PointSet],
    inflate: impl Fn(&PointSet) -> StepFunction<PointSet>,
    max_rounds: usize,
) -> Refinement<PointSet> {
    let mut blocks = vec![PointSet::full(n)];
    if n == 0 {
        return Refinement { blocks: Vec::new(), converged: true, rounds: 0 };
    }
    for s in seeds {
        blocks = split_blocks(blocks, s);
    }
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        rounds += 1;
        let before = blocks.len();
        let snapshot = blocks.clone();
        for b in &snapshot {
            let f = inflate(b);
            for v in f.values() {
                blocks = split_blocks(blocks, v);
            }
        }
        if blocks.len() == before {
            converged = true;
            break;
        }
    }
    blocks.sort_by_key(|b| b.iter().next());
    Refinement { blocks, converged, rounds }
}

fn split_blocks(blocks: Vec<PointSet>, by: &PointSet) -> Vec<PointSet> {
    let mut out = Vec::with_capacity(blocks.len() + 1);
    for b in blocks {
        let inside = b.intersection(by);
        if inside.is_empty() || inside == b {
            out.push(b);
        } else {
            out.push(b.difference(by));
            out.push(inside);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(lengths: &[f64], boundary: &[usize]) -> FiniteMetricSpace {
        let n = lengths.len() + 1;
        let v: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let e: Vec<(String, String, f64)> =
            lengths.iter().enumerate().map(|(i, &w)| (i.to_string(), (i + 1).to_string(), w)).collect();
        let b: Vec<String> = boundary.iter().map(|i| i.to_string()).collect();
        FiniteMetricSpace::from_weighted_graph(&v, &e, &b).unwrap()
    }

    fn boundary_generators(s: &FiniteMetricSpace) -> Vec<PointSet> {
        s.metric_inflation(s.boundary()).values().to_vec()
    }

    #[test]
    fn zero_generator_gives_two_elements() {
        let s = path(&[1.0], &[]);
        let l = SetLattice { n: 2 };
        let g = generate(&l, &[PointSet::empty(2)], &MetricInflation { space: &s }, Budget::default());
        assert!(g.converged);
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn symmetric_interval_mirror_pairs() {
        let s = path(&[1.0, 1.0, 1.0], &[0, 3]);
        let l = SetLattice { n: 4 };
        let mut gens = boundary_generators(&s);
        gens.push(s.boundary().clone());
        let g = generate(&l, &gens, &MetricInflation { space: &s }, Budget::default());
        assert!(g.converged);
        assert_eq!(g.len(), 4);
        let atoms = g.atom_elements(&l);
        assert!(atoms.contains(&PointSet::from_indices(4, [1, 2])));
        assert!(atoms.contains(&PointSet::from_indices(4, [0, 3])));
        let family: Vec<_> = atoms.iter().map(|a| s.metric_inflation(a)).collect();
        let pair = family.iter().find(|f| f.initial() == &PointSet::from_indices(4, [1, 2])).unwrap();
        assert_eq!(kernel(pair).unwrap(), PointSet::from_indices(4, [1, 2]));
    }

    #[test]
    fn asymmetric_path_full_power_set() {
        let s = path(&[1.0, 2.0], &[0, 2]);
        let l = SetLattice { n: 3 };
        let g = generate(&l, &boundary_generators(&s), &MetricInflation { space: &s }, Budget::default());
        assert!(g.converged);
        assert_eq!(g.len(), 8);
    }

    #[test]
    fn singleton_inflations_are_atoms_and_tau_is_distance() {
        let s = path(&[1.0, 2.0, 0.5], &[0]);
        let l = SetLattice { n: 4 };
        let fam: Vec<_> = (0..4).map(|i| s.metric_inflation(&PointSet::singleton(4, i))).collect();
        assert_eq!(atoms(&l, &fam).len(), 4);
        let tau = tau_matrix(&fam, |a: &PointSet, b: &PointSet| a.intersects(b));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(tau[(i, j)], s.d(i, j));
            }
        }
    }

    #[test]
    fn never_meeting_functions_have_infinite_time() {
        let a = StepFunction::constant(PointSet::singleton(2, 0));
        let b = StepFunction::constant(PointSet::singleton(2, 1));
        assert!(interaction_time(&a, &b, |x: &PointSet, y: &PointSet| x.intersects(y)).is_infinite());
        assert_eq!(interaction_time(&a, &a, |x: &PointSet, y: &PointSet| x.intersects(y)), 0.0);
    }

    #[test]
    fn quotient_merges_zero_time() {
        let tau = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        let q = quotient_by_zero_tau(&tau).unwrap();
        assert_eq!(q.classes, vec![vec![0, 1], vec![2]]);
        assert_eq!(q.dist[0][1], 2.0);
        let bad = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 2.0, 0.0, 0.0, 3.0, 2.0, 3.0, 0.0]);
        assert!(quotient_by_zero_tau(&bad).is_err());
    }

    #[test]
    fn zero_function_has_no_kernel() {
        assert!(kernel(&StepFunction::constant(PointSet::empty(3))).is_err());
    }

    #[test]
    fn step_function_rejects_bad_breakpoints() {
        assert!(StepFunction::new(1, vec![2.0, 1.0], vec![1, 2, 3]).is_err());
        assert!(StepFunction::new(1, vec![1.0], vec![1]).is_err());
    }
}
