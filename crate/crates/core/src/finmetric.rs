//! Finite metric spaces with a boundary subset and point weights, metric
//! neighborhoods `A^t = {x : d(x, A) < t}` and the metric inflation.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::latticekit::StepFunction;

/// Relative tolerance used when merging nearly equal radii.
pub const RADIUS_DEDUP: f64 = 1e-12;

/// A subset of the points of a finite space, stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointSet {
    len: usize,
    bits: Vec<u64>,
}

impl PointSet {
    pub fn empty(len: usize) -> Self {
        PointSet { len, bits: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in idx {
            s.insert(i);
        }
        s
    }

    pub fn singleton(len: usize, i: usize) -> Self {
        Self::from_indices(len, [i])
    }

    /// Size of the carrier set.
    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "point index {i} out of range {}", self.len);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.bits[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.bits[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.bits {
            *w = !*w;
        }
        out.clear_tail();
        out
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| a & b != 0)
    }

    fn zip(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.len, other.len, "point sets over different carriers");
        PointSet {
            len: self.len,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.bits.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Graph description accepted by [`FiniteMetricSpace::from_graph_input`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInput {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    #[serde(default)]
    pub boundary: Vec<String>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

/// A finite point set with a metric, a boundary subset and positive weights.
#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    dist: DMatrix<f64>,
    boundary: PointSet,
    weights: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Validates the metric axioms (triangle inequality up to a relative 1e-9).
    pub fn new(
        ids: Vec<String>,
        dist: DMatrix<f64>,
        boundary: PointSet,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        if dist.nrows() != n || dist.ncols() != n {
            return Err(Error::Dimension { expected: n, got: dist.nrows() });
        }
        if weights.len() != n {
            return Err(Error::Dimension { expected: n, got: weights.len() });
        }
        if boundary.universe() != n {
            return Err(Error::Dimension { expected: n, got: boundary.universe() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return invalid(format!("weights must be positive, found {w}"));
        }
        let scale = dist.iter().cloned().fold(0.0, f64::max).max(1.0);
        for i in 0..n {
            if dist[(i, i)] != 0.0 {
                return invalid(format!("d({0},{0}) = {1} is not zero", ids[i], dist[(i, i)]));
            }
            for j in 0..n {
                let d = dist[(i, j)];
                if !d.is_finite() || d < 0.0 {
                    return invalid(format!("d({},{}) = {d} is not a finite nonnegative number", ids[i], ids[j]));
                }
                if i != j && d <= 0.0 {
                    return invalid(format!("distinct points {} and {} at distance 0", ids[i], ids[j]));
                }
                if (d - dist[(j, i)]).abs() > 1e-12 * scale {
                    return invalid(format!("distance is not symmetric at ({}, {})", ids[i], ids[j]));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[(i, k)] > dist[(i, j)] + dist[(j, k)] + 1e-9 * scale {
                        return invalid(format!(
                            "triangle inequality fails for ({}, {}, {})",
                            ids[i], ids[j], ids[k]
                        ));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { ids, dist, boundary, weights })
    }

    /// Shortest-path metric of a weighted graph. Boundary vertices are given by id.
    pub fn from_weighted_graph(
        vertices: &[String],
        edges: &[(String, String, f64)],
        boundary: &[String],
    ) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return invalid("graph has no vertices");
        }
        let index: HashMap<&str, usize> =
            vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        if index.len() != n {
            return invalid("duplicate vertex ids");
        }
        let lookup = |v: &str| {
            index.get(v).copied().ok_or_else(|| Error::Invalid(format!("unknown vertex {v:?}")))
        };
        let mut g = UnGraph::<(), f64>::with_capacity(n, edges.len());
        let nodes: Vec<NodeIndex> = (0..n).map(|_| g.add_node(())).collect();
        let mut uf = UnionFind::<usize>::new(n);
        for (a, b, w) in edges {
            if !(*w > 0.0) || !w.is_finite() {
                return invalid(format!("edge {a}-{b} has nonpositive weight {w}"));
            }
            let (i, j) = (lookup(a)?, lookup(b)?);
            g.add_edge(nodes[i], nodes[j], *w);
            uf.union(i, j);
        }
        let labels = uf.into_labeling();
        let mut comps: Vec<Vec<&str>> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            let c = *seen.entry(*l).or_insert_with(|| {
                comps.push(Vec::new());
                comps.len() - 1
            });
            comps[c].push(vertices[i].as_str());
        }
        if comps.len() > 1 {
            let named: Vec<String> = comps.iter().map(|c| format!("{{{}}}", c.join(", "))).collect();
            return Err(Error::Disconnected(named.join(" ")));
        }
        let mut dist = DMatrix::zeros(n, n);
        for i in 0..n {
            let row = dijkstra(&g, nodes[i], None, |e| *e.weight());
            for (node, d) in row {
                dist[(i, node.index())] = d;
            }
        }
        // Dijkstra sums in different orders; symmetrize exactly.
        for i in 0..n {
            for j in 0..i {
                let d = dist[(i, j)].min(dist[(j, i)]);
                dist[(i, j)] = d;
                dist[(j, i)] = d;
            }
        }
        let mut bset = PointSet::empty(n);
        for b in boundary {
            bset.insert(lookup(b)?);
        }
        FiniteMetricSpace::new(vertices.to_vec(), dist, bset, vec![1.0; n])
    }

    pub fn from_graph_input(input: &GraphInput) -> Result<Self> {
        let mut space = Self::from_weighted_graph(&input.vertices, &input.edges, &input.boundary)?;
        if let Some(w) = &input.weights {
            space = space.with_weights(w.clone())?;
        }
        Ok(space)
    }

    pub fn read_graph_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let input: GraphInput = serde_json::from_str(&text)?;
        Self::from_graph_input(&input)
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        FiniteMetricSpace::new(self.ids, self.dist, self.boundary, weights)
    }

    pub fn with_boundary(self, boundary: PointSet) -> Result<Self> {
        FiniteMetricSpace::new(self.ids, self.dist, boundary, self.weights)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dist(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn boundary(&self) -> &PointSet {
        &self.boundary
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    pub fn set_of(&self, ids: &[&str]) -> Result<PointSet> {
        let mut s = PointSet::empty(self.len());
        for id in ids {
            let i = self
                .index_of(id)
                .ok_or_else(|| Error::Invalid(format!("unknown point {id:?}")))?;
            s.insert(i);
        }
        Ok(s)
    }

    /// `d(x, A)` for every point; `+inf` when `A` is empty.
    pub fn dist_to_set(&self, a: &PointSet) -> Vec<f64> {
        (0..self.len())
            .map(|x| a.iter().map(|y| self.dist[(x, y)]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// Open neighborhood `A^t = {x : d(x, A) < t}`, with `A^0 = A`.
    pub fn neighborhood(&self, a: &PointSet, t: f64) -> Result<PointSet> {
        if !(t >= 0.0) {
            return invalid(format!("radius must be nonnegative, got {t}"));
        }
        if t == 0.0 || a.is_empty() {
            return Ok(a.clone());
        }
        let d = self.dist_to_set(a);
        Ok(PointSet::from_indices(self.len(), (0..self.len()).filter(|&x| d[x] < t)))
    }

    /// Radii at which `t -> A^t` changes: the distinct positive values of `d(x, A)`.
    pub fn breakpoints(&self, a: &PointSet) -> Vec<f64> {
        if a.is_empty() {
            return Vec::new();
        }
        let mut r: Vec<f64> = self.dist_to_set(a).into_iter().filter(|&d| d > 0.0).collect();
        r.sort_by(f64::total_cmp);
        dedup_radii(r)
    }

    /// The metric inflation `t -> A^t` as a step function.
    pub fn metric_inflation(&self, a: &PointSet) -> StepFunction<PointSet> {
        if a.is_empty() {
            return StepFunction::constant(a.clone());
        }
        let d = self.dist_to_set(a);
        let bps = self.breakpoints(a);
        let mut values = Vec::with_capacity(bps.len() + 1);
        values.push(a.clone());
        for &b in &bps {
            let tol = RADIUS_DEDUP * b.max(1.0);
            values.push(PointSet::from_indices(self.len(), (0..self.len()).filter(|&x| d[x] <= b + tol)));
        }
        StepFunction::new(a.clone(), bps, values).expect("breakpoints are increasing")
    }

    /// Distance matrix as CSV with a header row of point ids.
    pub fn write_distance_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.ids)?;
        for i in 0..self.len() {
            wr.write_record((0..self.len()).map(|j| format!("{}", self.dist[(i, j)])))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a distance CSV written by [`Self::write_distance_csv`]; unit weights, empty boundary.
    pub fn read_distance_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let ids: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let n = ids.len();
        let mut dist = DMatrix::zeros(n, n);
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if i >= n || rec.len() != n {
                return invalid("distance CSV is not square");
            }
            for (j, f) in rec.iter().enumerate() {
                dist[(i, j)] = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad number {f:?} at row {i}")))?;
            }
        }
        FiniteMetricSpace::new(ids, dist, PointSet::empty(n), vec![1.0; n])
    }
}

/// Merges radii closer than the relative dedup tolerance. Input must be sorted.
pub fn dedup_radii(sorted: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match out.last() {
            Some(&last) if r - last <= RADIUS_DEDUP * last.abs().max(1.0) => {}
            _ => out.push(r),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_abc() -> FiniteMetricSpace {
        let v: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let e = vec![("a".into(), "b".into(), 1.0), ("b".into(), "c".into(), 2.0)];
        FiniteMetricSpace::from_weighted_graph(&v, &e, &[]).unwrap()
    }

    #[test]
    fn path_distances_add() {
        let s = path_abc();
        assert_eq!(s.d(0, 2), 3.0);
    }

    #[test]
    fn single_vertex() {
        let s = FiniteMetricSpace::from_weighted_graph(&["x".to_string()], &[], &[]).unwrap();
        assert_eq!(s.dist().as_slice(), &[0.0]);
    }

    #[test]
    fn neighborhood_and_breakpoints() {
        let s = path_abc();
        let a = s.set_of(&["a"]).unwrap();
        assert_eq!(s.neighborhood(&a, 1.5).unwrap(), s.set_of(&["a", "b"]).unwrap());
        assert_eq!(s.neighborhood(&a, 0.0).unwrap(), a);
        assert_eq!(s.neighborhood(&PointSet::empty(3), 5.0).unwrap(), PointSet::empty(3));
        assert!(s.neighborhood(&a, -1.0).is_err());
        assert_eq!(s.breakpoints(&a), vec![1.0, 3.0]);
        assert!(s.breakpoints(&PointSet::full(3)).is_empty());
    }

    #[test]
    fn inflation_steps() {
        let s = path_abc();
        let a = s.set_of(&["a"]).unwrap();
        let f = s.metric_inflation(&a);
        assert_eq!(f.at(0.0), &a);
        assert_eq!(f.at(1.0), &a);
        assert_eq!(f.at(1.0 + 1e-9), &s.set_of(&["a", "b"]).unwrap());
        assert_eq!(f.at(3.0), &s.set_of(&["a", "b"]).unwrap());
        assert_eq!(f.at(3.5), &PointSet::full(3));
    }

    #[test]
    fn disconnected_graph_names_components() {
        let v: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let e = vec![("a".into(), "b".into(), 1.0)];
        let err = FiniteMetricSpace::from_weighted_graph(&v, &e, &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("{a, b}") && msg.contains("{c}"), "{msg}");
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let v: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let e = vec![("a".into(), "b".into(), 0.0)];
        assert!(FiniteMetricSpace::from_weighted_graph(&v, &e, &[]).is_err());
    }

    #[test]
    fn pointset_ops() {
        let a = PointSet::from_indices(70, [1, 65]);
        let b = PointSet::from_indices(70, [65, 3]);
        assert_eq!(a.intersection(&b), PointSet::singleton(70, 65));
        assert_eq!(a.union(&b).count(), 3);
        assert_eq!(a.complement().count(), 68);
        assert_eq!(a.complement().complement(), a);
    }
}
