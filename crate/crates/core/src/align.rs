//! Blind alignment of a reconstructed interaction-time matrix with a
//! reference metric: boundary atoms are matched first, the rest by their
//! distance profiles to the boundary, then improved by pairwise swaps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Minimum-cost assignment of rows to distinct columns (`rows <= cols`),
/// by the Hungarian method with potentials.
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let (n, m) = (cost.nrows(), cost.ncols());
    assert!(n <= m, "more rows than columns");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Result of matching reconstructed atoms against reference points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsometryReport {
    pub atoms: usize,
    pub points: usize,
    /// `(atom, point)` pairs.
    pub assignment: Vec<(usize, usize)>,
    /// Root mean square of `tau - d` over matched pairs with finite `tau`, in grid cells.
    pub rmse_cells: f64,
    pub max_error_cells: f64,
    /// Matched pairs whose interaction time is infinite.
    pub infinite_pairs: usize,
    /// Boundary atoms land exactly on the reference boundary and cover it.
    pub boundary_ok: bool,
    pub cell: f64,
}

fn pair_cost(tau: &DMatrix<f64>, d: &DMatrix<f64>, assign: &[(usize, usize)], cap: f64) -> f64 {
    let mut s = 0.0;
    for &(a, x) in assign {
        for &(b, y) in assign {
            let t = if tau[(a, b)].is_finite() { tau[(a, b)] } else { cap };
            s += (t - d[(x, y)]).powi(2);
        }
    }
    s
}

/// Aligns atoms (with `tau` and boundary flags) to reference points (with
/// metric `d` and boundary flags) without using any shared labels.
pub fn align(
    tau: &DMatrix<f64>,
    atom_boundary: &[bool],
    d: &DMatrix<f64>,
    point_boundary: &[bool],
    cell: f64,
) -> IsometryReport {
    let (na, np) = (tau.nrows(), d.nrows());
    let ab: Vec<usize> = (0..na).filter(|&a| atom_boundary[a]).collect();
    let pb: Vec<usize> = (0..np).filter(|&x| point_boundary[x]).collect();
    let cap = d.max() * 2.0;
    let clip = |t: f64| if t.is_finite() { t } else { cap };

    // Boundary matching: exhaustive for small sets, otherwise by Hungarian
    // on sorted distance profiles.
    let boundary_map: Vec<(usize, usize)> = if !ab.is_empty() && ab.len() <= pb.len() && pb.len() <= 7 {
        best_injection(&ab, &pb, |assign| pair_cost(tau, d, assign, cap))
    } else if !ab.is_empty() && !pb.is_empty() {
        let profile = |row: Vec<f64>| {
            let mut r = row;
            r.sort_by(f64::total_cmp);
            r
        };
        let pa: Vec<Vec<f64>> = ab.iter().map(|&a| profile(ab.iter().map(|&b| clip(tau[(a, b)])).collect())).collect();
        let pp: Vec<Vec<f64>> = pb.iter().map(|&x| profile(pb.iter().map(|&y| d[(x, y)]).collect())).collect();
        let k = ab.len().min(pb.len());
        let cost = DMatrix::from_fn(ab.len(), pb.len(), |i, j| {
            (0..k).map(|q| (pa[i][q] - pp[j][q]).powi(2)).sum::<f64>()
        });
        if ab.len() <= pb.len() {
            hungarian(&cost).into_iter().enumerate().map(|(i, j)| (ab[i], pb[j])).collect()
        } else {
            let t = hungarian(&cost.transpose());
            t.into_iter().enumerate().map(|(j, i)| (ab[i], pb[j])).collect()
        }
    } else {
        Vec::new()
    };

    // Everything by profile to the matched boundary.
    let anchors = &boundary_map;
    let cost = DMatrix::from_fn(na, np, |a, x| {
        anchors.iter().map(|&(b, y)| (clip(tau[(a, b)]) - d[(x, y)]).powi(2)).sum::<f64>()
    });
    let mut assign: Vec<(usize, usize)> = if na <= np {
        hungarian(&cost).into_iter().enumerate().collect()
    } else {
        hungarian(&cost.transpose()).into_iter().enumerate().map(|(x, a)| (a, x)).collect()
    };
    for &(b, y) in anchors {
        if let Some(k) = assign.iter().position(|p| p.0 == b) {
            let other = assign.iter().position(|p| p.1 == y);
            let old = assign[k].1;
            assign[k].1 = y;
            if let Some(o) = other {
                if o != k {
                    assign[o].1 = old;
                }
            }
        }
    }

    // Pairwise swaps of points between non-boundary atoms.
    let fixed: Vec<usize> = anchors.iter().map(|p| p.0).collect();
    let mut best = pair_cost(tau, d, &assign, cap);
    for _ in 0..20 {
        let mut improved = false;
        for i in 0..assign.len() {
            for j in i + 1..assign.len() {
                if fixed.contains(&assign[i].0) || fixed.contains(&assign[j].0) {
                    continue;
                }
                let (xi, xj) = (assign[i].1, assign[j].1);
                assign[i].1 = xj;
                assign[j].1 = xi;
                let c = pair_cost(tau, d, &assign, cap);
                if c + 1e-12 < best {
                    best = c;
                    improved = true;
                } else {
                    assign[i].1 = xi;
                    assign[j].1 = xj;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut sq = 0.0;
    let mut cnt = 0usize;
    let mut max_err: f64 = 0.0;
    let mut inf_pairs = 0;
    for &(a, x) in &assign {
        for &(b, y) in &assign {
            if a == b {
                continue;
            }
            if tau[(a, b)].is_finite() {
                let e = (tau[(a, b)] - d[(x, y)]) / cell;
                sq += e * e;
                cnt += 1;
                max_err = max_err.max(e.abs());
            } else {
                inf_pairs += 1;
            }
        }
    }
    let mapped: Vec<usize> = assign.iter().filter(|p| atom_boundary[p.0]).map(|p| p.1).collect();
    let boundary_ok = assign.iter().all(|&(a, x)| atom_boundary[a] == point_boundary[x])
        && pb.iter().all(|x| mapped.contains(x));
    IsometryReport {
        atoms: na,
        points: np,
        assignment: assign,
        rmse_cells: if cnt > 0 { (sq / cnt as f64).sqrt() } else { 0.0 },
        max_error_cells: max_err,
        infinite_pairs: inf_pairs,
        boundary_ok,
        cell,
    }
}

fn best_injection(a: &[usize], p: &[usize], cost: impl Fn(&[(usize, usize)]) -> f64) -> Vec<(usize, usize)> {
    fn rec(
        i: usize,
        a: &[usize],
        p: &[usize],
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        best: &mut (f64, Vec<(usize, usize)>),
        cost: &dyn Fn(&[(usize, usize)]) -> f64,
    ) {
        if i == a.len() {
            let c = cost(cur);
            if c < best.0 {
                *best = (c, cur.clone());
            }
            return;
        }
        for j in 0..p.len() {
            if !used[j] {
                used[j] = true;
                cur.push((a[i], p[j]));
                rec(i + 1, a, p, used, cur, best, cost);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    rec(0, a, p, &mut vec![false; p.len()], &mut Vec::new(), &mut best, &cost);
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_small() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        assert_eq!(hungarian(&c), vec![1, 0, 2]);
    }

    #[test]
    fn permuted_metric_aligns_exactly() {
        let pts: [f64; 5] = [0.0, 1.0, 3.0, 6.0, 7.5];
        let d = DMatrix::from_fn(5, 5, |i, j| (pts[i] - pts[j]).abs());
        let perm = [3, 0, 4, 1, 2];
        let tau = DMatrix::from_fn(5, 5, |a, b| d[(perm[a], perm[b])]);
        let atom_b: Vec<bool> = perm.iter().map(|&x| x == 0 || x == 4).collect();
        let pt_b = [true, false, false, false, true];
        let r = align(&tau, &atom_b, &d, &pt_b, 0.5);
        assert!(r.rmse_cells < 1e-12);
        assert!(r.boundary_ok);
        for (a, x) in r.assignment {
            assert_eq!(perm[a], x);
        }
    }
}
