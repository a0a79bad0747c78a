use nalgebra::DMatrix;
use proptest::prelude::*;
use wavespec::align::hungarian;
use wavespec::bcinverse::{bump_centers, SpectralData};
use wavespec::checks::run_check;
use wavespec::finmetric::FiniteMetricSpace;
use wavespec::greensys::{build_model, ModelSpec};
use wavespec::hilbertlat::Subspace;
use wavespec::io::{read_spectral, write_spectral};
use wavespec::wavedyn::{snapshot_span, source_filters, Dictionary};
use wavespec::wavespectrum::{geometric_spectrum, reconstruct_from_spectral, PipelineOptions};

fn path(lengths: &[f64]) -> FiniteMetricSpace {
    let v: Vec<String> = (0..=lengths.len()).map(|i| format!("p{i}")).collect();
    let e: Vec<(String, String, f64)> = lengths.iter().enumerate().map(|(i, &l)| (v[i].clone(), v[i + 1].clone(), l)).collect();
    FiniteMetricSpace::from_weighted_graph(&v, &e, &[v[0].clone(), v[lengths.len()].clone()]).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simple_paths_recover_their_metric(lengths in prop::collection::vec(0.5f64..2.0, 2..7)) {
        let s = path(&lengths);
        let g = geometric_spectrum(&s, 64).unwrap();
        prop_assume!(g.blocks.iter().all(|b| b.count() == 1));
        let pts: Vec<usize> = g.blocks.iter().map(|b| b.iter().next().unwrap()).collect();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                prop_assert!((g.tau[(a, b)] - s.d(pts[a], pts[b])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hungarian_matches_brute_force(v in prop::collection::vec(0.0f64..10.0, 16)) {
        let c = DMatrix::from_row_slice(4, 4, &v);
        let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum::<f64>();
        let best = permutations(4).iter().map(|p| cost(p)).fold(f64::INFINITY, f64::min);
        prop_assert!((cost(&hungarian(&c)) - best).abs() < 1e-9);
    }

    #[test]
    fn snapshot_span_ignores_the_source_basis(theta in 0.0f64..6.2, t in 0.1f64..0.6) {
        let gs = build_model(&ModelSpec::IntervalSpectral { length: 1.0, modes: 24 }).unwrap();
        let a = Subspace::coordinate(24, [5, 17]);
        let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let b = Subspace::from_orthonormal(a.basis() * rot).unwrap();
        let f = source_filters(&gs.op, &Dictionary::standard(0.5 * gs.cell), t);
        let sa = snapshot_span(&gs.op, &a, &f, 1e-2).unwrap();
        let sb = snapshot_span(&gs.op, &b, &f, 1e-2).unwrap();
        prop_assert_eq!(sa.rank(), sb.rank());
        prop_assert!(sa.same_as(&sb, 1e-8));
    }
}

#[test]
fn bump_centers_fit_inside_the_interval() {
    let c = bump_centers(1.0, 0.05, 0.1);
    assert!(!c.is_empty());
    assert!(c.iter().all(|&x| x - 0.1 > 0.0 && x + 0.1 < 1.0));
}

#[test]
fn spectral_file_reconstructs_like_memory() {
    let gs = build_model(&ModelSpec::IntervalSpectral { length: 1.0, modes: 24 }).unwrap();
    let sigma = SpectralData::from_system(&gs, 24).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    write_spectral(&p, &sigma).unwrap();
    let back = read_spectral(&p).unwrap();
    let opts = PipelineOptions::for_cell(gs.cell, 0.5);
    let id = DMatrix::identity(2, 2);
    let a = reconstruct_from_spectral(&sigma, &id, &[], &opts).unwrap();
    let b = reconstruct_from_spectral(&back, &id, &[], &opts).unwrap();
    assert_eq!(a.spectrum.atoms.len(), b.spectrum.atoms.len());
    let same = a.spectrum.tau.iter().zip(b.spectrum.tau.iter()).all(|(x, y)| x == y || (x.is_infinite() && y.is_infinite()));
    assert!(same);
}

#[test]
fn unknown_check_is_an_error() {
    let e = run_check("no_such_check", 0).unwrap_err().to_string();
    assert!(e.contains("metric_lattice"));
}

#[test]
fn fast_checks_pass() {
    for name in ["metric_lattice", "delta_prime", "weyl_equivalence", "spectra_coincidence"] {
        let o = run_check(name, 3).unwrap();
        assert!(o.pass, "{}", o.summary());
    }
}
