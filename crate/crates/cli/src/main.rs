//! `wavespec`: forward simulation, inverse data, blind reconstruction and
//! acceptance checks. Exit codes: 0 pass, 1 check failure, 2 usage or config error.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use wavespec::align::align;
use wavespec::bcinverse::{bump_basis, bump_centers, probes_for, response_dt, response_operator, SpectralData};
use wavespec::checks::{run_check, CHECKS};
use wavespec::finmetric::FiniteMetricSpace;
use wavespec::greensys::{axioms_report, build_model, solve_dsbc, BoundarySource};
use wavespec::hilbertlat::write_matrix_csv;
use wavespec::io::{read_response, read_spectral, write_json, write_response, write_spectral};
use wavespec::template::Template;
use wavespec::wavespectrum::{geometric_spectrum, reconstruct_from_response, reconstruct_from_spectral, tau_from_rows};

use config::{load, resolve, ConfigError, ReconstructConfig, Reference, Route, ScenarioConfig, SpectrumConfig, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "wavespec", version, about = "Wave spectra and boundary-control reconstruction of metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the model, check its structural identities and simulate one boundary source.
    Simulate(Common),
    /// Write the inverse data of a scenario (response or spectral data) and a reconstruction config.
    Respond(Common),
    /// Reconstruct a wave spectrum from data files only.
    Reconstruct(Common),
    /// Geometric-mode wave spectrum of a weighted graph or model point set.
    Spectrum(Common),
    /// Run named acceptance checks.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checks to run (`verify`); all when omitted.
    #[arg(long = "check", num_args = 1..)]
    check: Vec<String>,
    /// Seed for randomized steps.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Config(String),
    Checks(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<wavespec::Error> for Failure {
    fn from(e: wavespec::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Respond(c) => respond(c),
        Command::Reconstruct(c) => reconstruct(c),
        Command::Spectrum(c) => spectrum(c),
        Command::Verify(c) => verify(c),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn config_path(c: &Common) -> Result<&Path, Failure> {
    c.config.as_deref().ok_or_else(|| Failure::Config("missing --config".into()))
}

fn out_dir(c: &Common) -> Result<&Path, Failure> {
    let dir = c.out.as_deref().ok_or_else(|| Failure::Config("missing --out".into()))?;
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

fn write_csv(path: &Path, m: &DMatrix<f64>) -> Outcome {
    write_matrix_csv(m, BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn finish(out: &Path, lines: &[String]) -> Outcome {
    let text = lines.join("\n") + "\n";
    print!("{text}");
    std::fs::write(out.join("summary.txt"), text)?;
    Ok(())
}

fn scenario(c: &Common) -> Result<ScenarioConfig, Failure> {
    let cfg: ScenarioConfig = load(config_path(c)?)?;
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(c: &Common) -> Outcome {
    let cfg = scenario(c)?;
    let out = out_dir(c)?;
    let gs = build_model(&cfg.model)?;
    let report = axioms_report(&gs, c.seed.or(cfg.seed).unwrap_or(0))?;
    write_json(&out.join("axioms.json"), &report)?;

    // Response to one bump on the first channel.
    let hw = cfg.basis.half_width.min(0.25 * cfg.horizon);
    let source = BoundarySource::channel(gs.boundary_dim(), 0, Template::bump(hw + 1e-3, hw));
    let dt = cfg.dt.unwrap_or_else(|| response_dt(&gs, cfg.horizon));
    let traj = solve_dsbc(&gs, &[source], dt, cfg.horizon)?;
    let mut rows = DMatrix::zeros(traj.response.ncols(), traj.response.nrows() + 1);
    for j in 0..traj.response.ncols() {
        rows[(j, 0)] = j as f64 * dt;
        for k in 0..traj.response.nrows() {
            rows[(j, k + 1)] = traj.response[(k, j)];
        }
    }
    write_csv(&out.join("response_sample.csv"), &rows)?;

    let mut lines = vec![format!(
        "model: {} points, {} boundary channels, cell {:.4}, T_* {:.4}",
        gs.dim(),
        gs.boundary_dim(),
        gs.cell,
        gs.t_star()
    )];
    for a in &report.checks {
        lines.push(format!("{} {}: residual {:.3e} (tolerance {:.1e})", if a.pass { "PASS" } else { "FAIL" }, a.name, a.residual, a.tolerance));
    }
    finish(out, &lines)?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Checks("structural identities of the model".into()))
    }
}

/// Reference for scoring: the geometric spectrum (classes of points that the
/// boundary cannot tell apart), or the full metric when patches separate them.
fn reference(space: &FiniteMetricSpace, cell: f64, full: bool) -> Result<Reference, Failure> {
    let n = space.len();
    if full {
        return Ok(Reference {
            cell,
            ids: space.ids().to_vec(),
            distance: (0..n).map(|i| (0..n).map(|j| space.d(i, j)).collect()).collect(),
            boundary: (0..n).map(|i| space.boundary().contains(i)).collect(),
        });
    }
    let g = geometric_spectrum(space, 64)?;
    let m = g.atoms.len();
    Ok(Reference {
        cell,
        ids: g.blocks.iter().map(|b| b.iter().map(|i| space.ids()[i].as_str()).collect::<Vec<_>>().join("+")).collect(),
        distance: (0..m).map(|i| (0..m).map(|j| g.tau[(i, j)]).collect()).collect(),
        boundary: g.boundary.clone(),
    })
}

fn respond(c: &Common) -> Outcome {
    let cfg = scenario(c)?;
    let out = out_dir(c)?;
    let gs = build_model(&cfg.model)?;
    let data = match cfg.route {
        Route::Ip1 => {
            let t = cfg.horizon;
            let hw = cfg.basis.half_width;
            let basis = bump_basis(gs.boundary_dim(), &bump_centers(t, cfg.basis.spacing, hw), hw, 1);
            if basis.is_empty() {
                return Err(Failure::Config("field `basis`: no bump fits inside (0, horizon)".into()));
            }
            let dt = cfg.dt.unwrap_or_else(|| response_dt(&gs, t));
            if ((t / dt).round() * dt - t).abs() > 1e-9 * t {
                return Err(Failure::Config(format!("field `dt`: {dt} does not divide the horizon {t}")));
            }
            let rd = response_operator(&gs, 2.0 * t, &probes_for(&basis, t)?, dt)?;
            write_response(out, "response", &rd, &basis)?;
            "response.json"
        }
        Route::Ip3 => {
            let n = cfg.modes.unwrap_or(gs.op.modes());
            write_spectral(&out.join("spectral.csv"), &SpectralData::from_system(&gs, n)?)?;
            "spectral.csv"
        }
        Route::Geometric => return Err(Failure::Config("field `route`: `respond` needs `ip1` or `ip3`".into())),
    };
    if cfg.patches.iter().flatten().any(|&ch| ch >= gs.boundary_dim()) {
        return Err(Failure::Config("field `patches`: refers to a missing boundary channel".into()));
    }
    write_json(&out.join("reference.json"), &reference(&gs.space, gs.cell, !cfg.patches.is_empty())?)?;
    let horizon = cfg.nest_horizon.unwrap_or(((2.0 * gs.t_star()) / gs.cell).round() * gs.cell);
    let rc = ReconstructConfig {
        schema_version: SCHEMA_VERSION,
        route: cfg.route,
        data: data.into(),
        reference: Some("reference.json".into()),
        cell: gs.cell,
        horizon,
        patches: cfg.patches.clone(),
        model: wavespec::bcinverse::ModelOptions { rank_cutoff: 1e-6, min_rank: 1 },
        pipeline: None,
        boundary: None,
        rmse_limit: 2.0,
    };
    write_json(&out.join("reconstruct.json"), &rc)?;
    finish(out, &[format!("wrote {data}, reference.json and reconstruct.json to {}", out.display())])
}

fn reconstruct(c: &Common) -> Outcome {
    let path = config_path(c)?;
    let cfg: ReconstructConfig = load(path)?;
    cfg.validate()?;
    let out = out_dir(c)?;
    let opts = cfg.pipeline();
    let data = resolve(path, &cfg.data);
    let r = match cfg.route {
        Route::Ip1 => {
            let (rd, basis) = read_response(&data)?;
            reconstruct_from_response(&rd, &basis, cfg.model, &cfg.patches, &opts)?
        }
        _ => {
            let sigma = read_spectral(&data)?;
            let nb = sigma.traces.ncols();
            let boundary = match &cfg.boundary {
                Some(cols) => {
                    if cols.is_empty() || cols.iter().any(|c| c.len() != nb) {
                        return Err(Failure::Config(format!("field `boundary`: columns must have {nb} entries")));
                    }
                    DMatrix::from_fn(nb, cols.len(), |i, j| cols[j][i])
                }
                None => DMatrix::identity(nb, nb),
            };
            reconstruct_from_spectral(&sigma, &boundary, &cfg.patches, &opts)?
        }
    };
    let sp = &r.spectrum;
    write_json(&out.join("spectrum.json"), &sp.to_result())?;
    write_csv(&out.join("tau.csv"), &sp.tau)?;
    let mut lines = vec![format!(
        "model rank {}, {} atoms, {} boundary atoms, {} ambiguous splits",
        r.rank,
        sp.atoms.len(),
        sp.boundary.iter().filter(|b| **b).count(),
        sp.ambiguous_splits
    )];
    let Some(rel) = &cfg.reference else {
        return finish(out, &lines);
    };
    let reference: Reference = wavespec::io::read_json(&resolve(path, rel))?;
    let d = tau_from_rows(&reference.distance.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect::<Vec<_>>());
    let rep = align(&sp.tau, &sp.boundary, &d, &reference.boundary, reference.cell);
    write_json(&out.join("isometry.json"), &rep)?;
    let pass = rep.rmse_cells <= cfg.rmse_limit && rep.boundary_ok;
    lines.push(format!(
        "{} isometry: rmse {:.3} cells (limit {}), max error {:.2} cells, {} infinite pairs, boundary {}",
        if pass { "PASS" } else { "FAIL" },
        rep.rmse_cells,
        cfg.rmse_limit,
        rep.max_error_cells,
        rep.infinite_pairs,
        if rep.boundary_ok { "matched" } else { "mismatched" }
    ));
    finish(out, &lines)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks(format!("isometry rmse {:.3} cells", rep.rmse_cells)))
    }
}

fn spectrum(c: &Common) -> Outcome {
    let cfg: SpectrumConfig = load(config_path(c)?)?;
    cfg.validate()?;
    let out = out_dir(c)?;
    let space = match (&cfg.graph, &cfg.model) {
        (Some(g), _) => FiniteMetricSpace::from_graph_input(g)?,
        (_, Some(m)) => build_model(m)?.space,
        _ => unreachable!("validated"),
    };
    let g = geometric_spectrum(&space, cfg.max_rounds)?;
    write_json(&out.join("spectrum.json"), &g.to_result(&space))?;
    write_csv(&out.join("tau.csv"), &g.tau)?;
    write_csv(&out.join("distance.csv"), space.dist())?;
    let simple = g.blocks.iter().all(|b| b.count() == 1);
    let mut lines = vec![format!(
        "{} points, {} atoms, {} boundary atoms, {}",
        space.len(),
        g.atoms.len(),
        g.boundary.iter().filter(|b| **b).count(),
        if simple { "simple" } else { "not simple" }
    )];
    if !simple {
        for b in g.blocks.iter().filter(|b| b.count() > 1) {
            lines.push(format!("class {{{}}}", b.iter().map(|i| space.ids()[i].as_str()).collect::<Vec<_>>().join(", ")));
        }
        return finish(out, &lines);
    }
    let pts: Vec<usize> = g.blocks.iter().map(|b| b.iter().next().expect("singleton")).collect();
    let mut gap: f64 = 0.0;
    for a in 0..pts.len() {
        for b in 0..pts.len() {
            gap = gap.max((g.tau[(a, b)] - space.d(pts[a], pts[b])).abs());
        }
    }
    let pass = gap <= 1e-12;
    lines.push(format!("{} tau versus distance: max deviation {gap:.3e}", if pass { "PASS" } else { "FAIL" }));
    finish(out, &lines)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks(format!("tau deviates from the distance by {gap:e}")))
    }
}

fn verify(c: &Common) -> Outcome {
    let names: Vec<String> = if c.check.is_empty() { CHECKS.iter().map(|c| c.0.to_string()).collect() } else { c.check.clone() };
    if let Some(bad) = names.iter().find(|n| !CHECKS.iter().any(|c| c.0 == n.as_str())) {
        let known: Vec<&str> = CHECKS.iter().map(|c| c.0).collect();
        return Err(Failure::Config(format!("unknown check {bad:?}; known checks: {}", known.join(", "))));
    }
    let seed = c.seed.unwrap_or(7);
    let mut outcomes = Vec::new();
    for n in &names {
        let o = run_check(n, seed)?;
        println!("{}", o.summary());
        for l in o.table.iter().chain(&o.notes) {
            println!("    {l}");
        }
        outcomes.push(o);
    }
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("verify.json"), &outcomes)?;
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed.join(", ")))
    }
}
