//! `gapcert` command-line front-end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gapcert::analysis::{
    count_components, first_with_gaps, limit_spectrum, merge_components, sweep, HitOutcome, IntervalSet, TAU_MULT,
    TAU_PW,
};
use gapcert::cell::{apply_metric, assemble, BoundaryCondition};
use gapcert::config::{load_run, RunConfig, Source, SCHEMA_VERSION};
use gapcert::covers::{peter_weyl_check, tower_spectrum_union, PeterWeylOutcome};
use gapcert::floquet::{band_functions, band_gap_report, uniform_grid};
use gapcert::linalg::Spectrum;
use gapcert::verify::{self, TAU_CHECK};
use gapcert::Error;

#[derive(Parser)]
#[command(name = "gapcert", version, about = "Spectral gaps of periodic graph Laplacians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run file: a path, or `builtin:NAME` for a shipped configuration.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed of the run file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Neumann and Dirichlet spectra and the intervals at one ε.
    Spectrum,
    /// Intervals and gaps over the ε-grid.
    Sweep,
    /// Floquet bands over the character torus (free abelian groups only).
    Bands,
    /// Cover spectra along the tower, inclusion and hit flags.
    Tower,
    /// Runs the invariant suite.
    Verify,
}

enum Failure {
    Usage(String),
    Verification(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.command == Command::Verify {
        return cmd_verify(cli);
    }
    let Some(spec) = &cli.config else {
        return Err(Failure::Usage("--config is required for this command".into()));
    };
    let mut cfg = load_run(&Source::parse(spec))?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", cli.out.display())))?;
    match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg, &cli.out),
        Command::Sweep => cmd_sweep(&cfg, &cli.out),
        Command::Bands => cmd_bands(&cfg, &cli.out),
        Command::Tower => cmd_tower(&cfg, &cli.out),
        Command::Verify => unreachable!(),
    }
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.15e}")
    }
}

fn header(cfg: Option<&RunConfig>, seed: u64) -> String {
    let mut h = format!("# gapcert schema_version={SCHEMA_VERSION} tau_pw={TAU_PW:e} tau_mult={TAU_MULT:e}");
    if let Some(c) = cfg {
        let _ = write!(
            h,
            " solver_tolerance={:e} dense_threshold={} max_iterations={} config={}",
            c.solver.tolerance,
            c.solver.dense_threshold,
            c.solver.max_iterations,
            c.source.display()
        );
    } else {
        let _ = write!(h, " tau_check={TAU_CHECK:e}");
    }
    let _ = writeln!(h, " seed={seed}");
    h
}

fn write_csv(out: &Path, name: &str, head: &str, columns: &str, rows: &[String]) -> Result<(), Failure> {
    let mut text = String::with_capacity(head.len() + 64 * rows.len());
    text.push_str(head);
    text.push_str(columns);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    let path = out.join(name);
    fs::write(&path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let scaled = apply_metric(&cfg.cell.cell, &cfg.cell.family, cfg.eps)?;
    let k = cfg.intervals;
    let neumann = assemble(&scaled, &BoundaryCondition::Neumann)?.lowest(k, &cfg.solver)?;
    if neumann.len() < k {
        return Err(Error::TooManyEigenvalues { requested: k, available: neumann.len() }.into());
    }
    let dirichlet = match scaled.dirichlet_dim() {
        0 => Spectrum::new(Vec::new(), k),
        _ => assemble(&scaled, &BoundaryCondition::Dirichlet)?.lowest(k, &cfg.solver)?,
    };
    let intervals = IntervalSet::from_spectra(&neumann, &dirichlet)?;
    let comps = merge_components(&intervals);
    let rows: Vec<String> = intervals
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| {
            let c = comps.locate(lo, 0.0).map_or("NONE".into(), |c| (c + 1).to_string());
            format!("{},{},{},{},{}", i + 1, num(lo), num(hi), num(hi - lo), c)
        })
        .collect();
    let head = header(Some(cfg), cfg.seed);
    write_csv(out, "spectrum.csv", &head, "k,neumann,dirichlet,width,component", &rows)?;
    let comp_rows: Vec<String> =
        comps.components.iter().enumerate().map(|(i, (a, b))| format!("{},{},{}", i + 1, num(*a), num(*b))).collect();
    write_csv(out, "components.csv", &head, "component,lower,upper", &comp_rows)?;
    println!(
        "{} at eps = {}: {} intervals, {} components, {} gaps",
        cfg.cell.name,
        cfg.eps,
        intervals.len(),
        comps.count(),
        comps.gaps.len()
    );
    for (a, b) in &comps.gaps {
        println!("  gap ({}, {})", num(*a), num(*b));
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let (cell, fam) = (&cfg.cell.cell, &cfg.cell.family);
    let points = sweep(cell, fam, cfg.intervals, &cfg.sweep, &cfg.solver)?;
    let limit = limit_spectrum(cell, fam, cfg.intervals, &cfg.solver)?;
    let distinct = limit.distinct(TAU_MULT).len();
    let head = header(Some(cfg), cfg.seed);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for p in &points {
        for (i, (lo, hi)) in p.intervals.iter().enumerate() {
            let c = p.components.locate(lo, 0.0).map_or("NONE".into(), |c| (c + 1).to_string());
            rows.push(format!("{},{},{},{},{}", num(p.eps), i + 1, num(lo), num(hi), c));
        }
        let top = p.intervals.iter().map(|i| i.0).fold(0.0, f64::max);
        summary.push(format!(
            "{},{},{},{},{}",
            num(p.eps),
            p.components.count(),
            p.components.gaps.len(),
            count_components(&p.intervals, top),
            num(p.intervals.max_width())
        ));
    }
    write_csv(out, "sweep.csv", &head, "eps,k,lower,upper,component", &rows)?;
    write_csv(out, "sweep_summary.csv", &head, "eps,components,gaps,count_to_top,max_width", &summary)?;
    let limit_rows: Vec<String> = limit.values.iter().enumerate().map(|(i, v)| format!("{},{}", i + 1, num(*v))).collect();
    write_csv(out, "limit.csv", &head, "k,value", &limit_rows)?;
    let mut found = Vec::new();
    println!("{}: {} grid points, {} distinct limit values", cfg.cell.name, points.len(), distinct);
    for n in 1..=cfg.gaps {
        let eps = if distinct < n + 1 { None } else { first_with_gaps(&points, n, distinct).eps };
        let shown = eps.map_or("NONE".to_string(), num);
        println!("  eps_{n} = {shown}");
        found.push(format!("{n},{shown}"));
    }
    write_csv(out, "gap_search.csv", &head, "gaps,eps", &found)
}

fn cmd_bands(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let group = cfg.group.tower.presentation();
    if !group.is_free_abelian() {
        return Err(Failure::Usage(format!(
            "bands needs a free abelian group; {} is not (use `tower` instead)",
            cfg.group.name
        )));
    }
    if cfg.theta_points == 1 {
        eprintln!("warning: a one-point θ-grid samples only θ = 0; every band degenerates to a point");
    }
    let scaled = apply_metric(&cfg.cell.cell, &cfg.cell.family, cfg.eps)?;
    let grid = uniform_grid(group.generator_count(), cfg.theta_points)?;
    let k = cfg.intervals.min(scaled.vertex_count());
    let bands = band_functions(&scaled, group, &grid, k, &cfg.solver)?;
    let intervals = gapcert::analysis::dn_intervals_with(&cfg.cell.cell, &cfg.cell.family, cfg.eps, k, &cfg.solver)?;
    let within = bands.within(&intervals);
    let head = header(Some(cfg), cfg.seed);
    let mut rows = Vec::new();
    for (i, (theta, values)) in bands.grid.iter().zip(&bands.values).enumerate() {
        let t: Vec<String> = theta.iter().map(|x| num(*x)).collect();
        for (j, v) in values.iter().enumerate() {
            rows.push(format!("{},{},{},{}", i, t.join(" "), j + 1, num(*v)));
        }
    }
    write_csv(out, "bands.csv", &head, "point,theta,k,value", &rows)?;
    let summary: Vec<String> = bands
        .bands
        .iter()
        .zip(&within)
        .enumerate()
        .map(|(j, ((lo, hi), w))| format!("{},{},{},{}", j + 1, num(*lo), num(*hi), if *w { "INSIDE" } else { "OUTSIDE" }))
        .collect();
    write_csv(out, "band_summary.csv", &head, "k,min,max,interval", &summary)?;
    let gaps = band_gap_report(&bands)?;
    let gap_rows: Vec<String> = gaps.iter().map(|(a, b)| format!("{},{}", num(*a), num(*b))).collect();
    write_csv(out, "band_gaps.csv", &head, "lower,upper", &gap_rows)?;
    println!(
        "{} at eps = {}: {} bands on {} θ-points, {} sampled gaps, {}/{} bands inside their interval",
        cfg.cell.name,
        cfg.eps,
        bands.bands.len(),
        grid.len(),
        gaps.len(),
        within.iter().filter(|w| **w).count(),
        within.len()
    );
    Ok(())
}

fn cmd_tower(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let tower = &cfg.group.tower;
    let head = header(Some(cfg), cfg.seed);
    let mut rows = Vec::new();
    let mut hit_rows = Vec::new();
    let mut pw_rows = Vec::new();
    let mut failures = Vec::new();
    for &eps in &cfg.tower_eps {
        let report = tower_spectrum_union(
            &cfg.cell.cell,
            &cfg.cell.family,
            tower,
            cfg.eigenvalues,
            eps,
            cfg.hit_count,
            &cfg.solver,
        )?;
        for level in &report.levels {
            for (i, (v, k)) in level.values.iter().zip(&level.interval).enumerate() {
                let k = k.map_or("NONE".into(), |k| (k + 1).to_string());
                rows.push(format!("{},{},{},{},{},{}", num(eps), level.level, level.order, i + 1, num(*v), k));
            }
        }
        let inside = report.all_inside();
        for (k, h) in report.hits.iter().enumerate() {
            let row = match h {
                HitOutcome::Hit { level, value } => format!("HIT,{level},{},", num(*value)),
                HitOutcome::Certified { center, radius } => format!("CERTIFIED,,{},{}", num(*center), num(*radius)),
                HitOutcome::Unconfirmed => "UNCONFIRMED,,,".into(),
            };
            hit_rows.push(format!("{},{},{}", num(eps), k + 1, row));
        }
        let unconfirmed = report.hits.iter().filter(|h| !h.is_confirmed()).count();
        println!(
            "{} on {} at eps = {}: inclusion {}, {} of {} hits confirmed",
            cfg.cell.name,
            cfg.group.name,
            eps,
            if inside { "PASS" } else { "FAIL" },
            report.hits.len() - unconfirmed,
            report.hits.len()
        );
        if !inside {
            failures.push(format!("eigenvalues outside the intervals at eps = {eps}"));
        }
        let scaled = apply_metric(&cfg.cell.cell, &cfg.cell.family, eps)?;
        for i in 0..tower.depth() {
            let q = tower.level(i)?;
            let k = cfg.eigenvalues.min(scaled.vertex_count() * q.order());
            match peter_weyl_check(&scaled, q, k, &cfg.solver)? {
                PeterWeylOutcome::Checked(r) => {
                    let pass = r.passes(TAU_CHECK);
                    pw_rows.push(format!("{},{},{},{},{}", num(eps), i, q.order(), if pass { "PASS" } else { "FAIL" }, num(r.max_gap)));
                    if !pass {
                        failures.push(format!("Peter-Weyl mismatch at level {i}, eps = {eps}"));
                    }
                }
                PeterWeylOutcome::Skipped(why) => {
                    println!("  Peter-Weyl SKIPPED at level {i}: {why}");
                    pw_rows.push(format!("{},{},{},SKIPPED,", num(eps), i, q.order()));
                }
            }
        }
    }
    write_csv(out, "tower.csv", &head, "eps,level,order,index,value,interval", &rows)?;
    write_csv(out, "hits.csv", &head, "eps,k,outcome,level,value,radius", &hit_rows)?;
    write_csv(out, "peter_weyl.csv", &head, "eps,level,order,status,max_gap", &pw_rows)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failures.join("; ")))
    }
}

fn cmd_verify(cli: &Cli) -> Result<(), Failure> {
    let seed = match (&cli.config, cli.seed) {
        (_, Some(s)) => s,
        (Some(spec), None) => load_run(&Source::parse(spec))?.seed,
        (None, None) => 0,
    };
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for c in verify::run_all(seed) {
        println!("{}", c.line());
        rows.push(format!("{},{},{},\"{}\"", c.id, if c.passed { "PASS" } else { "FAIL" }, c.title, c.detail.replace('"', "'")));
        if !c.passed {
            failed.push(c.id.to_string());
        }
    }
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", cli.out.display())))?;
    write_csv(&cli.out, "verify.csv", &header(None, seed), "criterion,status,title,detail", &rows)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("criteria {} failed", failed.join(", "))))
    }
}
