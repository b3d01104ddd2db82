//! The invariant suite behind `gapcert verify`: eight property checks over
//! randomized cells and the shipped configurations, each with a runtime budget.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{
    default_sweep_grid, HitOutcome, find_eps_for_gaps, limit_spectrum, sweep, weyl_compare, IntervalSet, TAU_MULT,
};
use crate::cell::{apply_metric, assemble, BoundaryCondition, CellEdge, CellGraph, MetricFamily, MetricMode, PortPairing};
use crate::config::{load_cell, load_group, CellConfig, GroupConfig, Source};
use crate::covers::{
    build_cover, cover_spectrum, pairing_gap, peter_weyl_check, quotient_embedding_check, tower_spectrum_union,
    PeterWeylOutcome,
};
use crate::error::Result;
use crate::floquet::{band_functions, default_grid, uniform_grid};
use crate::groups::{
    irreps, minimal_representatives, residual_injectivity_radius, word_metric_ball, FiniteQuotient, QuotientSpec,
};
use crate::linalg::EigenOptions;

/// Bracketing, Peter–Weyl and tower containment tolerance.
pub const TAU_CHECK: f64 = 1e-7;
/// Bloch samples against cover spectra.
pub const TAU_FLOQUET: f64 = 1e-8;
/// Required shrink factor of interval widths from the coarsest to the finest sweep ε.
pub const WIDTH_RATIO: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {}: {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub const TITLES: [&str; 8] = [
    "Dirichlet-Neumann bracketing",
    "Peter-Weyl decomposition",
    "gap emergence",
    "tower spectral inclusion",
    "interval hits",
    "Floquet consistency",
    "representatives and injectivity radius",
    "counting comparison",
];

const BUDGETS: [Option<u64>; 8] = [Some(60), Some(120), Some(120), Some(180), None, None, None, None];

/// Runs criterion `id` (1 to 8).
pub fn run(id: u8, seed: u64) -> Criterion {
    let start = Instant::now();
    let outcome = match id {
        1 => bracketing(seed),
        2 => peter_weyl(seed),
        3 => gap_emergence(seed),
        4 => tower_inclusion(seed),
        5 => interval_hits(seed),
        6 => floquet_consistency(seed),
        7 => representatives(seed),
        8 => counting(seed),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let budget = BUDGETS.get(id as usize - 1).copied().flatten().map(Duration::from_secs);
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail = format!("{detail}; over the {}s budget", b.as_secs());
        }
    }
    Criterion { id, title: TITLES.get(id as usize - 1).copied().unwrap_or("unknown"), passed, detail, elapsed, budget }
}

pub fn run_all(seed: u64) -> Vec<Criterion> {
    (1..=8).map(|id| run(id, seed)).collect()
}

fn opts(seed: u64) -> EigenOptions {
    EigenOptions { seed, ..EigenOptions::default() }
}

fn builtin_cell(name: &str) -> Result<CellConfig> {
    load_cell(&Source::Builtin(name.into()))
}

fn builtin_group(name: &str) -> Result<GroupConfig> {
    load_group(&Source::Builtin(name.into()))
}

/// Connected random cell: a weighted spine plus extra edges, and one or two
/// port pairs per generator on distinct vertices, leaving at least two free.
pub fn random_cell(rng: &mut ChaCha8Rng, vertices: usize, generators: usize) -> Result<CellGraph> {
    let measures: Vec<f64> = (0..vertices).map(|_| rng.random_range(0.2..3.0)).collect();
    let mut edges: Vec<CellEdge> = (1..vertices)
        .map(|i| CellEdge { a: rng.random_range(0..i), b: i, conductance: rng.random_range(0.1..2.0), junction: false })
        .collect();
    for _ in 0..rng.random_range(0..=vertices) {
        let (a, b) = (rng.random_range(0..vertices), rng.random_range(0..vertices));
        if a != b {
            edges.push(CellEdge { a, b, conductance: rng.random_range(0.1..2.0), junction: false });
        }
    }
    let mut order: Vec<usize> = (0..vertices).collect();
    order.shuffle(rng);
    let max_pairs = ((vertices - 2) / (2 * generators)).clamp(1, 2);
    let mut ports = Vec::with_capacity(generators);
    let mut cursor = 0;
    for _ in 0..generators {
        let pairs = rng.random_range(1..=max_pairs);
        let take = |c: &mut usize| {
            let v = order[*c % (vertices - 2)];
            *c += 1;
            v
        };
        let minus: Vec<usize> = (0..pairs).map(|_| take(&mut cursor)).collect();
        let plus: Vec<usize> = (0..pairs).map(|_| take(&mut cursor)).collect();
        let conductance = (0..pairs).map(|_| rng.random_range(0.1..2.0)).collect();
        ports.push(PortPairing { minus, plus, conductance });
    }
    CellGraph::new(measures, edges, ports, vec![false; vertices])
}

/// Catalogued quotients of order at most `max_order` with `generators` generators.
fn catalogue(generators: usize, max_order: usize) -> Result<Vec<(String, QuotientSpec)>> {
    let mut out = Vec::new();
    for m in 1u32.. {
        let order = (m as usize).pow(generators as u32);
        if order > max_order {
            break;
        }
        out.push((format!("(Z/{m})^{generators}"), QuotientSpec::cyclic_power(generators, m)?));
    }
    if generators == 2 {
        for n in 3..=4 {
            out.push((format!("S{n}"), QuotientSpec::symmetric(n)?));
        }
        for n in 3..=max_order / 2 {
            out.push((format!("D{n}"), QuotientSpec::dihedral(n)?));
        }
        out.push(("H3(Z/2)".into(), QuotientSpec::heisenberg(2)?));
    }
    out.retain(|(_, s)| FiniteQuotient::new(s.clone()).is_ok_and(|q| q.order() <= max_order));
    Ok(out)
}

fn bracketing(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(CellGraph, usize)> = (0..120)
        .map(|i| {
            let r = 1 + i % 3;
            let n = rng.random_range((4 * r + 2).max(4)..=20);
            random_cell(&mut rng, n, r).map(|c| (c, r))
        })
        .collect::<Result<_>>()?;
    let groups: Vec<Vec<(FiniteQuotient, Vec<_>)>> = (1..=3)
        .map(|r| {
            catalogue(r, 24)?
                .into_iter()
                .map(|(_, s)| {
                    let q = FiniteQuotient::new(s)?;
                    let reps = irreps(&q)?;
                    Ok((q, reps))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let o = opts(seed);
    let results: Vec<(usize, f64)> = cases
        .par_iter()
        .map(|(cell, r)| {
            let n = cell.vertex_count();
            let neu = assemble(cell, &BoundaryCondition::Neumann)?.full_spectrum(&o)?;
            let dir = assemble(cell, &BoundaryCondition::Dirichlet)?.full_spectrum(&o)?;
            let env = IntervalSet::from_spectra(&neu, &dir)?;
            let mut checks = 0;
            let mut worst: f64 = 0.0;
            for k in 0..dir.len() {
                worst = worst.max(neu.values[k] - dir.values[k]);
            }
            for (_, reps) in &groups[r - 1] {
                for rep in reps {
                    let s = assemble(cell, &BoundaryCondition::Equivariant(rep.clone()))?.full_spectrum(&o)?;
                    for (m, v) in s.values.iter().enumerate() {
                        let (lo, hi) = env.envelope_for(m, rep.dim()).expect("n copies of n values");
                        worst = worst.max(lo - v).max(v - hi);
                        checks += 1;
                    }
                }
            }
            debug_assert_eq!(neu.len(), n);
            Ok((checks, worst))
        })
        .collect::<Result<_>>()?;
    let checks: usize = results.iter().map(|r| r.0).sum();
    let worst = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let reps: usize = groups.iter().flatten().map(|g| g.1.len()).sum();
    Ok((
        worst <= TAU_CHECK,
        format!("{} cells, {reps} irreps, {checks} eigenvalue checks, worst violation {worst:.2e}", cases.len()),
    ))
}

fn peter_weyl(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2);
    let mut jobs: Vec<(CellGraph, QuotientSpec)> = Vec::new();
    for _ in 0..20 {
        let n = rng.random_range(4..=12);
        let cell = random_cell(&mut rng, n, 1)?;
        for m in 1..=16 {
            jobs.push((cell.clone(), QuotientSpec::cyclic_power(1, m)?));
        }
    }
    for _ in 0..20 {
        let n = rng.random_range(6..=12);
        let cell = random_cell(&mut rng, n, 2)?;
        jobs.push((cell.clone(), QuotientSpec::cyclic_power(2, 2)?));
        jobs.push((cell.clone(), QuotientSpec::symmetric(3)?));
        jobs.push((cell, QuotientSpec::dihedral(4)?));
    }
    let o = opts(seed);
    let gaps: Vec<f64> = jobs
        .par_iter()
        .map(|(cell, spec)| {
            let q = FiniteQuotient::new(spec.clone())?;
            Ok(match peter_weyl_check(cell, &q, cell.vertex_count() * q.order(), &o)? {
                PeterWeylOutcome::Checked(r) if r.cover.len() == r.merged.len() => r.max_gap,
                _ => f64::INFINITY,
            })
        })
        .collect::<Result<_>>()?;
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok((worst <= TAU_CHECK, format!("40 cells, {} cover/irrep comparisons, max pairing gap {worst:.2e}", jobs.len())))
}

fn gap_emergence(seed: u64) -> Result<(bool, String)> {
    let o = opts(seed);
    let grid = default_sweep_grid();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["z_path8.toml", "heisenberg_cell.toml"] {
        let c = builtin_cell(name)?;
        let mut found = Vec::new();
        for n in 1..=3 {
            let s = find_eps_for_gaps(&c.cell, &c.family, n, 8, &grid, &o)?;
            ok &= s.eps.is_some();
            found.push(s.eps.map_or("none".to_string(), |e| format!("{e}")));
        }
        let ends = sweep(&c.cell, &c.family, 8, &[grid[0], grid[grid.len() - 1]], &o)?;
        let ratio = ends[0]
            .intervals
            .widths()
            .iter()
            .zip(ends[1].intervals.widths())
            .map(|(a, b)| if *a > 0.0 { b / a } else if b > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(0.0, f64::max);
        ok &= ratio <= WIDTH_RATIO;
        parts.push(format!("{}: eps_n = [{}], width ratio {ratio:.2e}", c.name, found.join(", ")));
    }
    Ok((ok, parts.join("; ")))
}

/// Shipped (cell, tower) pairs.
fn shipped_towers() -> Result<Vec<(CellConfig, GroupConfig)>> {
    Ok(vec![
        (builtin_cell("z_path3.toml")?, builtin_group("z_tower.toml")?),
        (builtin_cell("z_path8.toml")?, builtin_group("z_tower.toml")?),
        (builtin_cell("heisenberg_cell.toml")?, builtin_group("heisenberg_tower.toml")?),
        (builtin_cell("free2_cell.toml")?, builtin_group("free2_tower.toml")?),
    ])
}

fn tower_inclusion(seed: u64) -> Result<(bool, String)> {
    let o = opts(seed);
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, g) in shipped_towers()? {
        let mut outside = 0;
        let mut count = 0;
        for eps in [0.125, 0.015625] {
            let report = tower_spectrum_union(&c.cell, &c.family, &g.tower, 30, eps, 5, &o)?;
            for level in &report.levels {
                count += level.values.len();
                outside += level.values.iter().filter(|v| report.components.locate(**v, TAU_CHECK).is_none()).count();
            }
            let scaled = apply_metric(&c.cell, &c.family, eps)?;
            for i in 0..g.tower.depth() {
                ok &= quotient_embedding_check(&scaled, g.tower.level(i)?, 5, &o)?;
            }
        }
        ok &= outside == 0;
        parts.push(format!("{}/{}: {count} values, {outside} outside", c.name, g.name));
    }
    Ok((ok, parts.join("; ")))
}

fn interval_hits(seed: u64) -> Result<(bool, String)> {
    let o = opts(seed);
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, g) in shipped_towers()? {
        let report = tower_spectrum_union(&c.cell, &c.family, &g.tower, 30, 0.015625, 5, &o)?;
        let direct = report.hits.iter().filter(|h| matches!(h, HitOutcome::Hit { .. })).count();
        let certified = report.hits.iter().filter(|h| matches!(h, HitOutcome::Certified { .. })).count();
        let unconfirmed = report.hits.len() - direct - certified;
        ok &= unconfirmed == 0 && report.hits.len() == 5;
        parts.push(format!("{}/{}: {direct} direct, {certified} certified, {unconfirmed} unconfirmed", c.name, g.name));
    }
    Ok((ok, parts.join("; ")))
}

fn floquet_consistency(seed: u64) -> Result<(bool, String)> {
    let o = opts(seed);
    let c = builtin_cell("z_path8.toml")?;
    let z = builtin_group("z_tower.toml")?;
    let group = z.tower.presentation();
    let mut worst: f64 = 0.0;
    let mut contained = true;
    for eps in [0.125, 0.015625] {
        let scaled = apply_metric(&c.cell, &c.family, eps)?;
        let n = scaled.vertex_count();
        for m in [4usize, 8, 32] {
            let bands = band_functions(&scaled, group, &uniform_grid(1, m)?, n, &o)?;
            let mut sampled: Vec<f64> = bands.values.iter().flatten().copied().collect();
            sampled.sort_by(f64::total_cmp);
            let q = FiniteQuotient::new(QuotientSpec::cyclic_power(1, m as u32)?)?;
            let cover = cover_spectrum(&build_cover(&scaled, &q)?, n * m, &o)?;
            worst = worst.max(pairing_gap(&sampled, &cover.values).unwrap_or(f64::INFINITY));
        }
        let bands = band_functions(&scaled, group, &default_grid(1)?, 8, &o)?;
        let intervals = crate::analysis::dn_intervals_with(&c.cell, &c.family, eps, 8, &o)?;
        contained &= bands.within(&intervals).iter().all(|x| *x);
    }
    Ok((
        worst <= TAU_FLOQUET && contained,
        format!("max Bloch/cover gap {worst:.2e} for m in {{4, 8, 32}}; B_k inside I_k for k <= 8: {contained}"),
    ))
}

fn representatives(_seed: u64) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["z_tower.toml", "heisenberg_tower.toml", "free2_tower.toml", "trivial_tower.toml"] {
        let g = builtin_group(name)?;
        let t = &g.tower;
        let mut previous: Vec<crate::groups::Word> = Vec::new();
        let mut radii = Vec::new();
        for i in 0..t.depth() {
            let q = t.level(i)?;
            if q.order() > 256 {
                continue;
            }
            let reps = minimal_representatives(t, i)?;
            ok &= reps.len() == q.order();
            ok &= reps.starts_with(&previous);
            let dist = word_metric_ball(q, q.order());
            let mut seen = vec![false; q.order()];
            for w in &reps {
                let e = q.eval(w)?;
                ok &= !std::mem::replace(&mut seen[e], true);
                ok &= dist[e] == Some(w.len());
            }
            previous = reps;
            radii.push(residual_injectivity_radius(t, i, 8)?.radius);
        }
        ok &= radii.windows(2).all(|w| w[0] <= w[1]);
        if name == "z_tower.toml" {
            for (i, r) in radii.iter().enumerate() {
                let m = t.level(i)?.order();
                ok &= *r == (m - 1) / 2;
            }
        }
        parts.push(format!("{}: radii {radii:?}", g.name));
    }
    Ok((ok, parts.join("; ")))
}

/// Cycle of four with two handle vertices: its limit spectrum `{0, 2, 2, 4}` has a double value.
pub fn c4_cell() -> Result<CellGraph> {
    CellGraph::with_bridges(
        vec![1.0; 4],
        vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
        &[(0, 2)],
        1,
        1.0,
        1.0,
        1.0,
    )
}

fn counting(seed: u64) -> Result<(bool, String)> {
    let o = opts(seed);
    let grid = default_sweep_grid();
    let c = builtin_cell("z_path8.toml")?;
    let limit = limit_spectrum(&c.cell, &c.family, 8, &o)?;
    let distinct = limit.distinct(TAU_MULT);
    let simple = distinct.len() == limit.len();
    let points = sweep(&c.cell, &c.family, 8, &grid, &o)?;
    let lambdas: Vec<f64> = (1..=5).map(|j| 0.5 * (distinct[j - 1] + distinct[j])).collect();
    let rows = weyl_compare(&limit, &points, &lambdas);
    let mut ok = simple;
    for (j, row) in rows.iter().enumerate() {
        ok &= row.limit_count == j + 1 && row.holds && row.achieved >= j + 1;
    }
    let fam = MetricFamily::new(MetricMode::Handle, 3)?;
    let c4 = c4_cell()?;
    let c4_limit = limit_spectrum(&c4, &fam, 4, &o)?;
    let c4_points = sweep(&c4, &fam, 4, &grid, &o)?;
    let c4_rows = weyl_compare(&c4_limit, &c4_points, &[3.0, 5.0]);
    let finest = &c4_points[c4_points.len() - 1];
    ok &= c4_rows[0].limit_count == 2 && c4_rows[1].limit_count == 3 && c4_rows.iter().all(|r| r.holds);
    let low = finest.components.components.iter().filter(|c| c.0 <= 5.0).count();
    ok &= low == 3;
    Ok((
        ok,
        format!(
            "z_path8 counts {:?} against limits 1..5; C4 limit {{0,2,2,4}} counted as {} components below 5",
            rows.iter().map(|r| r.achieved).collect::<Vec<_>>(),
            low
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_cells_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let r = 1 + i % 3;
            let n = rng.random_range(4 * r + 2..=20);
            let c = random_cell(&mut rng, n, r).unwrap();
            assert_eq!(c.generator_count(), r);
            assert!(c.dirichlet_dim() >= 2);
        }
    }

    #[test]
    fn catalogue_sizes() {
        let names: Vec<String> = catalogue(2, 24).unwrap().into_iter().map(|c| c.0).collect();
        for want in ["S3", "S4", "D4", "D12", "H3(Z/2)", "(Z/4)^2"] {
            assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
        }
        assert!(!names.iter().any(|n| n == "(Z/5)^2"));
        assert_eq!(catalogue(1, 24).unwrap().len(), 24);
        assert_eq!(catalogue(3, 24).unwrap().len(), 2);
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [3, 6, 7, 8] {
            let c = run(id, 0);
            assert!(c.passed, "{}", c.line());
        }
    }
}
