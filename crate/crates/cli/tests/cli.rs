use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::{DMatrix, SymmetricEigen};

fn gapcert(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapcert")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV written by the binary, split on commas.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# gapcert schema_version=1 tau_pw=1e-7 tau_mult=1e-7"), "{head}");
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn write_run(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), format!("version = 1\n{body}")).unwrap();
    name.to_string()
}

/// Lowest `k` eigenvalues of `K u = λ M u` with diagonal `M`.
fn dense_lowest(k: &DMatrix<f64>, mass: &[f64], count: usize) -> Vec<f64> {
    let n = mass.len();
    let a = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (mass[i] * mass[j]).sqrt());
    let mut v: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

#[test]
fn z_path3_spectrum_matches_dense_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapcert(&["spectrum", "--config", "builtin:z_path3_run.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));

    // path 3 - 0 - 1 - 2 - 4 with handle vertices 3 and 4 at eps = 0.01, d = 3
    let e: f64 = 0.01;
    let w = [(3, 0, e), (0, 1, 1.0), (1, 2, 1.0), (2, 4, e)];
    let mut k = DMatrix::zeros(5, 5);
    for (a, b, c) in w {
        k[(a, a)] += c;
        k[(b, b)] += c;
        k[(a, b)] -= c;
        k[(b, a)] -= c;
    }
    let neumann = dense_lowest(&k, &[1.0, 1.0, 1.0, e.powi(3), e.powi(3)], 3);
    let dirichlet = dense_lowest(&k.view((0, 0), (3, 3)).into_owned(), &[1.0; 3], 3);

    let table = rows(&dir.path().join("o/spectrum.csv"));
    assert_eq!(table.len(), 3);
    for (i, r) in table.iter().enumerate() {
        assert_eq!(r[0], (i + 1).to_string());
        let (lo, hi): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((lo - neumann[i]).abs() < 1e-9, "{lo} vs {}", neumann[i]);
        assert!((hi - dirichlet[i]).abs() < 1e-9, "{hi} vs {}", dirichlet[i]);
    }
    assert!(stdout(&out).contains("3 components, 2 gaps"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapcert(&["spectrum", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.toml"));
    let out = gapcert(&["spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_carry_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(dir.path(), "bad.toml", "cell = \"builtin:z_path3.toml\"\ngroup = \"builtin:z_tower.toml\"\neps = 2.0\n");
    let out = gapcert(&["spectrum", "--config", &run], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.toml:4"), "{}", stderr(&out));
    fs::write(dir.path().join("old.toml"), "version = 7\n").unwrap();
    let out = gapcert(&["spectrum", "--config", "old.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("old.toml:1"), "{}", stderr(&out));
}

#[test]
fn unit_eps_is_one_component() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(
        dir.path(),
        "r.toml",
        "cell = \"builtin:z_path3.toml\"\ngroup = \"builtin:z_tower.toml\"\neps = 1.0\nintervals = 3\n",
    );
    let out = gapcert(&["spectrum", "--config", &run, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(rows(&dir.path().join("o/components.csv")).len(), 1);
}

#[test]
fn sweep_reports_gap_search() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapcert(&["sweep", "--config", "builtin:z_path3_run.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let found = rows(&dir.path().join("o/gap_search.csv"));
    assert_eq!(found.len(), 3);
    assert_ne!(found[1][1], "NONE");
    assert_eq!(found[2][1], "NONE");
    assert!(stdout(&out).contains("eps_3 = NONE"));
    assert_eq!(rows(&dir.path().join("o/sweep.csv")).len(), 12 * 3);
}

#[test]
fn empty_sweep_grid_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let run =
        write_run(dir.path(), "r.toml", "cell = \"builtin:z_path3.toml\"\ngroup = \"builtin:z_tower.toml\"\nsweep = []\n");
    let out = gapcert(&["sweep", "--config", &run], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty"));
}

#[test]
fn single_vertex_band_spans_zero_to_four_w() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapcert(&["bands", "--config", "builtin:single_vertex_run.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = rows(&dir.path().join("o/band_summary.csv"));
    assert_eq!(summary.len(), 1);
    let (lo, hi): (f64, f64) = (summary[0][1].parse().unwrap(), summary[0][2].parse().unwrap());
    assert!(lo.abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
    assert!(rows(&dir.path().join("o/band_gaps.csv")).is_empty());
}

#[test]
fn bands_refuse_non_abelian_groups() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapcert(&["bands", "--config", "builtin:heisenberg_run.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("free abelian"));
}

#[test]
fn one_point_theta_grid_warns() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(
        dir.path(),
        "r.toml",
        "cell = \"builtin:single_vertex.toml\"\ngroup = \"builtin:z_tower.toml\"\nintervals = 1\ntheta_points = 1\n",
    );
    let out = gapcert(&["bands", "--config", &run, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
    let summary = rows(&dir.path().join("o/band_summary.csv"));
    assert_eq!(summary[0][1], summary[0][2]);
}

#[test]
fn heisenberg_tower_inclusion_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapcert(&["tower", "--config", "builtin:heisenberg_run.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("inclusion PASS").count(), 2);
    assert!(!text.contains("FAIL"));
    let table = rows(&dir.path().join("o/tower.csv"));
    assert!(table.iter().all(|r| r[5] != "NONE"));
    assert!(rows(&dir.path().join("o/hits.csv")).iter().all(|r| r[2] != "UNCONFIRMED"));
}

#[test]
fn trivial_tower_reports_the_quotient_only() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(
        dir.path(),
        "r.toml",
        "cell = \"builtin:z_path3.toml\"\ngroup = \"builtin:trivial_tower.toml\"\neigenvalues = 5\ntower_eps = [0.125]\n",
    );
    let out = gapcert(&["tower", "--config", &run, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let table = rows(&dir.path().join("o/tower.csv"));
    assert_eq!(table.len(), 5);
    assert!(table.iter().all(|r| r[1] == "0" && r[2] == "1"));
    let pw = rows(&dir.path().join("o/peter_weyl.csv"));
    assert_eq!(pw.len(), 1);
    assert_eq!(pw[0][3], "PASS");
}

#[test]
fn uncatalogued_irreps_skip_peter_weyl() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(
        dir.path(),
        "r.toml",
        "cell = \"builtin:free2_cell.toml\"\ngroup = \"builtin:free2_tower.toml\"\ntower_eps = [0.125]\n",
    );
    let out = gapcert(&["tower", "--config", &run, "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("Peter-Weyl SKIPPED"));
    assert!(rows(&dir.path().join("o/peter_weyl.csv")).iter().any(|r| r[3] == "SKIPPED"));
}

#[test]
fn non_convergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(
        dir.path(),
        "r.toml",
        "cell = \"builtin:z_path8.toml\"\ngroup = \"builtin:z_tower.toml\"\n\n[solver]\ndense_threshold = 1\nmax_iterations = 1\ntolerance = 1e-14\n",
    );
    let out = gapcert(&["spectrum", "--config", &run, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("did not converge"));
}

#[test]
fn same_seed_gives_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let run = write_run(
        dir.path(),
        "r.toml",
        "cell = \"builtin:z_path8.toml\"\ngroup = \"builtin:z_tower.toml\"\nintervals = 8\n\n[solver]\ndense_threshold = 4\n",
    );
    for (sub, file) in [("spectrum", "spectrum.csv"), ("sweep", "sweep.csv"), ("bands", "bands.csv")] {
        let mut texts = Vec::new();
        for (o, threads) in [("a", "1"), ("b", "3")] {
            let out = gapcert(&[sub, "--config", &run, "--out", o, "--seed", "17", "--threads", threads], dir.path());
            assert!(out.status.success(), "{}", stderr(&out));
            texts.push(fs::read(dir.path().join(o).join(file)).unwrap());
        }
        assert_eq!(texts[0], texts[1], "{sub}");
    }
}
