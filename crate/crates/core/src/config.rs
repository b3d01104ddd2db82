//! Versioned TOML descriptions of cells, groups (presentation plus tower of
//! quotients) and runs, and the configurations shipped with the crate.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::cell::{CellEdge, CellGraph, MetricFamily, MetricMode, PortPairing};
use crate::error::{Error, Result};
use crate::groups::{GroupPresentation, QuotientSpec, Tower, Word};
use crate::linalg::EigenOptions;

pub const SCHEMA_VERSION: u32 = 1;

/// Configurations compiled into the crate, by file name.
pub const BUILTIN: &[(&str, &str)] = &[
    ("z_path3.toml", include_str!("../configs/z_path3.toml")),
    ("z_path8.toml", include_str!("../configs/z_path8.toml")),
    ("single_vertex.toml", include_str!("../configs/single_vertex.toml")),
    ("heisenberg_cell.toml", include_str!("../configs/heisenberg_cell.toml")),
    ("free2_cell.toml", include_str!("../configs/free2_cell.toml")),
    ("z_tower.toml", include_str!("../configs/z_tower.toml")),
    ("heisenberg_tower.toml", include_str!("../configs/heisenberg_tower.toml")),
    ("free2_tower.toml", include_str!("../configs/free2_tower.toml")),
    ("trivial_tower.toml", include_str!("../configs/trivial_tower.toml")),
    ("z_path3_run.toml", include_str!("../configs/z_path3_run.toml")),
    ("z_path8_run.toml", include_str!("../configs/z_path8_run.toml")),
    ("single_vertex_run.toml", include_str!("../configs/single_vertex_run.toml")),
    ("heisenberg_run.toml", include_str!("../configs/heisenberg_run.toml")),
    ("free2_run.toml", include_str!("../configs/free2_run.toml")),
];

/// Prefix selecting a built-in configuration instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

/// Where configuration text comes from: the file system, or the built-in table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    File(PathBuf),
    Builtin(String),
}

impl Source {
    pub fn parse(spec: &str) -> Self {
        match spec.strip_prefix(BUILTIN_PREFIX) {
            Some(name) => Source::Builtin(name.to_string()),
            None => Source::File(PathBuf::from(spec)),
        }
    }

    pub fn display(&self) -> String {
        match self {
            Source::File(p) => p.display().to_string(),
            Source::Builtin(n) => format!("{BUILTIN_PREFIX}{n}"),
        }
    }

    pub fn read(&self) -> Result<String> {
        match self {
            Source::File(p) => {
                std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source })
            }
            Source::Builtin(name) => BUILTIN
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| Error::Parse { path: self.display(), line: 0, message: "no such built-in configuration".into() }),
        }
    }

    /// A sibling reference: relative paths resolve against this file's directory.
    pub fn sibling(&self, reference: &str) -> Source {
        if let Some(name) = reference.strip_prefix(BUILTIN_PREFIX) {
            return Source::Builtin(name.to_string());
        }
        match self {
            Source::Builtin(_) => Source::Builtin(reference.to_string()),
            Source::File(p) => {
                let r = Path::new(reference);
                if r.is_absolute() {
                    Source::File(r.to_path_buf())
                } else {
                    Source::File(p.parent().unwrap_or(Path::new("")).join(r))
                }
            }
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(source: &Source, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: source.display(), line, message: message.into() }
}

/// Parses `text`, checking the `version` field before the body.
fn parse_versioned<T: DeserializeOwned>(source: &Source, text: &str) -> Result<T> {
    let table: toml::Table = toml::from_str(text).map_err(|e| {
        parse_error(source, e.span().map(|s| line_of(text, s.start)).unwrap_or(0), e.message().to_string())
    })?;
    let version_line = text.lines().position(|l| l.trim_start().starts_with("version")).map(|i| i + 1).unwrap_or(1);
    match table.get("version").and_then(|v| v.as_integer()) {
        Some(v) if v == SCHEMA_VERSION as i64 => {}
        Some(v) => return Err(parse_error(source, version_line, format!("unsupported version {v}, expected {SCHEMA_VERSION}"))),
        None => return Err(parse_error(source, 1, "missing integer field `version`")),
    }
    toml::from_str(text).map_err(|e| {
        parse_error(source, e.span().map(|s| line_of(text, s.start)).unwrap_or(0), e.message().to_string())
    })
}

/// Wraps a semantic error with the file name.
fn semantic(source: &Source, e: Error) -> Error {
    match e {
        e @ (Error::Parse { .. } | Error::Io { .. }) => e,
        other => parse_error(source, 0, other.to_string()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellFile {
    #[allow(dead_code)]
    version: u32,
    name: String,
    measures: Vec<f64>,
    #[serde(default)]
    scaled: Vec<usize>,
    edges: Vec<EdgeEntry>,
    #[serde(default)]
    ports: Vec<PortEntry>,
    metric: MetricEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    a: usize,
    b: usize,
    conductance: f64,
    #[serde(default)]
    junction: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortEntry {
    minus: Vec<usize>,
    plus: Vec<usize>,
    conductance: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum ModeEntry {
    Handle,
    Conformal,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricEntry {
    mode: ModeEntry,
    dimension: u32,
}

/// A cell together with its metric family.
#[derive(Debug, Clone)]
pub struct CellConfig {
    pub name: String,
    pub cell: CellGraph,
    pub family: MetricFamily,
}

pub fn parse_cell(source: &Source, text: &str) -> Result<CellConfig> {
    let f: CellFile = parse_versioned(source, text)?;
    let n = f.measures.len();
    let mut scaled = vec![false; n];
    for &v in &f.scaled {
        *scaled.get_mut(v).ok_or_else(|| parse_error(source, 0, format!("scaled vertex {v} out of range")))? = true;
    }
    let edges = f
        .edges
        .into_iter()
        .map(|e| CellEdge { a: e.a, b: e.b, conductance: e.conductance, junction: e.junction })
        .collect();
    let ports = f
        .ports
        .into_iter()
        .map(|p| PortPairing { minus: p.minus, plus: p.plus, conductance: p.conductance })
        .collect();
    let cell = CellGraph::new(f.measures, edges, ports, scaled).map_err(|e| semantic(source, e))?;
    let mode = match f.metric.mode {
        ModeEntry::Handle => MetricMode::Handle,
        ModeEntry::Conformal => MetricMode::Conformal,
    };
    let family = MetricFamily::new(mode, f.metric.dimension).map_err(|e| semantic(source, e))?;
    Ok(CellConfig { name: f.name, cell, family })
}

pub fn load_cell(source: &Source) -> Result<CellConfig> {
    parse_cell(source, &source.read()?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    #[allow(dead_code)]
    version: u32,
    name: String,
    presentation: PresentationEntry,
    levels: Vec<LevelEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
enum PresentationEntry {
    Free { rank: usize },
    FreeAbelian { rank: usize },
    Heisenberg,
    Surface { genus: usize },
    Presented {
        generators: usize,
        #[serde(default)]
        relators: Vec<String>,
        #[serde(default)]
        abelian: bool,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
enum LevelEntry {
    /// `(ℤ/m)^r` with `r` the generator count.
    Cyclic { modulus: u32 },
    Heisenberg { modulus: u32 },
    Permutation { blocks: Vec<BlockEntry> },
    Symmetric { n: usize },
    Dihedral { n: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockEntry {
    degree: usize,
    images: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GroupConfig {
    pub name: String,
    pub tower: Tower,
}

/// Parses a relator such as `"1 2 -1 -2"`.
pub fn parse_word(text: &str) -> Result<Word> {
    text.split_whitespace()
        .map(|t| match t.parse::<i32>() {
            Ok(0) | Err(_) => Err(Error::InvalidGroup(format!("bad letter `{t}`; letters are nonzero integers"))),
            Ok(l) => Ok(l),
        })
        .collect::<Result<Vec<_>>>()
        .map(|w| Word(w).reduced())
}

pub fn parse_group(source: &Source, text: &str) -> Result<GroupConfig> {
    let f: GroupFile = parse_versioned(source, text)?;
    let presentation = match f.presentation {
        PresentationEntry::Free { rank } => GroupPresentation::free(rank),
        PresentationEntry::FreeAbelian { rank } => GroupPresentation::free_abelian(rank),
        PresentationEntry::Heisenberg => Ok(GroupPresentation::heisenberg()),
        PresentationEntry::Surface { genus } => GroupPresentation::surface(genus),
        PresentationEntry::Presented { generators, relators, abelian } => relators
            .iter()
            .map(|r| parse_word(r))
            .collect::<Result<Vec<_>>>()
            .and_then(|rels| GroupPresentation::new(generators, rels, abelian)),
    }
    .map_err(|e| semantic(source, e))?;
    let r = presentation.generator_count();
    let levels = f
        .levels
        .into_iter()
        .map(|l| match l {
            LevelEntry::Cyclic { modulus } => QuotientSpec::cyclic_power(r, modulus),
            LevelEntry::Heisenberg { modulus } => QuotientSpec::heisenberg(modulus),
            LevelEntry::Permutation { blocks } => {
                QuotientSpec::permutation_blocks(&blocks.into_iter().map(|b| (b.degree, b.images)).collect::<Vec<_>>())
            }
            LevelEntry::Symmetric { n } => QuotientSpec::symmetric(n),
            LevelEntry::Dihedral { n } => QuotientSpec::dihedral(n),
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| semantic(source, e))?;
    if let Some(bad) = levels.iter().position(|l| l.generator_count() != r) {
        return Err(parse_error(source, 0, format!("level {bad} has {} generators, presentation has {r}", levels[bad].generator_count())));
    }
    let tower = Tower::new(presentation, levels).map_err(|e| semantic(source, e))?;
    Ok(GroupConfig { name: f.name, tower })
}

pub fn load_group(source: &Source) -> Result<GroupConfig> {
    parse_group(source, &source.read()?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    #[allow(dead_code)]
    version: u32,
    cell: String,
    group: String,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default)]
    sweep: Option<Vec<f64>>,
    #[serde(default = "default_intervals")]
    intervals: usize,
    #[serde(default = "default_eigenvalues")]
    eigenvalues: usize,
    #[serde(default)]
    tower_eps: Option<Vec<f64>>,
    #[serde(default = "default_hits")]
    hit_count: usize,
    #[serde(default = "default_theta")]
    theta_points: usize,
    #[serde(default = "default_gaps")]
    gaps: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    solver: SolverEntry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverEntry {
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default = "default_dense")]
    dense_threshold: usize,
    #[serde(default = "default_iterations")]
    max_iterations: usize,
}

impl Default for SolverEntry {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), dense_threshold: default_dense(), max_iterations: default_iterations() }
    }
}

fn default_eps() -> f64 {
    0.01
}
fn default_intervals() -> usize {
    8
}
fn default_eigenvalues() -> usize {
    30
}
fn default_hits() -> usize {
    5
}
fn default_theta() -> usize {
    crate::floquet::DEFAULT_GRID_POINTS
}
fn default_gaps() -> usize {
    3
}
fn default_tolerance() -> f64 {
    EigenOptions::default().tolerance
}
fn default_dense() -> usize {
    EigenOptions::default().dense_threshold
}
fn default_iterations() -> usize {
    EigenOptions::default().max_iterations
}

/// A resolved run: cell, group, and command parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub cell: CellConfig,
    pub group: GroupConfig,
    /// Single ε of the `spectrum` command.
    pub eps: f64,
    pub sweep: Vec<f64>,
    /// Number `K` of intervals `I_k`.
    pub intervals: usize,
    /// Eigenvalues per tower level.
    pub eigenvalues: usize,
    pub tower_eps: Vec<f64>,
    pub hit_count: usize,
    pub theta_points: usize,
    /// Number of gaps searched for by `sweep`.
    pub gaps: usize,
    pub seed: u64,
    pub solver: EigenOptions,
}

pub fn parse_run(source: &Source, text: &str) -> Result<RunConfig> {
    let f: RunFile = parse_versioned(source, text)?;
    let line = |key: &str| text.lines().position(|l| l.trim_start().starts_with(key)).map(|i| i + 1).unwrap_or(0);
    let check_eps = |key: &str, v: f64| {
        if v > 0.0 && v <= 1.0 {
            Ok(())
        } else {
            Err(parse_error(source, line(key), format!("`{key}` value {v} is outside (0, 1]")))
        }
    };
    check_eps("eps", f.eps)?;
    let sweep = f.sweep.unwrap_or_else(crate::analysis::default_sweep_grid);
    if sweep.is_empty() {
        return Err(parse_error(source, line("sweep"), "`sweep` grid is empty"));
    }
    for &e in &sweep {
        check_eps("sweep", e)?;
    }
    let tower_eps = f.tower_eps.unwrap_or_else(|| vec![0.125, 0.015625]);
    for &e in &tower_eps {
        check_eps("tower_eps", e)?;
    }
    for (key, v) in [("intervals", f.intervals), ("eigenvalues", f.eigenvalues), ("theta_points", f.theta_points)] {
        if v == 0 {
            return Err(parse_error(source, line(key), format!("`{key}` must be at least 1")));
        }
    }
    if !(f.solver.tolerance > 0.0) {
        return Err(parse_error(source, line("tolerance"), "solver tolerance must be positive"));
    }
    let cell = load_cell(&source.sibling(&f.cell))?;
    let group = load_group(&source.sibling(&f.group))?;
    if cell.cell.generator_count() != group.tower.presentation().generator_count() {
        return Err(parse_error(
            source,
            line("group"),
            format!(
                "cell has {} port pairings but the group has {} generators",
                cell.cell.generator_count(),
                group.tower.presentation().generator_count()
            ),
        ));
    }
    let solver = EigenOptions {
        tolerance: f.solver.tolerance,
        dense_threshold: f.solver.dense_threshold,
        max_iterations: f.solver.max_iterations,
        seed: f.seed,
        ..EigenOptions::default()
    };
    Ok(RunConfig {
        source: source.clone(),
        cell,
        group,
        eps: f.eps,
        sweep,
        intervals: f.intervals,
        eigenvalues: f.eigenvalues,
        tower_eps,
        hit_count: f.hit_count,
        theta_points: f.theta_points,
        gaps: f.gaps,
        seed: f.seed,
        solver,
    })
}

pub fn load_run(source: &Source) -> Result<RunConfig> {
    parse_run(source, &source.read()?)
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solver.seed = seed;
        self
    }
}
