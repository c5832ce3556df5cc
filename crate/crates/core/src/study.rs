//! Multi-level convergence studies with Cauchy rates.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{assemble_stiffness, h1_seminorm_diff, linf_diff, FemError};
use crate::geometry::PolygonDomain;
use crate::mesh::{initial_mesh, MeshError, TriMesh};
use crate::solver::{solve_modified, solve_modified_neumann, solve_naive, SolverError, SolverOptions};
use crate::source::SourceTerm;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("level {level}: {source}")]
    Solver {
        level: usize,
        #[source]
        source: SolverError,
        /// Levels completed before the failure.
        partial: Box<StudyReport>,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("seminorm difference {value} at position {index} is not positive")]
    NonPositive { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Naive,
    Modified,
    /// Modified method using only the first singular function.
    ModifiedTruncated,
    NeumannModified,
}

impl Formulation {
    pub const ALL: [Formulation; 4] =
        [Formulation::Naive, Formulation::Modified, Formulation::ModifiedTruncated, Formulation::NeumannModified];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Naive => "naive",
            Formulation::Modified => "modified",
            Formulation::ModifiedTruncated => "modified-truncated",
            Formulation::NeumannModified => "neumann-modified",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formulation::ALL.into_iter().find(|f| f.name() == s.trim()).ok_or_else(|| {
            format!("unknown formulation '{s}' (expected naive, modified, modified-truncated or neumann-modified)")
        })
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub domain: PolygonDomain,
    pub formulation: Formulation,
    /// Second formulation solved on the same meshes for L-infinity gaps.
    pub compare: Option<Formulation>,
    pub source: SourceTerm,
    /// Finest level `J`; rates need `J >= 2`.
    pub max_level: usize,
    pub solver: SolverOptions,
    /// Levels whose fields are kept in the report for export.
    pub field_levels: Vec<usize>,
}

impl StudyConfig {
    pub fn new(domain: PolygonDomain, formulation: Formulation, source: SourceTerm, max_level: usize) -> Self {
        Self {
            domain,
            formulation,
            compare: None,
            source,
            max_level,
            solver: SolverOptions::default(),
            field_levels: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.max_level < 2 {
            return Err(StudyError::Config(format!("at least 2 levels are needed for a rate, got {}", self.max_level)));
        }
        if let Some(&l) = self.field_levels.iter().find(|&&l| l > self.max_level) {
            return Err(StudyError::Config(format!("field level {l} exceeds the finest level {}", self.max_level)));
        }
        self.solver.cutoff.validate().map_err(|e| StudyError::Config(e.to_string()))?;
        self.solver.linear.validate().map_err(|e| StudyError::Config(e.to_string()))?;
        Ok(())
    }
}

/// One row of the rate table. Differences at level `j` compare levels `j`
/// and `j - 1`; the rate at `j` needs level `j + 1` as well.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub nodes: usize,
    pub diff_h1_u: Option<f64>,
    pub rate_u: Option<f64>,
    pub diff_h1_w: Option<f64>,
    pub rate_w: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub linf_vs_other: Option<f64>,
}

/// Solution fields kept for export.
#[derive(Debug, Clone)]
pub struct FieldDump {
    pub level: usize,
    pub mesh: TriMesh,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct StudyReport {
    pub records: Vec<LevelRecord>,
    /// `max |u_j - u_J|` over nodes of the finest mesh, with `u_j`
    /// prolonged. Stands in for an error against a reference solution.
    pub linf_vs_finest: Vec<f64>,
    pub fields: Vec<FieldDump>,
}

impl StudyReport {
    pub fn rates_u(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.rate_u).collect()
    }

    pub fn rates_w(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.rate_w).collect()
    }

    pub fn record(&self, level: usize) -> Option<&LevelRecord> {
        self.records.iter().find(|r| r.level == level)
    }
}

/// `R(j) = log2(d_j / d_{j+1})` for consecutive differences.
pub fn cauchy_rate(seminorms: &[f64]) -> Result<Vec<f64>, RateError> {
    if let Some((index, &value)) = seminorms.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(RateError::NonPositive { index, value });
    }
    Ok(seminorms.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

struct LevelSolution {
    u: Vec<f64>,
    w: Vec<f64>,
    coefficients: Vec<f64>,
}

fn solve_level(
    formulation: Formulation,
    mesh: &TriMesh,
    domain: &PolygonDomain,
    f: &SourceTerm,
    options: &SolverOptions,
) -> Result<LevelSolution, SolverError> {
    match formulation {
        Formulation::Naive => {
            let r = solve_naive(mesh, f, options)?;
            Ok(LevelSolution { u: r.u_h, w: r.w_h, coefficients: Vec::new() })
        }
        Formulation::Modified | Formulation::ModifiedTruncated => {
            let opts = SolverOptions { truncate_basis: formulation == Formulation::ModifiedTruncated, ..*options };
            let r = solve_modified(mesh, domain, f, &opts)?;
            Ok(LevelSolution { u: r.u_h, w: r.w_h, coefficients: r.coefficients })
        }
        Formulation::NeumannModified => {
            let r = solve_modified_neumann(mesh, domain, f, options)?;
            Ok(LevelSolution { u: r.u_h, w: r.w_h, coefficients: r.coefficients })
        }
    }
}

fn fill_rates(records: &mut [LevelRecord]) {
    for j in 0..records.len().saturating_sub(1) {
        let next = &records[j + 1];
        let (nu, nw) = (next.diff_h1_u, next.diff_h1_w);
        let r = &mut records[j];
        r.rate_u = match (r.diff_h1_u, nu) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
            _ => None,
        };
        r.rate_w = match (r.diff_h1_w, nw) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
            _ => None,
        };
    }
}

/// Solves on levels `0..=J`, prolonging each solution to the next level for
/// the difference seminorms.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, StudyError> {
    config.validate()?;
    let mut report = StudyReport::default();
    let mut mesh = initial_mesh(&config.domain)?;
    let mut previous: Option<LevelSolution> = None;
    // Every level's u, prolonged along to the current mesh.
    let mut history: Vec<Vec<f64>> = Vec::new();
    for level in 0..=config.max_level {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        log::info!("level {level}: {} nodes, {} triangles", mesh.num_nodes(), mesh.num_triangles());
        let fail = |source: SolverError, report: &StudyReport| {
            let mut partial = report.clone();
            fill_rates(&mut partial.records);
            StudyError::Solver { level, source, partial: Box::new(partial) }
        };
        let sol = match solve_level(config.formulation, &mesh, &config.domain, &config.source, &config.solver) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, &report)),
        };
        let mut record = LevelRecord {
            level,
            nodes: mesh.num_nodes(),
            c1: sol.coefficients.first().copied(),
            c2: sol.coefficients.get(1).copied(),
            ..Default::default()
        };
        if let Some(other) = config.compare {
            match solve_level(other, &mesh, &config.domain, &config.source, &config.solver) {
                Ok(o) => record.linf_vs_other = Some(linf_diff(&sol.u, &o.u)?),
                Err(e) => return Err(fail(e, &report)),
            }
        }
        if let Some(prev) = &previous {
            let p = mesh.prolongation().expect("refined mesh has a prolongation");
            let a = assemble_stiffness(&mesh)?;
            record.diff_h1_u = Some(h1_seminorm_diff(&sol.u, &p.apply(&prev.u)?, &a)?);
            record.diff_h1_w = Some(h1_seminorm_diff(&sol.w, &p.apply(&prev.w)?, &a)?);
            for h in history.iter_mut() {
                *h = p.apply(h)?;
            }
        }
        history.push(sol.u.clone());
        if config.field_levels.contains(&level) {
            report.fields.push(FieldDump { level, mesh: mesh.clone(), u: sol.u.clone(), w: sol.w.clone() });
        }
        report.records.push(record);
        previous = Some(sol);
    }
    fill_rates(&mut report.records);
    let finest = history.last().expect("at least one level").clone();
    report.linf_vs_finest = history.iter().map(|h| linf_diff(h, &finest)).collect::<Result<_, _>>()?;
    Ok(report)
}

pub const CSV_HEADER: [&str; 9] =
    ["level", "nodes", "diff_h1_u", "rate_u", "diff_h1_w", "rate_w", "c1", "c2", "linf_vs_other"];

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
fn write_atomic(path: &Path, write: impl FnOnce(&mut fs::File) -> io::Result<()>) -> Result<(), StudyError> {
    let io_err = |source| StudyError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    write(tmp.as_file_mut()).map_err(io_err)?;
    tmp.as_file_mut().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn csv_string(report: &StudyReport) -> Result<String, StudyError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &report.records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| StudyError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// CSV with one row per level; missing values are empty cells.
pub fn export_csv(report: &StudyReport, path: &Path) -> Result<(), StudyError> {
    let text = csv_string(report)?;
    write_atomic(path, |f| f.write_all(text.as_bytes()))
}

pub fn read_csv(path: &Path) -> Result<Vec<LevelRecord>, StudyError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Legacy VTK (ASCII) unstructured grid with point scalars.
pub fn vtk_string(mesh: &TriMesh, fields: &[(&str, &[f64])]) -> Result<String, FemError> {
    use std::fmt::Write as _;
    let n = mesh.num_nodes();
    for (_, v) in fields {
        if v.len() != n {
            return Err(FemError::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let t = mesh.num_triangles();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nbiharmonic P1 field\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {t} {}", 4 * t);
    for tri in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {t}");
    for _ in 0..t {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, v) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in *v {
                let _ = writeln!(s, "{x:e}");
            }
        }
    }
    Ok(s)
}

pub fn export_field(mesh: &TriMesh, fields: &[(&str, &[f64])], path: &Path) -> Result<(), StudyError> {
    let text = vtk_string(mesh, fields)?;
    write_atomic(path, |f| f.write_all(text.as_bytes()))
}
