//! Command-line front end.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::fem::{LinearSolveOptions, Preconditioner};
use crate::geometry::{
    builtin_domain, perp_dimension, unit_square, BcTag, BoundaryType, BuiltinDomain, GeometryError, PolygonDomain,
};
use crate::mesh::{initial_mesh, mesh_hierarchy, MeshError, TriMesh};
use crate::singular::CutoffSpec;
use crate::solver::{check_compatibility, solve_naive, SolverError, SolverOptions};
use crate::source::SourceTerm;
use crate::study::{export_csv, export_field, run_study, Formulation, StudyConfig, StudyError, StudyReport};

#[derive(Debug, Parser)]
#[command(name = "biharmonic", version, about = "Mixed P1 finite elements for the biharmonic equation on polygons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence study over levels 0..=J with Cauchy rates.
    Study(StudyArgs),
    /// Solve on one level and print coefficients and norms.
    Solve(SolveArgs),
    /// Mesh counts and conformity checks per level.
    MeshInfo(MeshArgs),
    /// List the built-in domains with corner angles and d_perp per boundary type.
    Domains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreconditionerArg {
    Ic,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct DomainArgs {
    /// Built-in domain: I, II, III, IV or square (the unit square).
    #[arg(long, default_value = "III", conflicts_with = "domain_file")]
    pub domain: String,
    /// Domain description file ("x y" per vertex, then "D"/"N" per edge).
    #[arg(long)]
    pub domain_file: Option<PathBuf>,
    /// Boundary type B1..B5 for built-in domains.
    #[arg(long, default_value = "B1")]
    pub bc: String,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Source term: const1, zero, const:<value>, quadrant or sinsin.
    #[arg(long = "f", default_value = "const1")]
    pub source: String,
    /// Formulation: naive, modified, modified-truncated or neumann-modified.
    #[arg(long, default_value = "modified")]
    pub formulation: String,
    /// Cut-off parameter tau.
    #[arg(long, default_value_t = 0.125)]
    pub tau: f64,
    /// Cut-off radius R.
    #[arg(long, default_value_t = 1.8)]
    pub radius: f64,
    /// Relative residual tolerance of the linear solves.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Iteration limit of the linear solves.
    #[arg(long, default_value_t = 20000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = PreconditionerArg::Ic)]
    pub preconditioner: PreconditionerArg,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Finest refinement level J (at least 2).
    #[arg(long, default_value_t = 6)]
    pub levels: usize,
    /// Second formulation solved on the same meshes for L-infinity gaps.
    #[arg(long)]
    pub compare: Option<String>,
    /// Output directory for the CSV table and VTK fields.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Levels whose u and w fields are written as VTK (needs --out).
    #[arg(long, value_delimiter = ',')]
    pub vtk_levels: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Refinement level.
    #[arg(long, default_value_t = 3)]
    pub level: usize,
    /// Write u and w as legacy VTK to this path.
    #[arg(long)]
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Finest level to report.
    #[arg(long, default_value_t = 2)]
    pub level: usize,
    /// Write the finest mesh in the plain-text mesh format.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for failures inside a solve, 1 for everything the user can fix in
    /// the invocation or its inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) | CliError::Study(StudyError::Solver { .. }) => 2,
            _ => 1,
        }
    }
}

fn load_domain(args: &DomainArgs) -> Result<(PolygonDomain, String), CliError> {
    let bc: BoundaryType = args.bc.parse()?;
    if let Some(path) = &args.domain_file {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        let label = path.file_stem().map_or("custom".to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((PolygonDomain::parse_description(&text)?, label));
    }
    if args.domain.eq_ignore_ascii_case("square") {
        let tag = match bc {
            BoundaryType::B1 => BcTag::Dirichlet,
            BoundaryType::B5 => BcTag::Neumann,
            other => return Err(CliError::Config(format!("the unit square supports B1 and B5, not {other}"))),
        };
        return Ok((unit_square(tag), format!("square_{bc}")));
    }
    let name: BuiltinDomain = args.domain.parse()?;
    Ok((builtin_domain(name, bc)?, format!("{name}_{bc}")))
}

fn solver_options(args: &SolverArgs) -> Result<(SolverOptions, Formulation, SourceTerm), CliError> {
    let formulation: Formulation = args.formulation.parse().map_err(CliError::Config)?;
    let source: SourceTerm =
        args.source.parse().map_err(|e: crate::source::UnknownSource| CliError::Config(e.to_string()))?;
    let cutoff = CutoffSpec::new(args.tau, args.radius).map_err(|e| CliError::Config(e.to_string()))?;
    let linear = LinearSolveOptions {
        tolerance: args.tol,
        max_iterations: args.max_iter,
        preconditioner: match args.preconditioner {
            PreconditionerArg::Ic => Preconditioner::IncompleteCholesky,
            PreconditionerArg::None => Preconditioner::None,
        },
    };
    linear.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let options = SolverOptions { linear, cutoff, truncate_basis: formulation == Formulation::ModifiedTruncated };
    Ok((options, formulation, source))
}

fn fmt_opt(v: Option<f64>, width: usize, precision: usize, sci: bool) -> String {
    match v {
        Some(x) if sci => format!("{x:>width$.precision$e}"),
        Some(x) => format!("{x:>width$.precision$}"),
        None => format!("{:>width$}", "-"),
    }
}

pub fn format_report(report: &StudyReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:>5} {:>9} {:>12} {:>7} {:>12} {:>7} {:>12} {:>12} {:>12} {:>12}\n",
        "level", "nodes", "|du|_1", "R_u", "|dw|_1", "R_w", "c1", "c2", "linf_other", "linf_finest"
    ));
    for (k, r) in report.records.iter().enumerate() {
        s.push_str(&format!(
            "{:>5} {:>9} {} {} {} {} {} {} {} {}\n",
            r.level,
            r.nodes,
            fmt_opt(r.diff_h1_u, 12, 4, true),
            fmt_opt(r.rate_u, 7, 3, false),
            fmt_opt(r.diff_h1_w, 12, 4, true),
            fmt_opt(r.rate_w, 7, 3, false),
            fmt_opt(r.c1, 12, 4, true),
            fmt_opt(r.c2, 12, 4, true),
            fmt_opt(r.linf_vs_other, 12, 4, true),
            fmt_opt(report.linf_vs_finest.get(k).copied(), 12, 4, true),
        ));
    }
    s
}

fn ensure_dir(path: &PathBuf) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn run_study_command(args: &StudyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (domain, label) = load_domain(&args.domain)?;
    let (solver, formulation, source) = solver_options(&args.solver)?;
    let compare = args.compare.as_deref().map(str::parse::<Formulation>).transpose().map_err(CliError::Config)?;
    if !args.vtk_levels.is_empty() && args.out.is_none() {
        return Err(CliError::Config("--vtk-levels needs --out".into()));
    }
    let config = StudyConfig {
        domain,
        formulation,
        compare,
        source,
        max_level: args.levels,
        solver,
        field_levels: args.vtk_levels.clone(),
    };
    config.validate()?;
    let result = run_study(&config);
    let report = match &result {
        Ok(r) => r,
        Err(StudyError::Solver { partial, .. }) => partial.as_ref(),
        Err(_) => return Err(result.unwrap_err().into()),
    };
    let _ = write!(out, "{}", format_report(report));
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let csv = dir.join(format!("study_{label}_{formulation}.csv"));
        export_csv(report, &csv)?;
        let _ = writeln!(out, "wrote {}", csv.display());
        for field in &report.fields {
            let path = dir.join(format!("field_{label}_{formulation}_level{}.vtk", field.level));
            export_field(&field.mesh, &[("u", &field.u), ("w", &field.w)], &path)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    result.map(|_| ()).map_err(CliError::from)
}

fn mesh_at(domain: &PolygonDomain, level: usize) -> Result<TriMesh, CliError> {
    let mut m = initial_mesh(domain)?;
    for _ in 0..level {
        m = m.refine_uniform();
    }
    Ok(m)
}

fn run_solve_command(args: &SolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (domain, label) = load_domain(&args.domain)?;
    let (solver, formulation, source) = solver_options(&args.solver)?;
    let mesh = mesh_at(&domain, args.level)?;
    let perp = perp_dimension(&domain);
    let _ = writeln!(
        out,
        "domain {label}, level {}, {} nodes, {} triangles",
        args.level,
        mesh.num_nodes(),
        mesh.num_triangles()
    );
    let _ = writeln!(out, "d_perp = {}, contributing vertices {:?}", perp.d_perp, perp.contributing);
    if domain.is_pure_neumann() {
        let _ = writeln!(out, "int f = {:.6e}", check_compatibility(&mesh, &source));
    }
    let (u, w) = match formulation {
        Formulation::Naive => {
            let r = solve_naive(&mesh, &source, &solver)?;
            (r.u_h, r.w_h)
        }
        _ => {
            let r = match formulation {
                Formulation::NeumannModified => {
                    crate::solver::solve_modified_neumann(&mesh, &domain, &source, &solver)?
                }
                _ => crate::solver::solve_modified(&mesh, &domain, &source, &solver)?,
            };
            let d = &r.diagnostics;
            if let (Some(v), Some(class)) = (d.singular_vertex, d.vertex_class) {
                let _ = writeln!(out, "singular vertex {v} ({class}), {} singular function(s) used", d.d_perp);
            }
            for (m, c) in r.coefficients.iter().enumerate() {
                let _ = writeln!(out, "c{} = {c:.10e}", m + 1);
            }
            if d.d_perp > 0 {
                let _ = writeln!(
                    out,
                    "Gram determinant {:.6e}, orthogonality residual {:.3e}",
                    d.determinant, d.orthogonality_residual
                );
            }
            for (step, s) in &d.solves {
                let _ = writeln!(out, "{step}: {} iterations, residual {:.3e}", s.iterations, s.relative_residual);
            }
            (r.u_h, r.w_h)
        }
    };
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let _ = writeln!(out, "max |u_h| = {:.10e}, max |w_h| = {:.10e}", max(&u), max(&w));
    if let Some(path) = &args.vtk {
        export_field(&mesh, &[("u", &u), ("w", &w)], path).map_err(CliError::from)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

fn run_mesh_info(args: &MeshArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (domain, label) = load_domain(&args.domain)?;
    let meshes = mesh_hierarchy(&domain, args.level)?;
    let _ = writeln!(out, "domain {label}, area {:.6}", domain.area());
    let _ = writeln!(
        out,
        "{:>5} {:>9} {:>10} {:>10} {:>12} {:>10}",
        "level", "nodes", "triangles", "bedges", "max edge", "conforming"
    );
    for m in &meshes {
        let c = m.check_conformity();
        let _ = writeln!(
            out,
            "{:>5} {:>9} {:>10} {:>10} {:>12.6} {:>10}",
            m.level(),
            m.num_nodes(),
            m.num_triangles(),
            m.boundary_edges().len(),
            m.max_edge_length(),
            if c.is_conforming() { "yes" } else { "NO" }
        );
        if !c.is_conforming() {
            let _ = writeln!(
                out,
                "      {} nonconforming edges, {} bad triangles",
                c.nonconforming_edges, c.nonpositive_triangles
            );
        }
    }
    if let Some(path) = &args.export {
        let text = meshes.last().expect("level 0 exists").to_text();
        fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

/// Multiples of `pi / 4` in lowest terms, e.g. `3pi/2`.
fn pi_fraction(angle: f64) -> String {
    let mut num = (angle / (PI / 4.0)).round() as u32;
    let mut den = 4;
    while den > 1 && num.is_multiple_of(2) {
        num /= 2;
        den /= 2;
    }
    match (num, den) {
        (1, 1) => "pi".to_string(),
        (n, 1) => format!("{n}pi"),
        (1, d) => format!("pi/{d}"),
        (n, d) => format!("{n}pi/{d}"),
    }
}

fn run_domains(out: &mut dyn Write) -> Result<(), CliError> {
    let _ = writeln!(out, "{:>6} {:>10}  d_perp for B1 B2 B3 B4 B5", "domain", "omega");
    for name in BuiltinDomain::ALL {
        let row = format!("{:>6} {:>10}  ", name.to_string(), pi_fraction(name.corner_angle()));
        let counts: Vec<String> = BoundaryType::ALL
            .iter()
            .map(|&bc| builtin_domain(name, bc).map(|d| perp_dimension(&d).d_perp.to_string()))
            .collect::<Result<_, _>>()?;
        let _ = writeln!(out, "{row}{}", counts.join("  "));
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Study(a) => run_study_command(a, out),
        Command::Solve(a) => run_solve_command(a, out),
        Command::MeshInfo(a) => run_mesh_info(a, out),
        Command::Domains => run_domains(out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Study(StudyError::Solver { source, .. }) | CliError::Solver(source) = &e {
                if let SolverError::Linear { source: inner, .. } = source {
                    let _ = writeln!(err, "  linear solver: {inner}");
                }
            }
            e.exit_code()
        }
    }
}
