use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lcflow::bench::{
    comparison_mode, defects_benchmark, gradient_consistency_study, loglog_slope, product_rule_study, run_scheme,
    spiral_benchmark,
};
use lcflow::config::{MeshShape, ProblemKind, RunConfig, SchemeKind};
use lcflow::diagnostics::{energy_law_violation, CsvWriter};
use lcflow::fespace::FeSystem;
use lcflow::mesh::{generate_annulus_mesh, generate_square_mesh, mesh_report, CenterPolicy, Mesh2D, SquarePattern};
use lcflow::problem::{defects_problem, spiral_problem};
use lcflow::{vtk, Error, Result};

#[derive(Parser)]
#[command(name = "lcflow", version, about = "Projection FE schemes for nematic liquid crystal flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Cg,
    Dg,
}

impl From<Scheme> for SchemeKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Cg => SchemeKind::Cg,
            Scheme::Dg => SchemeKind::Dg,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation described by a JSON config.
    Run { config: PathBuf },
    /// Spiral errors at T = 1.5 over a grid of mesh sizes and time steps.
    SpiralTable {
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.1, 0.05, 0.025])]
        h: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.01])]
        k: Vec<f64>,
        #[arg(long, default_value_t = 0.005)]
        alpha: f64,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Two-defect benchmark on the unit square.
    Defects {
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        #[arg(long, default_value_t = 0.01)]
        k: f64,
        #[arg(long, default_value_t = 0.005)]
        alpha: f64,
        #[arg(long = "t-end", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value = "defects-out")]
        out: PathBuf,
    },
    /// Spiral with and without projection and over several penalties.
    Compare {
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [OnOff::On, OnOff::Off])]
        projection: Vec<OnOff>,
        #[arg(long = "alpha-sweep", value_delimiter = ',', num_args = 1.., default_values_t = [0.005])]
        alpha_sweep: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        #[arg(long, default_value_t = 0.01)]
        k: f64,
        #[arg(long = "t-end", default_value_t = 1.5)]
        t_end: f64,
        #[arg(long, default_value_t = 5)]
        cadence: usize,
        /// Per-time error series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Geometric report of a mesh: `square:N[:crisscross][:circumcenter]`,
    /// `annulus:NRxNA[:circumcenter]` or a mesh file.
    MeshCheck { mesh: String },
    /// Refinement studies of the reconstructed gradient and the discrete product rule.
    Consistency {
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [8, 16, 32, 64])]
        n: Vec<usize>,
    },
}

fn parse_mesh(spec: &str) -> Result<Mesh2D> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let centers = if rest.contains(&"circumcenter") {
        CenterPolicy::Circumcenter
    } else {
        CenterPolicy::Barycenter
    };
    let bad = || Error::InvalidParameter(format!("cannot parse mesh spec '{spec}'"));
    let mesh = match kind {
        "square" => {
            let n = rest.first().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let pattern = if rest.contains(&"crisscross") {
                SquarePattern::Crisscross
            } else {
                SquarePattern::RightTriangle
            };
            generate_square_mesh(n, pattern)?
        }
        "annulus" => {
            let (a, b) = rest.first().and_then(|s| s.split_once('x')).ok_or_else(bad)?;
            generate_annulus_mesh(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)?
        }
        _ if Path::new(spec).exists() => Mesh2D::read(spec)?,
        _ => return Err(bad()),
    };
    Ok(mesh.set_cell_centers(centers))
}

fn run(path: &Path) -> Result<()> {
    let cfg = RunConfig::read(path)?;
    let mesh = cfg.mesh.build()?;
    let report = mesh_report(&mesh);
    if cfg.scheme == SchemeKind::Cg && !report.weakly_acute {
        log::warn!("mesh is not weakly acute; projection may raise the Dirichlet energy");
    }
    if cfg.scheme == SchemeKind::Dg && !(report.non_obtuse && report.admissible) {
        log::warn!("mesh is not non-obtuse and admissible");
    }
    let data = match cfg.problem {
        ProblemKind::Spiral => spiral_problem(),
        ProblemKind::Defects => {
            let n = match cfg.mesh.shape {
                MeshShape::Square { n, .. } => n,
                _ => (1.0 / mesh.max_facet_length()).round() as usize,
            };
            defects_problem(1.0 / n as f64)
        }
    };
    let sys = FeSystem::new(mesh);
    let eval = sys.clone();
    let mut csv = match &cfg.output.csv_path {
        Some(p) => Some(CsvWriter::create(p, cfg.scheme == SchemeKind::Dg)?),
        None => None,
    };
    let rows = run_scheme(sys, &cfg, &data, |diag, d, v, p| {
        if let Some(w) = csv.as_mut() {
            w.write(diag)?;
        }
        if let (Some(dir), c) = (&cfg.output.vtk_dir, cfg.output.cadence) {
            if c > 0 && diag.step % c == 0 {
                vtk::write_state(dir.join(format!("state_{:05}.vtk", diag.step)), &eval, v, p, d)?;
            }
        }
        Ok(())
    })?;
    if let Some(w) = csv {
        w.finish()?;
    }
    let last = rows.last().expect("initial row");
    let (worst, monotone) = energy_law_violation(&rows, rows[0].e_total);
    println!(
        "{} steps, t = {:.4}, E_total = {:.8e}, max norm deviation {:.2e}, worst energy excess {:.2e} E0, monotone {}",
        rows.len() - 1,
        last.t,
        last.e_total,
        rows.iter().map(|r| r.norm_dev).fold(0.0, f64::max),
        worst,
        monotone
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(&config),
        Command::SpiralTable {
            scheme,
            h,
            k,
            alpha,
            csv,
        } => spiral_benchmark(scheme.into(), &h, &k, alpha).and_then(|table| {
            print!("{}", table.to_text());
            if h.len() > 1 && k.len() == 1 {
                let e: Vec<f64> = table.rows.iter().map(|r| r.error).collect();
                println!("observed order in h: {:.3}", loglog_slope(&h, &e));
            }
            if let Some(path) = csv {
                std::fs::write(path, table.to_csv())?;
            }
            Ok(())
        }),
        Command::Defects {
            scheme,
            h,
            k,
            alpha,
            t_end,
            out,
        } => defects_benchmark(scheme.into(), h, k, alpha, t_end, Some(&out)).map(|run| {
            let (worst, monotone) = energy_law_violation(&run.rows, run.rows[0].e_total);
            println!(
                "max |d_3|: {:.4} -> {:.4}; energy monotone {monotone}, worst excess {worst:.2e} E0; {} snapshots in {}",
                run.initial_max_z,
                run.final_max_z,
                run.snapshots.len(),
                out.display()
            );
        }),
        Command::Compare {
            scheme,
            projection,
            alpha_sweep,
            h,
            k,
            t_end,
            cadence,
            csv,
        } => {
            let flags: Vec<bool> = projection.iter().map(|p| *p == OnOff::On).collect();
            comparison_mode(scheme.into(), &flags, &alpha_sweep, h, k, t_end, cadence).and_then(|(table, series)| {
                print!("{}", table.to_text());
                if let Some(path) = csv {
                    std::fs::write(path, series)?;
                }
                Ok(())
            })
        }
        Command::MeshCheck { mesh } => parse_mesh(&mesh).and_then(|m| {
            let report = mesh_report(&m);
            println!(
                "vertices {}, cells {}, non-obtuse {}, weakly acute {}, admissible {}, h in [{:.4}, {:.4}]",
                m.num_vertices(),
                m.num_cells(),
                report.non_obtuse,
                report.weakly_acute,
                report.admissible,
                report.h_min,
                report.h_max
            );
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }),
        Command::Consistency { n } => gradient_consistency_study(&n).and_then(|g| {
            println!("reconstructed gradient: ||R grad(I phi) - grad phi||");
            for r in &g {
                println!("  n = {:>3}  h = {:.4}  error = {:.4e}", r.n, r.h, r.value);
            }
            let p = product_rule_study(&n)?;
            println!("product rule residual / (sqrt(E_J) ||R grad d||)");
            for r in &p {
                println!("  n = {:>3}  h = {:.4}  residual = {:.4e}  normalized = {:.4e}", r.n, r.h, r.value, r.normalized);
            }
            let h: Vec<f64> = p.iter().map(|r| r.h).collect();
            let y: Vec<f64> = p.iter().map(|r| r.normalized).collect();
            if h.len() > 1 {
                println!("observed product-rule order: {:.3}", loglog_slope(&h, &y));
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
