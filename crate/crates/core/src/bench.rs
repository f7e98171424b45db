//! The annulus spiral and the two-defect benchmarks, error metrics and
//! convergence tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{MeshConfig, MeshShape, RunConfig, SchemeKind};
use crate::diagnostics::{CsvWriter, StepDiagnostics};
use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSystem, Space};
use crate::mesh::{generate_annulus_mesh, generate_square_mesh, CenterPolicy, Point, SquarePattern};
use crate::ops_dg::{discrete_product_rule_residual, dg_director_energies, reconstructed_gradient_error, Mat32};
use crate::problem::{defects_problem, spiral_angle, spiral_problem, ProblemData};
use crate::scheme_cg::cg_initialize;
use crate::scheme_dg::dg_initialize;
use crate::vec3::Vec3;
use crate::vtk;

/// `L^2` norm of the angle of the in-plane director against the radial
/// direction minus the exact spiral angle. The angle is signed, positive
/// toward `(x2, -x1)/|x|`, and lies in `(-pi, pi]`.
pub fn angle_error_l2(sys: &FeSystem, d: &FeFunction) -> Result<f64> {
    let mesh = sys.mesh();
    let dg = match d.space() {
        Space::Cg1Director => false,
        Space::Dg0Director => true,
        other => {
            return Err(Error::SpaceMismatch {
                expected: Space::Cg1Director,
                found: other,
            })
        }
    };
    let rule = sys.rule();
    let mut sum = 0.0;
    for t in 0..mesh.num_cells() {
        let area = mesh.cell_area(t);
        let c = mesh.cell(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.map_point(t, *l);
            let v: Vec3 = if dg {
                d.vec3(t)
            } else {
                let mut v = [0.0; 3];
                for i in 0..3 {
                    let di = d.vec3(c[i]);
                    for m in 0..3 {
                        v[m] += l[i] * di[m];
                    }
                }
                v
            };
            let e = angle_defect(x, v)?;
            sum += w * area * e * e;
        }
    }
    Ok(sum.sqrt())
}

fn angle_defect(x: Point, v: Vec3) -> Result<f64> {
    if v[0] == 0.0 && v[1] == 0.0 {
        return Err(Error::ZeroInPlaneDirector { x: x[0], y: x[1] });
    }
    let r = x[0].hypot(x[1]);
    let radial = (v[0] * x[0] + v[1] * x[1]) / r;
    let tangential = (v[0] * x[1] - v[1] * x[0]) / r;
    Ok(tangential.atan2(radial) - spiral_angle(x))
}

/// Ring and sector counts of the annulus mesh for a target size `h`:
/// rings of width `h`, sectors of arc length `h` on the inner circle.
pub fn annulus_resolution(h: f64) -> (usize, usize) {
    ((1.0 / h).round().max(1.0) as usize, (std::f64::consts::TAU / h).ceil().max(8.0) as usize)
}

#[derive(Clone, Debug)]
pub struct SpiralSettings {
    pub scheme: SchemeKind,
    pub h: f64,
    pub k: f64,
    pub alpha: f64,
    pub projection: bool,
    pub t_end: f64,
    /// Record the angle error every `cadence` steps (0: final state only).
    pub cadence: usize,
}

impl SpiralSettings {
    pub fn new(scheme: SchemeKind, h: f64, k: f64) -> Self {
        SpiralSettings {
            scheme,
            h,
            k,
            alpha: 0.005,
            projection: true,
            t_end: 1.5,
            cadence: 0,
        }
    }

    pub fn config(&self) -> RunConfig {
        let (n_radial, n_angular) = annulus_resolution(self.h);
        let mut cfg = RunConfig::new(
            self.scheme,
            MeshConfig {
                shape: MeshShape::Annulus { n_radial, n_angular },
                centers: CenterPolicy::Barycenter,
            },
            self.k,
            self.t_end,
        );
        cfg.alpha = self.alpha;
        cfg.projection = self.projection;
        cfg
    }
}

#[derive(Clone, Debug)]
pub struct SpiralRun {
    pub settings: SpiralSettings,
    pub h_max: f64,
    pub rows: Vec<StepDiagnostics>,
    /// `(t, angle error)` at the recorded steps, always including the last one.
    pub series: Vec<(f64, f64)>,
    pub error: f64,
}

/// Runs either scheme from `data` on `sys`, calling `observe` with the
/// diagnostics, the current director and the current flow.
pub fn run_scheme(
    sys: FeSystem,
    cfg: &RunConfig,
    data: &ProblemData,
    mut observe: impl FnMut(&StepDiagnostics, &FeFunction, &FeFunction, &FeFunction) -> Result<()>,
) -> Result<Vec<StepDiagnostics>> {
    match cfg.scheme {
        SchemeKind::Cg => {
            let (mut s, st) = cg_initialize(sys, cfg, data)?;
            Ok(s.run(st, |st, d| observe(d, &st.d, &st.v, &st.p))?.1)
        }
        SchemeKind::Dg => {
            let (mut s, st) = dg_initialize(sys, cfg, data)?;
            Ok(s.run(st, |st, d| observe(d, &st.d, &st.v, &st.p))?.1)
        }
    }
}

pub fn run_spiral(settings: &SpiralSettings) -> Result<SpiralRun> {
    let cfg = settings.config();
    let mesh = cfg.mesh.build()?;
    let h_max = mesh.max_facet_length();
    let sys = FeSystem::new(mesh);
    let eval = sys.clone();
    let steps = cfg.num_steps();
    let mut series = Vec::new();
    let rows = run_scheme(sys, &cfg, &spiral_problem(), |diag, d, _, _| {
        let due = settings.cadence > 0 && diag.step % settings.cadence == 0;
        if due || diag.step == steps {
            series.push((diag.t, angle_error_l2(&eval, d)?));
        }
        Ok(())
    })?;
    let error = series.last().map(|p| p.1).unwrap_or(f64::NAN);
    Ok(SpiralRun {
        settings: settings.clone(),
        h_max,
        rows,
        series,
        error,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorRow {
    pub scheme: SchemeKind,
    pub h: f64,
    pub k: f64,
    pub alpha: Option<f64>,
    pub projection: bool,
    pub n_radial: usize,
    pub n_angular: usize,
    pub h_max: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn from_runs(runs: &[SpiralRun]) -> Self {
        ErrorTable {
            rows: runs
                .iter()
                .map(|r| {
                    let s = &r.settings;
                    let (n_radial, n_angular) = annulus_resolution(s.h);
                    ErrorRow {
                        scheme: s.scheme,
                        h: s.h,
                        k: s.k,
                        alpha: (s.scheme == SchemeKind::Dg).then_some(s.alpha),
                        projection: s.projection,
                        n_radial,
                        n_angular,
                        h_max: r.h_max,
                        error: r.error,
                    }
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,h,k,alpha,projection,n_radial,n_angular,h_max,error\n");
        for r in &self.rows {
            let alpha = r.alpha.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.6},{:.6e}",
                r.scheme.tag(),
                r.h,
                r.k,
                alpha,
                r.projection,
                r.n_radial,
                r.n_angular,
                r.h_max,
                r.error
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<6} {:>8} {:>8} {:>7} {:>5} {:>10} {:>9} {:>12}\n",
            "scheme", "h", "k", "alpha", "proj", "mesh", "h_max", "error"
        );
        for r in &self.rows {
            let alpha = r.alpha.map(|a| a.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<6} {:>8} {:>8} {:>7} {:>5} {:>10} {:>9.4} {:>12.6e}",
                r.scheme.tag(),
                r.h,
                r.k,
                alpha,
                if r.projection { "on" } else { "off" },
                format!("{}x{}", r.n_radial, r.n_angular),
                r.h_max,
                r.error
            );
        }
        s
    }
}

/// Spiral errors at `T = 1.5` for every `(h, k)` pair, runs dispatched in parallel.
pub fn spiral_benchmark(scheme: SchemeKind, hs: &[f64], ks: &[f64], alpha: f64) -> Result<ErrorTable> {
    let settings: Vec<SpiralSettings> = hs
        .iter()
        .flat_map(|&h| {
            ks.iter().map(move |&k| SpiralSettings {
                alpha,
                ..SpiralSettings::new(scheme, h, k)
            })
        })
        .collect();
    let runs = settings.par_iter().map(run_spiral).collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable::from_runs(&runs))
}

/// Reruns the spiral with and without projection and for several penalties.
/// Returns the final errors and the long-format `(t, error)` series as CSV.
pub fn comparison_mode(
    scheme: SchemeKind,
    projections: &[bool],
    alphas: &[f64],
    h: f64,
    k: f64,
    t_end: f64,
    cadence: usize,
) -> Result<(ErrorTable, String)> {
    let alphas: Vec<f64> = if scheme == SchemeKind::Dg { alphas.to_vec() } else { vec![0.005] };
    let settings: Vec<SpiralSettings> = projections
        .iter()
        .flat_map(|&projection| {
            alphas.iter().map(move |&alpha| SpiralSettings {
                alpha,
                projection,
                t_end,
                cadence: cadence.max(1),
                ..SpiralSettings::new(scheme, h, k)
            })
        })
        .collect();
    let runs = settings.par_iter().map(run_spiral).collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("scheme,projection,alpha,t,error\n");
    for r in &runs {
        for (t, e) in &r.series {
            let _ = writeln!(csv, "{},{},{},{t:.6},{e:.8e}", scheme.tag(), r.settings.projection, r.settings.alpha);
        }
    }
    Ok((ErrorTable::from_runs(&runs), csv))
}

#[derive(Clone, Debug)]
pub struct DefectsRun {
    pub rows: Vec<StepDiagnostics>,
    pub initial_max_z: f64,
    pub final_max_z: f64,
    pub snapshots: Vec<PathBuf>,
}

/// Two-defect benchmark on `(-0.5, 0.5)^2` with `v_el = 0.25` up to `t_end`.
/// With `out_dir`, writes the energy CSV, director snapshots at
/// `t = 0, 0.05, t_end` and the flow at `t = 0.03`.
pub fn defects_benchmark(
    scheme: SchemeKind,
    h: f64,
    k: f64,
    alpha: f64,
    t_end: f64,
    out_dir: Option<&Path>,
) -> Result<DefectsRun> {
    let n = (1.0 / h).round().max(1.0) as usize;
    let mesh = generate_square_mesh(n, SquarePattern::RightTriangle)?;
    let mut cfg = RunConfig::new(
        scheme,
        MeshConfig {
            shape: MeshShape::Square {
                n,
                pattern: SquarePattern::RightTriangle,
            },
            centers: CenterPolicy::Barycenter,
        },
        k,
        t_end,
    );
    cfg.v_el = 0.25;
    cfg.alpha = alpha;
    cfg.validate()?;
    let sys = FeSystem::new(mesh);
    let eval = sys.clone();
    let mut csv = match out_dir {
        Some(dir) => Some(CsvWriter::create(dir.join("energy.csv"), scheme == SchemeKind::Dg)?),
        None => None,
    };
    let targets = [(0.0, "director_t0"), (0.05, "director_t005"), (t_end, "director_final"), (0.03, "flow_t003")];
    let mut snapshots = Vec::new();
    let mut z_first = None;
    let mut z_last = 0.0;
    run_scheme(sys, &cfg, &defects_problem(h), |diag, d, v, p| {
        let zmax = (0..d.values().len() / 3).map(|i| d.vec3(i)[2].abs()).fold(0.0, f64::max);
        z_first.get_or_insert(zmax);
        z_last = zmax;
        if let Some(w) = csv.as_mut() {
            w.write(diag)?;
        }
        if let Some(dir) = out_dir {
            for (time, name) in targets {
                if (diag.t - time).abs() < 0.5 * k {
                    let path = dir.join(format!("{name}.vtk"));
                    vtk::write_state(&path, &eval, v, p, d)?;
                    snapshots.push(path);
                }
            }
        }
        Ok(())
    })
    .and_then(|rows| {
        if let Some(w) = csv.take() {
            w.finish()?;
        }
        Ok(DefectsRun {
            rows,
            initial_max_z: z_first.unwrap_or(0.0),
            final_max_z: z_last,
            snapshots,
        })
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn consistency_field(x: Point) -> Vec3 {
    [(2.0 * x[0]).sin() * x[1], (x[0] + x[1]).cos(), x[0] * x[0] - x[1]]
}

fn consistency_gradient(x: Point) -> Mat32 {
    [
        [2.0 * (2.0 * x[0]).cos() * x[1], (2.0 * x[0]).sin()],
        [-(x[0] + x[1]).sin(), -(x[0] + x[1]).sin()],
        [2.0 * x[0], -1.0],
    ]
}

fn admissible_square(n: usize) -> Result<FeSystem> {
    Ok(FeSystem::new(
        generate_square_mesh(n, SquarePattern::RightTriangle)?.set_cell_centers(CenterPolicy::Circumcenter),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub h: f64,
    pub value: f64,
    pub normalized: f64,
}

/// `||R grad(I0 phi) - grad phi||_2` for a fixed smooth field on admissible square meshes.
pub fn gradient_consistency_study(ns: &[usize]) -> Result<Vec<ConsistencyRow>> {
    ns.iter()
        .map(|&n| {
            let sys = admissible_square(n)?;
            let e = reconstructed_gradient_error(&sys, consistency_field, consistency_gradient)?;
            Ok(ConsistencyRow {
                n,
                h: sys.mesh().max_facet_length(),
                value: e,
                normalized: e,
            })
        })
        .collect()
}

/// Product-rule residual for a smooth unit field and a bump test function,
/// normalized by `sqrt(E_J) ||R grad d||`.
pub fn product_rule_study(ns: &[usize]) -> Result<Vec<ConsistencyRow>> {
    let unit = |x: Point| {
        let a = 1.3 * x[0] - 0.7 * x[1] * x[1];
        let b = 0.4 + 0.8 * x[1];
        [a.cos() * b.sin(), a.sin() * b.sin(), b.cos()]
    };
    let bump = |x: Point| {
        let s = (0.25 - x[0] * x[0]) * (0.25 - x[1] * x[1]) * 16.0;
        [s, -0.5 * s, 2.0 * s * x[0]]
    };
    ns.iter()
        .map(|&n| {
            let sys = admissible_square(n)?;
            let d = sys.interpolate_dg0(unit);
            let g = sys.interpolate_boundary_dg(unit);
            let res = discrete_product_rule_residual(&sys, &d, bump, &g)?;
            let (ela, ej) = dg_director_energies(&sys, &d, &g)?;
            Ok(ConsistencyRow {
                n,
                h: sys.mesh().max_facet_length(),
                value: res,
                normalized: res / (ej.sqrt() * (2.0 * ela).sqrt()),
            })
        })
        .collect()
}

/// Ring count and sector count of a generated annulus, for reports.
pub fn annulus_summary(h: f64) -> Result<(usize, usize, f64)> {
    let (nr, na) = annulus_resolution(h);
    Ok((nr, na, generate_annulus_mesh(nr, na)?.max_facet_length()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{radial, spiral_exact};
    use std::f64::consts::{FRAC_PI_2, LN_2, TAU};

    #[test]
    fn angle_error_of_exact_and_radial_fields() {
        let (nr, na) = annulus_resolution(0.05);
        let sys = FeSystem::new(generate_annulus_mesh(nr, na).unwrap());
        let exact = sys.interpolate_dg0(spiral_exact);
        // cell values sampled at centroids, compared at quadrature points: O(h)
        assert!(angle_error_l2(&sys, &exact).unwrap() < 0.1);
        let cg = sys.interpolate_cg1(spiral_exact);
        assert!(angle_error_l2(&sys, &cg).unwrap() < 5e-3);

        // 2 pi int_1^2 r log^2 r dr by composite Simpson
        let m = 2000;
        let f = |r: f64| r * r.ln().powi(2);
        let hs = 1.0 / m as f64;
        let simpson: f64 = (0..m)
            .map(|i| {
                let a = 1.0 + i as f64 * hs;
                hs / 6.0 * (f(a) + 4.0 * f(a + 0.5 * hs) + f(a + hs))
            })
            .sum();
        let oracle = FRAC_PI_2 / LN_2 * (TAU * simpson).sqrt();
        let rad = sys.interpolate_cg1(radial);
        let e = angle_error_l2(&sys, &rad).unwrap();
        assert!((e - oracle).abs() < 1e-2 * oracle, "{e} vs {oracle}");
    }

    #[test]
    fn zero_in_plane_director_is_an_error() {
        let sys = FeSystem::new(generate_annulus_mesh(1, 8).unwrap());
        let d = sys.interpolate_dg0(|_| [0.0, 0.0, 1.0]);
        assert!(matches!(angle_error_l2(&sys, &d), Err(Error::ZeroInPlaneDirector { .. })));
    }

    #[test]
    fn resolution_and_slope() {
        assert_eq!(annulus_resolution(0.1), (10, 63));
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|h| 3.0 * h * h).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn table_formats() {
        let t = ErrorTable {
            rows: vec![ErrorRow {
                scheme: SchemeKind::Dg,
                h: 0.1,
                k: 0.01,
                alpha: Some(0.005),
                projection: true,
                n_radial: 10,
                n_angular: 63,
                h_max: 0.2,
                error: 0.1,
            }],
        };
        let csv = t.to_csv();
        assert_eq!(csv.lines().nth(1).unwrap(), "dg,0.1,0.01,0.005,true,10,63,0.200000,1.000000e-1");
        assert_eq!(t.to_text().lines().count(), 2);
    }

    #[test]
    fn short_spiral_runs() {
        for scheme in [SchemeKind::Cg, SchemeKind::Dg] {
            let run = run_spiral(&SpiralSettings {
                t_end: 0.03,
                cadence: 1,
                ..SpiralSettings::new(scheme, 0.25, 0.01)
            })
            .unwrap();
            assert_eq!(run.rows.len(), 4);
            assert_eq!(run.series.len(), 4);
            assert!(run.series[3].1 < run.series[0].1);
        }
    }

    #[test]
    fn studies_decay() {
        let g = gradient_consistency_study(&[4, 8, 16]).unwrap();
        assert!(g[0].value > g[1].value && g[1].value > g[2].value);
        let p = product_rule_study(&[4, 8, 16]).unwrap();
        assert!(p[2].normalized < p[0].normalized);
    }
}
