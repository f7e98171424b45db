//! Continuous scheme: mass-lumped P1 director coupled to Taylor–Hood flow,
//! one linear solve per step followed by nodal normalization.

use std::sync::Arc;

use crate::config::{LiftKind, RunConfig};
use crate::coupled::{coupling_mismatch, DirectorBlocks};
use crate::diagnostics::StepDiagnostics;
use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSystem, Space};
use crate::flow::{add_navier_stokes, p2_tables, split_flow, stokes_project, FlowLayout};
use crate::linsolve::{LinearSystem, Solver, Symmetrizer, SystemBuilder};
use crate::mesh::check_weakly_acute;
use crate::ops_cg::{project_unit_sphere_cg, CgLaplacian};
use crate::problem::ProblemData;
use crate::vec3::{self, Vec3};

#[derive(Clone, Debug)]
pub struct CgState {
    pub step: usize,
    pub t: f64,
    pub v: FeFunction,
    pub p: FeFunction,
    /// Projected director.
    pub d: FeFunction,
    /// Predictor before projection.
    pub d_pred: FeFunction,
    /// `d - d_pred`
    pub r: FeFunction,
}

pub struct CgScheme {
    sys: FeSystem,
    config: RunConfig,
    lap: CgLaplacian,
    layout: FlowLayout,
    blocks: DirectorBlocks,
    symmetrizer: Arc<Symmetrizer>,
    solver: Solver,
    weakly_acute: bool,
    e0: f64,
}

/// Builds the scheme and the initial state: Stokes projection of the initial
/// velocity, nodal interpolation of the director with Dirichlet values on
/// boundary vertices, normalized.
pub fn cg_initialize(sys: FeSystem, config: &RunConfig, data: &ProblemData) -> Result<(CgScheme, CgState)> {
    config.validate()?;
    let mesh = sys.mesh();
    let mut d = sys.interpolate_cg1(&data.initial);
    for z in mesh.boundary_vertices() {
        d.set_vec3(z, (data.boundary)(mesh.vertex(z)));
    }
    let (d, _) = project_unit_sphere_cg(&d)?;
    let v = stokes_project(&sys, &data.velocity)?;
    let lap = match config.lift {
        LiftKind::Variational => CgLaplacian::new(&sys),
        LiftKind::Analytic => {
            let l = data.laplacian.as_ref().ok_or_else(|| {
                Error::InvalidParameter("analytic lift needs the Laplacian of the initial director".into())
            })?;
            CgLaplacian::with_analytic_lift(&sys, &data.initial, l)?
        }
    };
    let layout = FlowLayout::new(&sys);
    let blocks = DirectorBlocks::new(layout.n_vel, layout.len(), mesh.num_vertices());
    let symmetrizer = Arc::new(blocks.symmetrizer(&layout, |z| lap.is_interior(z), config.a, config.k));
    let weakly_acute = check_weakly_acute(mesh).0;
    let h = mesh.max_facet_length();
    if config.k > h.powf(4.0 / 3.0) {
        log::warn!("time step {} exceeds h^(4/3) = {:.3e}", config.k, h.powf(4.0 / 3.0));
    }
    let state = CgState {
        step: 0,
        t: 0.0,
        p: FeFunction::zeros(&sys, Space::P1Pressure),
        r: FeFunction::zeros(&sys, Space::Cg1Director),
        d_pred: d.clone(),
        v,
        d,
    };
    let mut scheme = CgScheme {
        sys,
        config: config.clone(),
        lap,
        layout,
        blocks,
        symmetrizer,
        solver: Solver::new(),
        weakly_acute,
        e0: 0.0,
    };
    scheme.e0 = scheme.total_energy(&state);
    Ok((scheme, state))
}

impl CgScheme {
    pub fn system(&self) -> &FeSystem {
        &self.sys
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn laplacian(&self) -> &CgLaplacian {
        &self.lap
    }

    pub fn initial_energy(&self) -> f64 {
        self.e0
    }

    pub fn weakly_acute(&self) -> bool {
        self.weakly_acute
    }

    /// `1/2 ||v||^2 + A/2 ||grad d||^2`
    pub fn total_energy(&self, s: &CgState) -> f64 {
        0.5 * self.sys.p2_norms_sq(&s.v).0 + 0.5 * self.config.a * self.sys.cg1_dirichlet_sq(&s.d)
    }

    /// Assembles the coupled linear system of one step from state `s`.
    /// Unknowns: velocity, pressure, multiplier, predictor, its Laplacian.
    pub fn assemble(&self, s: &CgState) -> Result<LinearSystem> {
        let sys = &self.sys;
        let mesh = sys.mesh();
        let cfg = &self.config;
        let bl = &self.blocks;
        let (k, a, v_el) = (cfg.k, cfg.a, cfg.v_el);
        let nv = mesh.num_vertices();
        let mut b = SystemBuilder::with_capacity(bl.len(), 120 * mesh.num_cells() + 60 * nv);
        add_navier_stokes(sys, &self.layout, &mut b, &s.v, Some(&s.v), k, cfg.mu);

        let d = &s.d;
        let tables = p2_tables(sys);
        let rule = sys.rule();
        for t in 0..mesh.num_cells() {
            let verts = mesh.cell(t);
            let dofs = sys.p2_cell_dofs(t);
            let area = mesh.cell_area(t);
            let g = sys.cg1_gradient(d, t);
            let dv = verts.map(|z| d.vec3(z));
            // c[i][l][a] = int psi_i phi_a (w_l x d_a), w_l = d x (grad d e_l)
            let mut c = [[[[0.0; 3]; 3]; 2]; 6];
            for (q, (lam, wq)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let wt = wq * area;
                let dx = (0..3).fold([0.0; 3], |acc, i| vec3::add(acc, vec3::scale(lam[i], dv[i])));
                for l in 0..2 {
                    let wl = vec3::cross(dx, [g[0][l], g[1][l], g[2][l]]);
                    for (ai, da) in dv.iter().enumerate() {
                        let e = vec3::cross(wl, *da);
                        for i in 0..6 {
                            let s = wt * tables[q][i] * lam[ai];
                            for m in 0..3 {
                                c[i][l][ai][m] += s * e[m];
                            }
                        }
                    }
                }
            }
            for i in 0..6 {
                for l in 0..2 {
                    let vrow = self.layout.velocity(dofs[i], l);
                    for (ai, &z) in verts.iter().enumerate() {
                        for m in 0..3 {
                            let cv = c[i][l][ai][m];
                            b.add(vrow, bl.lap(z, m), a * v_el * cv);
                            b.add(bl.dir(z, m), vrow, v_el * cv);
                        }
                    }
                }
            }
        }

        for z in 0..nv {
            let dz = d.vec3(z);
            if self.lap.is_interior(z) {
                let w = self.lap.weight(z);
                let src = self.lap.source(z);
                let n2 = vec3::dot(dz, dz);
                for m in 0..3 {
                    let row = bl.dir(z, m);
                    b.add(row, row, w / k);
                    b.add_rhs(row, w / k * dz[m]);
                    for n in 0..3 {
                        let p = if m == n { n2 } else { 0.0 } - dz[m] * dz[n];
                        b.add(row, bl.lap(z, n), -a * w * p);
                    }
                    let lrow = bl.lap(z, m);
                    b.add(lrow, lrow, w);
                    b.add_rhs(lrow, src[m]);
                }
                let (cols, vals) = self.lap.stiffness().row(z);
                for (&y, &kv) in cols.iter().zip(vals) {
                    for m in 0..3 {
                        b.add(bl.lap(z, m), bl.dir(y, m), kv);
                    }
                }
            } else {
                let lb = self.lap.boundary_value(z);
                for m in 0..3 {
                    b.fix(bl.dir(z, m), dz[m]);
                    b.fix(bl.lap(z, m), lb[m]);
                }
            }
        }
        Ok(b.build()?.with_tolerance(cfg.solver_tol)
            .with_policy(cfg.solver)
            .with_symmetrizer(self.symmetrizer.clone()))
    }

    fn director_block(&self, x: &[f64], offset: usize) -> FeFunction {
        let n = 3 * self.sys.mesh().num_vertices();
        FeFunction::new(&self.sys, Space::Cg1Director, x[offset..offset + n].to_vec()).expect("block length")
    }

    /// Diagnostics of a state without a preceding step.
    pub fn initial_diagnostics(&self, s: &CgState) -> StepDiagnostics {
        let e_kin = 0.5 * self.sys.p2_norms_sq(&s.v).0;
        let e_ela = 0.5 * self.sys.cg1_dirichlet_sq(&s.d);
        StepDiagnostics {
            step: s.step,
            t: s.t,
            e_kin,
            e_ela,
            e_total: e_kin + self.config.a * e_ela,
            norm_dev: max_norm_deviation(&s.d),
            ..Default::default()
        }
    }

    /// One step: assemble, solve, normalize, measure.
    pub fn step(&mut self, s: &CgState) -> Result<(CgState, StepDiagnostics)> {
        let linear = self.assemble(s)?;
        let sol = self.solver.solve(&linear)?;
        let x = &sol.x;
        let (v, p) = split_flow(&self.sys, &self.layout, x)?;
        let d_pred = self.director_block(x, self.blocks.dir);
        let lap = self.director_block(x, self.blocks.lap);
        let (d, r) = if self.config.projection {
            project_unit_sphere_cg(&d_pred)?
        } else {
            (d_pred.clone(), FeFunction::zeros(&self.sys, Space::Cg1Director))
        };
        let next = CgState {
            step: s.step + 1,
            t: (s.step + 1) as f64 * self.config.k,
            v,
            p,
            d,
            d_pred,
            r,
        };
        let diag = self.measure(s, &next, &lap, &linear, x, sol.residual)?;
        Ok((next, diag))
    }

    fn measure(
        &self,
        prev: &CgState,
        s: &CgState,
        lap: &FeFunction,
        linear: &LinearSystem,
        x: &[f64],
        solver_res: f64,
    ) -> Result<StepDiagnostics> {
        let sys = &self.sys;
        let cfg = &self.config;
        let nv = sys.mesh().num_vertices();
        let mut base = self.initial_diagnostics(s);
        let (_, grad_v) = sys.p2_norms_sq(&s.v);
        let mut dv = s.v.clone();
        for (x, y) in dv.values_mut().iter_mut().zip(prev.v.values()) {
            *x -= y;
        }
        let mut dxl = FeFunction::zeros(sys, Space::Cg1Director);
        let mut incr = FeFunction::zeros(sys, Space::Cg1Director);
        let mut orth: f64 = 0.0;
        let mut l1 = 0.0;
        for z in 0..nv {
            let dz = prev.d.vec3(z);
            let pz = s.d_pred.vec3(z);
            dxl.set_vec3(z, vec3::cross(dz, lap.vec3(z)));
            incr.set_vec3(z, vec3::sub(pz, dz));
            orth = orth.max(vec3::dot(vec3::sub(pz, dz), dz).abs() / vec3::norm(pz).max(1.0));
            l1 += sys.lumped_weight(z) * vec3::norm(s.r.vec3(z));
        }
        base.visc_diss = cfg.k * cfg.mu * grad_v;
        base.dir_diss = cfg.k * cfg.a * cfg.a * sys.cg1_l2_norm_sq(&dxl);
        base.incr_diss = 0.5 * cfg.a * sys.cg1_dirichlet_sq(&incr);
        base.kin_incr = 0.5 * sys.p2_norms_sq(&dv).0;
        base.energy_excess = base.e_total + base.dissipation() - self.total_energy(prev);
        base.projection_gain = 0.5 * cfg.a * sys.cg1_dirichlet_sq(&s.d_pred) - cfg.a * base.e_ela;
        base.orth_res = orth;
        base.proj_err_l1 = l1;
        base.solver_res = solver_res;
        base.coupling_res = coupling_mismatch(&linear.matrix, &self.blocks, x, cfg.a);
        self.check(&base)?;
        Ok(base)
    }

    fn check(&self, d: &StepDiagnostics) -> Result<()> {
        let fail = |message: String| {
            Err(Error::InvariantViolation {
                step: d.step,
                message,
            })
        };
        let scale = self.e0.abs().max(1.0);
        if self.config.projection && self.weakly_acute && d.projection_gain < -1e-12 * scale {
            return fail(format!("projection raised the Dirichlet energy by {:e}", -d.projection_gain));
        }
        if self.config.strict {
            if self.config.projection && d.norm_dev > 1e-12 {
                return fail(format!("nodal norm deviation {:e}", d.norm_dev));
            }
            if self.config.projection && d.energy_excess > 1e-9 * scale {
                return fail(format!("energy inequality violated by {:e}", d.energy_excess));
            }
        }
        Ok(())
    }

    /// Steps to `T_end`, calling `observe` on the initial and every later state.
    pub fn run(
        &mut self,
        state: CgState,
        mut observe: impl FnMut(&CgState, &StepDiagnostics) -> Result<()>,
    ) -> Result<(CgState, Vec<StepDiagnostics>)> {
        let first = self.initial_diagnostics(&state);
        observe(&state, &first)?;
        let mut rows = vec![first];
        let mut state = state;
        for _ in 0..self.config.num_steps() {
            let (next, diag) = self.step(&state)?;
            observe(&next, &diag)?;
            rows.push(diag);
            state = next;
        }
        Ok((state, rows))
    }
}

pub fn max_norm_deviation(d: &FeFunction) -> f64 {
    (0..d.values().len() / 3).map(|i| (vec3::norm(d.vec3(i)) - 1.0).abs()).fold(0.0, f64::max)
}

/// Builds and runs the continuous scheme on `sys` from `data`.
pub fn cg_run(
    sys: FeSystem,
    config: &RunConfig,
    data: &ProblemData,
    observe: impl FnMut(&CgState, &StepDiagnostics) -> Result<()>,
) -> Result<(CgState, Vec<StepDiagnostics>)> {
    let (mut scheme, state) = cg_initialize(sys, config, data)?;
    scheme.run(state, observe)
}

/// Nodal values of a director field as plain vectors.
pub fn nodal_values(d: &FeFunction) -> Vec<Vec3> {
    (0..d.values().len() / 3).map(|i| d.vec3(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MeshConfig, MeshShape, SchemeKind};
    use crate::mesh::{generate_square_mesh, CenterPolicy, SquarePattern};
    use crate::problem::ProblemData;

    fn square_config(n: usize, k: f64, t_end: f64) -> RunConfig {
        RunConfig::new(
            SchemeKind::Cg,
            MeshConfig {
                shape: MeshShape::Square {
                    n,
                    pattern: SquarePattern::RightTriangle,
                },
                centers: CenterPolicy::Barycenter,
            },
            k,
            t_end,
        )
    }

    fn sys(n: usize) -> FeSystem {
        FeSystem::new(generate_square_mesh(n, SquarePattern::RightTriangle).unwrap())
    }

    #[test]
    fn constant_director_is_a_fixed_point() {
        let cfg = square_config(4, 0.1, 0.3);
        let c = [0.0, 0.6, 0.8];
        let data = ProblemData::from_director(move |_| c);
        let (mut scheme, s0) = cg_initialize(sys(4), &cfg, &data).unwrap();
        assert!(s0.v.values().iter().all(|&x| x == 0.0));
        let linear = scheme.assemble(&s0).unwrap();
        // candidate: zero flow, predictor equal to d0, zero Laplacian
        let mut x = vec![0.0; linear.rhs.len()];
        for z in 0..scheme.system().mesh().num_vertices() {
            for m in 0..3 {
                x[scheme.blocks.dir(z, m)] = c[m];
            }
        }
        assert!(linear.residual_vector(&x).iter().all(|r| r.abs() < 1e-14));
        let (s1, diag) = scheme.step(&s0).unwrap();
        assert!(s1.v.values().iter().all(|x| x.abs() < 1e-12));
        assert!(vec3::norm(vec3::sub(s1.d.vec3(7), c)) < 1e-12);
        assert!(diag.energy_excess.abs() < 1e-12);
    }

    #[test]
    fn zero_steps_when_t_end_below_k() {
        let cfg = square_config(2, 0.1, 0.05);
        let (_, rows) = cg_run(sys(2), &cfg, &ProblemData::from_director(|_| [1.0, 0.0, 0.0]), |_, _| Ok(())).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t, 0.0);
    }

    #[test]
    fn energy_law_orthogonality_and_coupling_on_a_twisted_field() {
        let cfg = square_config(6, 0.01, 0.05);
        let data = ProblemData::from_director(|x: [f64; 2]| {
            let a = 3.0 * x[0] + 2.0 * x[1] * x[1];
            [a.cos(), a.sin(), 0.3 * (5.0 * x[0]).sin()]
        });
        let (mut scheme, s0) = cg_initialize(sys(6), &cfg, &data).unwrap();
        assert!(scheme.weakly_acute());
        let e0 = scheme.initial_energy();
        let mut prev = e0;
        let (_, rows) = scheme
            .run(s0, |_, d| {
                assert!(d.e_total <= prev + 1e-9 * e0);
                prev = d.e_total;
                Ok(())
            })
            .unwrap();
        for r in &rows[1..] {
            assert!(r.energy_excess <= 1e-9 * e0, "{r:?}");
            assert!(r.norm_dev <= 1e-12);
            assert!(r.orth_res <= 1e-10);
            assert!(r.coupling_res <= 1e-10);
            assert!(r.e_kin > 0.0 && r.visc_diss > 0.0);
        }
    }

    #[test]
    fn analytic_lift_needs_laplacian() {
        let mut cfg = square_config(2, 0.1, 0.1);
        cfg.lift = LiftKind::Analytic;
        let data = ProblemData::from_director(|_| [1.0, 0.0, 0.0]);
        assert!(matches!(cg_initialize(sys(2), &cfg, &data), Err(Error::InvalidParameter(_))));
        let data = data.with_laplacian(|_| [0.0; 3]);
        assert!(cg_initialize(sys(2), &cfg, &data).is_ok());
    }

    #[test]
    fn degenerate_initial_director() {
        let cfg = square_config(2, 0.1, 0.1);
        let data = ProblemData::from_director(|_| [0.0; 3]);
        assert!(matches!(
            cg_initialize(sys(2), &cfg, &data),
            Err(Error::DegenerateDirector { location: "vertex", .. })
        ));
    }
}
