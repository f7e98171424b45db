//! Discontinuous scheme: DG0 director with the stabilized lifted Laplacian
//! coupled to Taylor–Hood flow, followed by cellwise normalization.

use std::sync::Arc;

use crate::config::RunConfig;
use crate::coupled::{coupling_mismatch, DirectorBlocks};
use crate::diagnostics::StepDiagnostics;
use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSystem, Space};
use crate::flow::{add_navier_stokes, p2_cell_integrals, split_flow, stokes_project, FlowLayout};
use crate::linsolve::{LinearSystem, Solver, Symmetrizer, SystemBuilder};
use crate::mesh::check_non_obtuse;
use crate::ops_dg::{dg_director_energies, project_unit_sphere_dg, reconstructed_gradient_cells, DgLaplacian};
use crate::problem::ProblemData;
use crate::scheme_cg::max_norm_deviation;
use crate::vec3::{self, Vec3};

#[derive(Clone, Debug)]
pub struct DgState {
    pub step: usize,
    pub t: f64,
    pub v: FeFunction,
    pub p: FeFunction,
    pub d: FeFunction,
    pub d_pred: FeFunction,
    pub r: FeFunction,
}

pub struct DgScheme {
    sys: FeSystem,
    config: RunConfig,
    boundary: Vec<Vec3>,
    lap: DgLaplacian,
    layout: FlowLayout,
    blocks: DirectorBlocks,
    symmetrizer: Arc<Symmetrizer>,
    solver: Solver,
    non_obtuse: bool,
    e0: f64,
}

/// Stokes projection of the initial velocity, cell-center interpolation of
/// the director and facet-barycenter interpolation of its boundary data.
pub fn dg_initialize(sys: FeSystem, config: &RunConfig, data: &ProblemData) -> Result<(DgScheme, DgState)> {
    config.validate()?;
    if !(config.alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty alpha = {} must be positive", config.alpha)));
    }
    let (d, _) = project_unit_sphere_dg(&sys.interpolate_dg0(&data.initial))?;
    let raw = sys.interpolate_boundary_dg(&data.boundary);
    let mut boundary = Vec::with_capacity(raw.len());
    for (i, g) in raw.iter().enumerate() {
        let n = vec3::norm(*g);
        if !(n >= crate::ops_cg::DEGENERACY_THRESHOLD) {
            return Err(Error::DegenerateDirector {
                location: "boundary facet",
                index: i,
                norm: n,
            });
        }
        boundary.push(vec3::scale(1.0 / n, *g));
    }
    let v = stokes_project(&sys, &data.velocity)?;
    let lap = DgLaplacian::new(&sys, config.alpha, &boundary)?;
    let layout = FlowLayout::new(&sys);
    let blocks = DirectorBlocks::new(layout.n_vel, layout.len(), sys.mesh().num_cells());
    let symmetrizer = Arc::new(blocks.symmetrizer(&layout, |_| true, config.a, config.k));
    let non_obtuse = check_non_obtuse(sys.mesh());
    let state = DgState {
        step: 0,
        t: 0.0,
        p: FeFunction::zeros(&sys, Space::P1Pressure),
        r: FeFunction::zeros(&sys, Space::Dg0Director),
        d_pred: d.clone(),
        v,
        d,
    };
    let mut scheme = DgScheme {
        sys,
        config: config.clone(),
        boundary,
        lap,
        layout,
        blocks,
        symmetrizer,
        solver: Solver::new(),
        non_obtuse,
        e0: 0.0,
    };
    scheme.e0 = scheme.energies(&state.v, &state.d)?.2;
    Ok((scheme, state))
}

impl DgScheme {
    pub fn system(&self) -> &FeSystem {
        &self.sys
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn boundary_data(&self) -> &[Vec3] {
        &self.boundary
    }

    pub fn laplacian(&self) -> &DgLaplacian {
        &self.lap
    }

    pub fn initial_energy(&self) -> f64 {
        self.e0
    }

    pub fn non_obtuse(&self) -> bool {
        self.non_obtuse
    }

    /// `(E_kin, E_ela, E_kin + A (E_ela + alpha E_J), E_J)`
    fn energies(&self, v: &FeFunction, d: &FeFunction) -> Result<(f64, f64, f64, f64)> {
        let e_kin = 0.5 * self.sys.p2_norms_sq(v).0;
        let (e_ela, e_j) = dg_director_energies(&self.sys, d, &self.boundary)?;
        Ok((e_kin, e_ela, e_kin + self.config.a * (e_ela + self.config.alpha * e_j), e_j))
    }

    pub fn assemble(&self, s: &DgState) -> Result<LinearSystem> {
        let sys = &self.sys;
        let mesh = sys.mesh();
        let cfg = &self.config;
        let bl = &self.blocks;
        let (k, a, v_el) = (cfg.k, cfg.a, cfg.v_el);
        let nc = mesh.num_cells();
        let mut b = SystemBuilder::with_capacity(bl.len(), 150 * nc);
        add_navier_stokes(sys, &self.layout, &mut b, &s.v, Some(&s.v), k, cfg.mu);

        let grads = reconstructed_gradient_cells(sys, &s.d, Some(&self.boundary))?;
        for t in 0..nc {
            let dt = s.d.vec3(t);
            let area = mesh.cell_area(t);
            let dofs = sys.p2_cell_dofs(t);
            let ints = p2_cell_integrals(area);
            for l in 0..2 {
                let wl = vec3::cross(dt, [grads[t][0][l], grads[t][1][l], grads[t][2][l]]);
                let e = vec3::cross(wl, dt);
                for i in 3..6 {
                    let vrow = self.layout.velocity(dofs[i], l);
                    for m in 0..3 {
                        let cv = ints[i] * e[m];
                        b.add(vrow, bl.lap(t, m), a * v_el * cv);
                        b.add(bl.dir(t, m), vrow, v_el * cv);
                    }
                }
            }
            let n2 = vec3::dot(dt, dt);
            let src = self.lap.source(t);
            for m in 0..3 {
                let row = bl.dir(t, m);
                b.add(row, row, area / k);
                b.add_rhs(row, area / k * dt[m]);
                for n in 0..3 {
                    let p = if m == n { n2 } else { 0.0 } - dt[m] * dt[n];
                    b.add(row, bl.lap(t, n), -a * area * p);
                }
                let lrow = bl.lap(t, m);
                b.add(lrow, lrow, area);
                b.add_rhs(lrow, src[m]);
            }
            let (cols, vals) = self.lap.matrix().row(t);
            for (&c, &sv) in cols.iter().zip(vals) {
                for m in 0..3 {
                    b.add(bl.lap(t, m), bl.dir(c, m), sv);
                }
            }
        }
        Ok(b.build()?.with_tolerance(cfg.solver_tol)
            .with_policy(cfg.solver)
            .with_symmetrizer(self.symmetrizer.clone()))
    }

    fn director_block(&self, x: &[f64], offset: usize) -> FeFunction {
        let n = 3 * self.sys.mesh().num_cells();
        FeFunction::new(&self.sys, Space::Dg0Director, x[offset..offset + n].to_vec()).expect("block length")
    }

    pub fn initial_diagnostics(&self, s: &DgState) -> Result<StepDiagnostics> {
        let (e_kin, e_ela, e_total, e_j) = self.energies(&s.v, &s.d)?;
        Ok(StepDiagnostics {
            step: s.step,
            t: s.t,
            e_kin,
            e_ela,
            e_total,
            norm_dev: max_norm_deviation(&s.d),
            e_j: Some(e_j),
            alpha: Some(self.config.alpha),
            ..Default::default()
        })
    }

    pub fn step(&mut self, s: &DgState) -> Result<(DgState, StepDiagnostics)> {
        let linear = self.assemble(s)?;
        let sol = self.solver.solve(&linear)?;
        let x = &sol.x;
        let (v, p) = split_flow(&self.sys, &self.layout, x)?;
        let d_pred = self.director_block(x, self.blocks.dir);
        let lap = self.director_block(x, self.blocks.lap);
        let (d, r) = if self.config.projection {
            project_unit_sphere_dg(&d_pred)?
        } else {
            (d_pred.clone(), FeFunction::zeros(&self.sys, Space::Dg0Director))
        };
        let next = DgState {
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
        prev: &DgState,
        s: &DgState,
        lap: &FeFunction,
        linear: &LinearSystem,
        x: &[f64],
        solver_res: f64,
    ) -> Result<StepDiagnostics> {
        let sys = &self.sys;
        let mesh = sys.mesh();
        let cfg = &self.config;
        let mut base = self.initial_diagnostics(s)?;
        let (_, grad_v) = sys.p2_norms_sq(&s.v);
        let mut dv = s.v.clone();
        for (x, y) in dv.values_mut().iter_mut().zip(prev.v.values()) {
            *x -= y;
        }
        let mut incr = FeFunction::zeros(sys, Space::Dg0Director);
        let mut orth: f64 = 0.0;
        let mut l1 = 0.0;
        let mut dxl = 0.0;
        for t in 0..mesh.num_cells() {
            let area = mesh.cell_area(t);
            let dt = prev.d.vec3(t);
            let pt = s.d_pred.vec3(t);
            let c = vec3::cross(dt, lap.vec3(t));
            dxl += area * vec3::dot(c, c);
            incr.set_vec3(t, vec3::sub(pt, dt));
            orth = orth.max(vec3::dot(vec3::sub(pt, dt), dt).abs() / vec3::norm(pt).max(1.0));
            l1 += area * vec3::norm(s.r.vec3(t));
        }
        base.visc_diss = cfg.k * cfg.mu * grad_v;
        base.dir_diss = cfg.k * cfg.a * cfg.a * dxl;
        base.incr_diss = 0.5 * cfg.a * self.lap.form(&incr, &incr);
        base.kin_incr = 0.5 * sys.p2_norms_sq(&dv).0;
        let prev_total = self.energies(&prev.v, &prev.d)?.2;
        base.energy_excess = base.e_total + base.dissipation() - prev_total;
        let (pred_ela, pred_j) = dg_director_energies(sys, &s.d_pred, &self.boundary)?;
        let e_j = base.e_j.unwrap_or(0.0);
        base.projection_gain = cfg.a * ((pred_ela - base.e_ela) + cfg.alpha * (pred_j - e_j));
        base.orth_res = orth;
        base.proj_err_l1 = l1;
        base.solver_res = solver_res;
        base.coupling_res = coupling_mismatch(&linear.matrix, &self.blocks, x, cfg.a);
        let scale = self.e0.abs().max(1.0);
        let fail = |message: String| {
            Err(Error::InvariantViolation {
                step: base.step,
                message,
            })
        };
        if cfg.projection && self.non_obtuse {
            let slack = 1e-12 * scale;
            if pred_ela < base.e_ela - slack || pred_j < e_j - slack {
                return fail(format!(
                    "projection raised the director energies: elastic {:e}, jump {:e}",
                    base.e_ela - pred_ela,
                    e_j - pred_j
                ));
            }
        }
        if cfg.strict && cfg.projection {
            if base.norm_dev > 1e-12 {
                return fail(format!("cellwise norm deviation {:e}", base.norm_dev));
            }
            if base.energy_excess > 1e-9 * scale {
                return fail(format!("energy inequality violated by {:e}", base.energy_excess));
            }
        }
        Ok(base)
    }

    pub fn run(
        &mut self,
        state: DgState,
        mut observe: impl FnMut(&DgState, &StepDiagnostics) -> Result<()>,
    ) -> Result<(DgState, Vec<StepDiagnostics>)> {
        let first = self.initial_diagnostics(&state)?;
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

pub fn dg_run(
    sys: FeSystem,
    config: &RunConfig,
    data: &ProblemData,
    observe: impl FnMut(&DgState, &StepDiagnostics) -> Result<()>,
) -> Result<(DgState, Vec<StepDiagnostics>)> {
    let (mut scheme, state) = dg_initialize(sys, config, data)?;
    scheme.run(state, observe)
}
