//! Taylor–Hood P2–P1 discretization of the momentum and incompressibility
//! equations: time derivative, viscosity, skew-symmetric convection and the
//! pressure saddle point with a mean-zero multiplier.

use crate::error::Result;
use crate::fespace::{p2_basis, p2_gradients, FeFunction, FeSystem, Space};
use std::sync::Arc;

use crate::linsolve::{Solver, Symmetrizer, SystemBuilder, DEFAULT_TOLERANCE};
use crate::mesh::Point;

/// Offsets of the flow unknowns inside a coupled system: velocity, pressure,
/// then one multiplier enforcing zero pressure mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowLayout {
    pub n_vel: usize,
    pub n_p: usize,
    pub pressure: usize,
    pub multiplier: usize,
}

impl FlowLayout {
    pub fn new(sys: &FeSystem) -> Self {
        let n_vel = sys.n_dofs(Space::P2Velocity);
        let n_p = sys.n_dofs(Space::P1Pressure);
        FlowLayout {
            n_vel,
            n_p,
            pressure: n_vel,
            multiplier: n_vel + n_p,
        }
    }

    /// Number of flow unknowns; director unknowns start here.
    pub fn len(&self) -> usize {
        self.multiplier + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Pivot signs of the flow unknowns, padded with `+1` up to `len`:
    /// positive velocity, negative pressure. The multiplier pivot takes
    /// either sign depending on the elimination order.
    pub fn symmetrizer(&self, len: usize) -> Symmetrizer {
        let mut signs = vec![1i8; len];
        signs[self.pressure..self.multiplier].fill(-1);
        signs[self.multiplier] = 0;
        Symmetrizer::new(signs)
    }

    pub fn velocity(&self, node: usize, l: usize) -> usize {
        2 * node + l
    }
}

/// Reference values of the P2 basis at the quadrature points of `sys`.
pub fn p2_tables(sys: &FeSystem) -> Vec<[f64; 6]> {
    sys.rule().points.iter().map(|l| p2_basis(*l)).collect()
}

/// `int_T psi_i` for the six P2 basis functions of cell `t`.
pub fn p2_cell_integrals(area: f64) -> [f64; 6] {
    let e = area / 3.0;
    [0.0, 0.0, 0.0, e, e, e]
}

/// Adds the momentum rows for
/// `(v - v_old)/k + mu (grad v, grad a) + ((w . grad) v, a) + 1/2 ((div w) v, a) - (p, div a)`,
/// the incompressibility rows `-(q, div v)` and the mean-zero multiplier.
/// Pass `k = f64::INFINITY` to drop the time derivative.
pub fn add_navier_stokes(
    sys: &FeSystem,
    layout: &FlowLayout,
    b: &mut SystemBuilder,
    v_old: &FeFunction,
    w: Option<&FeFunction>,
    k: f64,
    mu: f64,
) {
    let mesh = sys.mesh();
    let tables = p2_tables(sys);
    let rule = sys.rule();
    let inv_k = if k.is_finite() { 1.0 / k } else { 0.0 };
    for t in 0..mesh.num_cells() {
        let dofs = sys.p2_cell_dofs(t);
        let g = mesh.barycentric_gradients(t);
        let area = mesh.cell_area(t);
        let verts = mesh.cell(t);
        let mut a = [[0.0; 6]; 6];
        let mut mass = [[0.0; 6]; 6];
        // div[z][j][l] = int lambda_z d_l psi_j
        let mut div = [[[0.0; 2]; 6]; 3];
        for (q, (l, wq)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let wt = wq * area;
            let phi = &tables[q];
            let dphi = p2_gradients(*l, &g);
            let (wv, wdiv) = match w {
                Some(w) => {
                    let mut val = [0.0; 2];
                    let mut dv = 0.0;
                    for i in 0..6 {
                        let c = w.vec2(dofs[i]);
                        val[0] += c[0] * phi[i];
                        val[1] += c[1] * phi[i];
                        dv += c[0] * dphi[i][0] + c[1] * dphi[i][1];
                    }
                    (val, dv)
                }
                None => ([0.0; 2], 0.0),
            };
            for i in 0..6 {
                for j in 0..6 {
                    let m = phi[i] * phi[j];
                    let s = dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1];
                    let conv = (wv[0] * dphi[j][0] + wv[1] * dphi[j][1]) * phi[i] + 0.5 * wdiv * phi[j] * phi[i];
                    mass[i][j] += wt * m;
                    a[i][j] += wt * (inv_k * m + mu * s + conv);
                }
            }
            for z in 0..3 {
                for j in 0..6 {
                    div[z][j][0] += wt * l[z] * dphi[j][0];
                    div[z][j][1] += wt * l[z] * dphi[j][1];
                }
            }
        }
        for i in 0..6 {
            for l in 0..2 {
                let row = layout.velocity(dofs[i], l);
                let mut rhs = 0.0;
                for j in 0..6 {
                    b.add(row, layout.velocity(dofs[j], l), a[i][j]);
                    rhs += inv_k * mass[i][j] * v_old.values()[layout.velocity(dofs[j], l)];
                }
                b.add_rhs(row, rhs);
                for z in 0..3 {
                    b.add(row, layout.pressure + verts[z], -div[z][i][l]);
                    b.add(layout.pressure + verts[z], row, -div[z][i][l]);
                }
            }
        }
    }
    for (z, &wz) in sys.lumped_weights().iter().enumerate() {
        b.add(layout.pressure + z, layout.multiplier, wz);
        b.add(layout.multiplier, layout.pressure + z, wz);
    }
    // keeps the multiplier diagonal structurally present
    b.add(layout.multiplier, layout.multiplier, 0.0);
    for node in 0..sys.n_p2() {
        if sys.is_p2_boundary(node) {
            b.fix(layout.velocity(node, 0), 0.0);
            b.fix(layout.velocity(node, 1), 0.0);
        }
    }
}

/// Splits a flow solution into velocity and pressure functions.
pub fn split_flow(sys: &FeSystem, layout: &FlowLayout, x: &[f64]) -> Result<(FeFunction, FeFunction)> {
    let v = FeFunction::new(sys, Space::P2Velocity, x[..layout.n_vel].to_vec())?;
    let p = FeFunction::new(sys, Space::P1Pressure, x[layout.pressure..layout.multiplier].to_vec())?;
    Ok((v, p))
}

/// Discrete Stokes-type projection onto discretely divergence-free P2 fields
/// with zero boundary values: `(Q v, a) = (v, a)` for all such `a`.
pub fn stokes_project(sys: &FeSystem, v: impl Fn(Point) -> [f64; 2]) -> Result<FeFunction> {
    let layout = FlowLayout::new(sys);
    let mut b = SystemBuilder::new(layout.len());
    let zero = FeFunction::zeros(sys, Space::P2Velocity);
    // mass matrix only: unit time step, no viscosity, no convection, zero old state
    add_navier_stokes(sys, &layout, &mut b, &zero, None, 1.0, 0.0);
    let mesh = sys.mesh();
    let tables = p2_tables(sys);
    for t in 0..mesh.num_cells() {
        let dofs = sys.p2_cell_dofs(t);
        let area = mesh.cell_area(t);
        for (q, (l, wq)) in sys.rule().points.iter().zip(&sys.rule().weights).enumerate() {
            let f = v(mesh.map_point(t, *l));
            for i in 0..6 {
                for c in 0..2 {
                    b.add_rhs(layout.velocity(dofs[i], c), wq * area * tables[q][i] * f[c]);
                }
            }
        }
    }
    let system = b
        .build()?
        .with_tolerance(DEFAULT_TOLERANCE)
        .with_symmetrizer(Arc::new(layout.symmetrizer(layout.len())));
    let sol = Solver::new().solve(&system)?;
    Ok(split_flow(sys, &layout, &sol.x)?.0)
}

/// `((w . grad) u, z) + 1/2 ((div w) u, z)` by quadrature.
pub fn convection_form(sys: &FeSystem, w: &FeFunction, u: &FeFunction, z: &FeFunction) -> f64 {
    let mesh = sys.mesh();
    let mut total = 0.0;
    for t in 0..mesh.num_cells() {
        let dofs = sys.p2_cell_dofs(t);
        let g = mesh.barycentric_gradients(t);
        let area = mesh.cell_area(t);
        for (l, wq) in sys.rule().points.iter().zip(&sys.rule().weights) {
            let phi = p2_basis(*l);
            let dphi = p2_gradients(*l, &g);
            let mut wv = [0.0; 2];
            let mut wdiv = 0.0;
            let mut uv = [0.0; 2];
            let mut ug = [[0.0; 2]; 2];
            let mut zv = [0.0; 2];
            for i in 0..6 {
                let (cw, cu, cz) = (w.vec2(dofs[i]), u.vec2(dofs[i]), z.vec2(dofs[i]));
                for c in 0..2 {
                    wv[c] += cw[c] * phi[i];
                    uv[c] += cu[c] * phi[i];
                    zv[c] += cz[c] * phi[i];
                    ug[c][0] += cu[c] * dphi[i][0];
                    ug[c][1] += cu[c] * dphi[i][1];
                }
                wdiv += cw[0] * dphi[i][0] + cw[1] * dphi[i][1];
            }
            let mut s = 0.0;
            for c in 0..2 {
                s += (wv[0] * ug[c][0] + wv[1] * ug[c][1]) * zv[c] + 0.5 * wdiv * uv[c] * zv[c];
            }
            total += wq * area * s;
        }
    }
    total
}

/// `||div v||_{L^2}` of a P2 field, the size of its divergence.
pub fn divergence_l2(sys: &FeSystem, v: &FeFunction) -> f64 {
    let mesh = sys.mesh();
    let mut total = 0.0;
    for t in 0..mesh.num_cells() {
        let dofs = sys.p2_cell_dofs(t);
        let g = mesh.barycentric_gradients(t);
        for (l, wq) in sys.rule().points.iter().zip(&sys.rule().weights) {
            let dphi = p2_gradients(*l, &g);
            let d: f64 = (0..6).map(|i| {
                let c = v.vec2(dofs[i]);
                c[0] * dphi[i][0] + c[1] * dphi[i][1]
            }).sum();
            total += wq * mesh.cell_area(t) * d * d;
        }
    }
    total.sqrt()
}
