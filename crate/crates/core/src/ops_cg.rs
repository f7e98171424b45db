//! Operators of the continuous scheme: the mass-lumped discrete Laplacian,
//! `L^2` projection onto CG1, nodal normalization and the CG energies.

use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSystem, Space};
use crate::linsolve::{LinearSystem, Solver, SparseMatrix, SystemBuilder};
use crate::mesh::Point;
use crate::vec3::{self, Vec3};

/// Threshold below which a director value cannot be normalized.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Scalar P1 stiffness matrix `int grad phi_z . grad phi_y`.
pub fn p1_stiffness(sys: &FeSystem) -> SparseMatrix {
    let mesh = sys.mesh();
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(9 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let g = mesh.barycentric_gradients(c);
        let v = mesh.cell(c);
        let a = mesh.cell_area(c);
        for i in 0..3 {
            for j in 0..3 {
                t.push((v[i], v[j], a * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("indices come from the mesh")
}

/// Scalar consistent P1 mass matrix.
pub fn p1_mass(sys: &FeSystem) -> SparseMatrix {
    let mesh = sys.mesh();
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(9 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let v = mesh.cell(c);
        let a = mesh.cell_area(c) / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                t.push((v[i], v[j], if i == j { 2.0 * a } else { a }));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("indices come from the mesh")
}

/// The lumped discrete Laplacian of CG1 director fields.
///
/// At an interior vertex `z`, `w_z (Lap d)_z + (K d)_z = s_z`, where `K` is the
/// stiffness matrix and `s` a fixed source encoding the boundary lift. At a
/// boundary vertex `(Lap d)_z` is the fixed value `b_z`.
///
/// Without an analytic Laplacian of the boundary data, `s = 0` and `b = 0`:
/// `(-Lap d, c)_h = (grad d, grad c)` for every `c` vanishing on the boundary,
/// with `d` carrying its boundary values. With one, `Lap d = Lap_0 (d - I d0) + P Lap d0`.
#[derive(Clone, Debug)]
pub struct CgLaplacian {
    stiffness: SparseMatrix,
    weights: Vec<f64>,
    interior: Vec<bool>,
    source: Vec<Vec3>,
    boundary_values: Vec<Vec3>,
    analytic: bool,
}

impl CgLaplacian {
    /// Variational boundary treatment.
    pub fn new(sys: &FeSystem) -> Self {
        let mesh = sys.mesh();
        let n = mesh.num_vertices();
        CgLaplacian {
            stiffness: p1_stiffness(sys),
            weights: sys.lumped_weights().to_vec(),
            interior: (0..n).map(|v| !mesh.is_boundary_vertex(v)).collect(),
            source: vec![[0.0; 3]; n],
            boundary_values: vec![[0.0; 3]; n],
            analytic: false,
        }
    }

    /// Lift through the `L^2` projection of the analytic Laplacian of `d0`.
    pub fn with_analytic_lift(
        sys: &FeSystem,
        d0: impl Fn(Point) -> Vec3,
        d0_laplacian: impl Fn(Point) -> Vec3,
    ) -> Result<Self> {
        let mut lap = CgLaplacian::new(sys);
        let base = sys.interpolate_cg1(d0);
        let lifted = l2_project_cg1(sys, d0_laplacian, false)?;
        let kb = lap.stiffness_apply(&base);
        for z in 0..sys.mesh().num_vertices() {
            let p = lifted.vec3(z);
            if lap.interior[z] {
                lap.source[z] = vec3::add(kb[z], vec3::scale(lap.weights[z], p));
            } else {
                lap.boundary_values[z] = p;
            }
        }
        lap.analytic = true;
        Ok(lap)
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn is_interior(&self, z: usize) -> bool {
        self.interior[z]
    }

    pub fn weight(&self, z: usize) -> f64 {
        self.weights[z]
    }

    pub fn source(&self, z: usize) -> Vec3 {
        self.source[z]
    }

    pub fn boundary_value(&self, z: usize) -> Vec3 {
        self.boundary_values[z]
    }

    /// `(K d)_z` for every vertex.
    pub fn stiffness_apply(&self, d: &FeFunction) -> Vec<Vec3> {
        (0..self.weights.len())
            .map(|z| {
                let (cols, vals) = self.stiffness.row(z);
                let mut s = [0.0; 3];
                for (&c, &v) in cols.iter().zip(vals) {
                    s = vec3::add(s, vec3::scale(v, d.vec3(c)));
                }
                s
            })
            .collect()
    }

    /// `Lap d` as a CG1 field.
    pub fn apply(&self, d: &FeFunction) -> Result<FeFunction> {
        d.expect_space(Space::Cg1Director)?;
        let kd = self.stiffness_apply(d);
        let mut out = d.clone();
        for z in 0..self.weights.len() {
            let v = if self.interior[z] {
                vec3::scale(1.0 / self.weights[z], vec3::sub(self.source[z], kd[z]))
            } else {
                self.boundary_values[z]
            };
            out.set_vec3(z, v);
        }
        Ok(out)
    }
}

/// Consistent-mass `L^2` projection of `f` onto CG1 (or CG1 with zero boundary values).
pub fn l2_project_cg1(sys: &FeSystem, f: impl Fn(Point) -> Vec3, homogeneous: bool) -> Result<FeFunction> {
    let mesh = sys.mesh();
    let n = mesh.num_vertices();
    let mass = p1_mass(sys);
    let mut load = vec![[0.0; 3]; n];
    for t in 0..mesh.num_cells() {
        let v = mesh.cell(t);
        let area = mesh.cell_area(t);
        for (l, w) in sys.rule().points.iter().zip(&sys.rule().weights) {
            let fx = f(mesh.map_point(t, *l));
            for i in 0..3 {
                load[v[i]] = vec3::add(load[v[i]], vec3::scale(w * area * l[i], fx));
            }
        }
    }
    let mut solver = Solver::new();
    let mut out = FeFunction::zeros(sys, Space::Cg1Director);
    for m in 0..3 {
        let mut b = SystemBuilder::new(n);
        for r in 0..n {
            let (cols, vals) = mass.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                b.add(r, c, v);
            }
            b.add_rhs(r, load[r][m]);
            if homogeneous && mesh.is_boundary_vertex(r) {
                b.fix(r, 0.0);
            }
        }
        let sol = solver.solve(&b.build()?)?;
        for z in 0..n {
            out.values_mut()[3 * z + m] = sol.x[z];
        }
    }
    Ok(out)
}

/// Nodal normalization `d_z = dt_z / |dt_z|`; returns `(d, r = d - dt)`.
pub fn project_unit_sphere_cg(dt: &FeFunction) -> Result<(FeFunction, FeFunction)> {
    dt.expect_space(Space::Cg1Director)?;
    normalize_nodes(dt, "vertex")
}

pub(crate) fn normalize_nodes(dt: &FeFunction, location: &'static str) -> Result<(FeFunction, FeFunction)> {
    let mut d = dt.clone();
    let mut r = dt.clone();
    for i in 0..dt.values().len() / 3 {
        let v = dt.vec3(i);
        let n = vec3::norm(v);
        if !(n >= DEGENERACY_THRESHOLD) {
            return Err(Error::DegenerateDirector {
                location,
                index: i,
                norm: n,
            });
        }
        let u = vec3::scale(1.0 / n, v);
        d.set_vec3(i, u);
        r.set_vec3(i, vec3::sub(u, v));
    }
    Ok((d, r))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgEnergies {
    pub kinetic: f64,
    pub elastic: f64,
    pub total: f64,
}

/// `1/2 ||v||^2`, `1/2 ||grad d||^2` and their sum.
pub fn cg_energies(sys: &FeSystem, v: &FeFunction, d: &FeFunction) -> Result<CgEnergies> {
    v.expect_space(Space::P2Velocity)?;
    d.expect_space(Space::Cg1Director)?;
    let kinetic = 0.5 * sys.p2_norms_sq(v).0;
    let elastic = 0.5 * sys.cg1_dirichlet_sq(d);
    Ok(CgEnergies {
        kinetic,
        elastic,
        total: kinetic + elastic,
    })
}

/// Solves `(-Lap f, b)_h = (grad f, grad b)` for `f` with zero boundary values
/// through a dense system. Test oracle for [`CgLaplacian::apply`].
#[doc(hidden)]
pub fn dense_laplacian_oracle(sys: &FeSystem, f: &FeFunction) -> Vec<Vec3> {
    let interior = sys.mesh().interior_vertices();
    let n = interior.len();
    let k = p1_stiffness(sys);
    let mut out = vec![[0.0; 3]; sys.mesh().num_vertices()];
    for m in 0..3 {
        let mut b = SystemBuilder::new(n);
        for (i, &z) in interior.iter().enumerate() {
            b.add(i, i, sys.lumped_weight(z));
            let rhs: f64 = interior.iter().map(|&y| k.get(z, y) * f.vec3(y)[m]).sum();
            b.add_rhs(i, -rhs);
        }
        let sys_: LinearSystem = b.build().expect("square system");
        let x = sys_.solve().expect("diagonal system").x;
        for (i, &z) in interior.iter().enumerate() {
            out[z][m] = x[i];
        }
    }
    out
}
