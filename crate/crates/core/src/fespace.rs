//! Degree-of-freedom maps, basis evaluation, interpolation and the lumped
//! inner product for the discrete spaces used by both schemes.
//!
//! Coefficient layouts (all interleaved by component):
//! - P2 velocity: `2 * dof + l`, with vertex dofs `0..nv` followed by one
//!   edge-midpoint dof per facet, `nv + f`;
//! - P1 pressure: one value per vertex;
//! - CG1 director: `3 * vertex + m`;
//! - DG0 director: `3 * cell + m`;
//! - DG0 3x2 matrix: `6 * cell + 2 * m + l` (row `m`, column `l`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh2D, Point, NO_CELL};
use crate::quadrature::TriangleRule;
use crate::vec3::{self, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    P2Velocity,
    P1Pressure,
    Cg1Director,
    Dg0Director,
    Dg0Matrix,
}

impl Space {
    pub fn components(self) -> usize {
        match self {
            Space::P2Velocity => 2,
            Space::P1Pressure => 1,
            Space::Cg1Director | Space::Dg0Director => 3,
            Space::Dg0Matrix => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpRegion {
    Interior,
    Boundary,
    All,
}

/// Boundary director data, one value per entry of [`Mesh2D::boundary_facets`].
pub type BoundaryData = Vec<Vec3>;

/// Coefficients of a discrete field together with the space they live in.
#[derive(Clone, Debug, PartialEq)]
pub struct FeFunction {
    space: Space,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(sys: &FeSystem, space: Space, values: Vec<f64>) -> Result<Self> {
        let expected = sys.n_dofs(space);
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                space,
                expected,
                found: values.len(),
            });
        }
        Ok(FeFunction { space, values })
    }

    pub fn zeros(sys: &FeSystem, space: Space) -> Self {
        FeFunction {
            space,
            values: vec![0.0; sys.n_dofs(space)],
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Three-vector stored at scalar node `i` (vertex or cell).
    #[inline]
    pub fn vec3(&self, i: usize) -> Vec3 {
        [self.values[3 * i], self.values[3 * i + 1], self.values[3 * i + 2]]
    }

    #[inline]
    pub fn set_vec3(&mut self, i: usize, v: Vec3) {
        self.values[3 * i..3 * i + 3].copy_from_slice(&v);
    }

    #[inline]
    pub fn vec2(&self, i: usize) -> [f64; 2] {
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    /// DG0 matrix on cell `t` as rows `[m][l]`.
    pub fn mat3x2(&self, t: usize) -> [[f64; 2]; 3] {
        let v = &self.values[6 * t..6 * t + 6];
        [[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]]
    }

    pub fn expect_space(&self, space: Space) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected: space,
                found: self.space,
            })
        }
    }
}

/// P2 Lagrange basis in barycentric coordinates. Local dofs 0..3 are the
/// vertices, dof `3 + i` is the midpoint of the edge opposite vertex `i`.
#[inline]
pub fn p2_basis(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

/// Physical gradients of the P2 basis given the barycentric gradients `g`.
#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[Point; 3]) -> [Point; 6] {
    let lin = |a: f64, i: usize, b: f64, j: usize| [a * g[i][0] + b * g[j][0], a * g[i][1] + b * g[j][1]];
    [
        lin(4.0 * l[0] - 1.0, 0, 0.0, 1),
        lin(4.0 * l[1] - 1.0, 1, 0.0, 0),
        lin(4.0 * l[2] - 1.0, 2, 0.0, 0),
        lin(4.0 * l[2], 1, 4.0 * l[1], 2),
        lin(4.0 * l[0], 2, 4.0 * l[2], 0),
        lin(4.0 * l[1], 0, 4.0 * l[0], 1),
    ]
}

/// Finite element system over a fixed mesh.
#[derive(Clone, Debug)]
pub struct FeSystem {
    mesh: Mesh2D,
    rule: TriangleRule,
    lumped_weights: Vec<f64>,
    boundary_facet_pos: Vec<usize>,
    p2_boundary: Vec<bool>,
}

impl FeSystem {
    pub fn new(mesh: Mesh2D) -> Self {
        let nv = mesh.num_vertices();
        let mut lumped_weights = vec![0.0; nv];
        for t in 0..mesh.num_cells() {
            let a = mesh.cell_area(t) / 3.0;
            for v in mesh.cell(t) {
                lumped_weights[v] += a;
            }
        }
        let mut boundary_facet_pos = vec![NO_CELL; mesh.num_facets()];
        for (i, &f) in mesh.boundary_facets().iter().enumerate() {
            boundary_facet_pos[f] = i;
        }
        let mut p2_boundary = vec![false; nv + mesh.num_facets()];
        for v in 0..nv {
            p2_boundary[v] = mesh.is_boundary_vertex(v);
        }
        for &f in mesh.boundary_facets() {
            p2_boundary[nv + f] = true;
        }
        FeSystem {
            mesh,
            rule: TriangleRule::degree6(),
            lumped_weights,
            boundary_facet_pos,
            p2_boundary,
        }
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.mesh
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    /// Number of scalar P2 nodes (vertices plus edge midpoints).
    pub fn n_p2(&self) -> usize {
        self.mesh.num_vertices() + self.mesh.num_facets()
    }

    pub fn n_dofs(&self, space: Space) -> usize {
        let nodes = match space {
            Space::P2Velocity => self.n_p2(),
            Space::P1Pressure | Space::Cg1Director => self.mesh.num_vertices(),
            Space::Dg0Director | Space::Dg0Matrix => self.mesh.num_cells(),
        };
        nodes * space.components()
    }

    pub fn p2_cell_dofs(&self, t: usize) -> [usize; 6] {
        let c = self.mesh.cell(t);
        let f = self.mesh.cell_facets(t);
        let nv = self.mesh.num_vertices();
        [c[0], c[1], c[2], nv + f[0], nv + f[1], nv + f[2]]
    }

    pub fn is_p2_boundary(&self, node: usize) -> bool {
        self.p2_boundary[node]
    }

    /// Coordinates of scalar P2 node `node`.
    pub fn p2_node(&self, node: usize) -> Point {
        let nv = self.mesh.num_vertices();
        if node < nv {
            self.mesh.vertex(node)
        } else {
            self.mesh.facet_barycenter(node - nv)
        }
    }

    /// Lumped weight `w_z = int phi_z`.
    pub fn lumped_weight(&self, z: usize) -> f64 {
        self.lumped_weights[z]
    }

    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped_weights
    }

    /// Position of boundary facet `f` in [`Mesh2D::boundary_facets`].
    pub fn boundary_facet_index(&self, f: usize) -> Option<usize> {
        let p = self.boundary_facet_pos[f];
        (p != NO_CELL).then_some(p)
    }

    pub fn check_boundary_data(&self, g: &[Vec3]) -> Result<()> {
        let expected = self.mesh.boundary_facets().len();
        if g.len() != expected {
            return Err(Error::MissingBoundaryData {
                expected,
                found: g.len(),
            });
        }
        Ok(())
    }

    pub fn interpolate_cg1(&self, f: impl Fn(Point) -> Vec3) -> FeFunction {
        let mut out = FeFunction::zeros(self, Space::Cg1Director);
        for (v, &x) in self.mesh.vertices().iter().enumerate() {
            out.set_vec3(v, f(x));
        }
        out
    }

    pub fn interpolate_dg0(&self, f: impl Fn(Point) -> Vec3) -> FeFunction {
        let mut out = FeFunction::zeros(self, Space::Dg0Director);
        for (t, &x) in self.mesh.cell_centers().iter().enumerate() {
            out.set_vec3(t, f(x));
        }
        out
    }

    pub fn interpolate_boundary_dg(&self, f: impl Fn(Point) -> Vec3) -> BoundaryData {
        self.mesh
            .boundary_facets()
            .iter()
            .map(|&fct| f(self.mesh.facet_barycenter(fct)))
            .collect()
    }

    pub fn interpolate_p1(&self, f: impl Fn(Point) -> f64) -> FeFunction {
        FeFunction {
            space: Space::P1Pressure,
            values: self.mesh.vertices().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn interpolate_p2(&self, f: impl Fn(Point) -> [f64; 2]) -> FeFunction {
        let mut values = vec![0.0; self.n_dofs(Space::P2Velocity)];
        for node in 0..self.n_p2() {
            let v = f(self.p2_node(node));
            values[2 * node] = v[0];
            values[2 * node + 1] = v[1];
        }
        FeFunction {
            space: Space::P2Velocity,
            values,
        }
    }

    /// `sum_z w_z a_z . b_z`.
    pub fn lumped_inner_product(&self, a: &FeFunction, b: &FeFunction) -> Result<f64> {
        a.expect_space(Space::Cg1Director)?;
        b.expect_space(Space::Cg1Director)?;
        Ok(self
            .lumped_weights
            .iter()
            .enumerate()
            .map(|(z, w)| w * vec3::dot(a.vec3(z), b.vec3(z)))
            .sum())
    }

    /// Consistent `L^2` norm squared of a CG1 director field.
    pub fn cg1_l2_norm_sq(&self, a: &FeFunction) -> f64 {
        (0..self.mesh.num_cells())
            .map(|t| {
                let c = self.mesh.cell(t);
                let v = [a.vec3(c[0]), a.vec3(c[1]), a.vec3(c[2])];
                let s = vec3::add(vec3::add(v[0], v[1]), v[2]);
                let sq: f64 = v.iter().map(|&x| vec3::dot(x, x)).sum();
                self.mesh.cell_area(t) / 12.0 * (sq + vec3::dot(s, s))
            })
            .sum()
    }

    /// Constant gradient `[m][l]` of a CG1 director field on cell `t`.
    pub fn cg1_gradient(&self, d: &FeFunction, t: usize) -> [[f64; 2]; 3] {
        let g = self.mesh.barycentric_gradients(t);
        let c = self.mesh.cell(t);
        let mut out = [[0.0; 2]; 3];
        for i in 0..3 {
            let di = d.vec3(c[i]);
            for m in 0..3 {
                out[m][0] += di[m] * g[i][0];
                out[m][1] += di[m] * g[i][1];
            }
        }
        out
    }

    /// Dirichlet energy `||grad d||^2` of a CG1 director field.
    pub fn cg1_dirichlet_sq(&self, d: &FeFunction) -> f64 {
        (0..self.mesh.num_cells())
            .map(|t| {
                let g = self.cg1_gradient(d, t);
                self.mesh.cell_area(t) * g.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>()
            })
            .sum()
    }

    /// `||v||^2` and `||grad v||^2` of a P2 velocity field.
    pub fn p2_norms_sq(&self, v: &FeFunction) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for t in 0..self.mesh.num_cells() {
            let dofs = self.p2_cell_dofs(t);
            let g = self.mesh.barycentric_gradients(t);
            let area = self.mesh.cell_area(t);
            for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                let phi = p2_basis(*l);
                let dphi = p2_gradients(*l, &g);
                let mut val = [0.0; 2];
                let mut grad = [[0.0; 2]; 2];
                for i in 0..6 {
                    let c = v.vec2(dofs[i]);
                    for k in 0..2 {
                        val[k] += c[k] * phi[i];
                        grad[k][0] += c[k] * dphi[i][0];
                        grad[k][1] += c[k] * dphi[i][1];
                    }
                }
                l2 += w * area * (val[0] * val[0] + val[1] * val[1]);
                h1 += w * area * grad.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>();
            }
        }
        (l2, h1)
    }

    /// `(sum_F h_F^{1-p} ||[[d]]||^p_{L^p(F)})^{1/p}` for a DG0 director.
    /// Boundary jumps are `d - g` and need `g`.
    pub fn jump_seminorm(
        &self,
        d: &FeFunction,
        p: f64,
        region: JumpRegion,
        g: Option<&[Vec3]>,
    ) -> Result<f64> {
        d.expect_space(Space::Dg0Director)?;
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("jump exponent {p} outside [1, inf)")));
        }
        let m = &self.mesh;
        let mut sum = 0.0;
        let weight = |f: usize, jump: Vec3| {
            let len = m.facet_length(f);
            len.powf(2.0 - p) * vec3::norm(jump).powf(p)
        };
        if matches!(region, JumpRegion::Interior | JumpRegion::All) {
            for &f in m.interior_facets() {
                let [t0, t1] = m.facet_cells(f);
                sum += weight(f, vec3::sub(d.vec3(t0), d.vec3(t1)));
            }
        }
        if matches!(region, JumpRegion::Boundary | JumpRegion::All) {
            let g = g.ok_or(Error::MissingBoundaryData {
                expected: m.boundary_facets().len(),
                found: 0,
            })?;
            self.check_boundary_data(g)?;
            for (i, &f) in m.boundary_facets().iter().enumerate() {
                let t = m.facet_cells(f)[0];
                sum += weight(f, vec3::sub(d.vec3(t), g[i]));
            }
        }
        Ok(sum.powf(1.0 / p))
    }

    /// Values of `f` at `points`, one vector of `space.components()` entries per point.
    pub fn evaluate(&self, f: &FeFunction, points: &[Point]) -> Result<Vec<Vec<f64>>> {
        if f.values.len() != self.n_dofs(f.space) {
            return Err(Error::LengthMismatch {
                space: f.space,
                expected: self.n_dofs(f.space),
                found: f.values.len(),
            });
        }
        points
            .iter()
            .map(|&x| {
                let t = self.mesh.locate(x).ok_or(Error::PointOutsideMesh { x: x[0], y: x[1] })?;
                Ok(self.evaluate_in_cell(f, t, self.mesh.barycentric(t, x)))
            })
            .collect()
    }

    /// Value of `f` at barycentric coordinates `l` of cell `t`.
    pub fn evaluate_in_cell(&self, f: &FeFunction, t: usize, l: [f64; 3]) -> Vec<f64> {
        match f.space {
            Space::P2Velocity => {
                let phi = p2_basis(l);
                let dofs = self.p2_cell_dofs(t);
                let mut out = vec![0.0; 2];
                for i in 0..6 {
                    let c = f.vec2(dofs[i]);
                    out[0] += phi[i] * c[0];
                    out[1] += phi[i] * c[1];
                }
                out
            }
            Space::P1Pressure => {
                let c = self.mesh.cell(t);
                vec![(0..3).map(|i| l[i] * f.values[c[i]]).sum()]
            }
            Space::Cg1Director => {
                let c = self.mesh.cell(t);
                let mut out = vec![0.0; 3];
                for i in 0..3 {
                    let v = f.vec3(c[i]);
                    for m in 0..3 {
                        out[m] += l[i] * v[m];
                    }
                }
                out
            }
            Space::Dg0Director => f.vec3(t).to_vec(),
            Space::Dg0Matrix => f.values[6 * t..6 * t + 6].to_vec(),
        }
    }
}
