//! Operators of the discontinuous scheme: liftings, the reconstructed
//! gradient, the stabilized DG0 Laplacian (direct and mixed forms), the
//! cellwise normalization and the DG energies.
//!
//! All facet weights `|F| / h_F` equal one because `h_F = |F|` on straight facets.

use crate::error::{Error, Result};
use crate::fespace::{FeFunction, FeSystem, Space};
use crate::linsolve::SparseMatrix;
use crate::mesh::Point;
use crate::ops_cg::normalize_nodes;
use crate::vec3::{self, Vec3};

/// Cellwise 3x2 matrix, rows are director components.
pub type Mat32 = [[f64; 2]; 3];

fn outer(a: Vec3, n: Point, s: f64) -> Mat32 {
    [
        [s * a[0] * n[0], s * a[0] * n[1]],
        [s * a[1] * n[0], s * a[1] * n[1]],
        [s * a[2] * n[0], s * a[2] * n[1]],
    ]
}

fn add_mat(a: &mut Mat32, b: &Mat32) {
    for m in 0..3 {
        a[m][0] += b[m][0];
        a[m][1] += b[m][1];
    }
}

pub fn frobenius(a: &Mat32, b: &Mat32) -> f64 {
    (0..3).map(|m| a[m][0] * b[m][0] + a[m][1] * b[m][1]).sum()
}

fn mat_function(sys: &FeSystem, cells: &[Mat32]) -> FeFunction {
    let values = cells.iter().flat_map(|m| m.iter().flat_map(|r| r.iter().copied())).collect();
    FeFunction::new(sys, Space::Dg0Matrix, values).expect("one matrix per cell")
}

/// Local lifting of facet data `phi` on facet `f`, returned as `(cell, value)`
/// pairs on the cells adjacent to `f`.
///
/// Interior facets: `int r : w = -int_F phi . {{w}} n_F`. Boundary facets:
/// `int r : w = int_F (g - phi) . w n_F`, which needs `g`.
pub fn local_lifting(sys: &FeSystem, f: usize, phi: Vec3, g: Option<Vec3>) -> Result<Vec<(usize, Mat32)>> {
    let mesh = sys.mesh();
    let len = mesh.facet_length(f);
    let n = mesh.facet_normal(f);
    let [t0, t1] = mesh.facet_cells(f);
    if mesh.is_boundary_facet(f) {
        let g = g.ok_or(Error::MissingBoundaryData {
            expected: mesh.boundary_facets().len(),
            found: 0,
        })?;
        Ok(vec![(t0, outer(vec3::sub(g, phi), n, len / mesh.cell_area(t0)))])
    } else {
        Ok([t0, t1]
            .iter()
            .map(|&t| (t, outer(phi, n, -0.5 * len / mesh.cell_area(t))))
            .collect())
    }
}

/// Reconstructed gradient
/// `R grad(d, g)|_T = sum_F |F|/|T| (d_F - d_T) (x) n_{T,F}`,
/// with `d_F` the facet average inside and `g` on boundary facets (zero when `g` is `None`).
pub fn reconstructed_gradient(sys: &FeSystem, d: &FeFunction, g: Option<&[Vec3]>) -> Result<FeFunction> {
    Ok(mat_function(sys, &reconstructed_gradient_cells(sys, d, g)?))
}

pub fn reconstructed_gradient_cells(sys: &FeSystem, d: &FeFunction, g: Option<&[Vec3]>) -> Result<Vec<Mat32>> {
    d.expect_space(Space::Dg0Director)?;
    if let Some(g) = g {
        sys.check_boundary_data(g)?;
    }
    let mesh = sys.mesh();
    Ok((0..mesh.num_cells())
        .map(|t| {
            let dt = d.vec3(t);
            let inv = 1.0 / mesh.cell_area(t);
            let mut out = [[0.0; 2]; 3];
            for (i, &f) in mesh.cell_facets(t).iter().enumerate() {
                let df = match mesh.neighbor(t, i) {
                    Some(o) => vec3::scale(0.5, vec3::add(dt, d.vec3(o))),
                    None => match g {
                        Some(g) => g[sys.boundary_facet_index(f).expect("boundary facet")],
                        None => [0.0; 3],
                    },
                };
                add_mat(&mut out, &outer(vec3::sub(df, dt), mesh.cell_normal(t, i), mesh.facet_length(f) * inv));
            }
            out
        })
        .collect())
}

/// Sum of all local liftings of the jumps of `d` (boundary traces use `d_T`).
pub fn sum_of_local_liftings(sys: &FeSystem, d: &FeFunction, g: &[Vec3]) -> Result<FeFunction> {
    d.expect_space(Space::Dg0Director)?;
    sys.check_boundary_data(g)?;
    let mesh = sys.mesh();
    let mut cells = vec![[[0.0; 2]; 3]; mesh.num_cells()];
    for f in 0..mesh.num_facets() {
        let [t0, t1] = mesh.facet_cells(f);
        let parts = match sys.boundary_facet_index(f) {
            Some(b) => local_lifting(sys, f, d.vec3(t0), Some(g[b]))?,
            None => local_lifting(sys, f, vec3::sub(d.vec3(t0), d.vec3(t1)), None)?,
        };
        for (t, m) in parts {
            add_mat(&mut cells[t], &m);
        }
    }
    Ok(mat_function(sys, &cells))
}

/// Coefficients of the homogeneous reconstructed gradient on cell `t`:
/// `R grad_0 d|_T [:, l] = sum_c a_c[l] d_c` over `t` and its neighbours.
fn gradient_stencil(sys: &FeSystem, t: usize) -> Vec<(usize, Point)> {
    let mesh = sys.mesh();
    let inv = 1.0 / mesh.cell_area(t);
    let mut own = [0.0; 2];
    let mut out = Vec::with_capacity(4);
    for (i, &f) in mesh.cell_facets(t).iter().enumerate() {
        let n = mesh.cell_normal(t, i);
        let s = mesh.facet_length(f) * inv;
        match mesh.neighbor(t, i) {
            Some(o) => {
                out.push((o, [0.5 * s * n[0], 0.5 * s * n[1]]));
                own[0] -= 0.5 * s * n[0];
                own[1] -= 0.5 * s * n[1];
            }
            None => {
                own[0] -= s * n[0];
                own[1] -= s * n[1];
            }
        }
    }
    out.push((t, own));
    out
}

/// The stabilized DG0 Laplacian with penalty `alpha`:
/// `(-Lap d, b) = (R grad(d, g), R grad_0 b) + alpha sum_int [[d]].[[b]] + alpha sum_D (d - g).b`.
///
/// Realized as `|T| (Lap d)_T = s_T - (S d)_T` with the scalar symmetric
/// matrix `S` acting componentwise and the boundary source `s`.
#[derive(Clone, Debug)]
pub struct DgLaplacian {
    alpha: f64,
    matrix: SparseMatrix,
    source: Vec<Vec3>,
    areas: Vec<f64>,
}

impl DgLaplacian {
    pub fn new(sys: &FeSystem, alpha: f64, g: &[Vec3]) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty alpha = {alpha} must be positive")));
        }
        sys.check_boundary_data(g)?;
        let mesh = sys.mesh();
        let nc = mesh.num_cells();
        let mut trip = Vec::with_capacity(16 * nc);
        let mut source = vec![[0.0; 3]; nc];
        for t in 0..nc {
            let area = mesh.cell_area(t);
            let st = gradient_stencil(sys, t);
            for &(c, a) in &st {
                for &(c2, a2) in &st {
                    trip.push((c, c2, area * (a[0] * a2[0] + a[1] * a2[1])));
                }
            }
            // boundary part of R grad(d, g) on this cell
            let mut rg = [[0.0; 2]; 3];
            for (i, &f) in mesh.cell_facets(t).iter().enumerate() {
                if let Some(b) = sys.boundary_facet_index(f) {
                    add_mat(&mut rg, &outer(g[b], mesh.cell_normal(t, i), mesh.facet_length(f) / area));
                    trip.push((t, t, alpha));
                    source[t] = vec3::add(source[t], vec3::scale(alpha, g[b]));
                }
            }
            for &(c, a) in &st {
                for m in 0..3 {
                    source[c][m] -= area * (rg[m][0] * a[0] + rg[m][1] * a[1]);
                }
            }
        }
        for &f in mesh.interior_facets() {
            let [t0, t1] = mesh.facet_cells(f);
            trip.push((t0, t0, alpha));
            trip.push((t1, t1, alpha));
            trip.push((t0, t1, -alpha));
            trip.push((t1, t0, -alpha));
        }
        Ok(DgLaplacian {
            alpha,
            matrix: SparseMatrix::from_triplets(nc, nc, &trip)?,
            source,
            areas: (0..nc).map(|t| mesh.cell_area(t)).collect(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The scalar matrix `S`.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn source(&self, t: usize) -> Vec3 {
        self.source[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    fn s_apply(&self, d: &FeFunction) -> Vec<Vec3> {
        (0..self.areas.len())
            .map(|t| {
                let (cols, vals) = self.matrix.row(t);
                let mut s = [0.0; 3];
                for (&c, &v) in cols.iter().zip(vals) {
                    s = vec3::add(s, vec3::scale(v, d.vec3(c)));
                }
                s
            })
            .collect()
    }

    /// `Lap d` including the boundary contributions.
    pub fn apply(&self, d: &FeFunction) -> Result<FeFunction> {
        d.expect_space(Space::Dg0Director)?;
        let sd = self.s_apply(d);
        let mut out = d.clone();
        for t in 0..self.areas.len() {
            out.set_vec3(t, vec3::scale(1.0 / self.areas[t], vec3::sub(self.source[t], sd[t])));
        }
        Ok(out)
    }

    /// The homogeneous form `b^T S d`.
    pub fn form(&self, d: &FeFunction, b: &FeFunction) -> f64 {
        self.s_apply(d).iter().enumerate().map(|(t, s)| vec3::dot(*s, b.vec3(t))).sum()
    }
}

/// Mixed computation of `(q, psi)`: first `psi` from the lifting form, then
/// `q` from the transposed form plus penalty terms. The DG0 mass matrices are
/// diagonal, so both stages are explicit.
pub fn mixed_method_laplacian(
    sys: &FeSystem,
    d: &FeFunction,
    alpha: f64,
    g: &[Vec3],
) -> Result<(FeFunction, FeFunction)> {
    d.expect_space(Space::Dg0Director)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("penalty alpha = {alpha} must be positive")));
    }
    sys.check_boundary_data(g)?;
    let mesh = sys.mesh();
    let nc = mesh.num_cells();
    // (psi, tau) = B(d, tau) + sum_D |F| g . tau n
    let mut psi = vec![[[0.0; 2]; 3]; nc];
    for f in 0..mesh.num_facets() {
        let len = mesh.facet_length(f);
        let n = mesh.facet_normal(f);
        let [t0, t1] = mesh.facet_cells(f);
        match sys.boundary_facet_index(f) {
            Some(b) => add_mat(&mut psi[t0], &outer(vec3::sub(g[b], d.vec3(t0)), n, len)),
            None => {
                let jump = vec3::sub(d.vec3(t0), d.vec3(t1));
                add_mat(&mut psi[t0], &outer(jump, n, -0.5 * len));
                add_mat(&mut psi[t1], &outer(jump, n, -0.5 * len));
            }
        }
    }
    for (t, p) in psi.iter_mut().enumerate() {
        let inv = 1.0 / mesh.cell_area(t);
        for r in p.iter_mut() {
            r[0] *= inv;
            r[1] *= inv;
        }
    }
    // (q, b) = B(b, psi) + alpha-penalties
    let mut q = vec![[0.0; 3]; nc];
    let tn = |p: &Mat32, n: Point| -> Vec3 {
        [
            p[0][0] * n[0] + p[0][1] * n[1],
            p[1][0] * n[0] + p[1][1] * n[1],
            p[2][0] * n[0] + p[2][1] * n[1],
        ]
    };
    for f in 0..mesh.num_facets() {
        let len = mesh.facet_length(f);
        let n = mesh.facet_normal(f);
        let [t0, t1] = mesh.facet_cells(f);
        match sys.boundary_facet_index(f) {
            Some(b) => {
                let c = vec3::add(vec3::scale(-len, tn(&psi[t0], n)), vec3::scale(alpha, vec3::sub(d.vec3(t0), g[b])));
                q[t0] = vec3::add(q[t0], c);
            }
            None => {
                let avg = vec3::scale(0.5, vec3::add(tn(&psi[t0], n), tn(&psi[t1], n)));
                let jump = vec3::sub(d.vec3(t0), d.vec3(t1));
                let c = vec3::add(vec3::scale(-len, avg), vec3::scale(alpha, jump));
                q[t0] = vec3::add(q[t0], c);
                q[t1] = vec3::sub(q[t1], c);
            }
        }
    }
    let mut qf = FeFunction::zeros(sys, Space::Dg0Director);
    for (t, v) in q.iter().enumerate() {
        qf.set_vec3(t, vec3::scale(1.0 / mesh.cell_area(t), *v));
    }
    Ok((qf, mat_function(sys, &psi)))
}

/// Cellwise normalization `d_T = dt_T / |dt_T|`; returns `(d, r = d - dt)`.
pub fn project_unit_sphere_dg(dt: &FeFunction) -> Result<(FeFunction, FeFunction)> {
    dt.expect_space(Space::Dg0Director)?;
    normalize_nodes(dt, "cell")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DgEnergies {
    pub kinetic: f64,
    /// `1/2 ||R grad(d, g)||^2`
    pub elastic: f64,
    /// `1/2 |d|_{J,i}^2 + 1/2 |d - g|_{J,D}^2`
    pub jump: f64,
    /// `kinetic + elastic + alpha * jump`
    pub total: f64,
}

/// `1/2 ||R grad(d, g)||^2` and the jump energy, without the kinetic part.
pub fn dg_director_energies(sys: &FeSystem, d: &FeFunction, g: &[Vec3]) -> Result<(f64, f64)> {
    let grads = reconstructed_gradient_cells(sys, d, Some(g))?;
    let mesh = sys.mesh();
    let elastic = 0.5
        * grads
            .iter()
            .enumerate()
            .map(|(t, m)| mesh.cell_area(t) * frobenius(m, m))
            .sum::<f64>();
    let jump = jump_energy(sys, d, Some(g));
    Ok((elastic, jump))
}

/// `1/2 sum_int |[[d]]|^2 + 1/2 sum_D |d - g|^2` (`g = 0` when `None`).
pub fn jump_energy(sys: &FeSystem, d: &FeFunction, g: Option<&[Vec3]>) -> f64 {
    let mesh = sys.mesh();
    let mut s = 0.0;
    for &f in mesh.interior_facets() {
        let [t0, t1] = mesh.facet_cells(f);
        let j = vec3::sub(d.vec3(t0), d.vec3(t1));
        s += vec3::dot(j, j);
    }
    for (b, &f) in mesh.boundary_facets().iter().enumerate() {
        let t = mesh.facet_cells(f)[0];
        let gb = g.map_or([0.0; 3], |g| g[b]);
        let j = vec3::sub(d.vec3(t), gb);
        s += vec3::dot(j, j);
    }
    0.5 * s
}

pub fn dg_energies(sys: &FeSystem, v: &FeFunction, d: &FeFunction, alpha: f64, g: &[Vec3]) -> Result<DgEnergies> {
    v.expect_space(Space::P2Velocity)?;
    let (elastic, jump) = dg_director_energies(sys, d, g)?;
    let kinetic = 0.5 * sys.p2_norms_sq(v).0;
    Ok(DgEnergies {
        kinetic,
        elastic,
        jump,
        total: kinetic + elastic + alpha * jump,
    })
}

/// `|(d x R grad d, R grad_0 I phi) + (R grad d, R grad_0 (d x I phi))|`
/// where `d x M` acts column by column.
pub fn discrete_product_rule_residual(
    sys: &FeSystem,
    d: &FeFunction,
    phi: impl Fn(Point) -> Vec3,
    g: &[Vec3],
) -> Result<f64> {
    let rd = reconstructed_gradient_cells(sys, d, Some(g))?;
    let iphi = sys.interpolate_dg0(phi);
    let mut dphi = iphi.clone();
    for t in 0..sys.mesh().num_cells() {
        dphi.set_vec3(t, vec3::cross(d.vec3(t), iphi.vec3(t)));
    }
    let r_phi = reconstructed_gradient_cells(sys, &iphi, None)?;
    let r_dphi = reconstructed_gradient_cells(sys, &dphi, None)?;
    let mesh = sys.mesh();
    let mut total = 0.0;
    for t in 0..mesh.num_cells() {
        let dt = d.vec3(t);
        let mut dxr = [[0.0; 2]; 3];
        for l in 0..2 {
            let c = vec3::cross(dt, [rd[t][0][l], rd[t][1][l], rd[t][2][l]]);
            for m in 0..3 {
                dxr[m][l] = c[m];
            }
        }
        total += mesh.cell_area(t) * (frobenius(&dxr, &r_phi[t]) + frobenius(&rd[t], &r_dphi[t]));
    }
    Ok(total.abs())
}

/// `||R grad(I0 phi, phi(x_F)) - grad phi||_{L^2}` by quadrature.
pub fn reconstructed_gradient_error(
    sys: &FeSystem,
    phi: impl Fn(Point) -> Vec3,
    grad_phi: impl Fn(Point) -> Mat32,
) -> Result<f64> {
    let d = sys.interpolate_dg0(&phi);
    let g = sys.interpolate_boundary_dg(&phi);
    let rd = reconstructed_gradient_cells(sys, &d, Some(&g))?;
    let mesh = sys.mesh();
    let mut e = 0.0;
    for t in 0..mesh.num_cells() {
        for (l, w) in sys.rule().points.iter().zip(&sys.rule().weights) {
            let gx = grad_phi(mesh.map_point(t, *l));
            let mut diff = rd[t];
            for m in 0..3 {
                diff[m][0] -= gx[m][0];
                diff[m][1] -= gx[m][1];
            }
            e += w * mesh.cell_area(t) * frobenius(&diff, &diff);
        }
    }
    Ok(e.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        check_admissible, check_non_obtuse, generate_square_mesh, CenterPolicy, Mesh2D, SquarePattern,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn admissible(n: usize, pattern: SquarePattern) -> FeSystem {
        FeSystem::new(generate_square_mesh(n, pattern).unwrap().set_cell_centers(CenterPolicy::Circumcenter))
    }

    fn random_dg(sys: &FeSystem, rng: &mut ChaCha8Rng) -> FeFunction {
        let vals = (0..sys.n_dofs(Space::Dg0Director)).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeFunction::new(sys, Space::Dg0Director, vals).unwrap()
    }

    fn random_bdata(sys: &FeSystem, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        (0..sys.mesh().boundary_facets().len())
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect()
    }

    #[test]
    fn lifting_examples() {
        let mesh = Mesh2D::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.2, 0.9]],
            vec![[0, 1, 2], [1, 3, 2]],
            CenterPolicy::Barycenter,
        )
        .unwrap();
        let sys = FeSystem::new(mesh);
        let f = sys.mesh().interior_facets()[0];
        let zero = local_lifting(&sys, f, [0.0; 3], None).unwrap();
        assert!(zero.iter().all(|(_, m)| frobenius(m, m) == 0.0));

        // hand inversion of the two-cell system: r|_{T_i} |T_i| = -|F|/2 phi (x) n_F
        let phi = [0.3, -1.0, 2.0];
        let parts = local_lifting(&sys, f, phi, None).unwrap();
        let n = sys.mesh().facet_normal(f);
        let len = sys.mesh().facet_length(f);
        for (t, m) in parts {
            // defining relation tested with w = e_a (x) e_b on cell t
            for a in 0..3 {
                for b in 0..2 {
                    let lhs = sys.mesh().cell_area(t) * m[a][b];
                    let rhs = -len * phi[a] * 0.5 * n[b];
                    assert!((lhs - rhs).abs() < 1e-15);
                }
            }
        }
        let bf = sys.mesh().boundary_facets()[0];
        let parts = local_lifting(&sys, bf, phi, Some(phi)).unwrap();
        assert!(parts.iter().all(|(_, m)| frobenius(m, m) == 0.0));
        assert!(local_lifting(&sys, bf, phi, None).is_err());
    }

    #[test]
    fn global_lifting_equals_sum_of_local() {
        let sys = admissible(5, SquarePattern::Crisscross);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let d = random_dg(&sys, &mut rng);
            let g = random_bdata(&sys, &mut rng);
            let a = reconstructed_gradient(&sys, &d, Some(&g)).unwrap();
            let b = sum_of_local_liftings(&sys, &d, &g).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn constant_field_has_zero_gradient_and_laplacian() {
        let sys = admissible(4, SquarePattern::RightTriangle);
        let c = [0.0, 0.6, 0.8];
        let d = sys.interpolate_dg0(|_| c);
        let g = sys.interpolate_boundary_dg(|_| c);
        let r = reconstructed_gradient(&sys, &d, Some(&g)).unwrap();
        assert!(r.values().iter().all(|x| x.abs() < 1e-13));
        let lap = DgLaplacian::new(&sys, 0.1, &g).unwrap();
        assert!(lap.apply(&d).unwrap().values().iter().all(|x| x.abs() < 1e-10));
        let (q, psi) = mixed_method_laplacian(&sys, &d, 0.1, &g).unwrap();
        assert!(q.values().iter().chain(psi.values()).all(|x| x.abs() < 1e-10));
        assert!(DgLaplacian::new(&sys, 0.0, &g).is_err());
        assert!(matches!(
            reconstructed_gradient(&sys, &d, Some(&g[1..])),
            Err(Error::MissingBoundaryData { .. })
        ));
    }

    #[test]
    fn exact_on_affine_fields_over_admissible_meshes() {
        for pattern in [SquarePattern::RightTriangle, SquarePattern::Crisscross] {
            let sys = admissible(6, pattern);
            let h = sys.mesh().h_max();
            assert!(check_admissible(sys.mesh()).1 <= 1e-12 * h);
            // divergence identity sum_F |F| x_F (x) n_{T,F} = |T| Id
            for t in 0..sys.mesh().num_cells() {
                let mut m = [[0.0; 2]; 2];
                for (i, &f) in sys.mesh().cell_facets(t).iter().enumerate() {
                    let x = sys.mesh().facet_barycenter(f);
                    let n = sys.mesh().cell_normal(t, i);
                    let len = sys.mesh().facet_length(f);
                    for a in 0..2 {
                        for b in 0..2 {
                            m[a][b] += len * x[a] * n[b];
                        }
                    }
                }
                let area = sys.mesh().cell_area(t);
                assert!((m[0][0] - area).abs() < 1e-15 && (m[1][1] - area).abs() < 1e-15);
                assert!(m[0][1].abs() < 1e-15 && m[1][0].abs() < 1e-15);
            }
            let grad = [[1.0, -2.0], [0.5, 0.25], [0.0, 3.0]];
            let phi = |x: Point| {
                [
                    0.1 + grad[0][0] * x[0] + grad[0][1] * x[1],
                    -0.3 + grad[1][0] * x[0] + grad[1][1] * x[1],
                    grad[2][0] * x[0] + grad[2][1] * x[1],
                ]
            };
            let d = sys.interpolate_dg0(phi);
            let g = sys.interpolate_boundary_dg(phi);
            let r = reconstructed_gradient_cells(&sys, &d, Some(&g)).unwrap();
            for m in &r {
                for a in 0..3 {
                    for b in 0..2 {
                        assert!((m[a][b] - grad[a][b]).abs() <= 1e-11 * 3.0, "{pattern:?}");
                    }
                }
            }
            let (el, _) = dg_director_energies(&sys, &d, &g).unwrap();
            let frob: f64 = grad.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
            assert!((el - 0.5 * frob).abs() < 1e-11);
        }
    }

    #[test]
    fn mixed_and_direct_laplacians_agree() {
        let sys = admissible(5, SquarePattern::RightTriangle);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for alpha in [0.005, 0.1, 1.0] {
            for _ in 0..3 {
                let d = random_dg(&sys, &mut rng);
                let g = random_bdata(&sys, &mut rng);
                let lap = DgLaplacian::new(&sys, alpha, &g).unwrap();
                let ld = lap.apply(&d).unwrap();
                let (q, psi) = mixed_method_laplacian(&sys, &d, alpha, &g).unwrap();
                let rg = reconstructed_gradient(&sys, &d, Some(&g)).unwrap();
                for (a, b) in q.values().iter().zip(ld.values()) {
                    assert!((a + b).abs() <= 1e-11 * (1.0 + b.abs()), "alpha {alpha}");
                }
                for (a, b) in psi.values().iter().zip(rg.values()) {
                    assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn laplacian_form_symmetric_and_nonnegative() {
        let sys = FeSystem::new(generate_square_mesh(5, SquarePattern::Crisscross).unwrap());
        let zero = vec![[0.0; 3]; sys.mesh().boundary_facets().len()];
        let lap = DgLaplacian::new(&sys, 0.05, &zero).unwrap();
        assert!(lap.matrix().is_symmetric(1e-13));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d = random_dg(&sys, &mut rng);
            let b = random_dg(&sys, &mut rng);
            let (ab, ba) = (lap.form(&d, &b), lap.form(&b, &d));
            assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
            // (-Lap d, d) with homogeneous data
            let ld = lap.apply(&d).unwrap();
            let pos: f64 = -(0..sys.mesh().num_cells())
                .map(|t| sys.mesh().cell_area(t) * vec3::dot(ld.vec3(t), d.vec3(t)))
                .sum::<f64>();
            assert!(pos >= 0.0);
            // equals the energy 2 (E_ela + alpha E_J) with zero data
            let (el, j) = dg_director_energies(&sys, &d, &zero).unwrap();
            assert!((pos - 2.0 * (el + 0.05 * j)).abs() <= 1e-11 * pos);
        }
    }

    #[test]
    fn jump_identity_per_facet() {
        // [[a.b]] = {{a}}.[[b]] + [[a]].{{b}}
        let sys = FeSystem::new(generate_square_mesh(3, SquarePattern::RightTriangle).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_dg(&sys, &mut rng);
        let b = random_dg(&sys, &mut rng);
        for &f in sys.mesh().interior_facets() {
            let [t0, t1] = sys.mesh().facet_cells(f);
            let (a0, a1, b0, b1) = (a.vec3(t0), a.vec3(t1), b.vec3(t0), b.vec3(t1));
            let lhs = vec3::dot(a0, b0) - vec3::dot(a1, b1);
            let avg = |x: Vec3, y: Vec3| vec3::scale(0.5, vec3::add(x, y));
            let rhs = vec3::dot(avg(a0, a1), vec3::sub(b0, b1)) + vec3::dot(vec3::sub(a0, a1), avg(b0, b1));
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn normalization_examples() {
        let sys = FeSystem::new(generate_square_mesh(1, SquarePattern::RightTriangle).unwrap());
        let mut d = sys.interpolate_dg0(|_| [1.0, 0.0, 0.0]);
        d.set_vec3(1, [3.0, 4.0, 0.0]);
        let (p, r) = project_unit_sphere_dg(&d).unwrap();
        assert!(vec3::norm(vec3::sub(p.vec3(1), [0.6, 0.8, 0.0])) < 1e-15);
        assert_eq!(p.vec3(0), [1.0, 0.0, 0.0]);
        assert_eq!(r.vec3(0), [0.0; 3]);
        d.set_vec3(0, [0.0; 3]);
        assert!(matches!(
            project_unit_sphere_dg(&d),
            Err(Error::DegenerateDirector { location: "cell", index: 0, .. })
        ));
    }

    #[test]
    fn projection_decreases_energies_on_non_obtuse_mesh() {
        let sys = FeSystem::new(generate_square_mesh(8, SquarePattern::RightTriangle).unwrap());
        assert!(check_non_obtuse(sys.mesh()));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let unit = |rng: &mut ChaCha8Rng| {
            let v: Vec3 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            vec3::scale(1.0 / vec3::norm(v), v)
        };
        for _ in 0..100 {
            let g: Vec<Vec3> = (0..sys.mesh().boundary_facets().len()).map(|_| unit(&mut rng)).collect();
            let mut d = FeFunction::zeros(&sys, Space::Dg0Director);
            for t in 0..sys.mesh().num_cells() {
                d.set_vec3(t, vec3::scale(rng.random_range(1.0..3.0), unit(&mut rng)));
            }
            let (p, _) = project_unit_sphere_dg(&d).unwrap();
            let (e0, j0) = dg_director_energies(&sys, &d, &g).unwrap();
            let (e1, j1) = dg_director_energies(&sys, &p, &g).unwrap();
            assert!(e1 <= e0 + 1e-12 && j1 <= j0 + 1e-12);
        }
    }

    #[test]
    fn product_rule_residual_examples() {
        let sys = admissible(4, SquarePattern::RightTriangle);
        let c = [0.0, 0.0, 1.0];
        let d = sys.interpolate_dg0(|_| c);
        let g = sys.interpolate_boundary_dg(|_| c);
        let bump = |x: Point| {
            let s = (0.25 - x[0] * x[0]) * (0.25 - x[1] * x[1]);
            [s, 2.0 * s, -s]
        };
        assert!(discrete_product_rule_residual(&sys, &d, bump, &g).unwrap() < 1e-14);
        let d = sys.interpolate_dg0(|x| {
            let a = x[0] + 0.5 * x[1];
            [a.cos(), a.sin(), 0.0]
        });
        let g = sys.interpolate_boundary_dg(|x| {
            let a = x[0] + 0.5 * x[1];
            [a.cos(), a.sin(), 0.0]
        });
        assert_eq!(discrete_product_rule_residual(&sys, &d, |_| [0.0; 3], &g).unwrap(), 0.0);
    }

    #[test]
    fn strong_consistency_under_refinement() {
        let phi = |x: Point| [(2.0 * x[0]).sin() * x[1], (x[0] + x[1]).cos(), x[0] * x[0]];
        let grad = |x: Point| {
            [
                [2.0 * (2.0 * x[0]).cos() * x[1], (2.0 * x[0]).sin()],
                [-(x[0] + x[1]).sin(), -(x[0] + x[1]).sin()],
                [2.0 * x[0], 0.0],
            ]
        };
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| reconstructed_gradient_error(&admissible(n, SquarePattern::RightTriangle), phi, grad).unwrap())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
