//! Two-dimensional triangulations and the geometric mesh properties the
//! director schemes rely on (non-obtuse, weakly acute, admissible centers).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Absolute tolerance of all geometric predicates.
pub const GEOMETRY_TOL: f64 = 1e-12;

/// Marker for the missing second neighbour of a boundary facet.
pub const NO_CELL: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterPolicy {
    Barycenter,
    Circumcenter,
}

impl CenterPolicy {
    pub fn tag(self) -> &'static str {
        match self {
            CenterPolicy::Barycenter => "barycenter",
            CenterPolicy::Circumcenter => "circumcenter",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "barycenter" => Some(CenterPolicy::Barycenter),
            "circumcenter" => Some(CenterPolicy::Circumcenter),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SquarePattern {
    /// Each square split along its (lower-left, upper-right) diagonal.
    RightTriangle,
    /// Each square split into four triangles at its center.
    Crisscross,
}

/// A conforming triangulation with facet adjacency, normals and cell centers.
///
/// Cells are stored counter-clockwise. Local facet `i` of a cell is the facet
/// opposite its local vertex `i`. Facet `f` is oriented so that
/// `facet_normal(f)` points out of `facet_cells(f)[0]`.
#[derive(Clone, Debug)]
pub struct Mesh2D {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    facets: Vec<[usize; 2]>,
    facet_cells: Vec<[usize; 2]>,
    cell_facets: Vec<[usize; 3]>,
    facet_normals: Vec<Point>,
    facet_barycenters: Vec<Point>,
    facet_lengths: Vec<f64>,
    cell_areas: Vec<f64>,
    cell_centers: Vec<Point>,
    center_policy: CenterPolicy,
    centers_exterior: bool,
    boundary_vertex: Vec<bool>,
    interior_facets: Vec<usize>,
    boundary_facets: Vec<usize>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh2D {
    /// Builds the topology from raw vertex coordinates and vertex-index triples.
    /// Clockwise triples are reoriented; degenerate or out-of-range cells are rejected.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 3]>, policy: CenterPolicy) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidParameter("mesh has no cells".into()));
        }
        let nv = vertices.len();
        let mut cells = cells;
        for (t, c) in cells.iter_mut().enumerate() {
            if c.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidParameter(format!(
                    "cell {t} references a vertex outside 0..{nv}"
                )));
            }
            let area = signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]);
            if area.abs() <= f64::EPSILON * 16.0 {
                return Err(Error::InvalidParameter(format!("cell {t} is degenerate")));
            }
            if area < 0.0 {
                c.swap(1, 2);
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<[usize; 2]> = Vec::new();
        let mut facet_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_facets = vec![[0usize; 3]; cells.len()];
        for (t, c) in cells.iter().enumerate() {
            for i in 0..3 {
                let a = c[(i + 1) % 3];
                let b = c[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let f = match edge_index.get(&key) {
                    Some(&f) => {
                        if facet_cells[f][1] != NO_CELL {
                            return Err(Error::InvalidParameter(format!(
                                "facet ({a}, {b}) shared by more than two cells"
                            )));
                        }
                        facet_cells[f][1] = t;
                        f
                    }
                    None => {
                        let f = facets.len();
                        facets.push([a, b]);
                        facet_cells.push([t, NO_CELL]);
                        edge_index.insert(key, f);
                        f
                    }
                };
                cell_facets[t][i] = f;
            }
        }

        let mut facet_normals = Vec::with_capacity(facets.len());
        let mut facet_barycenters = Vec::with_capacity(facets.len());
        let mut facet_lengths = Vec::with_capacity(facets.len());
        let mut boundary_vertex = vec![false; nv];
        let mut interior_facets = Vec::new();
        let mut boundary_facets = Vec::new();
        for (f, &[a, b]) in facets.iter().enumerate() {
            let (pa, pb) = (vertices[a], vertices[b]);
            let len = dist(pa, pb);
            // a -> b runs counter-clockwise around the first cell, so the
            // right-hand normal points out of it.
            facet_normals.push([(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len]);
            facet_barycenters.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            facet_lengths.push(len);
            if facet_cells[f][1] == NO_CELL {
                boundary_facets.push(f);
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            } else {
                interior_facets.push(f);
            }
        }
        let cell_areas = cells
            .iter()
            .map(|c| signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]))
            .collect();

        let mut mesh = Mesh2D {
            vertices,
            cells,
            facets,
            facet_cells,
            cell_facets,
            facet_normals,
            facet_barycenters,
            facet_lengths,
            cell_areas,
            cell_centers: Vec::new(),
            center_policy: policy,
            centers_exterior: false,
            boundary_vertex,
            interior_facets,
            boundary_facets,
        };
        mesh.compute_centers(policy);
        Ok(mesh)
    }

    fn compute_centers(&mut self, policy: CenterPolicy) {
        let mut exterior = false;
        let centers: Vec<Point> = (0..self.num_cells())
            .map(|t| {
                let [a, b, c] = self.cell_points(t);
                let x = match policy {
                    CenterPolicy::Barycenter => [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0],
                    CenterPolicy::Circumcenter => circumcenter(a, b, c),
                };
                if self.barycentric(t, x).iter().any(|&l| l <= GEOMETRY_TOL) {
                    exterior = true;
                }
                x
            })
            .collect();
        self.cell_centers = centers;
        self.center_policy = policy;
        self.centers_exterior = exterior;
    }

    /// Returns a copy of the mesh with cell centers placed per `policy`.
    pub fn set_cell_centers(&self, policy: CenterPolicy) -> Mesh2D {
        let mut m = self.clone();
        m.compute_centers(policy);
        m
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }
    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }
    pub fn cell(&self, t: usize) -> [usize; 3] {
        self.cells[t]
    }
    pub fn cell_points(&self, t: usize) -> [Point; 3] {
        let c = self.cells[t];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }
    pub fn facets(&self) -> &[[usize; 2]] {
        &self.facets
    }
    pub fn facet(&self, f: usize) -> [usize; 2] {
        self.facets[f]
    }
    /// Adjacent cells `M(F)`; the second entry is [`NO_CELL`] on the boundary.
    pub fn facet_cells(&self, f: usize) -> [usize; 2] {
        self.facet_cells[f]
    }
    pub fn cell_facets(&self, t: usize) -> [usize; 3] {
        self.cell_facets[t]
    }
    pub fn facet_normal(&self, f: usize) -> Point {
        self.facet_normals[f]
    }
    pub fn facet_barycenter(&self, f: usize) -> Point {
        self.facet_barycenters[f]
    }
    pub fn facet_length(&self, f: usize) -> f64 {
        self.facet_lengths[f]
    }
    pub fn cell_area(&self, t: usize) -> f64 {
        self.cell_areas[t]
    }
    pub fn cell_center(&self, t: usize) -> Point {
        self.cell_centers[t]
    }
    pub fn cell_centers(&self) -> &[Point] {
        &self.cell_centers
    }
    pub fn center_policy(&self) -> CenterPolicy {
        self.center_policy
    }
    /// True when some cell center is not strictly inside its cell
    /// (right-triangle circumcenters sit on the hypotenuse).
    pub fn centers_exterior(&self) -> bool {
        self.centers_exterior
    }
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }
    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_cells[f][1] == NO_CELL
    }
    pub fn interior_facets(&self) -> &[usize] {
        &self.interior_facets
    }
    pub fn boundary_facets(&self) -> &[usize] {
        &self.boundary_facets
    }
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.boundary_vertex[v]).collect()
    }
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary_vertex[v]).collect()
    }

    /// Outward unit normal `n_{T,F}` of local facet `i` of cell `t`.
    pub fn cell_normal(&self, t: usize, i: usize) -> Point {
        let f = self.cell_facets[t][i];
        let n = self.facet_normals[f];
        if self.facet_cells[f][0] == t {
            n
        } else {
            [-n[0], -n[1]]
        }
    }

    /// The cell across local facet `i` of `t`, if any.
    pub fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        let f = self.cell_facets[t][i];
        let [a, b] = self.facet_cells[f];
        let other = if a == t { b } else { a };
        (other != NO_CELL).then_some(other)
    }

    /// Constant gradients of the three barycentric coordinates of cell `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Point; 3] {
        let [p0, p1, p2] = self.cell_points(t);
        let two_a = 2.0 * self.cell_areas[t];
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }

    /// Barycentric coordinates of `x` with respect to cell `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let [p0, p1, p2] = self.cell_points(t);
        let a = self.cell_areas[t];
        [
            signed_area(x, p1, p2) / a,
            signed_area(p0, x, p2) / a,
            signed_area(p0, p1, x) / a,
        ]
    }

    /// Maps barycentric coordinates on cell `t` to a physical point.
    pub fn map_point(&self, t: usize, l: [f64; 3]) -> Point {
        let [p0, p1, p2] = self.cell_points(t);
        [
            l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
            l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
        ]
    }

    /// Diameter (longest edge) of cell `t`.
    pub fn cell_diameter(&self, t: usize) -> f64 {
        self.cell_facets[t]
            .iter()
            .map(|&f| self.facet_lengths[f])
            .fold(0.0, f64::max)
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_cells()).map(|t| self.cell_diameter(t)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.num_cells())
            .map(|t| self.cell_diameter(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_facet_length(&self) -> f64 {
        self.facet_lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    /// Index of a cell containing `x`, if any.
    pub fn locate(&self, x: Point) -> Option<usize> {
        let tol = 1e-12;
        (0..self.num_cells()).find(|&t| self.barycentric(t, x).iter().all(|&l| l >= -tol))
    }

    /// Writes the plain-text `MESH2D v1` format.
    pub fn to_text(&self) -> String {
        let mut s = String::from("MESH2D v1\n");
        let _ = writeln!(s, "{}", self.num_vertices());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "{}", self.num_cells());
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        let _ = writeln!(s, "{}", self.center_policy.tag());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: &str| Error::MeshFormat {
            line,
            message: message.to_string(),
        };
        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        if header != "MESH2D v1" {
            return Err(err(ln, "expected header `MESH2D v1`"));
        }
        let mut count = |what: &str| -> Result<usize> {
            let (ln, l) = lines.next().ok_or_else(|| err(0, &format!("missing {what} count")))?;
            l.parse().map_err(|_| err(ln, &format!("bad {what} count")))
        };
        let nv = count("vertex")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated vertex list"))?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(|w| w.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, "bad vertex coordinates"))?;
            if xs.len() != 2 {
                return Err(err(ln, "vertex needs two coordinates"));
            }
            vertices.push([xs[0], xs[1]]);
        }
        let (ln, l) = lines.next().ok_or_else(|| err(0, "missing cell count"))?;
        let nc: usize = l.parse().map_err(|_| err(ln, "bad cell count"))?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated cell list"))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(|w| w.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, "bad cell indices"))?;
            if idx.len() != 3 {
                return Err(err(ln, "cell needs three vertex indices"));
            }
            cells.push([idx[0], idx[1], idx[2]]);
        }
        let (ln, tag) = lines.next().ok_or_else(|| err(0, "missing cell-center policy"))?;
        let policy = CenterPolicy::from_tag(tag).ok_or_else(|| err(ln, "unknown cell-center policy"))?;
        Mesh2D::new(vertices, cells, policy)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Mesh2D::from_text(&std::fs::read_to_string(path)?)
    }
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    // Relative to `a` for conditioning.
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

/// Conforming triangulation of the unit square `(-0.5, 0.5)^2` with `n` squares per side.
pub fn generate_square_mesh(n: usize, pattern: SquarePattern) -> Result<Mesh2D> {
    generate_rectangle_mesh([-0.5, -0.5], [0.5, 0.5], n, n, pattern)
}

/// Conforming triangulation of the rectangle `[lo, hi]` with `nx * ny` squares.
pub fn generate_rectangle_mesh(
    lo: Point,
    hi: Point,
    nx: usize,
    ny: usize,
    pattern: SquarePattern,
) -> Result<Mesh2D> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter("subdivision count must be at least 1".into()));
    }
    if !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(Error::InvalidParameter("rectangle corners out of order".into()));
    }
    let dx = (hi[0] - lo[0]) / nx as f64;
    let dy = (hi[1] - lo[1]) / ny as f64;
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([lo[0] + i as f64 * dx, lo[1] + j as f64 * dy]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            match pattern {
                SquarePattern::RightTriangle => {
                    cells.push([a, b, c]);
                    cells.push([a, c, d]);
                }
                SquarePattern::Crisscross => {
                    let m = vertices.len();
                    vertices.push([lo[0] + (i as f64 + 0.5) * dx, lo[1] + (j as f64 + 0.5) * dy]);
                    cells.push([a, b, m]);
                    cells.push([b, c, m]);
                    cells.push([c, d, m]);
                    cells.push([d, a, m]);
                }
            }
        }
    }
    Mesh2D::new(vertices, cells, CenterPolicy::Barycenter)
}

/// Structured ring mesh of the annulus `1 < |x| < 2`: `n_radial` rings of
/// `n_angular` quadrilaterals, each split along one diagonal.
pub fn generate_annulus_mesh(n_radial: usize, n_angular: usize) -> Result<Mesh2D> {
    if n_radial < 1 {
        return Err(Error::InvalidParameter("annulus needs at least one ring".into()));
    }
    if n_angular < 8 {
        return Err(Error::InvalidParameter("annulus needs at least 8 sectors".into()));
    }
    let mut vertices = Vec::with_capacity((n_radial + 1) * n_angular);
    for j in 0..=n_radial {
        let r = 1.0 + j as f64 / n_radial as f64;
        for i in 0..n_angular {
            let th = std::f64::consts::TAU * i as f64 / n_angular as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let vid = |j: usize, i: usize| j * n_angular + (i % n_angular);
    let mut cells = Vec::with_capacity(2 * n_radial * n_angular);
    for j in 0..n_radial {
        for i in 0..n_angular {
            let (a, b, c, d) = (vid(j, i), vid(j, i + 1), vid(j + 1, i + 1), vid(j + 1, i));
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    Mesh2D::new(vertices, cells, CenterPolicy::Barycenter)
}

/// Summary of the geometric properties of a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshReport {
    pub non_obtuse: bool,
    pub weakly_acute: bool,
    pub admissible: bool,
    pub worst_offdiag_stiffness: f64,
    pub worst_admissibility_gap: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub quasi_uniformity_ratio: f64,
}

/// True iff `n_{T,F} . n_{T,F'} <= 1e-12` for every pair of distinct facets of every cell.
pub fn check_non_obtuse(mesh: &Mesh2D) -> bool {
    (0..mesh.num_cells()).all(|t| {
        let n: Vec<Point> = (0..3).map(|i| mesh.cell_normal(t, i)).collect();
        (0..3).all(|i| {
            (i + 1..3).all(|j| n[i][0] * n[j][0] + n[i][1] * n[j][1] <= GEOMETRY_TOL)
        })
    })
}

/// Assembles the P1 stiffness couplings between distinct vertices and reports
/// whether all of them are non-positive, together with the largest one.
pub fn check_weakly_acute(mesh: &Mesh2D) -> (bool, f64) {
    let mut offdiag: HashMap<(usize, usize), f64> = HashMap::new();
    for t in 0..mesh.num_cells() {
        let g = mesh.barycentric_gradients(t);
        let a = mesh.cell_area(t);
        let c = mesh.cell(t);
        for i in 0..3 {
            for j in i + 1..3 {
                let key = (c[i].min(c[j]), c[i].max(c[j]));
                *offdiag.entry(key).or_insert(0.0) += a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    let worst = offdiag.values().copied().fold(f64::NEG_INFINITY, f64::max);
    (worst <= GEOMETRY_TOL, worst)
}

/// Checks `x_F = (x_T + x_T') / 2` on every interior facet to `1e-12 * h_max`.
pub fn check_admissible(mesh: &Mesh2D) -> (bool, f64) {
    let gap = mesh
        .interior_facets()
        .iter()
        .map(|&f| {
            let [t0, t1] = mesh.facet_cells(f);
            let (c0, c1) = (mesh.cell_center(t0), mesh.cell_center(t1));
            let xf = mesh.facet_barycenter(f);
            dist(xf, [0.5 * (c0[0] + c1[0]), 0.5 * (c0[1] + c1[1])])
        })
        .fold(0.0, f64::max);
    (gap <= GEOMETRY_TOL * mesh.h_max(), gap)
}

pub fn mesh_report(mesh: &Mesh2D) -> MeshReport {
    let (weakly_acute, worst_offdiag_stiffness) = check_weakly_acute(mesh);
    let (admissible, worst_admissibility_gap) = check_admissible(mesh);
    let (h_min, h_max) = (mesh.h_min(), mesh.h_max());
    MeshReport {
        non_obtuse: check_non_obtuse(mesh),
        weakly_acute,
        admissible,
        worst_offdiag_stiffness,
        worst_admissibility_gap,
        h_min,
        h_max,
        quasi_uniformity_ratio: h_max / h_min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral() -> Mesh2D {
        let s = 3f64.sqrt() / 2.0;
        Mesh2D::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, s]], vec![[0, 1, 2]], CenterPolicy::Barycenter).unwrap()
    }

    #[test]
    fn square_counts() {
        let m = generate_square_mesh(1, SquarePattern::RightTriangle).unwrap();
        assert_eq!((m.num_cells(), m.num_vertices(), m.num_facets()), (2, 4, 5));
        let m = generate_square_mesh(1, SquarePattern::Crisscross).unwrap();
        assert_eq!((m.num_cells(), m.num_vertices()), (4, 5));
        assert!(matches!(
            generate_square_mesh(0, SquarePattern::RightTriangle),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn annulus_counts_and_radii() {
        let m = generate_annulus_mesh(1, 8).unwrap();
        assert_eq!((m.num_cells(), m.num_vertices()), (16, 16));
        let m = generate_annulus_mesh(4, 40).unwrap();
        for &v in &m.boundary_vertices() {
            let r = m.vertex(v)[0].hypot(m.vertex(v)[1]);
            assert!((r - 1.0).abs() < 1e-14 || (r - 2.0).abs() < 1e-14, "r = {r}");
        }
        assert!(generate_annulus_mesh(1, 7).is_err());
        assert!(generate_annulus_mesh(0, 8).is_err());
    }

    #[test]
    fn adjacency_invariants() {
        for m in [
            generate_square_mesh(5, SquarePattern::RightTriangle).unwrap(),
            generate_square_mesh(3, SquarePattern::Crisscross).unwrap(),
            generate_annulus_mesh(3, 17).unwrap(),
        ] {
            for t in 0..m.num_cells() {
                assert!(m.cell_area(t) > 0.0);
                // closed polygon: sum |F| n_{T,F} = 0
                let mut s = [0.0; 2];
                for i in 0..3 {
                    let n = m.cell_normal(t, i);
                    let l = m.facet_length(m.cell_facets(t)[i]);
                    s[0] += l * n[0];
                    s[1] += l * n[1];
                }
                assert!(s[0].hypot(s[1]) <= 1e-13 * m.h_max());
            }
            for &f in m.interior_facets() {
                let [t0, t1] = m.facet_cells(f);
                let i0 = m.cell_facets(t0).iter().position(|&g| g == f).unwrap();
                let i1 = m.cell_facets(t1).iter().position(|&g| g == f).unwrap();
                let (n0, n1) = (m.cell_normal(t0, i0), m.cell_normal(t1, i1));
                assert_eq!(n0, [-n1[0], -n1[1]]);
            }
            for f in 0..m.num_facets() {
                let [a, b] = m.facet(f);
                let (pa, pb) = (m.vertex(a), m.vertex(b));
                assert_eq!(m.facet_barycenter(f), [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }
    }

    #[test]
    fn non_obtuse_and_weakly_acute() {
        let m = generate_square_mesh(16, SquarePattern::RightTriangle).unwrap();
        assert!(check_non_obtuse(&m));
        let (wa, worst) = check_weakly_acute(&m);
        assert!(wa && worst <= 0.0 + GEOMETRY_TOL);

        let e = equilateral();
        assert!(check_non_obtuse(&e));
        let (wa, worst) = check_weakly_acute(&e);
        // equilateral element: off-diagonals are -cot(60 deg)/2
        assert!(wa);
        assert!((worst + 0.5 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn obtuse_triangle_detected() {
        // both angles opposite the shared edge are obtuse: positive coupling
        let cells = vec![[0, 1, 2], [1, 0, 3]];
        let flat = Mesh2D::new(
            vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [1.0, -0.2]],
            cells.clone(),
            CenterPolicy::Barycenter,
        )
        .unwrap();
        assert!(!check_non_obtuse(&flat));
        let (wa, worst) = check_weakly_acute(&flat);
        assert!(!wa && worst > 0.0);
        // one obtuse angle compensated by an acute one: weakly acute only
        let kite = Mesh2D::new(
            vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [1.0, -2.0]],
            cells,
            CenterPolicy::Barycenter,
        )
        .unwrap();
        assert!(!check_non_obtuse(&kite));
        assert!(check_weakly_acute(&kite).0);
    }

    #[test]
    fn cell_center_policies() {
        let m = Mesh2D::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], CenterPolicy::Circumcenter)
            .unwrap();
        assert_eq!(m.cell_center(0), [0.5, 0.5]);
        assert!(m.centers_exterior());
        let b = m.set_cell_centers(CenterPolicy::Barycenter);
        assert!((b.cell_center(0)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(!b.centers_exterior());
        let e = equilateral().set_cell_centers(CenterPolicy::Circumcenter);
        let c = e.cell_center(0);
        let d: Vec<f64> = e.cell_points(0).iter().map(|&p| dist(p, c)).collect();
        assert!((d[0] - d[1]).abs() < 1e-15 && (d[1] - d[2]).abs() < 1e-15);
    }

    #[test]
    fn admissibility() {
        // centroids of the right-triangle pattern are symmetric about every facet
        let m = generate_square_mesh(8, SquarePattern::RightTriangle).unwrap();
        assert!(check_admissible(&m).0);
        assert!(check_admissible(&m.set_cell_centers(CenterPolicy::Circumcenter)).0);
        let x = generate_square_mesh(4, SquarePattern::Crisscross).unwrap();
        let (ok, gap) = check_admissible(&x);
        // across a diagonal: centroids (1/2,1/6) and (1/6,1/2) of a unit square vs midpoint (1/4,1/4)
        assert!(!ok);
        assert!((gap - 2f64.sqrt() / 12.0 / 4.0).abs() < 1e-12);
        assert!(check_admissible(&x.set_cell_centers(CenterPolicy::Circumcenter)).0);
        assert_eq!(check_admissible(&equilateral()), (true, 0.0));
    }

    #[test]
    fn refinement_halves_h() {
        for pattern in [SquarePattern::RightTriangle, SquarePattern::Crisscross] {
            let h1 = generate_square_mesh(4, pattern).unwrap().h_max();
            let h2 = generate_square_mesh(8, pattern).unwrap().h_max();
            assert!(((h1 / h2) - 2.0).abs() < 0.1);
        }
    }

    #[test]
    fn text_roundtrip() {
        let m = generate_annulus_mesh(2, 9).unwrap().set_cell_centers(CenterPolicy::Circumcenter);
        let back = Mesh2D::from_text(&m.to_text()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.center_policy(), CenterPolicy::Circumcenter);
        assert!(Mesh2D::from_text("MESH2D v2\n").is_err());
    }

    #[test]
    fn report_json_field_names() {
        let r = mesh_report(&generate_square_mesh(2, SquarePattern::RightTriangle).unwrap());
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "non_obtuse",
            "weakly_acute",
            "admissible",
            "worst_offdiag_stiffness",
            "worst_admissibility_gap",
            "h_min",
            "h_max",
            "quasi_uniformity_ratio",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(!r.non_obtuse || r.weakly_acute);
    }
}
