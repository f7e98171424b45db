//! Legacy ASCII VTK output of meshes with point and cell data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fespace::{FeFunction, FeSystem, Space};
use crate::mesh::Mesh2D;

pub enum VtkData<'a> {
    Scalars(&'a [f64]),
    Vectors(&'a [[f64; 3]]),
}

fn push_data(out: &mut String, name: &str, data: &VtkData) {
    match data {
        VtkData::Scalars(s) => {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in *s {
                let _ = writeln!(out, "{x:.12e}");
            }
        }
        VtkData::Vectors(v) => {
            let _ = writeln!(out, "VECTORS {name} double");
            for x in *v {
                let _ = writeln!(out, "{:.12e} {:.12e} {:.12e}", x[0], x[1], x[2]);
            }
        }
    }
}

pub fn vtk_string(mesh: &Mesh2D, title: &str, points: &[(&str, VtkData)], cells: &[(&str, VtkData)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.15e} {:.15e} 0", p[0], p[1]);
    }
    let nc = mesh.num_cells();
    let _ = writeln!(out, "CELLS {nc} {}", 4 * nc);
    for c in mesh.cells() {
        let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("5\n");
    }
    if !points.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.num_vertices());
        for (name, d) in points {
            push_data(&mut out, name, d);
        }
    }
    if !cells.is_empty() {
        let _ = writeln!(out, "CELL_DATA {nc}");
        for (name, d) in cells {
            push_data(&mut out, name, d);
        }
    }
    out
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &Mesh2D,
    title: &str,
    points: &[(&str, VtkData)],
    cells: &[(&str, VtkData)],
) -> Result<()> {
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, vtk_string(mesh, title, points, cells))?;
    Ok(())
}

/// Velocity (vertex values of the P2 field), pressure and the director,
/// as point data for CG1 and cell data for DG0 directors.
pub fn write_state(path: impl AsRef<Path>, sys: &FeSystem, v: &FeFunction, p: &FeFunction, d: &FeFunction) -> Result<()> {
    let mesh = sys.mesh();
    let vel: Vec<[f64; 3]> = (0..mesh.num_vertices())
        .map(|z| {
            let u = v.vec2(z);
            [u[0], u[1], 0.0]
        })
        .collect();
    let dir: Vec<[f64; 3]> = (0..d.values().len() / 3).map(|i| d.vec3(i)).collect();
    let mut points = vec![("velocity", VtkData::Vectors(&vel)), ("pressure", VtkData::Scalars(p.values()))];
    let mut cells = Vec::new();
    if d.space() == Space::Dg0Director {
        cells.push(("director", VtkData::Vectors(&dir)));
    } else {
        points.push(("director", VtkData::Vectors(&dir)));
    }
    write_vtk(path, mesh, "lcflow state", &points, &cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_square_mesh, SquarePattern};

    #[test]
    fn layout_of_sections() {
        let sys = FeSystem::new(generate_square_mesh(1, SquarePattern::RightTriangle).unwrap());
        let v = FeFunction::zeros(&sys, Space::P2Velocity);
        let p = sys.interpolate_p1(|x| x[0]);
        let d = sys.interpolate_dg0(|_| [0.0, 0.0, 1.0]);
        let dir = std::env::temp_dir().join(format!("lcflow-vtk-{}", std::process::id()));
        let path = dir.join("s.vtk");
        write_state(&path, &sys, &v, &p, &d).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 4 double\n"));
        assert!(text.contains("CELLS 2 8\n"));
        assert!(text.contains("POINT_DATA 4\nVECTORS velocity double\n"));
        assert!(text.contains("CELL_DATA 2\nVECTORS director double\n"));
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 2);
    }
}
