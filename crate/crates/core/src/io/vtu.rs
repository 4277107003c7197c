//! ASCII VTK XML unstructured-grid output.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::RunError;
use crate::space::DomainSpace;

/// VTK cell type of a linear triangle.
pub const VTK_TRIANGLE: u8 = 5;

/// Renders one domain with vertex velocity (z = 0) and pressure.
///
/// `u` is the interleaved P2 velocity; only its vertex values are written.
pub fn render_vtu(space: &DomainSpace, u: &[f64], p: &[f64]) -> String {
    let nv = space.n_vertices;
    let nt = space.n_triangles();
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\"?>\n");
    s.push_str("<VTKFile type=\"UnstructuredGrid\" version=\"0.1\" byte_order=\"LittleEndian\">\n");
    s.push_str("  <UnstructuredGrid>\n");
    let _ = writeln!(s, "    <Piece NumberOfPoints=\"{nv}\" NumberOfCells=\"{nt}\">");
    s.push_str("      <PointData Vectors=\"velocity\" Scalars=\"pressure\">\n");
    s.push_str("        <DataArray type=\"Float64\" Name=\"velocity\" NumberOfComponents=\"3\" format=\"ascii\">\n");
    for k in 0..nv {
        let _ = writeln!(s, "          {:e} {:e} 0", u[2 * k], u[2 * k + 1]);
    }
    s.push_str("        </DataArray>\n");
    s.push_str("        <DataArray type=\"Float64\" Name=\"pressure\" format=\"ascii\">\n");
    for v in &p[..nv] {
        let _ = writeln!(s, "          {v:e}");
    }
    s.push_str("        </DataArray>\n      </PointData>\n");
    s.push_str("      <Points>\n");
    s.push_str("        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">\n");
    for x in &space.node_coords[..nv] {
        let _ = writeln!(s, "          {:e} {:e} 0", x[0], x[1]);
    }
    s.push_str("        </DataArray>\n      </Points>\n");
    s.push_str("      <Cells>\n");
    s.push_str("        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">\n");
    for t in 0..nt {
        let v = space.triangle_vertices(t);
        let _ = writeln!(s, "          {} {} {}", v[0], v[1], v[2]);
    }
    s.push_str("        </DataArray>\n");
    s.push_str("        <DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">\n");
    for t in 0..nt {
        let _ = writeln!(s, "          {}", 3 * (t + 1));
    }
    s.push_str("        </DataArray>\n");
    s.push_str("        <DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">\n");
    for _ in 0..nt {
        let _ = writeln!(s, "          {VTK_TRIANGLE}");
    }
    s.push_str("        </DataArray>\n      </Cells>\n");
    s.push_str("    </Piece>\n  </UnstructuredGrid>\n</VTKFile>\n");
    s
}

pub fn write_vtu(space: &DomainSpace, u: &[f64], p: &[f64], path: &Path) -> Result<(), RunError> {
    std::fs::write(path, render_vtu(space, u, p)).map_err(|source| RunError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_two_domain_mesh, Domain};
    use crate::space::Space;

    #[test]
    fn header_counts_and_points() {
        let space = Space::new(generate_two_domain_mesh(1).unwrap());
        let ds = space.domain(Domain::Ocean);
        let u = vec![0.0; ds.n_velocity_dofs()];
        let p = vec![0.0; ds.n_pressure_dofs()];
        let s = render_vtu(ds, &u, &p);
        assert!(s.starts_with("<?xml version=\"1.0\"?>\n<VTKFile type=\"UnstructuredGrid\""));
        assert!(s.contains("NumberOfPoints=\"4\" NumberOfCells=\"2\""));
        assert_eq!(s.lines().filter(|l| *l == "          5").count(), 2);
        assert!(s.contains("          0e0 -1e0 0\n"));
    }
}
