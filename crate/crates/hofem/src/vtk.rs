//! Legacy ASCII VTK output: high-order elements are decomposed into linear
//! sub-cells at the Gauss–Lobatto lattice of the requested degree, with
//! points duplicated per element so discontinuous fields and periodic
//! meshes render correctly. Cell types: VTK_QUAD (9), VTK_HEXAHEDRON (12).

use crate::basis;
use crate::error::Result;
use crate::gfmt::g17;
use crate::mesh::CartesianMesh;
use std::io::Write;
use std::path::Path;

/// A nodal field sampled on the per-element lattice of the write degree:
/// `values[(el * lattice_size + slot) * components + c]`.
pub struct VtkField<'a> {
    pub name: &'a str,
    pub components: usize,
    pub values: &'a [f64],
}

/// Write the mesh geometry alone, decomposed at its own geometry order.
pub fn write_mesh(path: &Path, mesh: &CartesianMesh) -> Result<()> {
    write_fields(path, mesh, mesh.geom_order(), &[])
}

/// Write the mesh with point fields given on the degree-`degree` lattice.
pub fn write_fields(
    path: &Path,
    mesh: &CartesianMesh,
    degree: usize,
    fields: &[VtkField],
) -> Result<()> {
    let dim = mesh.dim();
    let ne = mesh.num_elements();
    let n1 = degree + 1;
    let lattice = n1.pow(dim as u32);
    let nodes = basis::gll_nodes(degree)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "hofem mesh")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", ne * lattice)?;
    let mut xi = [0.0f64; 3];
    let mut coords = [0.0f64; 3];
    for el in 0..ne {
        for slot in 0..lattice {
            let mut rem = slot;
            for a in 0..dim {
                xi[a] = nodes[rem % n1];
                rem /= n1;
            }
            mesh.eval_coords(el, &xi[..dim], &mut coords[..dim]);
            if dim == 2 {
                coords[2] = 0.0;
            }
            writeln!(out, "{} {} {}", g17(coords[0]), g17(coords[1]), g17(coords[2]))?;
        }
    }
    let cells_per_el = degree.pow(dim as u32);
    let corners = 1usize << dim;
    writeln!(
        out,
        "CELLS {} {}",
        ne * cells_per_el,
        ne * cells_per_el * (corners + 1)
    )?;
    for el in 0..ne {
        let base = el * lattice;
        if dim == 2 {
            for j in 0..degree {
                for i in 0..degree {
                    let p00 = base + i + n1 * j;
                    writeln!(out, "4 {} {} {} {}", p00, p00 + 1, p00 + 1 + n1, p00 + n1)?;
                }
            }
        } else {
            for k in 0..degree {
                for j in 0..degree {
                    for i in 0..degree {
                        let p = base + i + n1 * (j + n1 * k);
                        let up = n1 * n1;
                        writeln!(
                            out,
                            "8 {} {} {} {} {} {} {} {}",
                            p,
                            p + 1,
                            p + 1 + n1,
                            p + n1,
                            p + up,
                            p + 1 + up,
                            p + 1 + n1 + up,
                            p + n1 + up
                        )?;
                    }
                }
            }
        }
    }
    writeln!(out, "CELL_TYPES {}", ne * cells_per_el)?;
    let cell_type = if dim == 2 { 9 } else { 12 };
    for _ in 0..ne * cells_per_el {
        writeln!(out, "{cell_type}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", ne * lattice)?;
        for field in fields {
            if field.components == 1 {
                writeln!(out, "SCALARS {} double 1", field.name)?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for v in field.values {
                    writeln!(out, "{}", g17(*v))?;
                }
            } else {
                writeln!(out, "VECTORS {} double", field.name)?;
                for chunk in field.values.chunks(field.components) {
                    let z = if field.components > 2 { chunk[2] } else { 0.0 };
                    writeln!(out, "{} {} {}", g17(chunk[0]), g17(chunk[1]), g17(z))?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_mesh_structure() {
        let mesh = CartesianMesh::unit_square(2, 1, 2).unwrap();
        let dir = std::env::temp_dir().join("hofem_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.vtk");
        write_mesh(&path, &mesh).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        // 2 elements x 9 lattice points, 2 x 4 quad sub-cells of type 9.
        assert_eq!(lines[4], "POINTS 18 double");
        assert!(text.contains("CELLS 8 40"));
        let nines = text
            .lines()
            .skip_while(|l| !l.starts_with("CELL_TYPES"))
            .skip(1)
            .take_while(|l| *l == "9")
            .count();
        assert_eq!(nines, 8);
    }

    #[test]
    fn hex_mesh_and_scalar_field() {
        let mesh = CartesianMesh::unit_cube(1, 1, 1, 1).unwrap();
        let dir = std::env::temp_dir().join("hofem_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cube.vtk");
        let values: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let field = VtkField {
            name: "u",
            components: 1,
            values: &values,
        };
        write_fields(&path, &mesh, 1, &[field]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("CELL_TYPES 1\n12"));
        assert!(text.contains("POINT_DATA 8"));
        assert!(text.contains("SCALARS u double 1"));
        assert!(text.ends_with("7\n"));
    }
}
