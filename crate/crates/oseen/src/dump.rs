//! Plain-text dumps of meshes, matrices and vectors for inspection with external tools.

use std::io::Write;

use oseen_core::mesh::MeshTopology;
use oseen_core::sparse::CsrMatrix;

use crate::error::StudyResult;

/// Sections `vertices`, `elements` and `facets`, each headed by its count.
///
/// Facet lines read `index v0 v1 left right boundary`, with `-` for a missing side.
pub fn write_mesh<W: Write>(mesh: &MeshTopology, mut out: W) -> StudyResult<()> {
    writeln!(out, "# uniform mesh n={}", mesh.n)?;
    writeln!(out, "vertices {}", mesh.vertices.len())?;
    for (i, [x, y]) in mesh.vertices.iter().enumerate() {
        writeln!(out, "{i} {x:e} {y:e}")?;
    }
    writeln!(out, "elements {}", mesh.elements.len())?;
    for (i, [a, b, c]) in mesh.elements.iter().enumerate() {
        writeln!(out, "{i} {a} {b} {c}")?;
    }
    writeln!(out, "facets {}", mesh.facets.len())?;
    for (i, f) in mesh.facets.iter().enumerate() {
        let side = |s: usize| f.sides[s].map_or_else(|| "-".to_owned(), |s| s.element.to_string());
        writeln!(out, "{i} {} {} {} {} {}", f.vertices[0], f.vertices[1], side(0), side(1), u8::from(f.boundary))?;
    }
    Ok(())
}

/// Header `nrows ncols nnz`, then one zero-based `row col value` line per stored entry.
pub fn write_coordinate<W: Write>(matrix: &CsrMatrix, mut out: W) -> StudyResult<()> {
    writeln!(out, "{} {} {}", matrix.nrows, matrix.ncols, matrix.nnz())?;
    for (i, j, v) in matrix.triplets() {
        writeln!(out, "{i} {j} {v:e}")?;
    }
    Ok(())
}

pub fn write_vector<W: Write>(values: &[f64], mut out: W) -> StudyResult<()> {
    writeln!(out, "{}", values.len())?;
    for v in values {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use oseen_core::mesh::build_uniform_mesh;

    #[test]
    fn mesh_sections() {
        let mut buf = Vec::new();
        write_mesh(&build_uniform_mesh(1).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("vertices 4\n") && text.contains("elements 2\n") && text.contains("facets 5\n"));
        let boundary = text.lines().skip_while(|l| !l.starts_with("facets")).skip(1).filter(|l| l.ends_with(" 1")).count();
        assert_eq!(boundary, 4);
    }

    #[test]
    fn coordinate_round_trip() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.5), (2, 1, -1e-17), (1, 2, 0.1)]);
        let mut buf = Vec::new();
        write_coordinate(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("3 3 3"));
        let parsed: Vec<(usize, usize, f64)> = lines
            .map(|l| {
                let f: Vec<&str> = l.split(' ').collect();
                (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
            })
            .collect();
        assert_eq!(CsrMatrix::from_triplets(3, 3, parsed), a);
    }
}
