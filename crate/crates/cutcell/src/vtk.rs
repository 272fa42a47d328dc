//! Legacy VTK ASCII output of cut results.
//!
//! Three views of a [`CutMesh`] are written as unstructured grids: interior
//! volume pieces and exterior volume pieces as tetrahedra (each convex
//! piece simplexified the same way volumes are computed), and the clipped
//! boundary polygons as flat polygon cells. Every cell carries the linear
//! index of its background grid cell and a state label as integer cell
//! data, so the pieces of one grid cell can be isolated in a viewer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use crate::cut::{CellState, CutMesh};
use crate::error::{Error, Result};
use crate::measures::simplexify;
use crate::rotation::Vid;

const VTK_TETRA: u8 = 10;
const VTK_POLYGON: u8 = 7;

/// State labels in the exported cell data.
const STATE_BOUNDARY: i64 = 0;
const STATE_INTERIOR: i64 = 1;
const STATE_EXTERIOR: i64 = 2;

#[derive(Default)]
struct VtkBuffer {
    points: Vec<Point3<f64>>,
    cells: Vec<Vec<usize>>,
    types: Vec<u8>,
    cell_id: Vec<i64>,
    state: Vec<i64>,
}

impl VtkBuffer {
    /// Copies the coordinates used by `ids` into the point list, reusing
    /// entries already copied for the same cut cell.
    fn map_ids(
        &mut self,
        coords: &[Point3<f64>],
        ids: &[Vid],
        seen: &mut std::collections::HashMap<Vid, usize>,
    ) -> Vec<usize> {
        ids.iter()
            .map(|&v| {
                *seen.entry(v).or_insert_with(|| {
                    self.points.push(coords[v]);
                    self.points.len() - 1
                })
            })
            .collect()
    }

    fn render(&self, title: &str) -> String {
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 2.0\n");
        let _ = writeln!(s, "{title}");
        s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
        }
        let total: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), total);
        for c in &self.cells {
            let _ = write!(s, "{}", c.len());
            for &i in c {
                let _ = write!(s, " {i}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for &t in &self.types {
            let _ = writeln!(s, "{t}");
        }
        let _ = writeln!(s, "CELL_DATA {}", self.cells.len());
        s.push_str("SCALARS cell_id int 1\nLOOKUP_TABLE default\n");
        for &id in &self.cell_id {
            let _ = writeln!(s, "{id}");
        }
        s.push_str("SCALARS state int 1\nLOOKUP_TABLE default\n");
        for &st in &self.state {
            let _ = writeln!(s, "{st}");
        }
        s
    }
}

fn pieces_vtk(cm: &CutMesh, state: CellState) -> String {
    let (label, which) = match state {
        CellState::Interior => (STATE_INTERIOR, "interior"),
        _ => (STATE_EXTERIOR, "exterior"),
    };
    let mut buf = VtkBuffer::default();
    for cc in &cm.cut_cells {
        let pieces = match state {
            CellState::Interior => &cc.interior,
            _ => &cc.exterior,
        };
        let ci = cm.grid.cell_index(cc.cell) as i64;
        let mut seen = std::collections::HashMap::new();
        for piece in pieces {
            for tet in simplexify(&piece.faces) {
                let ids = buf.map_ids(&cc.coords, &tet, &mut seen);
                buf.cells.push(ids);
                buf.types.push(VTK_TETRA);
                buf.cell_id.push(ci);
                buf.state.push(label);
            }
        }
    }
    buf.render(&format!("cut cell {which} volumes"))
}

/// Tetrahedra of all interior volume pieces.
pub fn interior_vtk_string(cm: &CutMesh) -> String {
    pieces_vtk(cm, CellState::Interior)
}

/// Tetrahedra of all exterior volume pieces.
pub fn exterior_vtk_string(cm: &CutMesh) -> String {
    pieces_vtk(cm, CellState::Exterior)
}

/// Clipped boundary polygons.
pub fn boundary_vtk_string(cm: &CutMesh) -> String {
    let mut buf = VtkBuffer::default();
    for cc in &cm.cut_cells {
        let ci = cm.grid.cell_index(cc.cell) as i64;
        let mut seen = std::collections::HashMap::new();
        for bf in &cc.boundary {
            let ids = buf.map_ids(&cc.coords, &bf.cycle, &mut seen);
            buf.cells.push(ids);
            buf.types.push(VTK_POLYGON);
            buf.cell_id.push(ci);
            buf.state.push(STATE_BOUNDARY);
        }
    }
    buf.render("cut cell boundary polygons")
}

/// Writes `<stem>_interior.vtk` and `<stem>_boundary.vtk` under `dir`, plus
/// `<stem>_exterior.vtk` when `exteriors` is set. Fails when the cut has no
/// cut cells at all.
pub fn export_vtk(cm: &CutMesh, dir: &Path, stem: &str, exteriors: bool) -> Result<()> {
    if cm.cut_cells.is_empty() {
        return Err(Error::InvalidConfig(
            "no active cells: the surface does not cross any grid cell".into(),
        ));
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}_interior.vtk")), interior_vtk_string(cm))?;
    fs::write(dir.join(format!("{stem}_boundary.vtk")), boundary_vtk_string(cm))?;
    if exteriors {
        fs::write(dir.join(format!("{stem}_exterior.vtk")), exterior_vtk_string(cm))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::cut_mesh;
    use crate::grid::{background_grid, GridConfig};
    use crate::halfspace::Tolerances;
    use crate::models;
    use crate::stl::weld;

    /// Minimal strict reader for the exact dialect written above.
    struct Parsed {
        points: Vec<[f64; 3]>,
        cells: Vec<Vec<usize>>,
        types: Vec<u8>,
        cell_id: Vec<i64>,
        state: Vec<i64>,
    }

    fn parse_vtk(text: &str) -> Parsed {
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# vtk DataFile Version 2.0");
        let _title = lines.next().unwrap();
        assert_eq!(lines.next().unwrap(), "ASCII");
        assert_eq!(lines.next().unwrap(), "DATASET UNSTRUCTURED_GRID");

        let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(head[0], "POINTS");
        assert_eq!(head[2], "double");
        let np: usize = head[1].parse().unwrap();
        let mut points = Vec::with_capacity(np);
        for _ in 0..np {
            let xyz: Vec<f64> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|w| w.parse().unwrap())
                .collect();
            assert_eq!(xyz.len(), 3);
            points.push([xyz[0], xyz[1], xyz[2]]);
        }

        let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(head[0], "CELLS");
        let nc: usize = head[1].parse().unwrap();
        let total: usize = head[2].parse().unwrap();
        let mut cells = Vec::with_capacity(nc);
        let mut seen_total = 0;
        for _ in 0..nc {
            let row: Vec<usize> = lines
                .next()
                .unwrap()
                .split_whitespace()
                .map(|w| w.parse().unwrap())
                .collect();
            assert_eq!(row[0], row.len() - 1);
            seen_total += row.len();
            for &i in &row[1..] {
                assert!(i < np, "point index out of range");
            }
            cells.push(row[1..].to_vec());
        }
        assert_eq!(seen_total, total);

        let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(head, ["CELL_TYPES", &nc.to_string()]);
        let types: Vec<u8> = (0..nc)
            .map(|_| lines.next().unwrap().parse().unwrap())
            .collect();

        let head: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(head, ["CELL_DATA", &nc.to_string()]);
        assert_eq!(lines.next().unwrap(), "SCALARS cell_id int 1");
        assert_eq!(lines.next().unwrap(), "LOOKUP_TABLE default");
        let cell_id: Vec<i64> = (0..nc)
            .map(|_| lines.next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(lines.next().unwrap(), "SCALARS state int 1");
        assert_eq!(lines.next().unwrap(), "LOOKUP_TABLE default");
        let state: Vec<i64> = (0..nc)
            .map(|_| lines.next().unwrap().parse().unwrap())
            .collect();
        assert!(lines.next().is_none());
        Parsed { points, cells, types, cell_id, state }
    }

    fn tet_volume_of(points: &[[f64; 3]], t: &[usize]) -> f64 {
        let p = |i: usize| nalgebra::Point3::new(points[i][0], points[i][1], points[i][2]);
        let (a, b, c, d) = (p(t[0]), p(t[1]), p(t[2]), p(t[3]));
        (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
    }

    #[test]
    fn cube_inside_one_cell_exports_six_tets() {
        let mesh = weld(
            &models::box_soup(
                nalgebra::Point3::new(0.25, 0.25, 0.25),
                nalgebra::Point3::new(0.75, 0.75, 0.75),
            ),
            0.0,
        );
        let (lo, hi) = mesh.bbox();
        let grid = background_grid(lo, hi, &GridConfig { n_max: 1, n_min: 1, scale: 2.0 }).unwrap();
        assert_eq!(grid.dims, [1, 1, 1]);
        let cm = cut_mesh(&mesh, &grid, Tolerances::for_extent(0.5)).unwrap();

        let parsed = parse_vtk(&interior_vtk_string(&cm));
        assert_eq!(parsed.cells.len(), 6);
        assert!(parsed.types.iter().all(|&t| t == VTK_TETRA));
        assert!(parsed.state.iter().all(|&s| s == STATE_INTERIOR));
        assert!(parsed.cell_id.iter().all(|&c| c == 0));
        let v: f64 = parsed
            .cells
            .iter()
            .map(|t| tet_volume_of(&parsed.points, t))
            .sum();
        assert!((v - 0.125).abs() < 1e-14, "tet volume sum {v}");
    }

    #[test]
    fn torus_export_round_trips_and_matches_volumes() {
        let mesh = weld(&models::torus(12, 12), 0.0);
        let (lo, hi) = mesh.bbox();
        let grid = background_grid(lo, hi, &GridConfig { n_max: 10, n_min: 2, scale: 1.4 }).unwrap();
        let cm = cut_mesh(&mesh, &grid, Tolerances::for_extent((hi - lo).amax())).unwrap();
        assert!(cm.n_cut() > 0);

        let interior = parse_vtk(&interior_vtk_string(&cm));
        let v: f64 = interior
            .cells
            .iter()
            .map(|t| tet_volume_of(&interior.points, t))
            .sum();
        let v_pieces: f64 = cm.cut_cells.iter().map(|cc| cc.volume_in).sum();
        assert!(
            (v - v_pieces).abs() <= 1e-10 * v_pieces.max(1.0),
            "parsed {v} vs pieces {v_pieces}"
        );

        let boundary = parse_vtk(&boundary_vtk_string(&cm));
        assert!(boundary.types.iter().all(|&t| t == VTK_POLYGON));
        assert_eq!(
            boundary.cells.len(),
            cm.cut_cells.iter().map(|cc| cc.boundary.len()).sum::<usize>()
        );
        for id in boundary.cell_id {
            assert!((id as usize) < cm.grid.cell_count());
        }
    }

    #[test]
    fn surface_missing_the_grid_is_an_error() {
        let z = 5.0;
        let quad = [
            nalgebra::Point3::new(-1.0, -1.0, z),
            nalgebra::Point3::new(2.0, -1.0, z),
            nalgebra::Point3::new(2.0, 2.0, z),
            nalgebra::Point3::new(-1.0, 2.0, z),
        ];
        let tris = vec![[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]];
        let mesh = weld(&tris, 0.0);
        let grid = background_grid(
            nalgebra::Point3::new(0.0, 0.0, 0.0),
            nalgebra::Point3::new(1.0, 1.0, 1.0),
            &GridConfig { n_max: 1, n_min: 1, scale: 1.0 },
        )
        .unwrap();
        let cm = cut_mesh(&mesh, &grid, Tolerances::for_extent(3.0)).unwrap();
        assert_eq!(cm.n_cut(), 0);

        let dir = tempfile::tempdir().unwrap();
        let err = export_vtk(&cm, dir.path(), "far", false).unwrap_err();
        assert!(err.to_string().contains("no active cells"), "{err}");
    }

    #[test]
    fn export_writes_the_expected_files() {
        let mesh = weld(&models::cube(), 0.0);
        let (lo, hi) = mesh.bbox();
        let grid = background_grid(lo, hi, &GridConfig { n_max: 5, n_min: 2, scale: 1.4 }).unwrap();
        let cm = cut_mesh(&mesh, &grid, Tolerances::for_extent(1.0)).unwrap();

        let dir = tempfile::tempdir().unwrap();
        export_vtk(&cm, dir.path(), "cube", true).unwrap();
        for name in ["cube_interior.vtk", "cube_boundary.vtk", "cube_exterior.vtk"] {
            let text = fs::read_to_string(dir.path().join(name)).unwrap();
            parse_vtk(&text);
        }
    }
}
