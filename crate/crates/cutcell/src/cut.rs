//! Cell-by-cell intersection of a closed triangle surface with a Cartesian
//! grid, and propagation of inside/outside states to the uncrossed cells.
//!
//! Each candidate cell gets its own local scene: the eight cell corners, the
//! vertices of the triangles whose boxes reach the cell, and one distance
//! matrix holding the six cell planes and one plane per triangle. The
//! surface is clipped to the cell, split into convex pieces, and the cell
//! fragment is partitioned into interior and exterior volumes bounded by
//! the surviving surface planes.
//!
//! Cells share their grid planes bitwise and the surface planes are built
//! once from the same global coordinates, so the two cells on either side
//! of a grid plane make identical keep/drop decisions about it. Min-face
//! clips keep the boundary and max-face clips drop it, so a surface face
//! lying exactly on a grid plane is processed by exactly one of the two
//! cells it touches.

use std::collections::{HashMap, VecDeque};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::clip::{clip_by_row, ClipMode, ClipOutcome};
use crate::convexify::{convex_decompose, LeafRegion};
use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::halfspace::{DistanceMatrix, Plane, Tolerances};
use crate::measures::{face_area, face_area_vector, piece_volume, triangle_area, Kahan};
use crate::rotation::{box_corners, box_rotation, Face, Pid, RotationSystem, Vid};
use crate::stl::SurfaceMesh;

/// Where a grid cell sits relative to the solid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellState {
    Interior,
    Exterior,
    Cut,
}

/// One convex volume fragment of a cut cell.
#[derive(Clone, Debug)]
pub struct CutPiece {
    /// Bounding faces, counter-clockwise from outside, indexing the owning
    /// cell's coordinate store.
    pub faces: Vec<Face>,
    pub volume: f64,
}

/// One polygon of the surface clipped to a cell.
#[derive(Clone, Debug)]
pub struct BoundaryFace {
    pub cycle: Vec<Vid>,
    /// Index of the originating triangle in the input surface.
    pub stl_face: usize,
}

/// Everything produced for one cell crossed by the surface.
#[derive(Clone, Debug)]
pub struct CutCell {
    pub cell: [usize; 3],
    /// Local coordinate store shared by all pieces and boundary faces.
    pub coords: Vec<Point3<f64>>,
    pub interior: Vec<CutPiece>,
    pub exterior: Vec<CutPiece>,
    pub boundary: Vec<BoundaryFace>,
    pub volume_in: f64,
    pub volume_out: f64,
    pub boundary_area: f64,
    /// Neighbour state seen through each cell face (-x, +x, -y, +y, -z,
    /// +z), when this cell's geometry determines it.
    pub marks: [Option<CellState>; 6],
}

/// The full cut: per-cell states, the cut cells' geometry, and the summed
/// volume and area bookkeeping.
#[derive(Clone, Debug)]
pub struct CutMesh {
    pub grid: CartesianGrid,
    pub tol: Tolerances,
    /// State of every cell, linear index order.
    pub states: Vec<CellState>,
    /// Cut cells in ascending linear index order.
    pub cut_cells: Vec<CutCell>,
    index_of: HashMap<usize, usize>,
    pub n_interior: usize,
    pub n_exterior: usize,
    pub v_in: f64,
    pub v_out: f64,
    pub v_box: f64,
    pub area_stl: f64,
    pub area_cut: f64,
}

impl CutMesh {
    pub fn n_cut(&self) -> usize {
        self.cut_cells.len()
    }

    /// Relative defect of interior plus exterior volume against the grid
    /// volume.
    pub fn eps_volume(&self) -> f64 {
        ((self.v_in + self.v_out) - self.v_box).abs() / self.v_box
    }

    /// Relative defect of the clipped boundary area against the input
    /// surface area.
    pub fn eps_area(&self) -> f64 {
        (self.area_stl - self.area_cut).abs() / self.area_stl
    }

    /// The cut cell at grid coordinates `c`, if that cell is cut.
    pub fn cut_cell_at(&self, c: [usize; 3]) -> Option<&CutCell> {
        self.index_of
            .get(&self.grid.cell_index(c))
            .map(|&i| &self.cut_cells[i])
    }

    /// True when the world-frame point lies in the solid. Points on a
    /// surface face may land on either side.
    pub fn contains(&self, p: Point3<f64>) -> bool {
        let p = self.grid.to_grid_frame(p);
        let Some(c) = self.grid.cell_of_point(p) else {
            return false;
        };
        match self.states[self.grid.cell_index(c)] {
            CellState::Interior => true,
            CellState::Exterior => false,
            CellState::Cut => {
                let cc = self.cut_cell_at(c).expect("cut state without cut cell");
                let floor = self.tol.snap * self.grid.h;
                cc.interior.iter().any(|piece| {
                    point_in_piece(&piece.faces, &cc.coords, &p, self.tol.snap, floor)
                })
            }
        }
    }
}

/// True when `p` is inside the convex piece, within `eps` slack per face.
/// Faces with area at most `area_floor` are clip residue whose normals are
/// numerically meaningless; they bound nothing and are skipped.
fn point_in_piece(
    faces: &[Face],
    coords: &[Point3<f64>],
    p: &Point3<f64>,
    eps: f64,
    area_floor: f64,
) -> bool {
    for f in faces {
        let n = face_area_vector(&f.cycle, coords);
        let len = n.norm();
        if len <= area_floor {
            continue;
        }
        if n.dot(&(p - coords[f.cycle[0]])) > eps * len {
            return false;
        }
    }
    true
}

/// Outward plane of cell face `f` (0..6 as -x, +x, -y, +y, -z, +z).
fn cell_plane(lo: Point3<f64>, hi: Point3<f64>, f: usize) -> Plane {
    let axis = f / 2;
    let up = f % 2 == 1;
    let mut normal = Vector3::zeros();
    normal[axis] = if up { 1.0 } else { -1.0 };
    Plane::new(normal, if up { hi } else { lo })
}

/// Intersects the surface with every candidate cell, floods the remaining
/// cells from the cut cells' face marks, and sums volumes and areas.
///
/// The surface must already be welded; its triangles are taken as given in
/// world coordinates and moved into the grid frame here.
pub fn cut_mesh(mesh: &SurfaceMesh, grid: &CartesianGrid, tol: Tolerances) -> Result<CutMesh> {
    let verts: Vec<Point3<f64>> = if grid.is_unperturbed() {
        mesh.verts.clone()
    } else {
        mesh.verts.iter().map(|&p| grid.to_grid_frame(p)).collect()
    };

    let mut area = Kahan::default();
    for t in &mesh.tris {
        area.add(triangle_area(verts[t[0]], verts[t[1]], verts[t[2]]));
    }
    let area_stl = area.total();

    let mut face_planes = Vec::with_capacity(mesh.tris.len());
    for (fi, t) in mesh.tris.iter().enumerate() {
        let plane = Plane::from_triangle(verts[t[0]], verts[t[1]], verts[t[2]])
            .ok_or_else(|| Error::MalformedStl(format!("degenerate facet {fi}")))?;
        face_planes.push(plane);
    }

    let (blo, bhi) = bbox_of(&verts);
    let scale = (bhi - blo).amax().max(grid.h);

    let bins = bin_faces(grid, &verts, &mesh.tris, tol.coplanar);
    let mut candidates: Vec<usize> = bins.keys().copied().collect();
    candidates.sort_unstable();

    let results: Vec<(usize, Option<CutCell>)> = candidates
        .par_iter()
        .map(|&ci| {
            let c = grid.cell_at(ci);
            cut_one_cell(grid, c, &verts, &mesh.tris, &face_planes, &bins[&ci], scale, tol)
                .map(|opt| (ci, opt))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cut_cells = Vec::new();
    let mut index_of = HashMap::new();
    for (ci, opt) in results {
        if let Some(cc) = opt {
            index_of.insert(ci, cut_cells.len());
            cut_cells.push(cc);
        }
    }

    let (states, n_interior, n_exterior) = classify_cells(grid, &cut_cells)?;

    let mut in_acc = Kahan::default();
    let mut out_acc = Kahan::default();
    let mut area_acc = Kahan::default();
    for cc in &cut_cells {
        in_acc.add(cc.volume_in);
        out_acc.add(cc.volume_out);
        area_acc.add(cc.boundary_area);
    }
    let cell_volume = grid.cell_volume();
    let v_in = n_interior as f64 * cell_volume + in_acc.total();
    let v_out = n_exterior as f64 * cell_volume + out_acc.total();
    let v_box = grid.cell_count() as f64 * cell_volume;

    Ok(CutMesh {
        grid: grid.clone(),
        tol,
        states,
        cut_cells,
        index_of,
        n_interior,
        n_exterior,
        v_in,
        v_out,
        v_box,
        area_stl,
        area_cut: area_acc.total(),
    })
}

fn bbox_of(verts: &[Point3<f64>]) -> (Point3<f64>, Point3<f64>) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in verts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Maps each cell's linear index to the triangles whose inflated bounding
/// boxes overlap it.
fn bin_faces(
    grid: &CartesianGrid,
    verts: &[Point3<f64>],
    tris: &[[usize; 3]],
    inflate: f64,
) -> HashMap<usize, Vec<u32>> {
    let mut bins: HashMap<usize, Vec<u32>> = HashMap::new();
    for (fi, t) in tris.iter().enumerate() {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in t {
            for a in 0..3 {
                lo[a] = lo[a].min(verts[v][a]);
                hi[a] = hi[a].max(verts[v][a]);
            }
        }
        let mut range = [[0usize; 2]; 3];
        let mut outside = false;
        for a in 0..3 {
            let top = grid.dims[a] as isize - 1;
            let i0 = ((lo[a] - inflate - grid.origin[a]) / grid.h).floor() as isize;
            let i1 = ((hi[a] + inflate - grid.origin[a]) / grid.h).floor() as isize;
            if i1 < 0 || i0 > top {
                outside = true;
                break;
            }
            range[a] = [i0.max(0) as usize, i1.min(top) as usize];
        }
        if outside {
            continue;
        }
        for k in range[2][0]..=range[2][1] {
            for j in range[1][0]..=range[1][1] {
                for i in range[0][0]..=range[0][1] {
                    bins.entry(grid.cell_index([i, j, k]))
                        .or_default()
                        .push(fi as u32);
                }
            }
        }
    }
    bins
}

/// Cuts one cell. `None` means the surface missed the cell after all: the
/// cell is left to the flood classification.
#[allow(clippy::too_many_arguments)]
fn cut_one_cell(
    grid: &CartesianGrid,
    c: [usize; 3],
    verts: &[Point3<f64>],
    tris: &[[usize; 3]],
    face_planes: &[Plane],
    cand: &[u32],
    scale: f64,
    tol: Tolerances,
) -> Result<Option<CutCell>> {
    let (lo, hi) = grid.cell_bounds(c);
    let mut coords = box_corners(lo, hi);

    // Local ids: 0..8 cell corners, then the restricted surface vertices in
    // ascending global order, then the open vertex.
    let mut globals: Vec<usize> = cand
        .iter()
        .flat_map(|&fi| tris[fi as usize])
        .collect();
    globals.sort_unstable();
    globals.dedup();
    let mut local: HashMap<usize, Vid> = HashMap::new();
    for &g in &globals {
        local.insert(g, coords.len());
        coords.push(verts[g]);
    }
    let surf_cols: Vec<Vid> = (8..coords.len()).collect();
    let open = coords.len();
    coords.push(lo);

    let mut h = DistanceMatrix::new(coords.len(), tol.snap, Some(open));
    for f in 0..6 {
        h.add_plane_row(&cell_plane(lo, hi, f), &coords);
    }
    let mut cycles: Vec<(Vec<Vid>, Pid)> = Vec::with_capacity(cand.len());
    for &fi in cand {
        let row = h.add_plane_row(&face_planes[fi as usize], &coords);
        let t = tris[fi as usize];
        cycles.push((vec![local[&t[0]], local[&t[1]], local[&t[2]]], row));
    }
    let mut surf = RotationSystem::from_faces(&cycles, Some(open))?;

    let all_cols: Vec<Vid> = (0..coords.len()).filter(|&v| v != open).collect();

    // Surface planes that coincide with a grid plane adopt its stored row,
    // so both cells touching the grid plane see bitwise-equal distances.
    for k in 0..6 {
        for s in 6..6 + cand.len() {
            if h.rows_aligned(k, s, &surf_cols, tol.coplanar) {
                let sign = h.alignment_sign(k, s, &all_cols);
                h.overwrite_row_scaled(s, k, sign);
            }
        }
    }

    // Clip the surface to the cell. Min faces keep their boundary, max
    // faces drop it, so a face on a grid plane survives in exactly one of
    // the two neighbouring cells.
    for f in 0..6 {
        let mode = if f % 2 == 0 {
            ClipMode::closed()
        } else {
            ClipMode::open()
        };
        let outcome = clip_by_row(&mut surf, &mut coords, &mut h, f, mode)?;
        h.kill_row(f);
        if matches!(outcome, ClipOutcome::Emptied) || surf.is_empty() {
            return Ok(None);
        }
    }

    // Snapshot of the surface-in-cell polygons before any decomposition.
    // Faces at or below the area floor are flattened clip remnants of
    // facets that only touch this cell; they carry no area and their planes
    // face away from the surviving surface, so they are dropped throughout.
    let area_floor = tol.snap * grid.h;
    let faces = surf.faces()?;
    let mut boundary = Vec::new();
    let mut area_acc = Kahan::default();
    for f in &faces {
        let Some(row) = f.row else { continue };
        if row < 6 || !h.row_is_live(row) {
            continue;
        }
        let a = face_area(&f.cycle, &coords);
        if a <= area_floor {
            continue;
        }
        area_acc.add(a);
        boundary.push(BoundaryFace {
            cycle: f.cycle.clone(),
            stl_face: cand[row - 6] as usize,
        });
    }
    if boundary.is_empty() {
        return Ok(None);
    }
    let boundary_area = area_acc.total();

    // Merge quasi-coplanar surviving surface planes so later clips agree
    // bitwise on which vertices lie on them.
    let mut live_rows: Vec<Pid> = Vec::new();
    for f in &faces {
        if let Some(row) = f.row {
            if row >= 6 && h.row_is_live(row) && face_area(&f.cycle, &coords) > area_floor {
                live_rows.push(row);
            }
        }
    }
    live_rows.sort_unstable();
    live_rows.dedup();
    merge_aligned_rows(&mut h, &live_rows, &all_cols, tol.coplanar);

    let cell_shape = box_rotation(0, [0, 1, 2, 3, 4, 5]);
    let mut leaves = Vec::new();
    convex_decompose(
        cell_shape,
        surf,
        &mut coords,
        &mut h,
        &live_rows,
        tol.coplanar,
        area_floor,
        &mut leaves,
    )?;

    let vol_floor = tol.snap * grid.h * grid.h;
    let mut interior = Vec::new();
    let mut exterior = Vec::new();
    for leaf in leaves {
        match leaf {
            LeafRegion::Uncut { cell } => {
                let faces = cell.faces()?;
                let v = piece_volume(&faces, &coords);
                if v <= vol_floor {
                    continue;
                }
                let mut cx = Vector3::zeros();
                let mut n = 0usize;
                for vid in cell.live_verts() {
                    cx += coords[vid].coords;
                    n += 1;
                }
                let centroid = Point3::from(cx / n as f64);
                let piece = CutPiece { faces, volume: v };
                if ray_parity_inside(verts, tris, centroid, scale) {
                    interior.push(piece);
                } else {
                    exterior.push(piece);
                }
            }
            LeafRegion::Cut { cell, colours } => {
                split_leaf_by_colours(
                    cell,
                    &colours,
                    &mut coords,
                    &mut h,
                    vol_floor,
                    &mut interior,
                    &mut exterior,
                )?;
            }
        }
    }

    let mut in_acc = Kahan::default();
    for p in &interior {
        in_acc.add(p.volume);
    }
    let mut out_acc = Kahan::default();
    for p in &exterior {
        out_acc.add(p.volume);
    }

    let marks = face_marks(
        lo,
        hi,
        &coords,
        &boundary,
        face_planes,
        &interior,
        &exterior,
        grid.h,
        tol,
    );

    Ok(Some(CutCell {
        cell: c,
        coords,
        interior,
        exterior,
        boundary,
        volume_in: in_acc.total(),
        volume_out: out_acc.total(),
        boundary_area,
        marks,
    }))
}

/// Groups quasi-aligned rows and rewrites each group to share one row's
/// values up to sign, with exact zeros wherever any member has one.
fn merge_aligned_rows(h: &mut DistanceMatrix, rows: &[Pid], cols: &[Vid], tol: f64) {
    let n = rows.len();
    let mut group_of: Vec<Option<usize>> = vec![None; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if group_of[i].is_some() {
            continue;
        }
        let gi = groups.len();
        let mut todo = vec![i];
        group_of[i] = Some(gi);
        let mut members = Vec::new();
        while let Some(a) = todo.pop() {
            members.push(a);
            for b in 0..n {
                if group_of[b].is_none() && h.rows_aligned(rows[a], rows[b], cols, tol) {
                    group_of[b] = Some(gi);
                    todo.push(b);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    for members in groups {
        if members.len() < 2 {
            continue;
        }
        let ids: Vec<Pid> = members.iter().map(|&i| rows[i]).collect();
        let signs: Vec<f64> = ids
            .iter()
            .map(|&r| h.alignment_sign(ids[0], r, cols))
            .collect();
        h.merge_rows(&ids, &signs);
    }
}

/// Splits a leaf fragment into the interior piece of each colour and the
/// remaining exterior pieces.
///
/// Each colour's interior is the fragment clipped inside all of its planes.
/// Clipping the running region strictly inside while collecting the closed
/// complements tiles the fragment exactly; carrying the complements of one
/// colour as the regions for the next keeps the pieces disjoint even when a
/// later colour's interior spans several of them.
fn split_leaf_by_colours(
    fragment: RotationSystem,
    colours: &[Vec<Pid>],
    coords: &mut Vec<Point3<f64>>,
    h: &mut DistanceMatrix,
    vol_floor: f64,
    interior: &mut Vec<CutPiece>,
    exterior: &mut Vec<CutPiece>,
) -> Result<()> {
    let mut regions = vec![fragment];
    for colour in colours {
        let mut next = Vec::new();
        for region in regions {
            let mut inside = region;
            let mut emptied = false;
            for &row in colour {
                let mut outside = inside.clone();
                if !matches!(
                    clip_by_row(&mut outside, coords, h, row, ClipMode::closed_complement())?,
                    ClipOutcome::Emptied
                ) {
                    next.push(outside);
                }
                if matches!(
                    clip_by_row(&mut inside, coords, h, row, ClipMode::open())?,
                    ClipOutcome::Emptied
                ) {
                    emptied = true;
                    break;
                }
            }
            if !emptied {
                push_piece(inside, coords, vol_floor, interior)?;
            }
        }
        regions = next;
    }
    for region in regions {
        push_piece(region, coords, vol_floor, exterior)?;
    }
    Ok(())
}

fn push_piece(
    shape: RotationSystem,
    coords: &[Point3<f64>],
    vol_floor: f64,
    out: &mut Vec<CutPiece>,
) -> Result<()> {
    let faces = shape.faces()?;
    let v = piece_volume(&faces, coords);
    if v > vol_floor {
        out.push(CutPiece { faces, volume: v });
    }
    Ok(())
}

/// Determines, per cell face, the state of the neighbour behind it.
///
/// A boundary polygon lying on the face settles it by orientation: surface
/// normal pointing out of the cell means the solid continues into this cell
/// only, so the neighbour is exterior, and vice versa. Otherwise a volume
/// piece touching the face tells which side of the solid reaches it. Mixed
/// or absent evidence leaves the face unmarked.
#[allow(clippy::too_many_arguments)]
fn face_marks(
    lo: Point3<f64>,
    hi: Point3<f64>,
    coords: &[Point3<f64>],
    boundary: &[BoundaryFace],
    face_planes: &[Plane],
    interior: &[CutPiece],
    exterior: &[CutPiece],
    h_cell: f64,
    tol: Tolerances,
) -> [Option<CellState>; 6] {
    let area_floor = tol.snap * h_cell;
    let mut marks = [None; 6];
    for f in 0..6 {
        let plane = cell_plane(lo, hi, f);
        let on_plane = |cycle: &[Vid]| {
            cycle
                .iter()
                .all(|&v| plane.signed_distance(&coords[v]).abs() <= tol.coplanar)
                && face_area(cycle, coords) > area_floor
        };

        let mut b_int = false;
        let mut b_ext = false;
        for bf in boundary {
            if on_plane(&bf.cycle) {
                let d = face_planes[bf.stl_face].normal.dot(&plane.normal);
                if d > 0.0 {
                    b_ext = true;
                } else if d < 0.0 {
                    b_int = true;
                }
            }
        }
        let piece_touches =
            |pieces: &[CutPiece]| pieces.iter().any(|p| p.faces.iter().any(|face| on_plane(&face.cycle)));

        marks[f] = match (b_int, b_ext) {
            (true, false) => Some(CellState::Interior),
            (false, true) => Some(CellState::Exterior),
            (true, true) => None,
            (false, false) => match (piece_touches(interior), piece_touches(exterior)) {
                (true, false) => Some(CellState::Interior),
                (false, true) => Some(CellState::Exterior),
                _ => None,
            },
        };
    }
    marks
}

/// Floods cell states outward from the cut cells' face marks. Unreached
/// cells are exterior: a component of uncut cells with no marked boundary
/// anywhere can only be outside the surface.
fn classify_cells(
    grid: &CartesianGrid,
    cut_cells: &[CutCell],
) -> Result<(Vec<CellState>, usize, usize)> {
    let n = grid.cell_count();
    let mut states: Vec<Option<CellState>> = vec![None; n];
    for cc in cut_cells {
        states[grid.cell_index(cc.cell)] = Some(CellState::Cut);
    }

    let mut queue = VecDeque::new();
    for cc in cut_cells {
        for f in 0..6 {
            let Some(mark) = cc.marks[f] else { continue };
            let Some(nc) = grid.neighbour(cc.cell, f) else {
                continue;
            };
            let ni = grid.cell_index(nc);
            match states[ni] {
                Some(CellState::Cut) => {}
                Some(s) if s != mark => {
                    return Err(Error::InconsistentClassification {
                        cell: (nc[0], nc[1], nc[2]),
                        context: format!(
                            "marked {mark:?} across face {f} of cut cell {:?} but already {s:?}",
                            cc.cell
                        ),
                    });
                }
                Some(_) => {}
                None => {
                    states[ni] = Some(mark);
                    queue.push_back(ni);
                }
            }
        }
    }

    while let Some(ci) = queue.pop_front() {
        let state = states[ci].expect("queued cell without state");
        let c = grid.cell_at(ci);
        for f in 0..6 {
            let Some(nc) = grid.neighbour(c, f) else { continue };
            let ni = grid.cell_index(nc);
            match states[ni] {
                None => {
                    states[ni] = Some(state);
                    queue.push_back(ni);
                }
                Some(CellState::Cut) => {}
                Some(s) if s != state => {
                    return Err(Error::InconsistentClassification {
                        cell: (nc[0], nc[1], nc[2]),
                        context: format!("flood from {c:?} carries {state:?} into {s:?}"),
                    });
                }
                Some(_) => {}
            }
        }
    }

    let mut n_interior = 0;
    let mut n_exterior = 0;
    let states = states
        .into_iter()
        .map(|s| {
            let s = s.unwrap_or(CellState::Exterior);
            match s {
                CellState::Interior => n_interior += 1,
                CellState::Exterior => n_exterior += 1,
                CellState::Cut => {}
            }
            s
        })
        .collect();
    Ok((states, n_interior, n_exterior))
}

/// Ray-parity point-in-solid test against the full triangle set.
///
/// Casts along a ladder of directions; a direction is abandoned whenever
/// any triangle produces a marginal configuration (grazing hit near an
/// edge, a ray nearly parallel and nearly coplanar to a triangle, or a hit
/// at the ray origin), so the parity that is finally counted comes from
/// clean crossings only.
pub fn ray_parity_inside(
    verts: &[Point3<f64>],
    tris: &[[usize; 3]],
    p: Point3<f64>,
    scale: f64,
) -> bool {
    let dirs = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(1.0, 0.618_033_988_749_894_9, 0.381_966_011_250_105_1).normalize(),
        Vector3::new(0.276_393_202_250_021, 1.0, 0.723_606_797_749_979).normalize(),
        Vector3::new(0.854_101_966_249_684_5, 0.472_135_954_999_579_4, 1.0).normalize(),
    ];
    for dir in &dirs {
        if let Some(inside) = parity_along(verts, tris, &p, dir, scale, true) {
            return inside;
        }
    }
    // Every direction grazed something; count the last one permissively.
    parity_along(verts, tris, &p, &dirs[5], scale, false).unwrap_or(false)
}

fn parity_along(
    verts: &[Point3<f64>],
    tris: &[[usize; 3]],
    p: &Point3<f64>,
    dir: &Vector3<f64>,
    scale: f64,
    strict: bool,
) -> Option<bool> {
    let margin = if strict { 1e-10 } else { 0.0 };
    let t_eps = 1e-12 * scale;
    let mut crossings = 0u32;
    for t in tris {
        let a = verts[t[0]];
        let e1 = verts[t[1]] - a;
        let e2 = verts[t[2]] - a;
        let pv = dir.cross(&e2);
        let det = e1.dot(&pv);
        let size = e1.norm() * e2.norm();
        if size == 0.0 {
            continue;
        }
        if det.abs() <= 1e-14 * size {
            // Ray parallel to the triangle plane: only a problem when the
            // origin is in that plane too.
            let n = e1.cross(&e2);
            let nn = n.norm();
            if nn > 1e-30 && strict && n.dot(&(p - a)).abs() <= t_eps * nn {
                return None;
            }
            continue;
        }
        let inv = 1.0 / det;
        let tv = p - a;
        let u = tv.dot(&pv) * inv;
        let qv = tv.cross(&e1);
        let v = dir.dot(&qv) * inv;
        let t_hit = e2.dot(&qv) * inv;
        if u < -margin || v < -margin || u + v > 1.0 + margin {
            continue;
        }
        if t_hit < -t_eps {
            continue;
        }
        if strict && (u < margin || v < margin || u + v > 1.0 - margin || t_hit <= t_eps) {
            return None;
        }
        if t_hit > 0.0 {
            crossings += 1;
        }
    }
    Some(crossings % 2 == 1)
}
