//! Convex decomposition of a cell polyhedron and its restricted surface.
//!
//! Non-convex surface pieces are split along bisection walls placed at
//! reflex edges.  The cell and surface are clipped by every wall on both
//! sides, producing a binary tree whose leaves pair a convex cell fragment
//! with surface parts whose interiors are convex.  Disconnected surface
//! parts at a leaf are grouped into colours; each colour is a set of face
//! planes that bounds one convex interior region of the leaf fragment.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::clip::{clip_by_row, ClipMode, ClipOutcome};
use crate::halfspace::{DistanceMatrix, Plane};
use crate::measures::face_area_vector;
use crate::rotation::{Face, Pid, RotationSystem, Vid};
use crate::{Error, Result};

/// Faces below this area, relative to the squared scale of their edges, are
/// skipped when probing dihedral angles.
const DEGENERATE_AREA: f64 = 1e-30;

/// A leaf of the wall decomposition tree.
#[derive(Debug)]
pub enum LeafRegion {
    /// Fragment crossed by surface faces.  Each colour lists the live plane
    /// rows of one group of surface parts bounding a convex interior.
    Cut {
        cell: RotationSystem,
        colours: Vec<Vec<Pid>>,
    },
    /// Fragment with no live surface faces left; the caller decides whether
    /// it lies inside or outside the solid.
    Uncut { cell: RotationSystem },
}

/// Adds one wall plane row per reflex edge of `surf` and returns the new
/// row ids in ascending generating-edge order.
///
/// An edge is reflex when the two incident faces fail mutual containment:
/// some vertex of one face lies strictly outside the stored half-space of
/// the other.  The wall through a reflex edge is the bisector plane that
/// separates the two faces, with normal proportional to the difference of
/// the face normals.  Wall distances at the generating edge endpoints are
/// pinned to exact zero.  A new wall quasi-aligned with one of the rows in
/// `align_rows` is overwritten by that row (times the relative sign) so the
/// two stay bitwise consistent.
pub fn reflex_walls(
    surf: &RotationSystem,
    coords: &[Point3<f64>],
    h: &mut DistanceMatrix,
    align_rows: &[Pid],
    align_tol: f64,
) -> Result<Vec<Pid>> {
    reflex_walls_capped(surf, coords, h, align_rows, align_tol, usize::MAX)
}

fn reflex_walls_capped(
    surf: &RotationSystem,
    coords: &[Point3<f64>],
    h: &mut DistanceMatrix,
    align_rows: &[Pid],
    align_tol: f64,
    cap: usize,
) -> Result<Vec<Pid>> {
    if cap == 0 {
        return Ok(Vec::new());
    }
    let faces = surf.faces()?;

    let mut owner: HashMap<(Vid, Vid), usize> = HashMap::new();
    for (fi, face) in faces.iter().enumerate() {
        let n = face.cycle.len();
        for i in 0..n {
            owner.insert((face.cycle[i], face.cycle[(i + 1) % n]), fi);
        }
    }

    let mut edges: Vec<(Vid, Vid)> = owner
        .keys()
        .filter(|&&(a, b)| a < b && owner.contains_key(&(b, a)))
        .copied()
        .collect();
    edges.sort_unstable();

    let align_cols: Vec<Vid> =
        (0..h.ncols()).filter(|&c| Some(c) != h.open_col()).collect();
    let mut walls = Vec::new();
    for (a, b) in edges {
        let t = &faces[owner[&(a, b)]];
        let u = &faces[owner[&(b, a)]];
        let (Some(row_t), Some(row_u)) = (t.row, u.row) else {
            continue;
        };
        if !h.row_is_live(row_t) || !h.row_is_live(row_u) {
            continue;
        }

        let contained = u.cycle.iter().all(|&v| h.entry(row_t, v) <= 0.0)
            && t.cycle.iter().all(|&v| h.entry(row_u, v) <= 0.0);
        if contained {
            continue;
        }

        let area_t = face_area_vector(&t.cycle, coords);
        let area_u = face_area_vector(&u.cycle, coords);
        if area_t.norm_squared() < DEGENERATE_AREA || area_u.norm_squared() < DEGENERATE_AREA {
            continue;
        }
        let n_t = area_t.normalize();
        let n_u = area_u.normalize();

        let edge = coords[b] - coords[a];
        let Some(e_hat) = edge.try_normalize(0.0) else {
            continue;
        };
        let mut normal = n_t - n_u;
        normal -= e_hat * normal.dot(&e_hat);
        let normal = match normal.try_normalize(1e-12) {
            Some(n) => n,
            None => {
                let fallback = n_t.cross(&e_hat);
                match fallback.try_normalize(1e-12) {
                    Some(n) => n,
                    None => continue,
                }
            }
        };

        let midpoint = nalgebra::center(&coords[a], &coords[b]);
        let row = h.add_plane_row(&Plane::new(normal, midpoint), coords);
        for &r in align_rows {
            if h.row_is_live(r) && h.rows_aligned(row, r, &align_cols, align_tol) {
                let sign = h.alignment_sign(row, r, &align_cols);
                h.overwrite_row_scaled(row, r, sign);
                break;
            }
        }
        h.set_zero(row, a);
        h.set_zero(row, b);
        walls.push(row);
        if walls.len() >= cap {
            break;
        }
    }
    Ok(walls)
}

/// Groups the surface patches of `surf` into colours and returns each
/// colour as a sorted list of the live plane rows of its faces.
///
/// Patch connectivity runs through live surface faces of real area only.
/// Cap faces wear the row of the clip that spawned them, dead by the time a
/// leaf is coloured, and a cap joining two patches along a wall says nothing
/// about whether their planes bound a common region.  Faces with area at
/// most `area_floor` contribute neither rows nor connectivity: clipping a
/// face that only touches the clip plane leaves a flattened remnant whose
/// plane faces away from the surviving surface, and letting such a plane
/// bound a colour's interior would carve real interior volume out of it.
/// Patch `T` points to patch `U` when every vertex of `T` lies inside all
/// closed half-spaces of `U`; mutually pointing patches are friends.  Each
/// round takes the first unprocessed patch `v`, its friend set, and removes
/// friends of patches that `v` does not point into, yielding one colour.
pub fn colour_rows(
    surf: &RotationSystem,
    coords: &[Point3<f64>],
    h: &DistanceMatrix,
    area_floor: f64,
) -> Result<Vec<Vec<Pid>>> {
    let faces = surf.faces()?;
    colour_faces(&faces, coords, h, area_floor)
}

fn uf_find(parent: &mut HashMap<Vid, Vid>, v: Vid) -> Vid {
    let p = *parent.get(&v).unwrap_or(&v);
    if p == v {
        return v;
    }
    let root = uf_find(parent, p);
    parent.insert(v, root);
    root
}

fn colour_faces(
    faces: &[Face],
    coords: &[Point3<f64>],
    h: &DistanceMatrix,
    area_floor: f64,
) -> Result<Vec<Vec<Pid>>> {
    let mut parent: HashMap<Vid, Vid> = HashMap::new();
    let mut kept: Vec<usize> = Vec::new();
    for (fi, face) in faces.iter().enumerate() {
        let Some(row) = face.row else { continue };
        if !h.row_is_live(row) {
            continue;
        }
        if face_area_vector(&face.cycle, coords).norm() <= area_floor {
            continue;
        }
        kept.push(fi);
        let r0 = uf_find(&mut parent, face.cycle[0]);
        for &v in &face.cycle[1..] {
            let rv = uf_find(&mut parent, v);
            if rv != r0 {
                parent.insert(rv, r0);
            }
        }
    }

    let mut comp_ix: HashMap<Vid, usize> = HashMap::new();
    let mut comp_verts: Vec<Vec<Vid>> = Vec::new();
    let mut comp_rows: Vec<Vec<Pid>> = Vec::new();
    for &fi in &kept {
        let face = &faces[fi];
        let root = uf_find(&mut parent, face.cycle[0]);
        let ci = *comp_ix.entry(root).or_insert_with(|| {
            comp_verts.push(Vec::new());
            comp_rows.push(Vec::new());
            comp_verts.len() - 1
        });
        comp_rows[ci].push(face.row.expect("kept faces carry a row"));
        comp_verts[ci].extend(face.cycle.iter().copied());
    }
    for rows in &mut comp_rows {
        rows.sort_unstable();
        rows.dedup();
    }
    for verts in &mut comp_verts {
        verts.sort_unstable();
        verts.dedup();
    }

    let n = comp_rows.len();
    let inside = |t: usize, u: usize| -> bool {
        comp_verts[t]
            .iter()
            .all(|&v| comp_rows[u].iter().all(|&r| h.entry(r, v) <= 0.0))
    };
    let mut g = vec![vec![false; n]; n];
    for t in 0..n {
        for u in 0..n {
            g[t][u] = t != u && inside(t, u);
        }
    }
    let friends = |t: usize, u: usize, g: &[Vec<bool>]| g[t][u] && g[u][t];

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut colours = Vec::new();
    while !remaining.is_empty() {
        let v = remaining[0];
        let nf: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&u| u == v || friends(v, u, &g))
            .collect();
        let dg: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&u| u != v && !g[v][u])
            .collect();
        let colour: Vec<usize> = nf
            .iter()
            .copied()
            .filter(|&c| !dg.iter().any(|&d| friends(d, c, &g)))
            .collect();
        if colour.is_empty() {
            return Err(Error::CorruptPolyhedron(
                "surface colouring made no progress".into(),
            ));
        }
        let mut rows: Vec<Pid> = colour.iter().flat_map(|&c| comp_rows[c].iter().copied()).collect();
        rows.sort_unstable();
        rows.dedup();
        colours.push(rows);
        remaining.retain(|u| !colour.contains(u));
    }
    Ok(colours)
}

const MAX_SPLIT_DEPTH: usize = 256;

/// Recursively splits `cell` and `surf` by wall planes until every surface
/// fragment is free of reflex edges, then collects the leaves.  Branches
/// whose cell fragment empties are dropped.
///
/// Walls are found one at a time on the current surface fragment rather
/// than precomputed up front: a wall whose generating edge has already been
/// clipped away would still slice every remaining branch, and on surfaces
/// with many reflex edges per cell the resulting plane arrangement grows
/// far faster than the handful of splits the fragment actually needs.  The
/// strict surface clips drop the pinned generating edge from both branches,
/// so each split strictly reduces the reflex edge count per branch.
#[allow(clippy::too_many_arguments)]
pub fn convex_decompose(
    cell: RotationSystem,
    surf: RotationSystem,
    coords: &mut Vec<Point3<f64>>,
    h: &mut DistanceMatrix,
    align_rows: &[Pid],
    align_tol: f64,
    area_floor: f64,
    out: &mut Vec<LeafRegion>,
) -> Result<()> {
    decompose_at(cell, surf, coords, h, align_rows, align_tol, area_floor, 0, out)
}

#[allow(clippy::too_many_arguments)]
fn decompose_at(
    cell: RotationSystem,
    surf: RotationSystem,
    coords: &mut Vec<Point3<f64>>,
    h: &mut DistanceMatrix,
    align_rows: &[Pid],
    align_tol: f64,
    area_floor: f64,
    depth: usize,
    out: &mut Vec<LeafRegion>,
) -> Result<()> {
    if depth > MAX_SPLIT_DEPTH {
        return Err(Error::CorruptPolyhedron(
            "convex decomposition exceeded maximum split depth".into(),
        ));
    }
    let walls = reflex_walls_capped(&surf, coords, h, align_rows, align_tol, 1)?;
    let Some(&wall) = walls.first() else {
        let faces = surf.faces()?;
        let has_live = faces
            .iter()
            .any(|f| f.row.map(|r| h.row_is_live(r)).unwrap_or(false));
        if has_live {
            let colours = colour_faces(&faces, coords, h, area_floor)?;
            if colours.is_empty() {
                out.push(LeafRegion::Uncut { cell });
            } else {
                out.push(LeafRegion::Cut { cell, colours });
            }
        } else {
            out.push(LeafRegion::Uncut { cell });
        }
        return Ok(());
    };

    let mut cell_pos = cell.clone();
    let mut surf_pos = surf.clone();
    let mut cell_neg = cell;
    let mut surf_neg = surf;

    // The cell fragments use closed half-spaces on both sides so that their
    // union tiles the parent exactly.  The surface uses strict half-spaces:
    // a face that only touches the wall along the generating edge is cut
    // bitwise at that edge instead of leaving a zero-area remnant whose
    // plane would leak into the wrong branch's colour.
    let kept_pos = !matches!(
        clip_by_row(&mut cell_pos, coords, h, wall, ClipMode::closed())?,
        ClipOutcome::Emptied
    );
    if kept_pos {
        clip_by_row(&mut surf_pos, coords, h, wall, ClipMode::open())?;
    }
    let kept_neg = !matches!(
        clip_by_row(&mut cell_neg, coords, h, wall, ClipMode::closed_complement())?,
        ClipOutcome::Emptied
    );
    if kept_neg {
        clip_by_row(&mut surf_neg, coords, h, wall, ClipMode::open_complement())?;
    }
    h.kill_row(wall);

    if kept_pos {
        decompose_at(cell_pos, surf_pos, coords, h, align_rows, align_tol, area_floor, depth + 1, out)?;
    }
    if kept_neg {
        decompose_at(cell_neg, surf_neg, coords, h, align_rows, align_tol, area_floor, depth + 1, out)?;
    }
    Ok(())
}
