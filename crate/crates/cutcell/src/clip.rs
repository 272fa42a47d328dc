//! Half-space clipping of rotation-system polyhedra.
//!
//! Clipping happens in two phases. The split phase visits every kept vertex
//! and replaces each of its discarded neighbours, in place in the cyclic
//! list, with a fresh vertex on the crossing edge. The walk phase then links
//! the fresh vertices into faces: starting from a fresh vertex's parent, the
//! ordinary face-traversal step is iterated until it lands on another fresh
//! vertex, and the two get wired together. Over all fresh vertices these
//! walks close both the trimmed side faces and the new cap polygons, without
//! ever constructing faces explicitly.
//!
//! Each fresh vertex's coordinates and its whole column of plane distances
//! come from linear interpolation along the crossing edge, with weights
//! taken from the clip plane's stored distances. When a crossing edge has an
//! endpoint exactly on the plane the weights degenerate to one and zero and
//! the fresh vertex duplicates that endpoint bitwise.
//!
//! Clips against a surface with boundary can walk off the cut: those walks
//! end at the open vertex and leave the cut unclosed there, which is exactly
//! how the boundary was represented before the clip.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::halfspace::DistanceMatrix;
use crate::rotation::{Pid, RotationSystem, Vid, UNSET};

/// Which side of the plane row survives, and whether the boundary does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClipMode {
    /// Keep the boundary: membership is `d <= 0` instead of `d < 0`.
    pub closed: bool,
    /// Clip against the opposite half-space by negating stored distances.
    pub negate: bool,
}

impl ClipMode {
    /// Keep `d < 0`. Drops everything on the plane itself.
    pub fn open() -> Self {
        Self { closed: false, negate: false }
    }

    /// Keep `d <= 0`.
    pub fn closed() -> Self {
        Self { closed: true, negate: false }
    }

    /// Keep `d >= 0`, the closed complement.
    pub fn closed_complement() -> Self {
        Self { closed: true, negate: true }
    }

    /// Keep `d > 0`. Drops everything on the plane itself.
    pub fn open_complement() -> Self {
        Self { closed: false, negate: true }
    }

    fn value(&self, h: &DistanceMatrix, row: Pid, v: Vid) -> f64 {
        let d = h.entry(row, v);
        if self.negate {
            -d
        } else {
            d
        }
    }

    fn keeps(&self, d: f64) -> bool {
        if self.closed {
            d <= 0.0
        } else {
            d < 0.0
        }
    }
}

/// What a clip did to the polyhedron.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClipOutcome {
    /// Every vertex was kept; nothing changed.
    Unchanged,
    /// The plane cut through: these vertices were created on crossing edges.
    Cut { new_verts: Vec<Vid> },
    /// Every vertex was discarded.
    Emptied,
}

/// Interpolation weights along a crossing edge, from the kept endpoint's
/// distance `h_int` and the discarded endpoint's distance `h_ext`. The
/// crossing point is `w_int * x_int + w_ext * x_ext`, and the same weights
/// combine whole distance-matrix columns.
pub fn edge_weights(h_int: f64, h_ext: f64) -> (f64, f64) {
    let d = h_int - h_ext;
    (-h_ext / d, h_int / d)
}

/// Clips `rs` against the half-space of `row` in place. Coordinates and the
/// distance matrix grow by one entry per crossing edge; the clip row itself
/// stays live, callers retire it once every polyhedron sharing the matrix
/// has been clipped by it.
pub fn clip_by_row(
    rs: &mut RotationSystem,
    coords: &mut Vec<Point3<f64>>,
    h: &mut DistanceMatrix,
    row: Pid,
    mode: ClipMode,
) -> Result<ClipOutcome> {
    debug_assert_eq!(coords.len(), h.ncols(), "coordinate store out of step");
    let open = rs.open;
    let mut kept: Vec<Vid> = Vec::new();
    let mut dropped: Vec<Vid> = Vec::new();
    for v in rs.live_verts() {
        if mode.keeps(mode.value(h, row, v)) {
            kept.push(v);
        } else {
            dropped.push(v);
        }
    }
    if dropped.is_empty() {
        return Ok(if kept.is_empty() {
            ClipOutcome::Emptied
        } else {
            ClipOutcome::Unchanged
        });
    }
    if kept.is_empty() {
        for v in dropped {
            rs.remove_vertex(v);
        }
        return Ok(ClipOutcome::Emptied);
    }

    // Split phase: every crossing edge is seen exactly once, from its kept
    // endpoint, because both-kept edges are skipped and both-dropped edges
    // disappear wholesale.
    let first_new = coords.len();
    let mut new_verts: Vec<Vid> = Vec::new();
    for &a in &kept {
        let nbrs = rs.neighbours(a).to_vec();
        for (slot, b) in nbrs.into_iter().enumerate() {
            if Some(b) == open {
                continue;
            }
            let hb = mode.value(h, row, b);
            if mode.keeps(hb) {
                continue;
            }
            let ha = mode.value(h, row, a);
            let (wa, wb) = edge_weights(ha, hb);
            let d = coords.len();
            coords.push(Point3::from(coords[a].coords * wa + coords[b].coords * wb));
            let col = h.push_interpolated_column(a, b, wa, wb);
            debug_assert_eq!(col, d);
            rs.set_cycle(d, vec![a, UNSET, UNSET]);
            rs.replace_slot(a, slot, d);
            if let Some(r) = rs.edge_row(a, b) {
                rs.set_edge_row(a, d, r);
            }
            if let Some(r) = rs.edge_row(b, a) {
                rs.set_edge_row(d, a, r);
            }
            new_verts.push(d);
        }
    }

    // Walk phase: close the cut around each fresh vertex. The walk from d
    // traces the trimmed face that begins with edge (d, parent) and must end
    // on another fresh vertex or run off the surface boundary.
    let budget = rs.directed_edge_budget() + 2;
    for &d in &new_verts {
        let parent = rs.neighbours(d)[0];
        let mut prev = d;
        let mut cur = parent;
        let mut steps = 0usize;
        let found = loop {
            if Some(cur) == open {
                break None;
            }
            if cur >= first_new {
                break Some(cur);
            }
            let nxt = rs.succ(cur, prev)?;
            prev = cur;
            cur = nxt;
            steps += 1;
            if steps > budget {
                return Err(Error::CorruptPolyhedron(format!(
                    "cut walk from vertex {d} did not terminate"
                )));
            }
        };
        match found {
            Some(w) => {
                if w == d {
                    return Err(Error::CorruptPolyhedron(format!(
                        "cut walk from vertex {d} closed on itself"
                    )));
                }
                rs.replace_slot(d, 2, w);
                rs.replace_slot(w, 1, d);
                // The edge into the found vertex lies on the new cap; the
                // edge back lies on the face the walk just traced.
                rs.set_edge_row(d, w, row);
                if let Some(r) = rs.edge_row(d, parent) {
                    rs.set_edge_row(w, d, r);
                }
            }
            None => {
                let o = open.ok_or_else(|| {
                    Error::CorruptPolyhedron(format!(
                        "cut walk from vertex {d} left a closed polyhedron"
                    ))
                })?;
                rs.replace_slot(d, 2, o);
                rs.note_open_edge(d);
            }
        }
    }

    // Unfound fresh vertices sit on the surface boundary: nothing walks into
    // them, so their finder slot closes through the open vertex too.
    for &d in &new_verts {
        if rs.neighbours(d)[1] == UNSET {
            let o = open.ok_or_else(|| {
                Error::CorruptPolyhedron(format!(
                    "vertex {d} unreachable by cut walks on a closed polyhedron"
                ))
            })?;
            rs.replace_slot(d, 1, o);
            rs.note_open_edge(d);
        }
        let nb = rs.neighbours(d);
        if nb[1] == nb[2] && Some(nb[1]) != open {
            return Err(Error::CorruptPolyhedron(format!(
                "cut degenerated to a two-sided face at vertex {d}"
            )));
        }
    }

    for v in dropped {
        rs.remove_vertex(v);
    }
    Ok(ClipOutcome::Cut { new_verts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfspace::Plane;
    use crate::rotation::Face;
    use nalgebra::Vector3;

    fn tetra() -> (RotationSystem, Vec<Point3<f64>>) {
        let faces: Vec<(Vec<Vid>, Pid)> = vec![
            (vec![0, 2, 1], 0),
            (vec![0, 1, 3], 1),
            (vec![0, 3, 2], 2),
            (vec![1, 2, 3], 3),
        ];
        let rs = RotationSystem::from_faces(&faces, None).unwrap();
        let coords = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        (rs, coords)
    }

    #[test]
    fn tetra_apex_cut_matches_hand_trace() {
        let (mut rs, mut coords) = tetra();
        let mut h = DistanceMatrix::new(4, 1e-14, None);
        for _ in 0..4 {
            // Rows 0..4 stand in for the face planes; only the clip row's
            // values matter here.
            h.add_values_row(vec![0.0; 4]);
        }
        let clip = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 0.5));
        let row = h.add_plane_row(&clip, &coords);
        let out = clip_by_row(&mut rs, &mut coords, &mut h, row, ClipMode::closed()).unwrap();
        assert_eq!(out, ClipOutcome::Cut { new_verts: vec![4, 5, 6] });

        assert_eq!(coords[4], Point3::new(0.0, 0.0, 0.5));
        assert_eq!(coords[5], Point3::new(0.5, 0.0, 0.5));
        assert_eq!(coords[6], Point3::new(0.0, 0.5, 0.5));
        assert!(!rs.contains(3));

        assert_eq!(rs.neighbours(0), &[1, 2, 4]);
        assert_eq!(rs.neighbours(1), &[0, 5, 2]);
        assert_eq!(rs.neighbours(2), &[0, 1, 6]);
        assert_eq!(rs.neighbours(4), &[0, 6, 5]);
        assert_eq!(rs.neighbours(5), &[1, 4, 6]);
        assert_eq!(rs.neighbours(6), &[2, 5, 4]);

        let faces = rs.faces().unwrap();
        let got: Vec<(Vec<Vid>, Option<Pid>)> =
            faces.iter().map(|f| (f.cycle.clone(), f.row)).collect();
        assert_eq!(
            got,
            vec![
                (vec![0, 1, 5, 4], Some(1)),
                (vec![0, 2, 1], Some(0)),
                (vec![0, 4, 6, 2], Some(2)),
                (vec![1, 2, 6, 5], Some(3)),
                (vec![4, 5, 6], Some(row)),
            ]
        );
        // New distances interpolate to the cut plane exactly.
        for v in 4..7 {
            assert_eq!(h.entry(row, v), 0.0);
        }
    }

    #[test]
    fn open_triangle_cut_walks_off_the_boundary() {
        let faces: Vec<(Vec<Vid>, Pid)> = vec![(vec![0, 1, 2], 0)];
        let mut rs = RotationSystem::from_faces(&faces, Some(3)).unwrap();
        let mut coords = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
            Point3::new(f64::NAN, f64::NAN, f64::NAN),
        ];
        let mut h = DistanceMatrix::new(4, 1e-14, Some(3));
        h.add_values_row(vec![0.0; 4]);
        let clip = Plane::new(Vector3::new(1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0));
        let row = h.add_plane_row(&clip, &coords);
        let out = clip_by_row(&mut rs, &mut coords, &mut h, row, ClipMode::closed()).unwrap();
        assert_eq!(out, ClipOutcome::Cut { new_verts: vec![4, 5] });

        assert_eq!(coords[4], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(coords[5], Point3::new(1.0, 1.0, 0.0));
        assert_eq!(rs.neighbours(0), &[2, 4, 3]);
        assert_eq!(rs.neighbours(2), &[5, 0, 3]);
        // Vertex 4's walk ran off the boundary; nothing found vertex 5.
        assert_eq!(rs.neighbours(4), &[0, 5, 3]);
        assert_eq!(rs.neighbours(5), &[2, 3, 4]);

        let real: Vec<Face> = rs.faces().unwrap();
        assert_eq!(real.len(), 1);
        assert_eq!(real[0].cycle, vec![0, 4, 5, 2]);
        assert_eq!(real[0].row, Some(0));
        // The rim edge sits on the clip plane, its partner on the triangle.
        assert_eq!(rs.edge_row(5, 4), Some(row));
        assert_eq!(rs.edge_row(4, 5), Some(0));
    }

    #[test]
    fn plane_missing_the_body_changes_nothing() {
        let (mut rs, mut coords) = tetra();
        let mut h = DistanceMatrix::new(4, 1e-14, None);
        let clip = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 2.0));
        let row = h.add_plane_row(&clip, &coords);
        let out = clip_by_row(&mut rs, &mut coords, &mut h, row, ClipMode::closed()).unwrap();
        assert_eq!(out, ClipOutcome::Unchanged);
        assert_eq!(rs.live_count(), 4);

        let below = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, -1.0));
        let row2 = h.add_plane_row(&below, &coords);
        let out2 = clip_by_row(&mut rs, &mut coords, &mut h, row2, ClipMode::closed()).unwrap();
        assert_eq!(out2, ClipOutcome::Emptied);
        assert!(rs.is_empty());
    }

    #[test]
    fn complement_clip_keeps_the_other_side() {
        let (mut rs, mut coords) = tetra();
        let mut h = DistanceMatrix::new(4, 1e-14, None);
        let clip = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 0.5));
        let row = h.add_plane_row(&clip, &coords);
        let out =
            clip_by_row(&mut rs, &mut coords, &mut h, row, ClipMode::closed_complement())
                .unwrap();
        assert_eq!(out, ClipOutcome::Cut { new_verts: vec![4, 5, 6] });
        // Only the apex side survives: vertex 3 plus the three cut points.
        assert!(rs.contains(3));
        assert!(!rs.contains(0) && !rs.contains(1) && !rs.contains(2));
        let faces = rs.faces().unwrap();
        assert_eq!(faces.len(), 4);
        // Cut points duplicate the ones of the direct clip bitwise; vertex 3
        // splits its slots in rotation order 0, 2, 1.
        assert_eq!(coords[4], Point3::new(0.0, 0.0, 0.5));
        assert_eq!(coords[5], Point3::new(0.0, 0.5, 0.5));
        assert_eq!(coords[6], Point3::new(0.5, 0.0, 0.5));
    }

    #[test]
    fn on_plane_vertex_duplicates_bitwise_under_open_clip() {
        let (mut rs, mut coords) = tetra();
        let mut h = DistanceMatrix::new(4, 1e-14, None);
        // Plane through vertex 3 exactly: open membership drops it, and the
        // crossing-edge weights become zero and one.
        let clip = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 1.0));
        let row = h.add_plane_row(&clip, &coords);
        assert_eq!(h.entry(row, 3), 0.0);
        let out = clip_by_row(&mut rs, &mut coords, &mut h, row, ClipMode::open()).unwrap();
        let ClipOutcome::Cut { new_verts } = out else {
            panic!("expected a cut")
        };
        assert_eq!(new_verts.len(), 3);
        for &v in &new_verts {
            assert_eq!(coords[v], Point3::new(0.0, 0.0, 1.0));
            assert_eq!(h.entry(row, v), 0.0);
        }
    }

    #[test]
    fn weights_partition_unity() {
        let (wa, wb) = edge_weights(-0.3, 0.7);
        assert!((wa + wb - 1.0).abs() <= 4.0 * f64::EPSILON);
        assert_eq!(wa, 0.7);
        assert_eq!(wb, 0.3);
        let (wa, wb) = edge_weights(-1.0, 0.0);
        assert_eq!(wa, 0.0);
        assert_eq!(wb, 1.0);
    }
}
