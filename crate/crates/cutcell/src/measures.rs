//! Volumes and areas of polyhedral pieces.
//!
//! Pieces coming out of the cut pipeline are convex polyhedra given as face
//! cycles wound counter-clockwise from outside. Volume is computed by
//! simplexifying against an anchor vertex: every face not containing the
//! anchor is fan-triangulated and each triangle spans a tetrahedron with the
//! anchor. Choosing the lowest vertex id as anchor and the lowest id in each
//! face cycle as fan root makes the decomposition, and therefore the exact
//! floating-point sum, independent of face discovery order.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::rotation::{Face, Vid};

/// Tetrahedra covering the polyhedron with the given boundary faces.
/// The anchor is the lowest vertex id present; faces containing it
/// contribute nothing. Each face fans from its lowest cycle vertex.
pub fn simplexify(faces: &[Face]) -> Vec<[Vid; 4]> {
    let Some(anchor) = faces.iter().flat_map(|f| f.cycle.iter().copied()).min() else {
        return Vec::new();
    };
    let mut tets = Vec::new();
    for face in faces {
        if face.cycle.contains(&anchor) {
            continue;
        }
        for (a, b, c) in fan(&face.cycle) {
            tets.push([anchor, a, b, c]);
        }
    }
    tets
}

/// Fan triangulation of a cycle, rooted at its lowest vertex id.
fn fan(cycle: &[Vid]) -> impl Iterator<Item = (Vid, Vid, Vid)> + '_ {
    let root = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let k = cycle.len();
    (1..k.saturating_sub(1)).map(move |i| {
        (
            cycle[root],
            cycle[(root + i) % k],
            cycle[(root + i + 1) % k],
        )
    })
}

/// Six times the signed volume of one tetrahedron: the scalar triple
/// product of its edges from apex `a`.
fn tet_det(coords: &[Point3<f64>], t: [Vid; 4]) -> f64 {
    let [a, b, c, d] = t;
    let u = coords[b] - coords[a];
    let v = coords[c] - coords[a];
    let w = coords[d] - coords[a];
    u.dot(&v.cross(&w))
}

/// Signed volume of one tetrahedron, positive when (b, c, d) winds
/// counter-clockwise as seen from outside relative to apex `a`.
pub fn tet_volume(coords: &[Point3<f64>], t: [Vid; 4]) -> f64 {
    tet_det(coords, t) / 6.0
}

/// Volume of a polyhedron bounded by counter-clockwise-from-outside faces.
/// The division by six happens once on the summed determinants, so volumes
/// whose determinants are exact stay exact.
pub fn piece_volume(faces: &[Face], coords: &[Point3<f64>]) -> f64 {
    let mut acc = Kahan::default();
    for t in simplexify(faces) {
        acc.add(tet_det(coords, t));
    }
    acc.total() / 6.0
}

/// Area-weighted normal of a planar polygon: half the sum of successive
/// cross products around the fan, pointing along the winding's right-hand
/// normal with magnitude equal to the area.
pub fn face_area_vector(cycle: &[Vid], coords: &[Point3<f64>]) -> Vector3<f64> {
    if cycle.len() < 3 {
        return Vector3::zeros();
    }
    let p0 = coords[cycle[0]];
    let mut s = Vector3::zeros();
    for i in 1..cycle.len() - 1 {
        let u = coords[cycle[i]] - p0;
        let v = coords[cycle[i + 1]] - p0;
        s += u.cross(&v);
    }
    s * 0.5
}

/// Area of a planar polygon given by its boundary cycle.
pub fn face_area(cycle: &[Vid], coords: &[Point3<f64>]) -> f64 {
    face_area_vector(cycle, coords).norm()
}

/// Area of one triangle.
pub fn triangle_area(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> f64 {
    (b - a).cross(&(c - a)).norm() * 0.5
}

/// Compensated (Kahan) accumulator for long sums of piece measures.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// Wall-clock seconds spent in each pipeline phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub parse: f64,
    pub weld: f64,
    pub grid: f64,
    pub cut: f64,
    pub metrics: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.parse + self.weld + self.grid + self.cut + self.metrics
    }
}

/// Volume and surface bookkeeping of one completed cut.
///
/// `eps_v` measures how exactly interior and exterior pieces tile the grid
/// box, `eps_gamma` how exactly the clipped boundary polygons reassemble
/// the input surface area.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub v_in: f64,
    pub v_out: f64,
    pub v_box: f64,
    pub area_stl: f64,
    pub area_cut: f64,
    pub eps_v: f64,
    pub eps_gamma: f64,
    pub timings: PhaseTimings,
}

/// Collects the metrics of a finished cut; timings are filled in by the
/// caller that actually measured them.
pub fn error_metrics(cm: &crate::cut::CutMesh) -> MetricsReport {
    MetricsReport {
        v_in: cm.v_in,
        v_out: cm.v_out,
        v_box: cm.v_box,
        area_stl: cm.area_stl,
        area_cut: cm.area_cut,
        eps_v: cm.eps_volume(),
        eps_gamma: cm.eps_area(),
        timings: PhaseTimings::default(),
    }
}
