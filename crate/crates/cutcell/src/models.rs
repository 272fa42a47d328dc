//! Built-in closed test surfaces.
//!
//! Each builder returns a triangle soup with outward windings, suitable for
//! [`crate::stl::write_binary_stl`] or for welding directly. The set covers
//! the shapes the pipeline has to survive: an axis-aligned cube whose faces
//! land on grid planes, a smooth genus-one torus, a jittered sphere with a
//! dense irregular triangulation, a non-convex voxel staircase, and a
//! hollow box whose cavity makes the solid multiply connected.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Tri = [Point3<f64>; 3];

/// Unit cube with corners at the origin and (1, 1, 1).
pub fn cube() -> Vec<Tri> {
    box_soup(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0))
}

/// Axis-aligned box as twelve outward triangles.
pub fn box_soup(lo: Point3<f64>, hi: Point3<f64>) -> Vec<Tri> {
    let c = [
        Point3::new(lo.x, lo.y, lo.z),
        Point3::new(hi.x, lo.y, lo.z),
        Point3::new(lo.x, hi.y, lo.z),
        Point3::new(hi.x, hi.y, lo.z),
        Point3::new(lo.x, lo.y, hi.z),
        Point3::new(hi.x, lo.y, hi.z),
        Point3::new(lo.x, hi.y, hi.z),
        Point3::new(hi.x, hi.y, hi.z),
    ];
    let quads: [[usize; 4]; 6] = [
        [0, 4, 6, 2],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 2, 3, 1],
        [4, 5, 7, 6],
    ];
    let mut tris = Vec::with_capacity(12);
    for q in quads {
        tris.push([c[q[0]], c[q[1]], c[q[2]]]);
        tris.push([c[q[0]], c[q[2]], c[q[3]]]);
    }
    tris
}

/// Torus around the z axis: major radius 1, tube radius 0.4, `nu` segments
/// around the axis and `nv` around the tube; 2 * nu * nv triangles.
pub fn torus(nu: usize, nv: usize) -> Vec<Tri> {
    let (rr, r) = (1.0, 0.4);
    let pt = |iu: usize, iv: usize| -> Point3<f64> {
        let u = std::f64::consts::TAU * (iu % nu) as f64 / nu as f64;
        let v = std::f64::consts::TAU * (iv % nv) as f64 / nv as f64;
        Point3::new(
            (rr + r * v.cos()) * u.cos(),
            (rr + r * v.cos()) * u.sin(),
            r * v.sin(),
        )
    };
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for iu in 0..nu {
        for iv in 0..nv {
            let q = [
                pt(iu, iv),
                pt(iu + 1, iv),
                pt(iu + 1, iv + 1),
                pt(iu, iv + 1),
            ];
            tris.push([q[0], q[1], q[2]]);
            tris.push([q[0], q[2], q[3]]);
        }
    }
    tris
}

/// Subdivided icosahedron with seeded radial jitter; `20 * 4^subdiv`
/// triangles. Jitter is applied per welded vertex so the surface stays
/// closed, and is small enough to keep the shape star-shaped.
pub fn jittered_sphere(subdiv: u32, jitter: f64, seed: u64) -> Vec<Tri> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0usize; 3];
            for i in 0..3 {
                let (a, b) = (f[i], f[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[i] = *midpoint.entry(key).or_insert_with(|| {
                    verts.push((verts[a] + verts[b]).normalize());
                    verts.len() - 1
                });
            }
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push([m[0], m[1], m[2]]);
        }
        faces = next;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jittered: Vec<Point3<f64>> = verts
        .iter()
        .map(|v| {
            let f = 1.0 + jitter * rng.gen_range(-1.0..1.0);
            Point3::from(v * f)
        })
        .collect();
    faces
        .iter()
        .map(|f| [jittered[f[0]], jittered[f[1]], jittered[f[2]]])
        .collect()
}

/// Surface of a voxel occupancy: every face between an occupied and an
/// empty voxel, wound outward from the occupied side. Emitting each
/// boundary face exactly once makes the result closed whenever the
/// occupancy has no configuration where two occupied voxels meet only
/// along an edge with both shared face neighbours empty.
fn voxel_surface(
    dims: [i64; 3],
    voxel: f64,
    occ: impl Fn(i64, i64, i64) -> bool,
) -> Vec<Tri> {
    let occ_at =
        |i: i64, j: i64, k: i64| -> bool {
            i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2]
                && occ(i, j, k)
        };
    let corner = |i: i64, j: i64, k: i64| -> Point3<f64> {
        Point3::new(i as f64 * voxel, j as f64 * voxel, k as f64 * voxel)
    };
    let quads: [[usize; 4]; 6] = [
        [0, 4, 6, 2],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 2, 3, 1],
        [4, 5, 7, 6],
    ];
    let deltas = [
        (-1, 0, 0),
        (1, 0, 0),
        (0, -1, 0),
        (0, 1, 0),
        (0, 0, -1),
        (0, 0, 1),
    ];
    let mut tris = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if !occ_at(i, j, k) {
                    continue;
                }
                let c: Vec<Point3<f64>> = (0..8)
                    .map(|b| corner(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)))
                    .collect();
                for (face, (di, dj, dk)) in deltas.iter().enumerate() {
                    if occ_at(i + di, j + dj, k + dk) {
                        continue;
                    }
                    let q = quads[face];
                    tris.push([c[q[0]], c[q[1]], c[q[2]]]);
                    tris.push([c[q[0]], c[q[2]], c[q[3]]]);
                }
            }
        }
    }
    tris
}

/// Staircase of `steps` voxel columns: column i spans heights 0..=i. The
/// reflex corners under each step make the solid non-convex.
pub fn staircase(steps: i64) -> Vec<Tri> {
    voxel_surface([steps, 2, steps], 1.0, |i, _, k| k <= i)
}

/// Box shell of outer size `n` voxels with an `n - 2` cavity: two nested
/// closed surfaces, the inner one bounding the void.
pub fn hollow_box(n: i64) -> Vec<Tri> {
    voxel_surface([n, n, n], 1.0, move |i, j, k| {
        !(i > 0 && j > 0 && k > 0 && i < n - 1 && j < n - 1 && k < n - 1)
    })
}

/// Builders by name, for command-line convenience.
pub fn by_name(name: &str) -> Option<Vec<Tri>> {
    match name {
        "cube" => Some(cube()),
        "torus" => Some(torus(12, 12)),
        "blob" => Some(jittered_sphere(3, 0.03, 42)),
        "staircase" => Some(staircase(5)),
        "hollow" => Some(hollow_box(6)),
        _ => None,
    }
}

/// All builder names.
pub const MODEL_NAMES: [&str; 5] = ["cube", "torus", "blob", "staircase", "hollow"];
