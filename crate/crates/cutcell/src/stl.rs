//! STL reading, writing, vertex welding, and manifold validation.
//!
//! Both binary and ASCII STL are supported; the format is detected from the
//! byte layout, not the file name. STL stores a triangle soup, so the loader
//! welds coincident vertices (bitwise by default, within a radius on
//! request) and then checks that the welded triangles form a closed oriented
//! manifold: every undirected edge bordered by exactly two triangles, once
//! in each direction. Everything downstream depends on that property.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::measures::{triangle_area, Kahan};

/// Indexed triangle surface produced by welding an STL soup.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub verts: Vec<Point3<f64>>,
    pub tris: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    /// Axis-aligned bounding box over the vertices.
    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.verts {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Total surface area, compensated summation over triangles.
    pub fn area(&self) -> f64 {
        let mut k = Kahan::default();
        for t in &self.tris {
            k.add(triangle_area(
                self.verts[t[0]],
                self.verts[t[1]],
                self.verts[t[2]],
            ));
        }
        k.total()
    }

    /// Verifies that every undirected edge is shared by exactly two
    /// triangles with opposite orientations.
    pub fn check_closed_manifold(&self) -> Result<()> {
        let mut edges: HashMap<(usize, usize), (u32, u32)> = HashMap::new();
        for t in &self.tris {
            for i in 0..3 {
                let a = t[i];
                let b = t[(i + 1) % 3];
                if a == b {
                    return Err(Error::NotClosedManifold(format!(
                        "triangle {t:?} repeats vertex {a}"
                    )));
                }
                let e = edges.entry((a.min(b), a.max(b))).or_insert((0, 0));
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        for (&(a, b), &(fwd, rev)) in &edges {
            if fwd != 1 || rev != 1 {
                let what = if fwd + rev == 1 {
                    "borders only one triangle"
                } else if fwd == 0 || rev == 0 {
                    "is wound the same way by both triangles"
                } else {
                    "borders more than two triangles"
                };
                return Err(Error::NotClosedManifold(format!(
                    "edge ({a}, {b}) {what}"
                )));
            }
        }
        Ok(())
    }

    /// Rejects triangles whose vertices are exactly collinear; their plane
    /// is undefined and the cut pipeline needs one plane per triangle.
    pub fn check_nondegenerate(&self) -> Result<()> {
        for (i, t) in self.tris.iter().enumerate() {
            let n = (self.verts[t[1]] - self.verts[t[0]])
                .cross(&(self.verts[t[2]] - self.verts[t[0]]));
            if n.norm() == 0.0 {
                return Err(Error::MalformedStl(format!(
                    "triangle {i} is degenerate after welding"
                )));
            }
        }
        Ok(())
    }
}

/// Reads one triangle soup from STL bytes, auto-detecting the format.
pub fn parse_stl(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>> {
    if looks_binary(bytes) {
        return parse_binary(bytes);
    }
    if bytes.len() >= 84 {
        // A binary header that fails the length equation is a truncated or
        // padded binary file unless the payload is really text.
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as u64;
        let expected = 84 + 50 * count;
        if !bytes.starts_with(b"solid") && (bytes.len() as u64) < expected {
            return Err(Error::TruncatedStl {
                offset: bytes.len() as u64,
                context: format!(
                    "binary payload ends inside triangle {} of {count}",
                    (bytes.len() as u64).saturating_sub(84) / 50
                ),
            });
        }
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::MalformedStl("neither valid binary nor text".into()))?;
    if text.trim_start().starts_with("solid") {
        return parse_ascii(text);
    }
    Err(Error::MalformedStl(
        "no binary length match and no 'solid' header".into(),
    ))
}

fn looks_binary(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as u64;
    bytes.len() as u64 == 84 + 50 * count
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>> {
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let mut tris = Vec::with_capacity(count);
    for i in 0..count {
        let base = 84 + 50 * i;
        let mut ps = [Point3::origin(); 3];
        for (v, p) in ps.iter_mut().enumerate() {
            // Skip the 12-byte facet normal; the winding defines it.
            let off = base + 12 + 12 * v;
            let f = |k: usize| {
                f32::from_le_bytes(bytes[off + 4 * k..off + 4 * k + 4].try_into().unwrap())
                    as f64
            };
            *p = Point3::new(f(0), f(1), f(2));
        }
        tris.push(ps);
    }
    Ok(tris)
}

fn parse_ascii(text: &str) -> Result<Vec<[Point3<f64>; 3]>> {
    let mut tris = Vec::new();
    let mut tokens = text.split_whitespace().peekable();
    let mut vertex_buf: Vec<Point3<f64>> = Vec::with_capacity(3);
    while let Some(tok) = tokens.next() {
        match tok {
            "vertex" => {
                let mut c = [0.0f64; 3];
                for x in &mut c {
                    let t = tokens.next().ok_or_else(|| {
                        Error::MalformedStl("vertex ends before three coordinates".into())
                    })?;
                    *x = t.parse::<f64>().map_err(|_| {
                        Error::MalformedStl(format!("bad vertex coordinate {t:?}"))
                    })?;
                }
                vertex_buf.push(Point3::new(c[0], c[1], c[2]));
            }
            "endfacet" => {
                if vertex_buf.len() != 3 {
                    return Err(Error::MalformedStl(format!(
                        "facet with {} vertices",
                        vertex_buf.len()
                    )));
                }
                tris.push([vertex_buf[0], vertex_buf[1], vertex_buf[2]]);
                vertex_buf.clear();
            }
            _ => {}
        }
    }
    if !vertex_buf.is_empty() {
        return Err(Error::MalformedStl("file ends inside a facet".into()));
    }
    Ok(tris)
}

/// Binary STL bytes for a triangle soup. Facet normals are written from the
/// winding; the attribute word is zero.
pub fn write_binary_stl(tris: &[[Point3<f64>; 3]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * tris.len());
    out.extend_from_slice(&[0u8; 80]);
    out.extend_from_slice(&(tris.len() as u32).to_le_bytes());
    for t in tris {
        let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
        let n = if n.norm() > 0.0 { n / n.norm() } else { n };
        for v in [n.x, n.y, n.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for p in t {
            for v in [p.x, p.y, p.z] {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// ASCII STL text for a triangle soup.
pub fn write_ascii_stl(name: &str, tris: &[[Point3<f64>; 3]]) -> String {
    let mut s = format!("solid {name}\n");
    for t in tris {
        let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
        let n = if n.norm() > 0.0 { n / n.norm() } else { n };
        s.push_str(&format!("  facet normal {} {} {}\n", n.x, n.y, n.z));
        s.push_str("    outer loop\n");
        for p in t {
            s.push_str(&format!("      vertex {} {} {}\n", p.x, p.y, p.z));
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    s.push_str(&format!("endsolid {name}\n"));
    s
}

/// Welds a triangle soup into an indexed mesh. `tol` zero welds bitwise
/// identical coordinates only; a positive `tol` merges vertices within that
/// radius using a hash grid. Triangles that collapse onto fewer than three
/// distinct vertices are dropped.
pub fn weld(tris: &[[Point3<f64>; 3]], tol: f64) -> SurfaceMesh {
    let mut verts: Vec<Point3<f64>> = Vec::new();
    let mut out_tris: Vec<[usize; 3]> = Vec::new();
    if tol == 0.0 {
        let mut index: HashMap<(u64, u64, u64), usize> = HashMap::new();
        for t in tris {
            let mut ids = [0usize; 3];
            for (k, p) in t.iter().enumerate() {
                let key = (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
                ids[k] = *index.entry(key).or_insert_with(|| {
                    verts.push(*p);
                    verts.len() - 1
                });
            }
            push_tri(&mut out_tris, ids);
        }
    } else {
        let cell = |p: &Point3<f64>| -> (i64, i64, i64) {
            (
                (p.x / tol).floor() as i64,
                (p.y / tol).floor() as i64,
                (p.z / tol).floor() as i64,
            )
        };
        let mut bins: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for t in tris {
            let mut ids = [0usize; 3];
            for (k, p) in t.iter().enumerate() {
                let (ci, cj, ck) = cell(p);
                let mut found = None;
                'search: for di in -1..=1i64 {
                    for dj in -1..=1i64 {
                        for dk in -1..=1i64 {
                            if let Some(cand) = bins.get(&(ci + di, cj + dj, ck + dk)) {
                                for &v in cand {
                                    if (verts[v] - p).norm() <= tol {
                                        found = Some(v);
                                        break 'search;
                                    }
                                }
                            }
                        }
                    }
                }
                ids[k] = found.unwrap_or_else(|| {
                    verts.push(*p);
                    let v = verts.len() - 1;
                    bins.entry((ci, cj, ck)).or_default().push(v);
                    v
                });
            }
            push_tri(&mut out_tris, ids);
        }
    }
    SurfaceMesh { verts, tris: out_tris }
}

fn push_tri(tris: &mut Vec<[usize; 3]>, ids: [usize; 3]) {
    if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] {
        tris.push(ids);
    }
}

/// Loads, welds, and validates an STL file.
pub fn load_surface(path: &Path, weld_tol: f64) -> Result<SurfaceMesh> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let soup = parse_stl(&bytes)?;
    if soup.is_empty() {
        return Err(Error::MalformedStl(format!(
            "{} contains no triangles",
            path.display()
        )));
    }
    let mesh = weld(&soup, weld_tol);
    mesh.check_closed_manifold()?;
    mesh.check_nondegenerate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unit-cube triangle soup, outward windings.
    pub(crate) fn cube_soup() -> Vec<[Point3<f64>; 3]> {
        let p = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
        let c = [
            p(0., 0., 0.),
            p(1., 0., 0.),
            p(0., 1., 0.),
            p(1., 1., 0.),
            p(0., 0., 1.),
            p(1., 0., 1.),
            p(0., 1., 1.),
            p(1., 1., 1.),
        ];
        let quads: [[usize; 4]; 6] = [
            [0, 4, 6, 2],
            [1, 3, 7, 5],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 2, 3, 1],
            [4, 5, 7, 6],
        ];
        let mut tris = Vec::new();
        for q in quads {
            tris.push([c[q[0]], c[q[1]], c[q[2]]]);
            tris.push([c[q[0]], c[q[2]], c[q[3]]]);
        }
        tris
    }

    #[test]
    fn binary_round_trip_welds_to_cube() {
        let soup = cube_soup();
        let bytes = write_binary_stl(&soup);
        assert_eq!(bytes.len(), 84 + 50 * 12);
        let parsed = parse_stl(&bytes).unwrap();
        assert_eq!(parsed.len(), 12);
        let mesh = weld(&parsed, 0.0);
        assert_eq!(mesh.verts.len(), 8);
        assert_eq!(mesh.tris.len(), 12);
        mesh.check_closed_manifold().unwrap();
        mesh.check_nondegenerate().unwrap();
        assert_eq!(mesh.area(), 6.0);
        let (lo, hi) = mesh.bbox();
        assert_eq!(lo, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(hi, Point3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn ascii_round_trip() {
        let soup = cube_soup();
        let text = write_ascii_stl("cube", &soup);
        let parsed = parse_stl(text.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 12);
        let mesh = weld(&parsed, 0.0);
        assert_eq!(mesh.verts.len(), 8);
        mesh.check_closed_manifold().unwrap();
    }

    #[test]
    fn truncated_binary_names_the_byte_offset() {
        let bytes = write_binary_stl(&cube_soup());
        let cut = &bytes[..200];
        match parse_stl(cut) {
            Err(Error::TruncatedStl { offset, .. }) => assert_eq!(offset, 200),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn open_surface_is_rejected() {
        let mut soup = cube_soup();
        soup.pop();
        let mesh = weld(&soup, 0.0);
        assert!(matches!(
            mesh.check_closed_manifold(),
            Err(Error::NotClosedManifold(_))
        ));
    }

    #[test]
    fn inconsistent_winding_is_rejected() {
        let mut soup = cube_soup();
        let t = soup[0];
        soup[0] = [t[0], t[2], t[1]];
        let mesh = weld(&soup, 0.0);
        let err = mesh.check_closed_manifold().unwrap_err();
        assert!(err.to_string().contains("wound the same way"), "{err}");
    }

    #[test]
    fn tolerance_weld_merges_nearby_vertices() {
        let mut soup = cube_soup();
        // Nudge one instance of a corner by less than the weld radius.
        soup[0][0].x += 1e-9;
        let exact = weld(&soup, 0.0);
        assert_eq!(exact.verts.len(), 9);
        let fused = weld(&soup, 1e-6);
        assert_eq!(fused.verts.len(), 8);
        fused.check_closed_manifold().unwrap();
    }

    #[test]
    fn degenerate_triangles_are_dropped_or_reported() {
        let p = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
        // Exact duplicate corners collapse and the triangle is dropped.
        let soup = vec![[p(0., 0., 0.), p(0., 0., 0.), p(1., 0., 0.)]];
        let mesh = weld(&soup, 0.0);
        assert!(mesh.tris.is_empty());
        // Distinct but collinear corners survive welding and are reported.
        let soup = vec![[p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.)]];
        let mesh = weld(&soup, 0.0);
        assert!(mesh.check_nondegenerate().is_err());
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(
            parse_stl(b"not an stl at all"),
            Err(Error::MalformedStl(_))
        ));
    }
}
