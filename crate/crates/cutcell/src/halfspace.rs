//! Planes, signed distances, and the vertex-to-plane distance matrix.
//!
//! Geometric predicates in this crate never re-evaluate plane equations
//! against freshly built coordinates. Instead, a [`DistanceMatrix`] is filled
//! once per cell from the original input geometry, with near-zero entries
//! snapped to exact zeros, and every vertex created by clipping gets its
//! distance column by linear interpolation of its parents' columns. Exact
//! zeros interpolate to exact zeros, so a vertex that lies on a plane keeps
//! lying on it through every later operation, and two cells that cut the same
//! edge against the same plane produce bitwise identical intersection points.
//!
//! The matrix also carries the plane bookkeeping needed to recognise
//! coplanar rows: nearly identical rows (up to sign) are detected, given a
//! consistent sign, and overwritten entry for entry so that coplanarity
//! becomes an exact property downstream.

use nalgebra::{Point3, Vector3};

use crate::rotation::{Pid, Vid};

/// An oriented plane. Points with positive signed distance lie on the side
/// the normal points into, which the clipping code treats as outside.
#[derive(Clone, Copy, Debug)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub point: Point3<f64>,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, point: Point3<f64>) -> Self {
        Self { normal, point }
    }

    /// Plane of a counter-clockwise triangle, unit normal by the right-hand
    /// rule, anchored at `a`. `None` when the triangle is exactly degenerate.
    pub fn from_triangle(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len == 0.0 {
            return None;
        }
        Some(Self { normal: n / len, point: a })
    }

    /// Signed distance of `p`, in geometry units when the normal is unit.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&(p - self.point))
    }
}

/// Absolute tolerances, derived from the largest extent of the input
/// surface's bounding box.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Distances at most this large count as exactly on a plane and are
    /// snapped to zero when a matrix row is filled.
    pub snap: f64,
    /// Rows whose entries agree (up to sign) within this bound count as the
    /// same plane.
    pub coplanar: f64,
}

impl Tolerances {
    pub const SNAP_FACTOR: f64 = 1e2;
    pub const COPLANAR_FACTOR: f64 = 1e3;

    /// Default factors: snap at `1e2 * eps * extent`, coplanarity at
    /// `1e3 * eps * extent`.
    pub fn for_extent(max_extent: f64) -> Self {
        Self::with_factors(max_extent, Self::SNAP_FACTOR, Self::COPLANAR_FACTOR)
    }

    pub fn with_factors(max_extent: f64, snap_factor: f64, coplanar_factor: f64) -> Self {
        Self {
            snap: max_extent * snap_factor * f64::EPSILON,
            coplanar: max_extent * coplanar_factor * f64::EPSILON,
        }
    }
}

/// Rows are planes, columns are vertices, entries are signed distances.
///
/// Rows can be retired once their clip has been performed; retired rows free
/// their storage and drop out of interpolation. Columns are only ever
/// appended: removed vertices keep their stale column, which is never read
/// again because all reads go through live vertex ids.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    rows: Vec<Option<Vec<f64>>>,
    ncols: usize,
    snap: f64,
    /// Column of the open vertex: pinned to +infinity on every row, so the
    /// open vertex sits outside every half-space if it is ever tested.
    open_col: Option<usize>,
}

impl DistanceMatrix {
    pub fn new(ncols: usize, snap: f64, open_col: Option<usize>) -> Self {
        Self { rows: Vec::new(), ncols, snap, open_col }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn snap_tol(&self) -> f64 {
        self.snap
    }

    pub fn open_col(&self) -> Option<usize> {
        self.open_col
    }

    fn snapped(&self, d: f64) -> f64 {
        if d.abs() <= self.snap {
            0.0
        } else {
            d
        }
    }

    /// Appends a row of signed distances of all current columns to `plane`,
    /// snapping near-zeros. Returns the new row id.
    pub fn add_plane_row(&mut self, plane: &Plane, coords: &[Point3<f64>]) -> Pid {
        assert_eq!(coords.len(), self.ncols, "coordinate store out of step");
        let mut row = Vec::with_capacity(self.ncols);
        for p in coords {
            row.push(self.snapped(plane.signed_distance(p)));
        }
        if let Some(o) = self.open_col {
            row[o] = f64::INFINITY;
        }
        self.rows.push(Some(row));
        self.rows.len() - 1
    }

    /// Appends a precomputed row, snapping near-zeros.
    pub fn add_values_row(&mut self, values: Vec<f64>) -> Pid {
        assert_eq!(values.len(), self.ncols, "row length out of step");
        let mut row: Vec<f64> = values.into_iter().map(|d| self.snapped(d)).collect();
        if let Some(o) = self.open_col {
            row[o] = f64::INFINITY;
        }
        self.rows.push(Some(row));
        self.rows.len() - 1
    }

    pub fn entry(&self, row: Pid, col: Vid) -> f64 {
        self.rows[row].as_ref().expect("read of retired row")[col]
    }

    /// Forces an entry to exact zero. Used to pin the generating edge of a
    /// wall plane onto the wall.
    pub fn set_zero(&mut self, row: Pid, col: Vid) {
        self.rows[row].as_mut().expect("write to retired row")[col] = 0.0;
    }

    pub fn row_is_live(&self, row: Pid) -> bool {
        self.rows.get(row).is_some_and(Option::is_some)
    }

    /// Retires a row after its clip has consumed it.
    pub fn kill_row(&mut self, row: Pid) {
        self.rows[row] = None;
    }

    /// Live row ids, ascending.
    pub fn live_rows(&self) -> impl Iterator<Item = Pid> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some())
            .map(|(i, _)| i)
    }

    /// Appends the column of a vertex created on the edge (`int`, `ext`)
    /// with interpolation weights (`w_int`, `w_ext`). Every live row gets
    /// `w_int * row[int] + w_ext * row[ext]`, except that equal parent
    /// entries pass through unchanged, so constant rows stay bitwise
    /// constant. No snapping is applied, so exact zeros at both parents
    /// propagate as exact zeros.
    pub fn push_interpolated_column(
        &mut self,
        int: Vid,
        ext: Vid,
        w_int: f64,
        w_ext: f64,
    ) -> usize {
        for row in self.rows.iter_mut().flatten() {
            let (a, b) = (row[int], row[ext]);
            let v = if a == b { a } else { w_int * a + w_ext * b };
            row.push(v);
        }
        self.ncols += 1;
        self.ncols - 1
    }

    /// True when rows `i` and `j` represent the same geometric plane over
    /// the given columns: their entries agree within `tol` either directly
    /// or with flipped sign.
    pub fn rows_aligned(&self, i: Pid, j: Pid, cols: &[Vid], tol: f64) -> bool {
        let mut same = 0.0f64;
        let mut opposite = 0.0f64;
        for &c in cols {
            let a = self.entry(i, c);
            let b = self.entry(j, c);
            same = same.max((a - b).abs());
            opposite = opposite.max((a + b).abs());
        }
        same.min(opposite) <= tol
    }

    /// Relative orientation of two aligned rows: the sign of the product of
    /// entries at the column where the rows are jointly largest in
    /// magnitude, skipping columns where either entry is exactly zero.
    /// Falls back to +1 when every column has a zero.
    pub fn alignment_sign(&self, i: Pid, j: Pid, cols: &[Vid]) -> f64 {
        let mut best_score = f64::NEG_INFINITY;
        let mut sign = 1.0;
        for &c in cols {
            let a = self.entry(i, c);
            let b = self.entry(j, c);
            let p = a * b;
            if p == 0.0 {
                continue;
            }
            let score = a.abs() + b.abs();
            if score > best_score {
                best_score = score;
                sign = if p > 0.0 { 1.0 } else { -1.0 };
            }
        }
        sign
    }

    /// Overwrites row `dst` with `sign * src` across all columns, making the
    /// two rows bitwise redundant. `src` is left untouched.
    pub fn overwrite_row_scaled(&mut self, dst: Pid, src: Pid, sign: f64) {
        let src_row = self.rows[src].as_ref().expect("scale from retired row").clone();
        let dst_row = self.rows[dst].as_mut().expect("scale into retired row");
        for (d, s) in dst_row.iter_mut().zip(src_row) {
            *d = sign * s;
        }
    }

    /// Rewrites a group of rows known to represent one plane so they become
    /// bitwise consistent: wherever any row has an exact zero all rows get
    /// zero, elsewhere every row becomes `signs[k] * first row`. `signs[0]`
    /// must be `1.0`.
    pub fn merge_rows(&mut self, rows: &[Pid], signs: &[f64]) {
        assert_eq!(rows.len(), signs.len());
        if rows.len() < 2 {
            return;
        }
        for c in 0..self.ncols {
            let any_zero = rows
                .iter()
                .any(|&r| self.rows[r].as_ref().expect("merge of retired row")[c] == 0.0);
            let base = self.rows[rows[0]].as_ref().expect("merge of retired row")[c];
            for (&r, &s) in rows.iter().zip(signs) {
                let v = if any_zero { 0.0 } else { s * base };
                self.rows[r].as_mut().expect("merge of retired row")[c] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ]
    }

    #[test]
    fn plane_distances_and_snapping() {
        let plane = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 0.5));
        let mut h = DistanceMatrix::new(4, 1e-12, None);
        let r = h.add_plane_row(&plane, &pts());
        assert_eq!(h.entry(r, 0), -0.5);
        assert_eq!(h.entry(r, 3), 0.5);

        let snappy = Plane::new(
            Vector3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 0.0, 1e-13),
        );
        let r2 = h.add_plane_row(&snappy, &pts());
        assert_eq!(h.entry(r2, 0), 0.0, "near-zero distance must snap to exact zero");
        assert!(h.entry(r2, 0).is_sign_positive());
    }

    #[test]
    fn interpolated_columns_preserve_exact_zeros() {
        let mut h = DistanceMatrix::new(4, 1e-12, None);
        let plane = Plane::new(Vector3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 0.0));
        let r = h.add_plane_row(&plane, &pts());
        // Vertices 0 and 1 both lie on the plane; any point on their edge
        // must come out exactly on it too.
        let c = h.push_interpolated_column(0, 1, 0.25, 0.75);
        assert_eq!(c, 4);
        assert_eq!(h.entry(r, c), 0.0);
    }

    #[test]
    fn open_column_is_pinned_outside() {
        let mut coords = pts();
        coords.push(Point3::new(f64::NAN, f64::NAN, f64::NAN));
        let mut h = DistanceMatrix::new(5, 1e-12, Some(4));
        let plane = Plane::new(Vector3::new(1.0, 0.0, 0.0), Point3::new(0.5, 0.0, 0.0));
        let r = h.add_plane_row(&plane, &coords);
        assert_eq!(h.entry(r, 4), f64::INFINITY);
    }

    #[test]
    fn alignment_detects_sign_flips() {
        let mut h = DistanceMatrix::new(3, 1e-12, None);
        let a = h.add_values_row(vec![1.0, -2.0, 0.5]);
        let b = h.add_values_row(vec![-1.0, 2.0, -0.5]);
        let c = h.add_values_row(vec![1.0, 2.0, 0.5]);
        let cols = [0, 1, 2];
        assert!(h.rows_aligned(a, b, &cols, 1e-12));
        assert_eq!(h.alignment_sign(a, b, &cols), -1.0);
        assert!(!h.rows_aligned(a, c, &cols, 1e-12));
        assert!(h.rows_aligned(a, a, &cols, 0.0));
        assert_eq!(h.alignment_sign(a, a, &cols), 1.0);
    }

    #[test]
    fn alignment_sign_skips_zero_products() {
        let mut h = DistanceMatrix::new(3, 1e-12, None);
        let a = h.add_values_row(vec![0.0, 1e-3, 5.0]);
        let b = h.add_values_row(vec![9.0, 1e-3, -5.0]);
        // Column 0 has a zero on row a, column 2 dominates: product < 0.
        assert_eq!(h.alignment_sign(a, b, &[0, 1, 2]), -1.0);
    }

    #[test]
    fn merge_rows_zero_wins_and_base_row_propagates() {
        let mut h = DistanceMatrix::new(3, 1e-12, None);
        let a = h.add_values_row(vec![1.0, 0.25, 0.0]);
        let b = h.add_values_row(vec![-1.0000001, -0.25, 1e-9]);
        h.merge_rows(&[a, b], &[1.0, -1.0]);
        assert_eq!(h.entry(a, 0), 1.0);
        assert_eq!(h.entry(b, 0), -1.0);
        assert_eq!(h.entry(b, 1), -0.25);
        // Row a's exact zero forces the whole column to zero.
        assert_eq!(h.entry(a, 2), 0.0);
        assert_eq!(h.entry(b, 2), 0.0);
    }

    #[test]
    fn retired_rows_drop_out_of_interpolation() {
        let mut h = DistanceMatrix::new(2, 1e-12, None);
        let a = h.add_values_row(vec![1.0, -1.0]);
        let b = h.add_values_row(vec![2.0, -2.0]);
        h.kill_row(a);
        assert!(!h.row_is_live(a));
        assert_eq!(h.live_rows().collect::<Vec<_>>(), vec![b]);
        let c = h.push_interpolated_column(0, 1, 0.5, 0.5);
        assert_eq!(h.entry(b, c), 0.0);
    }
}
