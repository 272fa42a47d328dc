//! Cartesian background grid: sizing, indexing, and rigid perturbation.
//!
//! The grid is sized from the surface's bounding box: the spacing is the
//! scaled smaller of (largest extent / n_max) and (smallest extent / n_min),
//! and the box is inflated symmetrically by the scale factor so the surface
//! never touches the outer boundary. Cell counts follow from the inflated
//! extents, with a relative slack of 1e-13 before rounding up so that an
//! extent that is an exact multiple of the spacing, up to accumulated
//! floating-point error, does not gain a spurious extra layer of cells.
//!
//! Robustness sweeps move the grid relative to the surface. The grid never
//! mutates its origin for this; it carries a rigid transform (rotation about
//! the generating box's barycentre plus a translation) that maps world
//! points into the grid frame. Composing a translation with its exact
//! negation cancels bitwise, which the perturbation invariance tests rely
//! on.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

/// Grid sizing parameters.
#[derive(Clone, Copy, Debug)]
pub struct GridConfig {
    /// Upper bound on cells along the largest bounding-box extent.
    pub n_max: usize,
    /// Lower bound on cells along the smallest bounding-box extent.
    pub n_min: usize,
    /// Symmetric inflation of the bounding box; 1.0 means tight.
    pub scale: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_max: 100, n_min: 10, scale: 1.4 }
    }
}

/// Axis-aligned Cartesian grid in its own frame, plus the rigid transform
/// from world (surface) coordinates into that frame.
#[derive(Clone, Debug)]
pub struct CartesianGrid {
    pub origin: Point3<f64>,
    pub h: f64,
    pub dims: [usize; 3],
    rot: Matrix3<f64>,
    trans: Vector3<f64>,
    /// Barycentre of the generating bounding box; rotations pivot here.
    center: Point3<f64>,
}

/// Sizes a grid around the given surface bounding box.
pub fn background_grid(
    bbox_min: Point3<f64>,
    bbox_max: Point3<f64>,
    cfg: &GridConfig,
) -> Result<CartesianGrid> {
    let ext = bbox_max - bbox_min;
    if !(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "surface bounding box is degenerate: extents {:?}",
            (ext.x, ext.y, ext.z)
        )));
    }
    if cfg.n_max == 0 || cfg.n_min == 0 || cfg.n_max < cfg.n_min {
        return Err(Error::InvalidConfig(format!(
            "cell bounds must satisfy 1 <= n_min <= n_max, got {} and {}",
            cfg.n_min, cfg.n_max
        )));
    }
    if !(cfg.scale >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid scale must be at least 1, got {}",
            cfg.scale
        )));
    }
    let ext_max = ext.x.max(ext.y).max(ext.z);
    let ext_min = ext.x.min(ext.y).min(ext.z);
    let h = cfg.scale * (ext_max / cfg.n_max as f64).min(ext_min / cfg.n_min as f64);
    let pad = (cfg.scale - 1.0) / 2.0;
    let origin = Point3::new(
        bbox_min.x - pad * ext.x,
        bbox_min.y - pad * ext.y,
        bbox_min.z - pad * ext.z,
    );
    let dim = |e: f64| -> usize {
        let r = cfg.scale * e / h;
        ((r * (1.0 - 1e-13)).ceil() as usize).max(1)
    };
    let center = Point3::from((bbox_min.coords + bbox_max.coords) * 0.5);
    Ok(CartesianGrid {
        origin,
        h,
        dims: [dim(ext.x), dim(ext.y), dim(ext.z)],
        rot: Matrix3::identity(),
        trans: Vector3::zeros(),
        center,
    })
}

impl CartesianGrid {
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Volume of one cell, as a single product so every cell agrees bitwise.
    pub fn cell_volume(&self) -> f64 {
        (self.h * self.h) * self.h
    }

    /// Grid-line coordinate `i` along `axis`. Every cell derives its face
    /// coordinates from this, so neighbouring cells share their common plane
    /// bitwise.
    pub fn line_coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h
    }

    /// Lower and upper corner of cell (i, j, k) in the grid frame.
    pub fn cell_bounds(&self, c: [usize; 3]) -> (Point3<f64>, Point3<f64>) {
        let lo = Point3::new(
            self.line_coord(0, c[0]),
            self.line_coord(1, c[1]),
            self.line_coord(2, c[2]),
        );
        let hi = Point3::new(
            self.line_coord(0, c[0] + 1),
            self.line_coord(1, c[1] + 1),
            self.line_coord(2, c[2] + 1),
        );
        (lo, hi)
    }

    /// Linear index with x fastest, then y, then z.
    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn cell_at(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    /// Neighbour across the face in direction `face` (0..6 as -x, +x, -y,
    /// +y, -z, +z), or `None` at the grid boundary.
    pub fn neighbour(&self, c: [usize; 3], face: usize) -> Option<[usize; 3]> {
        let axis = face / 2;
        let up = face % 2 == 1;
        let mut n = c;
        if up {
            if c[axis] + 1 >= self.dims[axis] {
                return None;
            }
            n[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            n[axis] -= 1;
        }
        Some(n)
    }

    /// Cell containing a grid-frame point; points exactly on a grid line
    /// belong to the cell whose lower face they lie on. `None` outside.
    pub fn cell_of_point(&self, p: Point3<f64>) -> Option<[usize; 3]> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let r = (p[a] - self.origin[a]) / self.h;
            if r < 0.0 {
                return None;
            }
            let i = r.floor() as usize;
            if i >= self.dims[a] {
                return None;
            }
            c[a] = i;
        }
        Some(c)
    }

    /// Maps a world point into the grid frame: rotate about the generating
    /// box's barycentre, then translate.
    pub fn to_grid_frame(&self, p: Point3<f64>) -> Point3<f64> {
        self.center + self.rot * (p - self.center) + self.trans
    }

    /// True when the stored perturbation is exactly the identity.
    pub fn is_unperturbed(&self) -> bool {
        self.rot == Matrix3::identity() && self.trans == Vector3::zeros()
    }

    pub fn translate_by(&mut self, shift: Vector3<f64>) {
        self.trans += shift;
    }

    /// Shifts the grid frame by 10^-alpha of the grid extent per axis.
    pub fn perturb_translate(&mut self, alpha: i32) {
        let f = 10f64.powi(-alpha);
        let shift = Vector3::new(
            self.dims[0] as f64 * self.h * f,
            self.dims[1] as f64 * self.h * f,
            self.dims[2] as f64 * self.h * f,
        );
        self.translate_by(shift);
    }

    /// Composes a rotation by 10^-alpha radians about each axis in turn
    /// (x, then y, then z) around the generating box's barycentre.
    pub fn perturb_rotate(&mut self, alpha: i32) {
        let t = 10f64.powi(-alpha);
        let (s, c) = t.sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c);
        let ry = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        let rz = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        self.rot = rz * ry * rx * self.rot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_cube_defaults() {
        let g = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            &GridConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(g.h, 0.014, max_relative = 1e-14);
        assert_eq!(g.dims, [100, 100, 100]);
        assert_relative_eq!(g.origin.x, -0.2, max_relative = 1e-13);
        assert_relative_eq!(g.origin.y, -0.2, max_relative = 1e-13);
        assert_relative_eq!(g.origin.z, -0.2, max_relative = 1e-13);
        assert_eq!(g.cell_count(), 1_000_000);
    }

    #[test]
    fn anisotropic_box_spacing() {
        let g = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(65.06, 37.371, 111.76),
            &GridConfig::default(),
        )
        .unwrap();
        assert!((g.h - 1.564640).abs() < 1e-6);
        // The largest axis gets at most scale * n_max cells.
        assert!(g.dims[2] <= 140);
        assert!(g.dims[0] < g.dims[2]);
    }

    #[test]
    fn degenerate_and_invalid_configs_error() {
        let flat = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            &GridConfig::default(),
        );
        assert!(flat.is_err());
        let bad = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            &GridConfig { n_max: 2, n_min: 5, scale: 1.4 },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let g = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 2.0, 3.0),
            &GridConfig { n_max: 10, n_min: 1, scale: 1.4 },
        )
        .unwrap();
        for idx in 0..g.cell_count() {
            assert_eq!(g.cell_index(g.cell_at(idx)), idx);
        }
        let (lo, hi) = g.cell_bounds([0, 0, 0]);
        assert_eq!(lo, g.origin);
        assert!(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z);
        // Neighbouring cells share the face coordinate bitwise.
        let (_, hi0) = g.cell_bounds([0, 0, 0]);
        let (lo1, _) = g.cell_bounds([1, 0, 0]);
        assert_eq!(hi0.x, lo1.x);
    }

    #[test]
    fn points_on_grid_lines_belong_to_the_upper_cell() {
        let g = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            &GridConfig { n_max: 10, n_min: 1, scale: 1.4 },
        )
        .unwrap();
        let x1 = g.line_coord(0, 1);
        let p = Point3::new(x1, g.line_coord(1, 0) + 0.5 * g.h, g.line_coord(2, 0) + 0.5 * g.h);
        assert_eq!(g.cell_of_point(p), Some([1, 0, 0]));
        assert_eq!(g.cell_of_point(Point3::new(g.origin.x - 1.0, 0.0, 0.0)), None);
    }

    #[test]
    fn translation_and_its_negation_cancel_bitwise() {
        let mut g = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            &GridConfig::default(),
        )
        .unwrap();
        let p = Point3::new(0.3, 0.55, 0.71);
        let before = g.to_grid_frame(p);
        assert_eq!(before, p);
        g.perturb_translate(3);
        let shifted = g.to_grid_frame(p);
        assert_ne!(shifted, p);
        let minus = -g_shift(&g);
        g.translate_by(minus);
        assert!(g.is_unperturbed());
        assert_eq!(g.to_grid_frame(p), p);
    }

    fn g_shift(g: &CartesianGrid) -> Vector3<f64> {
        g.trans
    }

    #[test]
    fn small_rotations_stay_orthonormal() {
        let mut g = background_grid(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            &GridConfig::default(),
        )
        .unwrap();
        g.perturb_rotate(6);
        let r = g.rot;
        let should_be_identity = r * r.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(should_be_identity[(i, j)], expect, epsilon = 1e-14);
            }
        }
        // The barycentre is the fixed point.
        let c = Point3::new(0.5, 0.5, 0.5);
        assert_relative_eq!(g.to_grid_frame(c).x, 0.5, epsilon = 1e-15);
        // A point at unit distance moves by about the rotation angle.
        let p = Point3::new(1.5, 0.5, 0.5);
        let moved = (g.to_grid_frame(p) - p).norm();
        assert!(moved > 1e-7 && moved < 1e-5, "moved {moved}");
    }
}
