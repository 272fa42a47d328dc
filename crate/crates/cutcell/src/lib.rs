//! Cut-cell geometry kernel.
//!
//! Intersects a closed, oriented, triangulated surface with a Cartesian
//! background grid and produces, for every grid cell the surface passes
//! through, an explicit polyhedral decomposition of the cell's interior and
//! exterior parts together with the trimmed boundary facets. Cells away from
//! the surface are classified inside or outside by propagation from the cut
//! layer.
//!
//! The kernel is built around a vertex-based polyhedron representation
//! ([`rotation::RotationSystem`]) in which every vertex carries a cyclic list
//! of its neighbours. Faces are never stored explicitly; they are recovered by
//! walking the cyclic lists. Clipping a polyhedron by a half-space
//! ([`clip`]) rewrites the cyclic lists locally and extends a matrix of
//! vertex-to-plane signed distances ([`halfspace::DistanceMatrix`]) by
//! interpolation, so every later predicate reuses the distances computed at
//! parse time instead of re-evaluating plane equations against freshly
//! constructed coordinates.
//!
//! Non-convex cut regions are decomposed into convex pieces by inserting
//! planar walls at reflex surface edges ([`convexify`]), after which each
//! piece is closed into a polyhedron by clipping the cell against its own
//! surface planes ([`cut`]).
//!
//! Entry points, from lowest to highest level:
//!
//! * [`stl`]: read and weld STL surfaces.
//! * [`grid::CartesianGrid`]: background grid sizing and perturbation.
//! * [`cut::cut_mesh`]: the full pipeline for one surface and one grid.
//! * [`batch`]: multi-model runs, robustness sweeps, reports.
//! * [`vtk`]: legacy VTK output of the resulting polyhedral cells.

pub mod batch;
pub mod clip;
pub mod convexify;
pub mod cut;
pub mod error;
pub mod grid;
pub mod halfspace;
pub mod measures;
pub mod models;
pub mod rotation;
pub mod stl;
pub mod vtk;

pub use error::{Error, Result};
