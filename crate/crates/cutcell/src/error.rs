//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors produced by parsing, meshing, and the cut-cell pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying file or stream failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The STL payload ended before the declared data did.
    #[error("truncated STL: {context} at byte {offset}")]
    TruncatedStl { offset: u64, context: String },

    /// The STL payload is neither valid binary nor valid ASCII.
    #[error("malformed STL: {0}")]
    MalformedStl(String),

    /// The welded surface is not a closed manifold: some undirected edge is
    /// not shared by exactly two triangles with opposite orientations.
    #[error("surface is not a closed oriented manifold: {0}")]
    NotClosedManifold(String),

    /// A polyhedron traversal failed to close, which means the input surface
    /// violated the preconditions (self-intersection, inconsistent winding)
    /// in a way the weld could not detect.
    #[error("corrupt polyhedron connectivity: {0}")]
    CorruptPolyhedron(String),

    /// Inside/outside propagation reached the same uncut cell with both
    /// labels. The surface is open, self-intersecting, or tangent to the grid
    /// beyond what the tolerances absorb.
    #[error("inconsistent cell classification at cell {cell:?}: {context}")]
    InconsistentClassification { cell: (usize, usize, usize), context: String },

    /// A configuration value is out of its valid range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Report or geometry serialization failure.
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
