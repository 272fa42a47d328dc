//! Vertex-based polyhedron representation.
//!
//! A polyhedron, or an open polyhedral surface, is stored as a rotation
//! system: every vertex carries the cyclic list of its neighbours, ordered
//! counter-clockwise as seen from outside the solid. Faces are implicit.
//! [`RotationSystem::faces`] recovers them by repeatedly stepping to the
//! successor of the previous vertex within the current vertex's cyclic list,
//! which traces each face boundary exactly once.
//!
//! Open surfaces are closed combinatorially by one synthetic vertex, the open
//! vertex, that terminates every boundary fan. It has no coordinates and no
//! distances; algorithms treat it as lying outside every half-space, and face
//! traversals that reach it are discarded. This lets clipping handle open and
//! closed inputs uniformly.
//!
//! Every directed edge optionally carries the id of the plane of the face it
//! borders, so faces of a clipped polyhedron can be traced back to the plane
//! that produced them without geometric tests.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::error::{Error, Result};

/// Vertex id. Vertices of several rotation systems sharing one distance
/// matrix live in one id space; ids index both coordinate and column storage.
pub type Vid = usize;

/// Plane id, i.e. a row index of the associated distance matrix.
pub type Pid = usize;

/// Placeholder for a neighbour slot that has not been linked yet. Only ever
/// present inside [`crate::clip`] between the split and walk phases.
pub const UNSET: Vid = usize::MAX;

/// A face recovered from a rotation system.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Boundary vertices, counter-clockwise from outside.
    pub cycle: Vec<Vid>,
    /// Plane row the face lies on, when edge provenance is available.
    pub row: Option<Pid>,
}

/// Polyhedron connectivity: per-vertex cyclic neighbour lists plus optional
/// per-directed-edge plane provenance. Coordinates and signed distances are
/// stored outside (see [`crate::halfspace::DistanceMatrix`]) so several
/// rotation systems can share one vertex id space.
#[derive(Clone, Debug, Default)]
pub struct RotationSystem {
    adj: Vec<Option<Vec<Vid>>>,
    /// The open vertex, when the surface has boundary. Its neighbour list is
    /// unordered bookkeeping, not a cyclic rotation.
    pub open: Option<Vid>,
    edge_plane: HashMap<(Vid, Vid), Pid>,
}

impl RotationSystem {
    /// Empty system.
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of live vertices, the open vertex excluded.
    pub fn live_count(&self) -> usize {
        let open = self.open;
        self.adj
            .iter()
            .enumerate()
            .filter(|(v, a)| a.is_some() && Some(*v) != open)
            .count()
    }

    /// True when the system has no live vertices.
    pub fn is_empty(&self) -> bool {
        self.live_count() == 0
    }

    /// Iterator over live vertex ids in ascending order, open vertex excluded.
    pub fn live_verts(&self) -> impl Iterator<Item = Vid> + '_ {
        let open = self.open;
        self.adj
            .iter()
            .enumerate()
            .filter(move |(v, a)| a.is_some() && Some(*v) != open)
            .map(|(v, _)| v)
    }

    /// Cyclic neighbour list of `v`. Panics if `v` is not live.
    pub fn neighbours(&self, v: Vid) -> &[Vid] {
        self.adj[v].as_deref().expect("neighbours of removed vertex")
    }

    /// True when `v` currently has an adjacency list (open vertex included).
    pub fn contains(&self, v: Vid) -> bool {
        v < self.adj.len() && self.adj[v].is_some()
    }

    fn slot_mut(&mut self, v: Vid) -> &mut Vec<Vid> {
        self.adj[v].as_mut().expect("adjacency of removed vertex")
    }

    /// Installs the full cyclic list of `v`, growing storage as needed.
    pub fn set_cycle(&mut self, v: Vid, cycle: Vec<Vid>) {
        if v >= self.adj.len() {
            self.adj.resize(v + 1, None);
        }
        self.adj[v] = Some(cycle);
    }

    /// Replaces the neighbour at position `slot` of `v`.
    pub fn replace_slot(&mut self, v: Vid, slot: usize, with: Vid) {
        self.slot_mut(v)[slot] = with;
    }

    /// Appends `w` to the open vertex's bookkeeping list.
    pub fn note_open_edge(&mut self, w: Vid) {
        let o = self.open.expect("no open vertex");
        self.slot_mut(o).push(w);
    }

    /// Successor of `prev` in the cyclic list of `v`: the traversal step that
    /// advances a face trace from edge (`prev`, `v`) to the next boundary
    /// vertex. `prev` must occur in the list exactly once.
    pub fn succ(&self, v: Vid, prev: Vid) -> Result<Vid> {
        let cycle = self.adj[v]
            .as_deref()
            .ok_or_else(|| corrupt(format!("successor query on removed vertex {v}")))?;
        let mut found = None;
        for (i, &w) in cycle.iter().enumerate() {
            if w == prev {
                if found.is_some() {
                    return Err(corrupt(format!(
                        "vertex {prev} occurs twice in the rotation of {v}"
                    )));
                }
                found = Some(i);
            }
        }
        let i = found
            .ok_or_else(|| corrupt(format!("vertex {prev} missing from the rotation of {v}")))?;
        Ok(cycle[(i + 1) % cycle.len()])
    }

    /// Removes `v`: drops its list, its provenance entries, and its entry in
    /// the open vertex's bookkeeping list. References to `v` inside other
    /// cyclic lists are the caller's responsibility.
    pub fn remove_vertex(&mut self, v: Vid) {
        if let Some(cycle) = self.adj[v].take() {
            for w in cycle {
                self.edge_plane.remove(&(v, w));
                self.edge_plane.remove(&(w, v));
            }
        }
        if let Some(o) = self.open {
            if o != v {
                if let Some(list) = self.adj[o].as_mut() {
                    list.retain(|&w| w != v);
                }
            }
        }
    }

    /// Plane provenance of directed edge (`a`, `b`).
    pub fn edge_row(&self, a: Vid, b: Vid) -> Option<Pid> {
        self.edge_plane.get(&(a, b)).copied()
    }

    /// Sets plane provenance of directed edge (`a`, `b`).
    pub fn set_edge_row(&mut self, a: Vid, b: Vid, row: Pid) {
        self.edge_plane.insert((a, b), row);
    }

    /// Drops provenance of directed edge (`a`, `b`) if present.
    pub fn clear_edge_row(&mut self, a: Vid, b: Vid) {
        self.edge_plane.remove(&(a, b));
    }

    /// Total number of directed edge slots over live vertices. Used as the
    /// step budget for traversal loops.
    pub fn directed_edge_budget(&self) -> usize {
        self.adj.iter().flatten().map(Vec::len).sum()
    }

    /// Builds a rotation system from face boundary cycles, each given
    /// counter-clockwise from outside with the plane row it lies on.
    ///
    /// Every vertex's local successor relation (around-the-vertex order of
    /// its incident faces) must assemble into one cyclic list. Vertices on
    /// the surface boundary assemble into open chains instead; these are
    /// closed through the open vertex `open_id` when `open_id` is provided,
    /// and rejected as an error otherwise. A boundary vertex shared by
    /// several fans gets the open vertex spliced in once per fan.
    pub fn from_faces(
        cycles: &[(Vec<Vid>, Pid)],
        open_id: Option<Vid>,
    ) -> Result<Self> {
        let mut rs = Self::new();
        // succ[v]: for each face cycle ... p, v, n ..., the traversal rule
        // demands that n follow p in the rotation of v.
        let mut succ: HashMap<Vid, HashMap<Vid, Vid>> = HashMap::new();
        for (cycle, row) in cycles {
            let k = cycle.len();
            if k < 3 {
                return Err(corrupt(format!("face cycle with {k} vertices")));
            }
            for i in 0..k {
                let p = cycle[(i + k - 1) % k];
                let v = cycle[i];
                let n = cycle[(i + 1) % k];
                if succ.entry(v).or_default().insert(p, n).is_some() {
                    return Err(corrupt(format!(
                        "directed edge ({p}, {v}) borders two faces on the same side"
                    )));
                }
                rs.edge_plane.insert((v, n), *row);
            }
        }

        let mut verts: Vec<Vid> = succ.keys().copied().collect();
        verts.sort_unstable();
        let mut open_used = false;
        for v in verts {
            let local = &succ[&v];
            let cycle = assemble_rotation(v, local, open_id, &mut open_used)?;
            rs.set_cycle(v, cycle);
        }
        if open_used {
            let o = open_id.expect("open vertex id missing despite use");
            rs.open = Some(o);
            // Bookkeeping list: every vertex whose rotation references o.
            let mut list = Vec::new();
            for (v, cycle) in rs.adj.iter().enumerate() {
                if let Some(cycle) = cycle {
                    if v != o && cycle.contains(&o) {
                        list.push(v);
                    }
                }
            }
            rs.set_cycle(o, list);
            rs.open = Some(o);
        }
        Ok(rs)
    }

    /// Recovers all faces. Each directed edge is traversed exactly once;
    /// traces that reach the open vertex belong to the surface boundary and
    /// are discarded. Returns faces in deterministic discovery order
    /// (ascending start vertex, then slot order).
    pub fn faces(&self) -> Result<Vec<Face>> {
        let budget = self.directed_edge_budget() + 2;
        let mut consumed: HashMap<(Vid, Vid), ()> = HashMap::new();
        let mut out = Vec::new();
        let open = self.open;
        let mut starts: Vec<Vid> = self.live_verts().collect();
        starts.sort_unstable();
        for v in starts {
            let nbrs = self.neighbours(v).to_vec();
            for w in nbrs {
                if consumed.contains_key(&(v, w)) {
                    continue;
                }
                if Some(w) == open {
                    consumed.insert((v, w), ());
                    continue;
                }
                self.trace_face(v, w, open, budget, &mut consumed, &mut out)?;
            }
        }
        Ok(out)
    }

    fn trace_face(
        &self,
        v0: Vid,
        w0: Vid,
        open: Option<Vid>,
        budget: usize,
        consumed: &mut HashMap<(Vid, Vid), ()>,
        out: &mut Vec<Face>,
    ) -> Result<()> {
        let mut cycle = vec![v0];
        let mut row = self.edge_row(v0, w0);
        let mut prev = v0;
        let mut cur = w0;
        let mut reached_open = false;
        let mut steps = 0usize;
        loop {
            let fresh = consumed.insert((prev, cur), ()).is_none();
            if !fresh && open.is_none() {
                return Err(corrupt(format!(
                    "edge ({prev}, {cur}) traversed by two faces"
                )));
            }
            if Some(cur) == open {
                // Boundary fan: the walked prefix is consumed, no face.
                reached_open = true;
                break;
            }
            cycle.push(cur);
            if row.is_none() {
                row = self.edge_row(prev, cur);
            }
            let nxt = self.succ(cur, prev)?;
            if cur == v0 && nxt == w0 {
                // Back on the start edge; `v0` was pushed twice.
                cycle.pop();
                break;
            }
            prev = cur;
            cur = nxt;
            steps += 1;
            if steps > budget {
                return Err(corrupt(format!(
                    "face trace from ({v0}, {w0}) did not close"
                )));
            }
        }
        if !reached_open {
            // The closing step consumed (last, v0) but not (v0, w0) when the
            // cycle came back around; mark the start edge as well.
            consumed.insert((v0, w0), ());
            out.push(Face { cycle, row });
        }
        Ok(())
    }

    /// Connected components over real edges, the open vertex excluded.
    /// Components and their member lists are in ascending vertex order.
    pub fn components(&self) -> Vec<Vec<Vid>> {
        let open = self.open;
        let mut seen: HashMap<Vid, ()> = HashMap::new();
        let mut comps = Vec::new();
        let verts: Vec<Vid> = self.live_verts().collect();
        for &v in &verts {
            if seen.contains_key(&v) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![v];
            seen.insert(v, ());
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &w in self.neighbours(u) {
                    if Some(w) == open || !self.contains(w) {
                        continue;
                    }
                    if seen.insert(w, ()).is_none() {
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

/// Assembles one vertex's rotation from its local successor relation.
fn assemble_rotation(
    v: Vid,
    local: &HashMap<Vid, Vid>,
    open_id: Option<Vid>,
    open_used: &mut bool,
) -> Result<Vec<Vid>> {
    let n = local.len();
    // Closed vertex: the relation is one cycle over all n neighbours.
    // Start from the smallest neighbour for a deterministic phase.
    let targets: HashMap<Vid, ()> = local.values().map(|&w| (w, ())).collect();
    // A chain of k neighbours contributes k - 1 successor entries, so the
    // neighbour count is the size of keys and values combined.
    let mut nbr_count = targets.len();
    for k in local.keys() {
        if !targets.contains_key(k) {
            nbr_count += 1;
        }
    }
    let mut heads: Vec<Vid> = local
        .keys()
        .filter(|k| !targets.contains_key(k))
        .copied()
        .collect();
    if heads.is_empty() {
        let start = *local.keys().min().expect("empty rotation");
        let mut cycle = Vec::with_capacity(n);
        let mut cur = start;
        for _ in 0..n {
            cycle.push(cur);
            cur = *local
                .get(&cur)
                .ok_or_else(|| corrupt(format!("broken rotation at vertex {v}")))?;
        }
        if cur != start || cycle.len() != n {
            return Err(corrupt(format!(
                "rotation of vertex {v} is not a single cycle"
            )));
        }
        return Ok(cycle);
    }
    // Boundary vertex: one or more open chains, each closed through the open
    // vertex. Chains are emitted in ascending head order.
    let o = open_id.ok_or_else(|| {
        Error::NotClosedManifold(format!("vertex {v} lies on a surface boundary"))
    })?;
    *open_used = true;
    heads.sort_unstable();
    let mut cycle = Vec::with_capacity(nbr_count + heads.len());
    let mut emitted = 0usize;
    for head in heads {
        let mut cur = head;
        loop {
            cycle.push(cur);
            emitted += 1;
            match local.get(&cur) {
                Some(&nxt) => cur = nxt,
                None => break,
            }
            if emitted > nbr_count {
                return Err(corrupt(format!("cyclic chain at boundary vertex {v}")));
            }
        }
        cycle.push(o);
    }
    if emitted != nbr_count {
        return Err(corrupt(format!(
            "rotation of vertex {v} mixes a cycle with open chains"
        )));
    }
    Ok(cycle)
}

/// Connectivity of an axis-aligned box spanning corner ids
/// `first..first + 8`, where corner `first + (i + 2j + 4k)` sits at
/// (x_i, y_j, z_k) with index 0 the low and 1 the high coordinate.
/// Face plane rows are `rows[0..6]` in the order -x, +x, -y, +y, -z, +z.
pub fn box_rotation(first: Vid, rows: [Pid; 6]) -> RotationSystem {
    let c = |b: Vid| first + b;
    let quads: [(Vec<Vid>, Pid); 6] = [
        (vec![c(0), c(4), c(6), c(2)], rows[0]),
        (vec![c(1), c(3), c(7), c(5)], rows[1]),
        (vec![c(0), c(1), c(5), c(4)], rows[2]),
        (vec![c(2), c(6), c(7), c(3)], rows[3]),
        (vec![c(0), c(2), c(3), c(1)], rows[4]),
        (vec![c(4), c(5), c(7), c(6)], rows[5]),
    ];
    RotationSystem::from_faces(&quads, None).expect("box connectivity is closed")
}

/// Corner coordinates matching [`box_rotation`]'s id layout.
pub fn box_corners(lo: Point3<f64>, hi: Point3<f64>) -> Vec<Point3<f64>> {
    let mut pts = Vec::with_capacity(8);
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                pts.push(Point3::new(
                    if i == 0 { lo.x } else { hi.x },
                    if j == 0 { lo.y } else { hi.y },
                    if k == 0 { lo.z } else { hi.z },
                ));
            }
        }
    }
    pts
}

fn corrupt(msg: String) -> Error {
    Error::CorruptPolyhedron(msg)
}
