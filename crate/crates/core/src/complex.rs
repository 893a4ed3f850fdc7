//! Triangulated closed 3-manifolds and global ball packings.
//!
//! A [`Complex`] is a simplicial collection of tetrahedra over `N` vertices
//! with derived incidence (edges, triangles, per-vertex incident tetrahedra,
//! tetra-degrees). Construction enforces simplicial sanity (distinct
//! vertices per tetrahedron, no duplicate tetrahedra, no isolated
//! vertices); whether the complex is a closed 3-manifold is a separate,
//! reported check ([`validate`]): every triangle in exactly two tetrahedra,
//! every edge link a single cycle, every vertex link a connected surface of
//! Euler characteristic 2.
//!
//! On-disk formats are JSON with explicit format tags; unknown top-level
//! fields are rejected.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Format tag of triangulation files.
pub const TRI_FORMAT: &str = "yamabe3h-tri/1";

/// Format tag of packing files.
pub const PACKING_FORMAT: &str = "yamabe3h-packing/1";

/// A triangulated complex with derived incidence structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Complex {
    vertex_count: usize,
    tets: Vec<[usize; 4]>,
    edges: Vec<(usize, usize)>,
    triangles: Vec<[usize; 3]>,
    incident: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Complex {
    /// Builds a complex and its incidence from a tetrahedron list. Tuples
    /// are kept in the given order and orientation; identity of a
    /// tetrahedron is its vertex *set*.
    pub fn new(vertex_count: usize, tets: Vec<[usize; 4]>) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::EmptyComplex);
        }
        let mut seen: BTreeMap<[usize; 4], usize> = BTreeMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v >= vertex_count {
                    return Err(Error::VertexIndexOutOfRange {
                        tet: t,
                        vertex: v,
                        vertex_count,
                    });
                }
            }
            let mut key = *tet;
            key.sort_unstable();
            if key[0] == key[1] || key[1] == key[2] || key[2] == key[3] {
                return Err(Error::RepeatedVertex {
                    tet: t,
                    vertices: *tet,
                });
            }
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicateTetrahedron { first, second: t });
            }
            seen.insert(key, t);
        }

        let mut incident = vec![Vec::new(); vertex_count];
        let mut edge_set = BTreeSet::new();
        let mut tri_set = BTreeSet::new();
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                incident[v].push(t);
            }
            for a in 0..4 {
                for b in (a + 1)..4 {
                    let (x, y) = (tet[a].min(tet[b]), tet[a].max(tet[b]));
                    edge_set.insert((x, y));
                }
                let mut tri: Vec<usize> = (0..4).filter(|&m| m != a).map(|m| tet[m]).collect();
                tri.sort_unstable();
                tri_set.insert([tri[0], tri[1], tri[2]]);
            }
        }
        for (v, inc) in incident.iter().enumerate() {
            if inc.is_empty() {
                return Err(Error::IsolatedVertex { vertex: v });
            }
        }
        let degrees = incident.iter().map(Vec::len).collect();
        Ok(Complex {
            vertex_count,
            tets,
            edges: edge_set.into_iter().collect(),
            triangles: tri_set.into_iter().collect(),
            incident,
            degrees,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Indices of tetrahedra containing `v`, ascending.
    pub fn incident_tets(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Tetra-degree `d_v` per vertex; the sum over vertices is four times
    /// the tetrahedron count.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Checks a packing's length against the vertex count.
    pub fn check_packing(&self, p: &Packing) -> Result<()> {
        if p.len() != self.vertex_count {
            return Err(Error::LengthMismatch {
                expected: self.vertex_count,
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Parses the JSON triangulation format.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let file: TriFile = serde_json::from_slice(bytes)?;
        if file.format != TRI_FORMAT {
            return Err(Error::FormatTag {
                expected: TRI_FORMAT,
                found: file.format,
            });
        }
        Complex::new(file.vertex_count, file.tetrahedra)
    }

    /// Serializes to the JSON triangulation format (stable field order and
    /// tetrahedron order, so output is byte-reproducible).
    pub fn to_json(&self) -> String {
        let file = TriFile {
            format: TRI_FORMAT.to_string(),
            vertex_count: self.vertex_count,
            tetrahedra: self.tets.clone(),
        };
        serde_json::to_string_pretty(&file).expect("serialization of plain data cannot fail")
    }

    /// Replaces tetrahedron `tet_index` by its four cone tetrahedra over a
    /// new vertex (a 1-to-4 subdivision). Preserves closed-manifoldness.
    pub fn subdivide_tet(&self, tet_index: usize) -> Result<Self> {
        assert!(tet_index < self.tets.len(), "tetrahedron index out of range");
        let new_v = self.vertex_count;
        let old = self.tets[tet_index];
        let mut tets = Vec::with_capacity(self.tets.len() + 3);
        tets.extend_from_slice(&self.tets[..tet_index]);
        for drop in 0..4 {
            let mut tet = [new_v; 4];
            let mut n = 0;
            for (m, &v) in old.iter().enumerate() {
                if m != drop {
                    tet[n] = v;
                    n += 1;
                }
            }
            tets.push(tet);
        }
        tets.extend_from_slice(&self.tets[tet_index + 1..]);
        Complex::new(self.vertex_count + 1, tets)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TriFile {
    format: String,
    vertex_count: usize,
    tetrahedra: Vec<[usize; 4]>,
}

/// A positive radius per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Packing {
    r: Vec<f64>,
}

impl Packing {
    /// Validates positivity and finiteness. The upper bound matches the
    /// per-tetrahedron radius domain; the lower end is positivity only
    /// (flow trajectories legitimately pass through very small radii).
    pub fn new(r: Vec<f64>) -> Result<Self> {
        for (v, &x) in r.iter().enumerate() {
            if !x.is_finite() || x <= 0.0 || x > crate::geometry::RADIUS_MAX {
                return Err(Error::NonPositiveRadius { vertex: v, value: x });
            }
        }
        Ok(Packing { r })
    }

    pub fn uniform(n: usize, t: f64) -> Result<Self> {
        Packing::new(vec![t; n])
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.r
    }

    /// Parses the JSON packing format.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let file: PackingFile = serde_json::from_slice(bytes)?;
        if file.format != PACKING_FORMAT {
            return Err(Error::FormatTag {
                expected: PACKING_FORMAT,
                found: file.format,
            });
        }
        Packing::new(file.radii)
    }

    pub fn to_json(&self) -> String {
        let file = PackingFile {
            format: PACKING_FORMAT.to_string(),
            radii: self.r.clone(),
        };
        serde_json::to_string_pretty(&file).expect("serialization of plain data cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PackingFile {
    format: String,
    radii: Vec<f64>,
}

/// Outcome of the closed-manifold checks. Failures are report entries, not
/// errors; `passed` summarizes.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Every triangle lies in exactly two tetrahedra.
    pub triangle_pairing_ok: bool,
    /// Triangles violating the pairing, with their incidence counts
    /// (truncated to the first few).
    pub triangle_pairing_offenders: Vec<([usize; 3], usize)>,
    /// The link of every edge is a single cycle.
    pub edge_links_ok: bool,
    pub edge_link_offenders: Vec<(usize, usize)>,
    /// The link of every vertex is a connected surface with Euler
    /// characteristic 2.
    pub vertex_links_ok: bool,
    pub vertex_link_offenders: Vec<usize>,
    pub d_min: usize,
    pub d_max: usize,
    /// Hypothesis flag: every tetra-degree at least 23.
    pub all_degrees_at_least_23: bool,
    /// Hypothesis flag: every tetra-degree at most 22.
    pub all_degrees_at_most_22: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.triangle_pairing_ok && self.edge_links_ok && self.vertex_links_ok
    }
}

const MAX_OFFENDERS: usize = 8;

/// Runs the closed-manifold checks and computes the degree-threshold flags.
pub fn validate(c: &Complex) -> ValidationReport {
    // Triangle pairing.
    let mut tri_count: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    for tet in c.tets() {
        for drop in 0..4 {
            let mut tri: Vec<usize> = (0..4).filter(|&m| m != drop).map(|m| tet[m]).collect();
            tri.sort_unstable();
            *tri_count.entry([tri[0], tri[1], tri[2]]).or_insert(0) += 1;
        }
    }
    let mut triangle_pairing_offenders = Vec::new();
    for (&tri, &n) in &tri_count {
        if n != 2 && triangle_pairing_offenders.len() < MAX_OFFENDERS {
            triangle_pairing_offenders.push((tri, n));
        }
    }
    let triangle_pairing_ok = triangle_pairing_offenders.is_empty()
        && tri_count.values().all(|&n| n == 2);

    // Edge links: the opposite-edge pairs of the tetrahedra around an edge
    // must form one cycle (every link vertex of degree 2, connected).
    let mut edge_link_offenders = Vec::new();
    for &(a, b) in c.edges() {
        if !edge_link_is_cycle(c, a, b) && edge_link_offenders.len() < MAX_OFFENDERS {
            edge_link_offenders.push((a, b));
        }
    }
    let edge_links_ok = c.edges().iter().all(|&(a, b)| edge_link_is_cycle(c, a, b));

    // Vertex links: triangulated surface from the opposite faces.
    let mut vertex_link_offenders = Vec::new();
    let mut vertex_links_ok = true;
    for v in 0..c.vertex_count() {
        if !vertex_link_is_sphere_like(c, v) {
            vertex_links_ok = false;
            if vertex_link_offenders.len() < MAX_OFFENDERS {
                vertex_link_offenders.push(v);
            }
        }
    }

    let d_min = *c.degrees().iter().min().expect("no isolated vertices");
    let d_max = *c.degrees().iter().max().expect("no isolated vertices");

    ValidationReport {
        triangle_pairing_ok,
        triangle_pairing_offenders,
        edge_links_ok,
        edge_link_offenders,
        vertex_links_ok,
        vertex_link_offenders,
        d_min,
        d_max,
        all_degrees_at_least_23: d_min >= 23,
        all_degrees_at_most_22: d_max <= 22,
    }
}

fn edge_link_is_cycle(c: &Complex, a: usize, b: usize) -> bool {
    // Collect the opposite pair of each tetrahedron containing edge {a, b};
    // these are the edges of the link graph.
    let mut link_edges = Vec::new();
    let mut nodes = BTreeSet::new();
    for &t in c.incident_tets(a) {
        let tet = c.tets()[t];
        if tet.contains(&b) {
            let rest: Vec<usize> = tet.iter().copied().filter(|&v| v != a && v != b).collect();
            link_edges.push((rest[0].min(rest[1]), rest[0].max(rest[1])));
            nodes.insert(rest[0]);
            nodes.insert(rest[1]);
        }
    }
    if link_edges.len() < 3 || link_edges.len() != nodes.len() {
        return false;
    }
    // Degree 2 everywhere.
    let mut deg: BTreeMap<usize, usize> = BTreeMap::new();
    for &(x, y) in &link_edges {
        *deg.entry(x).or_insert(0) += 1;
        *deg.entry(y).or_insert(0) += 1;
    }
    if deg.values().any(|&d| d != 2) {
        return false;
    }
    // Connected: walk from one node.
    let start = *nodes.iter().next().expect("nonempty");
    let mut reached = BTreeSet::from([start]);
    let mut frontier = vec![start];
    while let Some(x) = frontier.pop() {
        for &(p, q) in &link_edges {
            let other = if p == x {
                q
            } else if q == x {
                p
            } else {
                continue;
            };
            if reached.insert(other) {
                frontier.push(other);
            }
        }
    }
    reached.len() == nodes.len()
}

fn vertex_link_is_sphere_like(c: &Complex, v: usize) -> bool {
    // Link surface: one triangle per incident tetrahedron (its opposite
    // face). Closed-surface edge pairing is covered by the global triangle
    // check; here: Euler characteristic 2 and connectivity.
    let faces: Vec<[usize; 3]> = c
        .incident_tets(v)
        .iter()
        .map(|&t| {
            let mut f: Vec<usize> = c.tets()[t].iter().copied().filter(|&u| u != v).collect();
            f.sort_unstable();
            [f[0], f[1], f[2]]
        })
        .collect();
    let mut verts = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for f in &faces {
        for &u in f {
            verts.insert(u);
        }
        edges.insert((f[0], f[1]));
        edges.insert((f[0], f[2]));
        edges.insert((f[1], f[2]));
    }
    let euler = verts.len() as i64 - edges.len() as i64 + faces.len() as i64;
    if euler != 2 {
        return false;
    }
    // Connectivity through shared edges, via vertex reachability.
    let start = match verts.iter().next() {
        Some(&s) => s,
        None => return false,
    };
    let mut reached = BTreeSet::from([start]);
    let mut frontier = vec![start];
    while let Some(x) = frontier.pop() {
        for &(p, q) in &edges {
            let other = if p == x {
                q
            } else if q == x {
                p
            } else {
                continue;
            };
            if reached.insert(other) {
                frontier.push(other);
            }
        }
    }
    reached.len() == verts.len()
}

/// Built-in triangulations of the 3-sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Boundary of the 4-simplex: 5 vertices, 5 tetrahedra, all degrees 4.
    Pentachoron,
    /// Boundary of the 4-dimensional cross-polytope: 8 vertices,
    /// 16 tetrahedra, all degrees 8.
    SixteenCell,
    /// Boundary of the 600-cell: 120 vertices, 600 tetrahedra, all
    /// degrees 20.
    SixHundredCell,
}

impl GeneratorKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "pentachoron" => Ok(GeneratorKind::Pentachoron),
            "sixteen_cell" => Ok(GeneratorKind::SixteenCell),
            "six_hundred_cell" => Ok(GeneratorKind::SixHundredCell),
            other => Err(Error::UnknownGenerator(other.to_string())),
        }
    }
}

/// Builds one of the shipped triangulations.
pub fn generate(kind: GeneratorKind) -> Complex {
    match kind {
        GeneratorKind::Pentachoron => {
            let mut tets = Vec::new();
            for drop in (0..5).rev() {
                let mut tet = [0usize; 4];
                let mut n = 0;
                for v in 0..5 {
                    if v != drop {
                        tet[n] = v;
                        n += 1;
                    }
                }
                tets.push(tet);
            }
            Complex::new(5, tets).expect("pentachoron is well-formed")
        }
        GeneratorKind::SixteenCell => {
            // Vertices i and i+4 are antipodal; facets pick one from each
            // antipodal pair.
            let mut tets = Vec::new();
            for a in [0usize, 4] {
                for b in [1usize, 5] {
                    for c in [2usize, 6] {
                        for d in [3usize, 7] {
                            tets.push([a, b, c, d]);
                        }
                    }
                }
            }
            Complex::new(8, tets).expect("sixteen-cell is well-formed")
        }
        GeneratorKind::SixHundredCell => six_hundred_cell(),
    }
}

fn six_hundred_cell() -> Complex {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 4]> = Vec::with_capacity(120);
    // 8 unit vectors.
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            let mut v = [0.0; 4];
            v[axis] = sign;
            verts.push(v);
        }
    }
    // 16 half-integer vectors.
    for s in 0..16u32 {
        let mut v = [0.5; 4];
        for (axis, coord) in v.iter_mut().enumerate() {
            if s >> axis & 1 == 1 {
                *coord = -0.5;
            }
        }
        verts.push(v);
    }
    // 96 even permutations of (phi, 1, 1/phi, 0) / 2 with free signs on the
    // nonzero coordinates.
    const EVEN_PERMS: [[usize; 4]; 12] = [
        [0, 1, 2, 3],
        [0, 2, 3, 1],
        [0, 3, 1, 2],
        [1, 0, 3, 2],
        [1, 2, 0, 3],
        [1, 3, 2, 0],
        [2, 0, 1, 3],
        [2, 1, 3, 0],
        [2, 3, 0, 1],
        [3, 0, 2, 1],
        [3, 1, 0, 2],
        [3, 2, 1, 0],
    ];
    let base = [phi / 2.0, 0.5, 1.0 / (2.0 * phi), 0.0];
    for perm in EVEN_PERMS {
        for s in 0..8u32 {
            let signs = [
                if s & 1 == 1 { -1.0 } else { 1.0 },
                if s >> 1 & 1 == 1 { -1.0 } else { 1.0 },
                if s >> 2 & 1 == 1 { -1.0 } else { 1.0 },
            ];
            let mut v = [0.0; 4];
            for (slot, &src) in perm.iter().enumerate() {
                v[slot] = if src < 3 { signs[src] * base[src] } else { 0.0 };
            }
            verts.push(v);
        }
    }
    debug_assert_eq!(verts.len(), 120);
    // Canonical vertex order for a reproducible complex.
    verts.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    // Tangency graph: edges at the minimal nonzero distance, squared
    // distance 2 - phi.
    let edge_sq = 2.0 - phi;
    let adj: Vec<Vec<usize>> = (0..120)
        .map(|i| {
            (0..120)
                .filter(|&j| j != i && {
                    let d: f64 = (0..4).map(|k| (verts[i][k] - verts[j][k]).powi(2)).sum();
                    (d - edge_sq).abs() < 1e-9
                })
                .collect()
        })
        .collect();

    let is_adj = |i: usize, j: usize| adj[i].binary_search(&j).is_ok();
    let mut tets = Vec::new();
    for i in 0..120 {
        for &j in adj[i].iter().filter(|&&j| j > i) {
            for &k in adj[j].iter().filter(|&&k| k > j && is_adj(i, k)) {
                for &l in adj[k].iter().filter(|&&l| l > k && is_adj(i, l) && is_adj(j, l)) {
                    tets.push([i, j, k, l]);
                }
            }
        }
    }
    debug_assert_eq!(tets.len(), 600);
    Complex::new(120, tets).expect("600-cell is well-formed")
}
