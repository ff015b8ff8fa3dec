//! Conforming triangulations with boundary markers and newest-vertex bisection.
//!
//! Triangles are stored counterclockwise. Local edge `i` of a triangle joins
//! local vertices `i+1` and `i+2` (mod 3), i.e. it is the edge opposite
//! vertex `i`. The refinement edge of a triangle is stored as such a local
//! index; the vertex opposite it is the "newest vertex".

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::MeshError;

pub type Point = [f64; 2];

/// Sentinel for the missing second neighbour of a boundary edge.
pub const NO_TRIANGLE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Contact,
}

impl BoundaryKind {
    pub fn code(self) -> char {
        match self {
            BoundaryKind::Dirichlet => 'D',
            BoundaryKind::Neumann => 'N',
            BoundaryKind::Contact => 'C',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "D" => Some(BoundaryKind::Dirichlet),
            "N" => Some(BoundaryKind::Neumann),
            "C" => Some(BoundaryKind::Contact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub kind: BoundaryKind,
}

/// A unique mesh edge with its one or two adjacent triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller index first.
    pub vertices: [usize; 2],
    /// Adjacent triangles; the second is [`NO_TRIANGLE`] on the boundary.
    pub triangles: [usize; 2],
    /// Local edge index inside each adjacent triangle.
    pub local: [u8; 2],
    pub kind: Option<BoundaryKind>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1] == NO_TRIANGLE
    }
}

/// Conforming triangulation. Immutable once built; refinement returns a new mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    refinement_edge: Vec<u8>,
    level: usize,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
}

/// Which marker goes on each side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerLayout {
    pub bottom: BoundaryKind,
    pub right: BoundaryKind,
    pub top: BoundaryKind,
    pub left: BoundaryKind,
}

impl MarkerLayout {
    /// Clamped top, traction sides, contact at the bottom.
    pub fn clamped_top_contact_bottom() -> Self {
        MarkerLayout {
            bottom: BoundaryKind::Contact,
            right: BoundaryKind::Neumann,
            top: BoundaryKind::Dirichlet,
            left: BoundaryKind::Neumann,
        }
    }

    /// Clamped left side, contact on the right, traction-free top and bottom.
    pub fn clamped_left_contact_right() -> Self {
        MarkerLayout {
            bottom: BoundaryKind::Neumann,
            right: BoundaryKind::Contact,
            top: BoundaryKind::Neumann,
            left: BoundaryKind::Dirichlet,
        }
    }
}

/// Problems found while validating raw mesh data. `item` indices refer to
/// the triangle or boundary list so the text loader can map them to lines.
#[derive(Debug)]
enum Violation {
    BadVertex { tri: usize, vertex: usize },
    Orientation { tri: usize, area: f64 },
    Overshared { tri: usize, a: usize, b: usize },
    Overlap { tri: usize, a: usize, b: usize },
    Unmarked { tri: usize, a: usize, b: usize },
    MarkerNotBoundary { item: usize, a: usize, b: usize },
    DuplicateMarker { item: usize, a: usize, b: usize },
    BadRefinementEdge { tri: usize },
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

fn dist2(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn local_edge(t: &[usize; 3], i: usize) -> (usize, usize) {
    (t[(i + 1) % 3], t[(i + 2) % 3])
}

struct Topology {
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
}

fn build_topology(
    vertices: &[Point],
    triangles: &[[usize; 3]],
    boundary: &[BoundaryEdge],
) -> Result<Topology, Violation> {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
    let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 2);
    let mut directed: Vec<(usize, usize)> = Vec::with_capacity(triangles.len() * 2);
    let mut triangle_edges = Vec::with_capacity(triangles.len());

    for (ti, t) in triangles.iter().enumerate() {
        for &v in t {
            if v >= vertices.len() {
                return Err(Violation::BadVertex { tri: ti, vertex: v });
            }
        }
        let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        if area.is_nan() || area <= 0.0 {
            return Err(Violation::Orientation { tri: ti, area });
        }
        let mut te = [0usize; 3];
        for (i, slot) in te.iter_mut().enumerate() {
            let (a, b) = local_edge(t, i);
            match lookup.get(&key(a, b)) {
                None => {
                    lookup.insert(key(a, b), edges.len());
                    *slot = edges.len();
                    edges.push(Edge {
                        vertices: [a.min(b), a.max(b)],
                        triangles: [ti, NO_TRIANGLE],
                        local: [i as u8, 0],
                        kind: None,
                    });
                    directed.push((a, b));
                }
                Some(&e) => {
                    if edges[e].triangles[1] != NO_TRIANGLE {
                        return Err(Violation::Overshared { tri: ti, a, b });
                    }
                    if directed[e] == (a, b) {
                        return Err(Violation::Overlap { tri: ti, a, b });
                    }
                    edges[e].triangles[1] = ti;
                    edges[e].local[1] = i as u8;
                    *slot = e;
                }
            }
        }
        triangle_edges.push(te);
    }

    for (item, be) in boundary.iter().enumerate() {
        let [a, b] = be.vertices;
        match lookup.get(&key(a, b)) {
            Some(&e) if edges[e].is_boundary() => {
                if edges[e].kind.is_some() {
                    return Err(Violation::DuplicateMarker { item, a, b });
                }
                edges[e].kind = Some(be.kind);
            }
            _ => return Err(Violation::MarkerNotBoundary { item, a, b }),
        }
    }
    for e in &edges {
        if e.is_boundary() && e.kind.is_none() {
            return Err(Violation::Unmarked {
                tri: e.triangles[0],
                a: e.vertices[0],
                b: e.vertices[1],
            });
        }
    }
    Ok(Topology {
        edges,
        triangle_edges,
    })
}

fn longest_edges(vertices: &[Point], triangles: &[[usize; 3]]) -> Vec<u8> {
    triangles
        .iter()
        .map(|t| {
            let mut best = 0u8;
            let mut best_len = -1.0;
            for i in 0..3 {
                let (a, b) = local_edge(t, i);
                let l = dist2(vertices[a], vertices[b]);
                if l > best_len {
                    best_len = l;
                    best = i as u8;
                }
            }
            best
        })
        .collect()
}

impl Mesh {
    /// Builds and validates a mesh. Without explicit refinement edges each
    /// triangle uses its longest edge (ties: lowest local index).
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        refinement_edge: Option<Vec<u8>>,
        level: usize,
    ) -> Result<Mesh, MeshError> {
        Self::build(vertices, triangles, boundary, refinement_edge, level)
            .map_err(|v| MeshError::Invalid(describe(&v)))
    }

    fn build(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        refinement_edge: Option<Vec<u8>>,
        level: usize,
    ) -> Result<Mesh, Violation> {
        let topo = build_topology(&vertices, &triangles, &boundary)?;
        let refinement_edge = match refinement_edge {
            Some(r) => {
                if r.len() != triangles.len() {
                    return Err(Violation::BadRefinementEdge { tri: r.len().min(triangles.len()) });
                }
                if let Some(t) = r.iter().position(|&x| x > 2) {
                    return Err(Violation::BadRefinementEdge { tri: t });
                }
                r
            }
            None => longest_edges(&vertices, &triangles),
        };
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            refinement_edge,
            level,
            edges: topo.edges,
            triangle_edges: topo.triangle_edges,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge ids of each triangle, indexed by local edge.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    /// Triangle diameter (longest edge).
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        dist2(a, b).max(dist2(b, c)).max(dist2(c, a)).sqrt()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist2(self.vertices[a], self.vertices[b]).sqrt()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Endpoints of edge `e` ordered as seen from its first triangle
    /// (counterclockwise), so the outward normal of a boundary edge points
    /// to the right of the returned direction.
    pub fn oriented_edge(&self, e: usize) -> [usize; 2] {
        let edge = &self.edges[e];
        let t = &self.triangles[edge.triangles[0]];
        let (a, b) = local_edge(t, edge.local[0] as usize);
        [a, b]
    }

    /// Unit normal of `e` pointing out of its first triangle.
    pub fn edge_normal(&self, e: usize) -> Point {
        let [a, b] = self.oriented_edge(e);
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let l = (dx * dx + dy * dy).sqrt();
        [dy / l, -dx / l]
    }

    pub fn total_area(&self) -> f64 {
        // Kahan-free pairwise-ish sum is enough at these sizes.
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Minimum interior angle over all triangles, in degrees.
    pub fn min_angle(&self) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.corners(t);
            for i in 0..3 {
                let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cross = u[0] * v[1] - u[1] * v[0];
                let dot = u[0] * v[0] + u[1] * v[1];
                best = best.min(cross.abs().atan2(dot).to_degrees());
            }
        }
        best
    }

    /// Structured mesh of the unit square with `n` cells per side, each cell
    /// split along its (0,0)-(1,1) diagonal.
    pub fn unit_square(n: usize, layout: MarkerLayout) -> Result<Mesh, MeshError> {
        if n == 0 {
            return Err(MeshError::Invalid("unit square needs n >= 1".into()));
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                // exact 0 and 1 on the sides
                let x = if i == n { 1.0 } else { i as f64 * h };
                let y = if j == n { 1.0 } else { j as f64 * h };
                vertices.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut boundary = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary.push(BoundaryEdge { vertices: [idx(i, 0), idx(i + 1, 0)], kind: layout.bottom });
        }
        for j in 0..n {
            boundary.push(BoundaryEdge { vertices: [idx(n, j), idx(n, j + 1)], kind: layout.right });
        }
        for i in (0..n).rev() {
            boundary.push(BoundaryEdge { vertices: [idx(i + 1, n), idx(i, n)], kind: layout.top });
        }
        for j in (0..n).rev() {
            boundary.push(BoundaryEdge { vertices: [idx(0, j + 1), idx(0, j)], kind: layout.left });
        }
        Mesh::new(vertices, triangles, boundary, None, 0)
    }

    /// Newest-vertex bisection: every marked triangle is bisected once across
    /// its refinement edge, then triangles with hanging nodes are bisected
    /// until the mesh is conforming again. Children inherit boundary markers.
    pub fn refine(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        if marked.is_empty() {
            return Ok(self.clone());
        }
        let mut flagged = vec![false; self.n_triangles()];
        for &t in marked {
            if t >= flagged.len() {
                return Err(MeshError::Invalid(format!(
                    "marked triangle {t} out of range ({} triangles)",
                    flagged.len()
                )));
            }
            flagged[t] = true;
        }

        let mut vertices = self.vertices.clone();
        let mut split: HashMap<(usize, usize), usize> = HashMap::new();
        let mut current: Vec<([usize; 3], u8, bool)> = self
            .triangles
            .iter()
            .zip(&self.refinement_edge)
            .zip(flagged)
            .map(|((t, &r), f)| (*t, r, f))
            .collect();

        loop {
            let mut next = Vec::with_capacity(current.len() + current.len() / 2);
            let mut changed = false;
            for &(t, r, flag) in &current {
                let hanging = flag
                    || (0..3).any(|i| {
                        let (a, b) = local_edge(&t, i);
                        split.contains_key(&key(a, b))
                    });
                if !hanging {
                    next.push((t, r, false));
                    continue;
                }
                changed = true;
                let r = r as usize;
                let (a, b, c) = (t[r], t[(r + 1) % 3], t[(r + 2) % 3]);
                let m = *split.entry(key(b, c)).or_insert_with(|| {
                    let (p, q) = (vertices[b], vertices[c]);
                    vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    vertices.len() - 1
                });
                next.push(([m, a, b], 0, false));
                next.push(([m, c, a], 0, false));
            }
            current = next;
            if !changed {
                break;
            }
        }

        let mut boundary = Vec::with_capacity(self.boundary.len() * 2);
        for be in &self.boundary {
            split_boundary(be.vertices[0], be.vertices[1], be.kind, &split, &mut boundary);
        }
        let (triangles, refinement): (Vec<_>, Vec<_>) = current.into_iter().map(|(t, r, _)| (t, r)).unzip();
        Mesh::new(vertices, triangles, boundary, Some(refinement), self.level + 1)
    }

    /// Two rounds of bisection of every triangle: each triangle is replaced
    /// by four children of half its diameter.
    pub fn refine_uniform(&self) -> Result<Mesh, MeshError> {
        let all: Vec<usize> = (0..self.n_triangles()).collect();
        let once = self.refine(&all)?;
        let all: Vec<usize> = (0..once.n_triangles()).collect();
        let mut twice = once.refine(&all)?;
        twice.level = self.level + 1;
        Ok(twice)
    }

    /// Serializes to the ASCII `$nodes` / `$triangles` / `$boundary` format.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.vertices.len() + self.triangles.len()));
        writeln!(s, "$nodes {}", self.vertices.len()).unwrap();
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(s, "{} {:?} {:?}", i, p[0], p[1]).unwrap();
        }
        writeln!(s, "$triangles {}", self.triangles.len()).unwrap();
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(s, "{} {} {} {}", i, t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "$boundary {}", self.boundary.len()).unwrap();
        for (i, b) in self.boundary.iter().enumerate() {
            writeln!(s, "{} {} {} {}", i, b.vertices[0], b.vertices[1], b.kind.code()).unwrap();
        }
        s
    }
}

fn split_boundary(
    a: usize,
    b: usize,
    kind: BoundaryKind,
    split: &HashMap<(usize, usize), usize>,
    out: &mut Vec<BoundaryEdge>,
) {
    match split.get(&key(a, b)) {
        Some(&m) => {
            split_boundary(a, m, kind, split, out);
            split_boundary(m, b, kind, split, out);
        }
        None => out.push(BoundaryEdge { vertices: [a, b], kind }),
    }
}

fn describe(v: &Violation) -> String {
    match v {
        Violation::BadVertex { tri, vertex } => format!("triangle {tri} references missing vertex {vertex}"),
        Violation::Orientation { tri, area } => {
            format!("triangle {tri} has non-positive signed area {area:e} (clockwise or degenerate)")
        }
        Violation::Overshared { tri, a, b } => {
            format!("edge ({a}, {b}) of triangle {tri} is shared by more than two triangles")
        }
        Violation::Overlap { tri, a, b } => {
            format!("triangle {tri} overlaps a neighbour across edge ({a}, {b})")
        }
        Violation::Unmarked { tri, a, b } => {
            format!("boundary edge ({a}, {b}) of triangle {tri} carries no marker")
        }
        Violation::MarkerNotBoundary { item, a, b } => {
            format!("boundary entry {item}: ({a}, {b}) is not a boundary edge of the mesh")
        }
        Violation::DuplicateMarker { item, a, b } => {
            format!("boundary entry {item}: edge ({a}, {b}) is marked twice")
        }
        Violation::BadRefinementEdge { tri } => format!("invalid refinement edge for triangle {tri}"),
    }
}

struct Cursor<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Cursor<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.lines.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn header(&mut self, name: &str, last_line: usize) -> Result<(usize, usize), MeshError> {
        let (line, text) = self.next().ok_or_else(|| MeshError::Parse {
            line: last_line,
            msg: format!("missing section ${name}"),
        })?;
        let mut it = text.split_whitespace();
        let tag = it.next().unwrap_or("");
        if tag != format!("${name}") {
            return Err(MeshError::Parse { line, msg: format!("expected ${name}, found {tag:?}") });
        }
        let count = it
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| MeshError::Parse { line, msg: format!("${name} needs an entry count") })?;
        Ok((line, count))
    }
}

fn parse_fields<'a>(line: usize, text: &'a str, n: usize, what: &str) -> Result<Vec<&'a str>, MeshError> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != n {
        return Err(MeshError::Parse {
            line,
            msg: format!("{what} line needs {n} fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, MeshError> {
    s.parse::<T>().map_err(|_| MeshError::Parse { line, msg: format!("cannot parse {what} {s:?}") })
}

/// Parses the ASCII mesh format. Node ids must be 0-based and strictly
/// increasing; triangles and boundary entries reference node ids.
pub fn load_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut cur = Cursor { lines: text.lines().enumerate().peekable() };

    let (mut last, n_nodes) = cur.header("nodes", 1)?;
    let mut id_to_index: HashMap<usize, usize> = HashMap::with_capacity(n_nodes);
    let mut vertices = Vec::with_capacity(n_nodes);
    let mut prev: Option<usize> = None;
    for _ in 0..n_nodes {
        let (line, t) = cur.next().ok_or(MeshError::Parse { line: last, msg: "truncated $nodes".into() })?;
        last = line;
        let f = parse_fields(line, t, 3, "node")?;
        let id: usize = parse_num(line, f[0], "node id")?;
        if prev.is_some_and(|p| id <= p) {
            return Err(MeshError::Parse { line, msg: format!("node id {id} is not strictly increasing") });
        }
        prev = Some(id);
        let x: f64 = parse_num(line, f[1], "coordinate")?;
        let y: f64 = parse_num(line, f[2], "coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(MeshError::Parse { line, msg: "non-finite coordinate".into() });
        }
        id_to_index.insert(id, vertices.len());
        vertices.push([x, y]);
    }
    let node = |line: usize, s: &str| -> Result<usize, MeshError> {
        let id: usize = parse_num(line, s, "node reference")?;
        id_to_index
            .get(&id)
            .copied()
            .ok_or(MeshError::Parse { line, msg: format!("unknown node id {id}") })
    };

    let (l, n_tri) = cur.header("triangles", last)?;
    last = l;
    let mut triangles = Vec::with_capacity(n_tri);
    let mut tri_lines = Vec::with_capacity(n_tri);
    let mut prev: Option<usize> = None;
    for _ in 0..n_tri {
        let (line, t) = cur.next().ok_or(MeshError::Parse { line: last, msg: "truncated $triangles".into() })?;
        last = line;
        let f = parse_fields(line, t, 4, "triangle")?;
        let id: usize = parse_num(line, f[0], "triangle id")?;
        if prev.is_some_and(|p| id <= p) {
            return Err(MeshError::Parse { line, msg: format!("triangle id {id} is not strictly increasing") });
        }
        prev = Some(id);
        triangles.push([node(line, f[1])?, node(line, f[2])?, node(line, f[3])?]);
        tri_lines.push((line, id));
    }

    let (l, n_bnd) = cur.header("boundary", last)?;
    last = l;
    let mut boundary = Vec::with_capacity(n_bnd);
    let mut bnd_lines = Vec::with_capacity(n_bnd);
    let mut prev: Option<usize> = None;
    for _ in 0..n_bnd {
        let (line, t) = cur.next().ok_or(MeshError::Parse { line: last, msg: "truncated $boundary".into() })?;
        last = line;
        let f = parse_fields(line, t, 4, "boundary")?;
        let id: usize = parse_num(line, f[0], "boundary id")?;
        if prev.is_some_and(|p| id <= p) {
            return Err(MeshError::Parse { line, msg: format!("boundary id {id} is not strictly increasing") });
        }
        prev = Some(id);
        let kind = BoundaryKind::from_code(f[3])
            .ok_or(MeshError::Parse { line, msg: format!("unknown boundary marker {:?}", f[3]) })?;
        boundary.push(BoundaryEdge { vertices: [node(line, f[1])?, node(line, f[2])?], kind });
        bnd_lines.push(line);
    }
    if let Some((line, _)) = cur.next() {
        return Err(MeshError::Parse { line, msg: "unexpected content after $boundary section".into() });
    }

    Mesh::build(vertices, triangles, boundary, None, 0).map_err(|v| match v {
        Violation::Orientation { tri, area } => MeshError::Orientation {
            line: tri_lines[tri].0,
            id: tri_lines[tri].1,
            area,
        },
        Violation::Unmarked { tri, a, b } => MeshError::UnmarkedBoundary { line: tri_lines[tri].0, a, b },
        Violation::BadVertex { tri, .. }
        | Violation::Overshared { tri, .. }
        | Violation::Overlap { tri, .. }
        | Violation::BadRefinementEdge { tri } => MeshError::NonConforming {
            line: tri_lines[tri].0,
            msg: describe(&v),
        },
        Violation::MarkerNotBoundary { item, .. } | Violation::DuplicateMarker { item, .. } => {
            MeshError::NonConforming { line: bnd_lines[item], msg: describe(&v) }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "\
$nodes 4
0 0 0
1 1 0
2 1 1
3 0 1
$triangles 2
0 0 1 2
1 0 2 3
$boundary 4
0 0 1 C
1 1 2 N
2 2 3 D
3 3 0 N
";

    #[test]
    fn loads_two_triangle_square() {
        let m = load_mesh(SQUARE).unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.edges().iter().filter(|e| e.kind.is_some()).count(), 4);
        // the diagonal is the longest edge in both triangles
        for (t, &r) in m.triangles().iter().zip(m.refinement_edges()) {
            let (a, b) = local_edge(t, r as usize);
            assert_eq!(key(a, b), (0, 2));
        }
    }

    #[test]
    fn clockwise_triangle_is_reported_with_line() {
        let text = SQUARE.replace("0 0 1 2", "0 0 2 1");
        match load_mesh(&text) {
            Err(MeshError::Orientation { line, id, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(id, 0);
            }
            other => panic!("expected orientation error, got {other:?}"),
        }
    }

    #[test]
    fn unmarked_boundary_edge_is_rejected() {
        let text = SQUARE.replace("$boundary 4", "$boundary 3").replace("3 3 0 N\n", "");
        assert!(matches!(load_mesh(&text), Err(MeshError::UnmarkedBoundary { a: 0, b: 3, .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = SQUARE.replace("1 1 0\n", "1 1 zero\n");
        assert!(matches!(load_mesh(&text), Err(MeshError::Parse { line: 3, .. })));
        let text = SQUARE.replace("1 1 2 N", "1 1 2 X");
        assert!(matches!(load_mesh(&text), Err(MeshError::Parse { line: 11, .. })));
    }

    #[test]
    fn structured_grid_file_counts() {
        let m = Mesh::unit_square(2, MarkerLayout::clamped_top_contact_bottom()).unwrap();
        let back = load_mesh(&m.to_text()).unwrap();
        assert_eq!(back.n_vertices(), 9);
        assert_eq!(back.n_triangles(), 8);
        assert_eq!(back.boundary().len(), 8);
    }

    #[test]
    fn unit_square_counts_and_markers() {
        assert!(Mesh::unit_square(0, MarkerLayout::clamped_top_contact_bottom()).is_err());
        let m = Mesh::unit_square(1, MarkerLayout::clamped_top_contact_bottom()).unwrap();
        assert_eq!(m.n_triangles(), 2);
        let m = Mesh::unit_square(4, MarkerLayout::clamped_top_contact_bottom()).unwrap();
        assert_eq!((m.n_triangles(), m.n_vertices()), (32, 25));

        let m = Mesh::unit_square(3, MarkerLayout::clamped_left_contact_right()).unwrap();
        for e in 0..m.n_edges() {
            let Some(kind) = m.edges()[e].kind else { continue };
            let [x, y] = m.edge_midpoint(e);
            let expected = if x == 0.0 {
                BoundaryKind::Dirichlet
            } else if x == 1.0 {
                BoundaryKind::Contact
            } else {
                assert!(y == 0.0 || y == 1.0);
                BoundaryKind::Neumann
            };
            assert_eq!(kind, expected);
        }
    }

    #[test]
    fn outward_normals_point_outside() {
        let m = Mesh::unit_square(2, MarkerLayout::clamped_top_contact_bottom()).unwrap();
        for e in 0..m.n_edges() {
            if !m.edges()[e].is_boundary() {
                continue;
            }
            let n = m.edge_normal(e);
            let c = m.edge_midpoint(e);
            let probe = [c[0] + 0.1 * n[0], c[1] + 0.1 * n[1]];
            assert!(probe[0] < 0.0 || probe[0] > 1.0 || probe[1] < 0.0 || probe[1] > 1.0);
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = load_mesh(SQUARE).unwrap();
        let r = m.refine(&[]).unwrap();
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.level(), m.level());
    }

    #[test]
    fn single_mark_bisects_neighbour_by_closure() {
        let m = load_mesh(SQUARE).unwrap();
        let r = m.refine(&[0]).unwrap();
        assert_eq!(r.n_triangles(), 4);
        assert_eq!(r.n_vertices(), 5);
        assert_eq!(r.vertices()[4], [0.5, 0.5]);
        assert_eq!(r.boundary().len(), 4);
    }

    #[test]
    fn boundary_markers_are_inherited() {
        let m = load_mesh(SQUARE).unwrap();
        let r = m.refine_uniform().unwrap().refine_uniform().unwrap();
        for e in r.edges().iter().filter(|e| e.is_boundary()) {
            let [a, b] = e.vertices;
            let (p, q) = (r.vertices()[a], r.vertices()[b]);
            let expected = if p[1] == 0.0 && q[1] == 0.0 {
                BoundaryKind::Contact
            } else if p[1] == 1.0 && q[1] == 1.0 {
                BoundaryKind::Dirichlet
            } else {
                BoundaryKind::Neumann
            };
            assert_eq!(e.kind, Some(expected));
        }
    }

    #[test]
    fn uniform_refinement_keeps_similarity_classes() {
        let mut m = load_mesh(SQUARE).unwrap();
        assert!((m.min_angle() - 45.0).abs() < 1e-12);
        for _ in 0..3 {
            m = m.refine_uniform().unwrap();
        }
        assert_eq!(m.n_triangles(), 128);
        assert!((m.min_angle() - 45.0).abs() < 1e-9);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilateral_min_angle() {
        let h = 3f64.sqrt() / 2.0;
        let m = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, h]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { vertices: [0, 1], kind: BoundaryKind::Dirichlet },
                BoundaryEdge { vertices: [1, 2], kind: BoundaryKind::Neumann },
                BoundaryEdge { vertices: [2, 0], kind: BoundaryKind::Neumann },
            ],
            None,
            0,
        )
        .unwrap();
        assert!((m.min_angle() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_mark_is_rejected() {
        let m = load_mesh(SQUARE).unwrap();
        assert!(m.refine(&[7]).is_err());
    }
}
