//! Triangulations of the unit square.
//!
//! Three families are supported: the structured Friedrichs–Keller lattice,
//! a shifted lattice with alternating diagonals (non-Delaunay), and arbitrary
//! meshes read from a plain-text file and refined uniformly.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Distance below which a node counts as lying on the boundary of the unit square.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn on_unit_square_boundary(&self) -> bool {
        self.x.abs() < BOUNDARY_TOL
            || (1.0 - self.x).abs() < BOUNDARY_TOL
            || self.y.abs() < BOUNDARY_TOL
            || (1.0 - self.y).abs() < BOUNDARY_TOL
    }

    fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// An undirected mesh edge with its length and unit tangent (pointing from
/// the lower to the higher node index).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub endpoints: (usize, usize),
    pub length: f64,
    pub tangent: [f64; 2],
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle}: node index {index} out of range (mesh has {nodes} nodes)")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        nodes: usize,
    },
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("node {node} has non-finite coordinates")]
    NonFinite { node: usize },
    #[error("failed to read mesh file: {0}")]
    Io(#[from] std::io::Error),
}

/// A conforming P1 triangulation of the unit square.
///
/// Triangles are stored counterclockwise. `h` is the mesh width of the
/// family: the lattice spacing for the structured grids and the longest
/// edge for meshes read from file. It halves under uniform refinement.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    level: u32,
    h: f64,
}

fn signed_area(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl TriMesh {
    /// Builds a mesh from raw data, orienting every triangle counterclockwise.
    pub fn new(
        nodes: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        level: u32,
        h: f64,
    ) -> Result<Self, MeshError> {
        for (k, p) in nodes.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(MeshError::NonFinite { node: k });
            }
        }
        let mut triangles = triangles;
        for (k, tri) in triangles.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nodes.len()) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: k,
                    index: bad,
                    nodes: nodes.len(),
                });
            }
            let area = signed_area(&nodes[tri[0]], &nodes[tri[1]], &nodes[tri[2]]);
            if area.abs() <= f64::EPSILON * 1e-2 || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]
            {
                return Err(MeshError::Degenerate { triangle: k, area });
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let boundary = nodes.iter().map(Point2::on_unit_square_boundary).collect();
        Ok(Self {
            nodes,
            triangles,
            boundary,
            level,
            h,
        })
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Indices of the nodes on the boundary of the unit square, ascending.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn vertices(&self, triangle: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[triangle];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, triangle: usize) -> f64 {
        let [a, b, c] = self.vertices(triangle);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.area(k)).sum()
    }

    /// Largest element diameter (longest edge).
    pub fn max_diameter(&self) -> f64 {
        self.edges()
            .iter()
            .map(|e| e.length)
            .fold(0.0, f64::max)
    }

    /// Gradients of the three barycentric basis functions on `triangle`.
    pub fn basis_gradients(&self, triangle: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.vertices(triangle);
        let two_area = 2.0 * signed_area(&a, &b, &c);
        [
            [(b.y - c.y) / two_area, (c.x - b.x) / two_area],
            [(c.y - a.y) / two_area, (a.x - c.x) / two_area],
            [(a.y - b.y) / two_area, (b.x - a.x) / two_area],
        ]
    }

    /// Friedrichs–Keller lattice with `2^(level+1)` cells per side; every
    /// square is cut by its south-west to north-east diagonal.
    pub fn friedrichs_keller(level: u32) -> Self {
        let cells = 1usize << (level + 1);
        Self::lattice(level, cells, |_| Diagonal::Rising, 0.0)
    }

    /// Grid with alternating diagonals and interior nodes shifted right by a
    /// tenth of the lattice spacing.
    ///
    /// Starting from the Friedrichs–Keller lattice of the same level, the
    /// diagonals of every second cell row (rows 1, 3, 5, ... counted from 0 at
    /// the bottom) are flipped. The shift then produces non-Delaunay pairs
    /// along the bottom and top cell rows.
    pub fn shifted(level: u32) -> Self {
        let cells = 1usize << (level + 1);
        let h = 1.0 / cells as f64;
        Self::lattice(
            level,
            cells,
            |row| {
                if row % 2 == 1 {
                    Diagonal::Falling
                } else {
                    Diagonal::Rising
                }
            },
            0.1 * h,
        )
    }

    fn lattice(level: u32, cells: usize, diagonal: impl Fn(usize) -> Diagonal, shift: f64) -> Self {
        let h = 1.0 / cells as f64;
        let side = cells + 1;
        let mut nodes = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                let interior = i > 0 && j > 0 && i < cells && j < cells;
                let x = i as f64 * h + if interior { shift } else { 0.0 };
                nodes.push(Point2::new(x, j as f64 * h));
            }
        }
        let id = |i: usize, j: usize| j * side + i;
        let mut triangles = Vec::with_capacity(2 * cells * cells);
        for j in 0..cells {
            for i in 0..cells {
                let (sw, se, ne, nw) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                match diagonal(j) {
                    Diagonal::Rising => {
                        triangles.push([sw, se, ne]);
                        triangles.push([sw, ne, nw]);
                    }
                    Diagonal::Falling => {
                        triangles.push([sw, se, nw]);
                        triangles.push([se, ne, nw]);
                    }
                }
            }
        }
        Self::new(nodes, triangles, level, h).expect("lattice construction is valid")
    }

    /// Reads a mesh in the plain-text format (see [`TriMesh::parse`]).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the plain-text mesh format:
    ///
    /// ```text
    /// # comment
    /// N_nodes N_triangles
    /// x y          (N_nodes lines)
    /// i j k        (N_triangles lines, 0-based)
    /// ```
    ///
    /// The resulting mesh has level 0 and `h` equal to its longest edge.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_err = |line: usize, message: String| MeshError::Parse { line, message };
        let (line, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing header `N_nodes N_triangles`".into()))?;
        let counts = parse_fields::<usize>(header, 2).map_err(|m| parse_err(line, m))?;
        let (n_nodes, n_tris) = (counts[0], counts[1]);

        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("expected {n_nodes} node lines")))?;
            let xy = parse_fields::<f64>(l, 2).map_err(|m| parse_err(line, m))?;
            nodes.push(Point2::new(xy[0], xy[1]));
        }
        let mut triangles = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let (line, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("expected {n_tris} triangle lines")))?;
            let ijk = parse_fields::<usize>(l, 3).map_err(|m| parse_err(line, m))?;
            triangles.push([ijk[0], ijk[1], ijk[2]]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, "unexpected trailing content".into()));
        }
        let mut mesh = Self::new(nodes, triangles, 0, 0.0)?;
        mesh.h = mesh.max_diameter();
        Ok(mesh)
    }

    /// Serializes the mesh in the format accepted by [`TriMesh::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.nodes.len(), self.triangles.len());
        for p in &self.nodes {
            out.push_str(&format!("{:?} {:?}\n", p.x, p.y));
        }
        for t in &self.triangles {
            out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        out
    }

    /// Red refinement: every triangle is split into four through its edge
    /// midpoints. Midpoint nodes are appended after the existing nodes.
    pub fn refine_uniform(&self) -> Self {
        let mut nodes = self.nodes.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<Point2>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                nodes.push(nodes[a].midpoint(&nodes[b]));
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut nodes);
            let bc = midpoint(b, c, &mut nodes);
            let ca = midpoint(c, a, &mut nodes);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Self::new(nodes, triangles, self.level + 1, 0.5 * self.h)
            .expect("refinement of a valid mesh is valid")
    }

    /// All undirected edges, sorted by endpoint pair.
    pub fn edges(&self) -> Vec<Edge> {
        let mut pairs: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(i, j)| (i.min(j), i.max(j)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
            .into_iter()
            .map(|(i, j)| {
                let (p, q) = (self.nodes[i], self.nodes[j]);
                let length = p.distance(&q);
                Edge {
                    endpoints: (i, j),
                    length,
                    tangent: [(q.x - p.x) / length, (q.y - p.y) / length],
                }
            })
            .collect()
    }

    /// For every interior edge, the sum of the two angles opposite to it.
    /// An edge violates the Delaunay property when this sum exceeds pi.
    pub fn opposite_angle_sums(&self) -> Vec<((usize, usize), f64)> {
        let mut opposite: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
        for t in 0..self.triangles.len() {
            let idx = self.triangles[t];
            let pts = self.vertices(t);
            for k in 0..3 {
                let (i, j) = (idx[(k + 1) % 3], idx[(k + 2) % 3]);
                let (o, p, q) = (pts[k], pts[(k + 1) % 3], pts[(k + 2) % 3]);
                let (u, v) = ([p.x - o.x, p.y - o.y], [q.x - o.x, q.y - o.y]);
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                opposite
                    .entry((i.min(j), i.max(j)))
                    .or_default()
                    .push(cos.clamp(-1.0, 1.0).acos());
            }
        }
        let mut sums: Vec<_> = opposite
            .into_iter()
            .filter(|(_, a)| a.len() == 2)
            .map(|(e, a)| (e, a[0] + a[1]))
            .collect();
        sums.sort_by(|a, b| a.0.cmp(&b.0));
        sums
    }
}

#[derive(Clone, Copy)]
enum Diagonal {
    /// south-west to north-east
    Rising,
    /// south-east to north-west
    Falling,
}

fn parse_fields<T: std::str::FromStr>(line: &str, expected: usize) -> Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(format!("expected {expected} fields, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|f| f.parse::<T>().map_err(|_| format!("cannot parse `{f}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn reference_triangle() -> TriMesh {
        TriMesh::parse("3 1\n0 0\n1 0\n0 1\n0 1 2\n").unwrap()
    }

    #[test]
    fn friedrichs_keller_counts() {
        let m = TriMesh::friedrichs_keller(0);
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.h(), 0.5);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        let m = TriMesh::friedrichs_keller(1);
        assert_eq!(m.num_nodes(), 25);
        assert_eq!(m.num_triangles(), 32);
        assert_eq!(m.boundary_nodes().len(), 16);
    }

    #[test]
    fn shifted_grid_moves_only_interior_nodes() {
        let m = TriMesh::shifted(0);
        let centre = m.nodes()[4];
        assert!((centre.x - 0.55).abs() < 1e-15 && centre.y == 0.5);
        assert_eq!(m.nodes()[3], Point2::new(0.0, 0.5));
        let area: f64 = (0..m.num_triangles()).map(|t| m.area(t)).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!((0..m.num_triangles()).all(|t| m.area(t) > 0.0));
    }

    #[test]
    fn shifted_grid_is_not_delaunay() {
        for level in 1..4 {
            let m = TriMesh::shifted(level);
            let worst = m
                .opposite_angle_sums()
                .iter()
                .map(|(_, s)| *s)
                .fold(0.0, f64::max);
            assert!(worst > std::f64::consts::PI + 1e-3, "level {level}: {worst}");
        }
        // the unshifted lattice is Delaunay (right angles, sums exactly pi)
        let fk = TriMesh::friedrichs_keller(2);
        assert!(fk
            .opposite_angle_sums()
            .iter()
            .all(|(_, s)| *s <= std::f64::consts::PI + 1e-12));
    }

    #[test]
    fn load_reference_and_errors() {
        let m = reference_triangle();
        assert_eq!(m.num_triangles(), 1);
        assert!((m.area(0) - 0.5).abs() < 1e-15);

        let err = TriMesh::parse("3 1\n0 0\n1 0\n0 1\n0 1 7\n").unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");

        let cw = TriMesh::parse("# clockwise\n3 1\n0 0\n0 1\n1 0\n0 1 2\n").unwrap();
        assert!(cw.area(0) > 0.0);

        match TriMesh::parse("3 1\n0 0\n1 zero\n0 1\n0 1 2\n") {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            TriMesh::parse("3 1\n0 0\n1 1\n2 2\n0 1 2\n"),
            Err(MeshError::Degenerate { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let m = TriMesh::shifted(1);
        let back = TriMesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.nodes(), m.nodes());
        assert_eq!(back.triangles(), m.triangles());
    }

    #[test]
    fn refine_reference_triangle() {
        let fine = reference_triangle().refine_uniform();
        assert_eq!(fine.num_triangles(), 4);
        assert_eq!(fine.num_nodes(), 6);
        assert!((fine.total_area() - 0.5).abs() < 1e-15);
        for t in 0..4 {
            assert!((fine.area(t) - 0.125).abs() < 1e-15);
        }
    }

    fn edge_set_by_coordinates(m: &TriMesh) -> BTreeSet<[i64; 4]> {
        let key = |p: Point2| ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
        m.edges()
            .iter()
            .map(|e| {
                let (a, b) = (key(m.nodes()[e.endpoints.0]), key(m.nodes()[e.endpoints.1]));
                let (a, b) = (a.min(b), a.max(b));
                [a.0, a.1, b.0, b.1]
            })
            .collect()
    }

    #[test]
    fn refined_lattice_matches_finer_lattice() {
        let refined = TriMesh::friedrichs_keller(0).refine_uniform();
        let direct = TriMesh::friedrichs_keller(1);
        assert_eq!(refined.level(), 1);
        assert_eq!(refined.h(), direct.h());
        assert_eq!(refined.num_nodes(), direct.num_nodes());
        assert_eq!(edge_set_by_coordinates(&refined), edge_set_by_coordinates(&direct));
        assert_eq!(refined.boundary_nodes().len(), direct.boundary_nodes().len());
    }

    #[test]
    fn refinement_keeps_boundary_conforming() {
        let m = TriMesh::shifted(0).refine_uniform().refine_uniform();
        for i in m.boundary_nodes() {
            assert!(m.nodes()[i].on_unit_square_boundary());
        }
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_enumeration() {
        assert_eq!(reference_triangle().edges().len(), 3);
        let m = TriMesh::friedrichs_keller(0);
        let edges = m.edges();
        // brute force over all node pairs sharing a triangle
        let mut brute = BTreeSet::new();
        for t in m.triangles() {
            for a in 0..3 {
                for b in 0..3 {
                    if t[a] < t[b] {
                        brute.insert((t[a], t[b]));
                    }
                }
            }
        }
        assert_eq!(edges.len(), brute.len());
        assert_eq!(edges.len(), 16);
        // Euler characteristic with the outer face
        assert_eq!(9 - 16 + (8 + 1), 2);
        for e in &edges {
            assert!(e.length > 0.0);
            assert!((e.tangent[0].hypot(e.tangent[1]) - 1.0).abs() < 1e-14);
        }
        let horizontal = edges.iter().find(|e| e.endpoints == (0, 1)).unwrap();
        assert_eq!(horizontal.tangent, [1.0, 0.0]);
    }
}
