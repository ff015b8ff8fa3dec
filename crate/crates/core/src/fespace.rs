//! Continuous piecewise quadratic vector Lagrange space.
//!
//! Scalar nodes are the mesh vertices followed by the edge midpoints (node
//! `n_vertices + e` sits on edge `e`). Vector dof `2 * node + c` carries
//! component `c`. Local node order on a triangle is its three vertices,
//! then the midpoints of local edges 0, 1, 2.

use crate::error::{Error, MeshError, Result};
use crate::mesh::{BoundaryKind, Mesh, Point};

/// Boundary class of a scalar node. Dirichlet wins over contact, contact
/// over Neumann, for nodes on the closure of several boundary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Dirichlet,
    Contact,
    Neumann,
    Interior,
}

/// Constant, axis-aligned outward normal of the contact boundary:
/// `n = sign * e_axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactNormal {
    pub axis: usize,
    pub sign: f64,
}

impl ContactNormal {
    pub fn vector(&self) -> Point {
        let mut n = [0.0; 2];
        n[self.axis] = self.sign;
        n
    }

    /// Unit tangent, the normal rotated by +90 degrees.
    pub fn tangent(&self) -> Point {
        let n = self.vector();
        [-n[1], n[0]]
    }

    /// Normal component of a vector.
    pub fn normal_part(&self, v: [f64; 2]) -> f64 {
        self.sign * v[self.axis]
    }
}

/// Element geometry: area and barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub corners: [Point; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(corners: [Point; 3]) -> Self {
        let [p0, p1, p2] = corners;
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        let mut grad_lambda = [[0.0; 2]; 3];
        for (i, g) in grad_lambda.iter_mut().enumerate() {
            let a = corners[(i + 1) % 3];
            let b = corners[(i + 2) % 3];
            *g = [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a];
        }
        ElementGeometry { corners, area: 0.5 * two_a, grad_lambda }
    }

    /// Physical point of a barycentric coordinate.
    pub fn point(&self, bary: [f64; 3]) -> Point {
        let c = &self.corners;
        [
            bary[0] * c[0][0] + bary[1] * c[1][0] + bary[2] * c[2][0],
            bary[0] * c[0][1] + bary[1] * c[1][1] + bary[2] * c[2][1],
        ]
    }

    /// Gradients of the six P2 shape functions.
    pub fn shape_gradients(&self, bary: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let s = 4.0 * bary[i] - 1.0;
            out[i] = [s * g[i][0], s * g[i][1]];
        }
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            out[3 + k] = [
                4.0 * (bary[i] * g[j][0] + bary[j] * g[i][0]),
                4.0 * (bary[i] * g[j][1] + bary[j] * g[i][1]),
            ];
        }
        out
    }

    /// Constant Hessians of the six P2 shape functions.
    pub fn shape_hessians(&self) -> [[[f64; 2]; 2]; 6] {
        let g = &self.grad_lambda;
        let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
        let mut out = [[[0.0; 2]; 2]; 6];
        for i in 0..3 {
            let o = outer(g[i], g[i]);
            for r in 0..2 {
                for c in 0..2 {
                    out[i][r][c] = 4.0 * o[r][c];
                }
            }
        }
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let (a, b) = (outer(g[i], g[j]), outer(g[j], g[i]));
            for r in 0..2 {
                for c in 0..2 {
                    out[3 + k][r][c] = 4.0 * (a[r][c] + b[r][c]);
                }
            }
        }
        out
    }
}

/// Values of the six P2 shape functions at a barycentric point.
pub fn shape_values(bary: [f64; 3]) -> [f64; 6] {
    let [a, b, c] = bary;
    [
        a * (2.0 * a - 1.0),
        b * (2.0 * b - 1.0),
        c * (2.0 * c - 1.0),
        4.0 * b * c,
        4.0 * c * a,
        4.0 * a * b,
    ]
}

/// Quadratic Lagrange basis on `[0, 1]` with nodes 0, 1/2, 1 (start, middle, end).
pub fn edge_shape_values(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
}

/// P2 vector space on a mesh, with boundary classification.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    nodes: Vec<Point>,
    cell_nodes: Vec<[usize; 6]>,
    class: Vec<NodeClass>,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
    contact_normal: Option<ContactNormal>,
    contact_nodes: Vec<usize>,
    contact_edges: Vec<usize>,
}

impl FeSpace {
    /// Builds the dof maps. Fails if the mesh has no Dirichlet edge or the
    /// contact boundary is not a set of edges sharing one axis-aligned normal.
    pub fn new(mesh: Mesh) -> Result<FeSpace> {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let mut nodes = Vec::with_capacity(nv + ne);
        nodes.extend_from_slice(mesh.vertices());
        nodes.extend((0..ne).map(|e| mesh.edge_midpoint(e)));

        let cell_nodes: Vec<[usize; 6]> = mesh
            .triangles()
            .iter()
            .zip(mesh.triangle_edges())
            .map(|(t, te)| [t[0], t[1], t[2], nv + te[0], nv + te[1], nv + te[2]])
            .collect();

        let rank = |c: NodeClass| match c {
            NodeClass::Dirichlet => 0,
            NodeClass::Contact => 1,
            NodeClass::Neumann => 2,
            NodeClass::Interior => 3,
        };
        let mut class = vec![NodeClass::Interior; nv + ne];
        let mut contact_edges = Vec::new();
        let mut normal: Option<Point> = None;
        let mut has_dirichlet = false;
        for (e, edge) in mesh.edges().iter().enumerate() {
            let Some(kind) = edge.kind else { continue };
            let c = match kind {
                BoundaryKind::Dirichlet => {
                    has_dirichlet = true;
                    NodeClass::Dirichlet
                }
                BoundaryKind::Contact => {
                    contact_edges.push(e);
                    let n = mesh.edge_normal(e);
                    match normal {
                        None => normal = Some(n),
                        Some(m) if (m[0] - n[0]).abs() > 1e-12 || (m[1] - n[1]).abs() > 1e-12 => {
                            return Err(Error::InvalidInput(
                                "contact boundary must be straight (one constant outward normal)".into(),
                            ));
                        }
                        _ => {}
                    }
                    NodeClass::Contact
                }
                BoundaryKind::Neumann => NodeClass::Neumann,
            };
            for p in [edge.vertices[0], edge.vertices[1], nv + e] {
                if rank(c) < rank(class[p]) {
                    class[p] = c;
                }
            }
        }
        if !has_dirichlet {
            return Err(MeshError::NoDirichlet.into());
        }
        let contact_normal = match normal {
            None => None,
            Some(n) => {
                let axis = if n[0].abs() > n[1].abs() { 0 } else { 1 };
                if (n[axis].abs() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput("contact boundary must be axis-aligned".into()));
                }
                Some(ContactNormal { axis, sign: n[axis].signum() })
            }
        };

        let mut free_index = vec![None; 2 * (nv + ne)];
        let mut free_dofs = Vec::with_capacity(2 * (nv + ne));
        for (p, c) in class.iter().enumerate() {
            if *c != NodeClass::Dirichlet {
                for comp in 0..2 {
                    free_index[2 * p + comp] = Some(free_dofs.len());
                    free_dofs.push(2 * p + comp);
                }
            }
        }
        let contact_nodes = (0..nv + ne).filter(|&p| class[p] == NodeClass::Contact).collect();

        Ok(FeSpace {
            mesh,
            nodes,
            cell_nodes,
            class,
            free_index,
            free_dofs,
            contact_normal,
            contact_nodes,
            contact_edges,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Coordinates of every scalar node.
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Total number of vector dofs, constrained ones included.
    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Number of unconstrained vector dofs.
    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Scalar node indices of triangle `t` (3 vertices, then 3 midpoints).
    pub fn cell_nodes(&self, t: usize) -> [usize; 6] {
        self.cell_nodes[t]
    }

    pub fn all_cell_nodes(&self) -> &[[usize; 6]] {
        &self.cell_nodes
    }

    pub fn node_class(&self, p: usize) -> NodeClass {
        self.class[p]
    }

    pub fn node_classes(&self) -> &[NodeClass] {
        &self.class
    }

    /// Position of a vector dof among the free dofs, `None` if Dirichlet.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn contact_normal(&self) -> Option<ContactNormal> {
        self.contact_normal
    }

    /// Scalar nodes of class [`NodeClass::Contact`], ascending.
    pub fn contact_nodes(&self) -> &[usize] {
        &self.contact_nodes
    }

    /// Mesh edges marked as contact boundary.
    pub fn contact_edges(&self) -> &[usize] {
        &self.contact_edges
    }

    /// Vector dof carrying the normal displacement of a contact node.
    pub fn contact_dof(&self, p: usize) -> usize {
        let axis = self.contact_normal.map_or(0, |n| n.axis);
        2 * p + axis
    }

    /// Scalar node on the midpoint of edge `e`.
    pub fn edge_node(&self, e: usize) -> usize {
        self.mesh.n_vertices() + e
    }

    /// The three scalar nodes of edge `e`, ordered start, middle, end along
    /// the edge as oriented by [`Mesh::oriented_edge`].
    pub fn edge_nodes(&self, e: usize) -> [usize; 3] {
        let [a, b] = self.mesh.oriented_edge(e);
        [a, self.edge_node(e), b]
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.corners(t))
    }

    fn check_cell(&self, t: usize) -> Result<()> {
        if t >= self.cell_nodes.len() {
            return Err(Error::OutOfRange { index: t, len: self.cell_nodes.len() });
        }
        Ok(())
    }

    /// Value of the vector field `coeffs` at a barycentric point of triangle `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> Result<[f64; 2]> {
        self.check_cell(t)?;
        let nodes = self.cell_nodes[t];
        let phi = shape_values(bary);
        let mut v = [0.0; 2];
        for (k, &p) in nodes.iter().enumerate() {
            v[0] += phi[k] * coeffs[2 * p];
            v[1] += phi[k] * coeffs[2 * p + 1];
        }
        Ok(v)
    }

    /// Jacobian `g[i][j] = d u_i / d x_j` at a barycentric point of triangle `t`.
    pub fn gradient(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> Result<[[f64; 2]; 2]> {
        self.check_cell(t)?;
        let geo = self.geometry(t);
        Ok(local_gradient(&geo.shape_gradients(bary), &self.cell_nodes[t], coeffs))
    }

    /// Nodal interpolant of a vector field, as a full dof vector.
    pub fn interpolate<F: Fn(Point) -> [f64; 2]>(&self, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        for (p, x) in self.nodes.iter().enumerate() {
            let v = f(*x);
            out[2 * p] = v[0];
            out[2 * p + 1] = v[1];
        }
        out
    }

    /// Obstacle values `g(p)` at the contact nodes, in [`FeSpace::contact_nodes`] order.
    pub fn contact_gap<F: Fn(Point) -> f64>(&self, obstacle: F) -> Vec<f64> {
        self.contact_nodes.iter().map(|&p| obstacle(self.nodes[p])).collect()
    }
}

/// Jacobian of a P2 field from precomputed shape gradients.
pub fn local_gradient(dphi: &[[f64; 2]; 6], nodes: &[usize; 6], coeffs: &[f64]) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for (k, &p) in nodes.iter().enumerate() {
        for i in 0..2 {
            let u = coeffs[2 * p + i];
            g[i][0] += u * dphi[k][0];
            g[i][1] += u * dphi[k][1];
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{load_mesh, MarkerLayout};
    use crate::quadrature::triangle_degree4;

    fn square() -> Mesh {
        load_mesh(
            "$nodes 4\n0 0 0\n1 1 0\n2 1 1\n3 0 1\n$triangles 2\n0 0 1 2\n1 0 2 3\n\
             $boundary 4\n0 0 1 C\n1 1 2 N\n2 2 3 D\n3 3 0 N\n",
        )
        .unwrap()
    }

    #[test]
    fn counts_on_two_triangle_square() {
        let s = FeSpace::new(square()).unwrap();
        assert_eq!(s.n_nodes(), 9);
        assert_eq!(s.n_dofs(), 18);
        assert_eq!(s.n_free(), 12);
        // bottom edge: two corner vertices are shared with Neumann sides
        assert_eq!(s.contact_nodes().len(), 3);
        assert_eq!(s.contact_normal(), Some(ContactNormal { axis: 1, sign: -1.0 }));
    }

    #[test]
    fn no_dirichlet_is_rejected() {
        let m = load_mesh(
            "$nodes 3\n0 0 0\n1 1 0\n2 0 1\n$triangles 1\n0 0 1 2\n$boundary 3\n0 0 1 N\n1 1 2 N\n2 2 0 C\n",
        )
        .unwrap();
        assert!(matches!(FeSpace::new(m), Err(Error::Mesh(MeshError::NoDirichlet))));
    }

    #[test]
    fn dirichlet_takes_priority_at_junctions() {
        let s = FeSpace::new(Mesh::unit_square(2, MarkerLayout::clamped_left_contact_right()).unwrap()).unwrap();
        for (p, x) in s.nodes().iter().enumerate() {
            let expected = if x[0] == 0.0 {
                NodeClass::Dirichlet
            } else if x[0] == 1.0 {
                NodeClass::Contact
            } else if x[1] == 0.0 || x[1] == 1.0 {
                NodeClass::Neumann
            } else {
                NodeClass::Interior
            };
            assert_eq!(s.node_class(p), expected, "node {p} at {x:?}");
        }
    }

    #[test]
    fn partition_of_unity_and_quadratic_reproduction() {
        let s = FeSpace::new(Mesh::unit_square(3, MarkerLayout::clamped_top_contact_bottom()).unwrap()).unwrap();
        let one = s.interpolate(|_| [1.0, 2.0]);
        let quad = s.interpolate(|x| [x[0] * x[0], x[0] * x[1]]);
        let rule = triangle_degree4();
        for t in 0..s.mesh().n_triangles() {
            let geo = s.geometry(t);
            for b in &rule.points {
                let v = s.evaluate(&one, t, *b).unwrap();
                assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 2.0).abs() < 1e-13);
                let x = geo.point(*b);
                let q = s.evaluate(&quad, t, *b).unwrap();
                assert!((q[0] - x[0] * x[0]).abs() < 1e-13);
                assert!((q[1] - x[0] * x[1]).abs() < 1e-13);
                let g = s.gradient(&quad, t, *b).unwrap();
                assert!((g[0][0] - 2.0 * x[0]).abs() < 1e-12 && g[0][1].abs() < 1e-12);
                assert!((g[1][0] - x[1]).abs() < 1e-12 && (g[1][1] - x[0]).abs() < 1e-12);
            }
        }
        assert!(s.evaluate(&one, 999, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn lagrange_property_at_nodes() {
        let s = FeSpace::new(square()).unwrap();
        let m = s.edge_node(0);
        let mut c = vec![0.0; s.n_dofs()];
        c[2 * m + 1] = 1.0;
        let node_bary = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ];
        for t in 0..2 {
            let nodes = s.cell_nodes(t);
            for (k, b) in node_bary.iter().enumerate() {
                let v = s.evaluate(&c, t, *b).unwrap();
                let expect = if nodes[k] == m { 1.0 } else { 0.0 };
                assert_eq!(v[0], 0.0);
                assert!((v[1] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hessians_match_quadratic_field() {
        let s = FeSpace::new(square()).unwrap();
        // u = x^2 - 3xy + 2y^2 has Hessian [[2,-3],[-3,4]]
        let u = s.interpolate(|x| [x[0] * x[0] - 3.0 * x[0] * x[1] + 2.0 * x[1] * x[1], 0.0]);
        for t in 0..2 {
            let h = s.geometry(t).shape_hessians();
            let mut acc = [[0.0; 2]; 2];
            for (k, &p) in s.cell_nodes(t).iter().enumerate() {
                for r in 0..2 {
                    for c in 0..2 {
                        acc[r][c] += u[2 * p] * h[k][r][c];
                    }
                }
            }
            let expect = [[2.0, -3.0], [-3.0, 4.0]];
            for r in 0..2 {
                for c in 0..2 {
                    assert!((acc[r][c] - expect[r][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn obstacle_values_at_contact_nodes() {
        let s = FeSpace::new(Mesh::unit_square(2, MarkerLayout::clamped_left_contact_right()).unwrap()).unwrap();
        let g = s.contact_gap(|x| -0.2 + 0.5 * (x[1] - 0.5).abs());
        for (k, &p) in s.contact_nodes().iter().enumerate() {
            let y = s.nodes()[p][1];
            if y == 0.5 {
                assert!((g[k] + 0.2).abs() < 1e-15);
            }
            if y == 0.0 {
                assert!((g[k] - 0.05).abs() < 1e-15);
            }
        }
        assert!(s.contact_gap(|_| 0.0).iter().all(|&v| v == 0.0));
    }
}
