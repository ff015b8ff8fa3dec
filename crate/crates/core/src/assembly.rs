//! Linear elasticity stiffness and load assembly, and Dirichlet elimination.

use crate::error::{Error, Result};
use crate::fespace::{edge_shape_values, shape_values, FeSpace, NodeClass};
use crate::mesh::{BoundaryKind, Point};
use crate::par::{map_indexed, Execution};
use crate::quadrature::{gauss3, triangle_degree4};
use crate::sparse::{CsrMatrix, Triplets};

pub type Tensor = [[f64; 2]; 2];

/// Isotropic Lamé parameters: `sigma = chi tr(eps) I + 2 mu eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub mu: f64,
    pub chi: f64,
}

impl Material {
    pub fn new(mu: f64, chi: f64) -> Result<Material> {
        if !(mu.is_finite() && chi.is_finite() && mu > 0.0 && chi > 0.0) {
            return Err(Error::InvalidInput(format!("Lamé parameters must be positive (mu={mu}, chi={chi})")));
        }
        Ok(Material { mu, chi })
    }

    /// From Young's modulus and Poisson ratio, `0 < nu < 1/2`.
    pub fn from_young_poisson(young: f64, nu: f64) -> Result<Material> {
        if young.is_nan() || young <= 0.0 {
            return Err(Error::InvalidInput(format!("Young's modulus must be positive, got {young}")));
        }
        if nu.is_nan() || nu >= 0.5 {
            return Err(Error::InvalidInput(format!("Poisson ratio {nu} is at or beyond the incompressible limit")));
        }
        let mu = young / (2.0 * (1.0 + nu));
        let chi = young * nu / ((1.0 - 2.0 * nu) * (1.0 + nu));
        Material::new(mu, chi)
    }

    pub fn stress(&self, eps: &Tensor) -> Tensor {
        let tr = eps[0][0] + eps[1][1];
        [
            [self.chi * tr + 2.0 * self.mu * eps[0][0], 2.0 * self.mu * eps[0][1]],
            [2.0 * self.mu * eps[1][0], self.chi * tr + 2.0 * self.mu * eps[1][1]],
        ]
    }

    /// Stress of a displacement gradient `g[i][j] = d u_i / d x_j`.
    pub fn stress_of_gradient(&self, g: &Tensor) -> Tensor {
        self.stress(&strain(g))
    }
}

/// Symmetric part of a displacement gradient.
pub fn strain(g: &Tensor) -> Tensor {
    let off = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], off], [off, g[1][1]]]
}

pub fn double_dot(a: &Tensor, b: &Tensor) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// 12x12 element stiffness, local dof `2 * k + c` for local node `k`.
pub fn element_stiffness(space: &FeSpace, t: usize, mat: &Material) -> [[f64; 12]; 12] {
    let geo = space.geometry(t);
    let rule = triangle_degree4();
    let mut ke = [[0.0; 12]; 12];
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let dphi = geo.shape_gradients(*b);
        let wa = w * geo.area;
        for a in 0..6 {
            for c in 0..6 {
                let (ga, gc) = (dphi[a], dphi[c]);
                let dot = ga[0] * gc[0] + ga[1] * gc[1];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { dot } else { 0.0 };
                        let v = mat.chi * ga[i] * gc[j] + mat.mu * (delta + ga[j] * gc[i]);
                        ke[2 * a + i][2 * c + j] += wa * v;
                    }
                }
            }
        }
    }
    ke
}

/// Global stiffness over all vector dofs (constrained ones included).
pub fn assemble_stiffness(space: &FeSpace, mat: &Material, exec: Execution) -> CsrMatrix {
    let nt = space.mesh().n_triangles();
    let blocks = map_indexed(exec, nt, |t| element_stiffness(space, t, mat));
    let n = space.n_dofs();
    let mut trip = Triplets::with_capacity(n, n, 144 * nt);
    for (t, ke) in blocks.iter().enumerate() {
        let nodes = space.cell_nodes(t);
        for a in 0..12 {
            let ga = 2 * nodes[a / 2] + a % 2;
            for c in 0..12 {
                trip.push(ga, 2 * nodes[c / 2] + c % 2, ke[a][c]);
            }
        }
    }
    trip.to_csr()
}

/// Load vector `L(v) = int f.v + int_{Neumann} g.v` over all vector dofs.
/// The traction receives the point and the outward unit normal.
pub fn assemble_load<F, G>(space: &FeSpace, f: F, g: G, exec: Execution) -> Vec<f64>
where
    F: Fn(Point) -> [f64; 2] + Sync,
    G: Fn(Point, Point) -> [f64; 2] + Sync,
{
    let rule = triangle_degree4();
    let mesh = space.mesh();
    let blocks = map_indexed(exec, mesh.n_triangles(), |t| {
        let geo = space.geometry(t);
        let mut fe = [0.0; 12];
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let fx = f(geo.point(*b));
            let phi = shape_values(*b);
            for k in 0..6 {
                fe[2 * k] += w * geo.area * fx[0] * phi[k];
                fe[2 * k + 1] += w * geo.area * fx[1] * phi[k];
            }
        }
        fe
    });
    let mut out = vec![0.0; space.n_dofs()];
    for (t, fe) in blocks.iter().enumerate() {
        for (k, &p) in space.cell_nodes(t).iter().enumerate() {
            out[2 * p] += fe[2 * k];
            out[2 * p + 1] += fe[2 * k + 1];
        }
    }
    let line = gauss3();
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.kind != Some(BoundaryKind::Neumann) {
            continue;
        }
        let nodes = space.edge_nodes(e);
        let [a, b] = mesh.oriented_edge(e);
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = mesh.edge_length(e);
        let n = mesh.edge_normal(e);
        for (t, w) in line.points.iter().zip(&line.weights) {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let gx = g(x, n);
            let phi = edge_shape_values(*t);
            for k in 0..3 {
                out[2 * nodes[k]] += w * len * gx[0] * phi[k];
                out[2 * nodes[k] + 1] += w * len * gx[1] * phi[k];
            }
        }
    }
    out
}

/// System restricted to the free dofs, with the Dirichlet lifting moved to
/// the right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// Stiffness on free dofs.
    pub k: CsrMatrix,
    /// Load on free dofs, `F_free - K_{free,D} u_D`.
    pub f: Vec<f64>,
    /// Full dof vector holding the Dirichlet values (zero elsewhere).
    pub lifting: Vec<f64>,
    /// Full dof index of each free dof.
    pub free_dofs: Vec<usize>,
}

impl LinearSystem {
    /// Full dof vector from free-dof values.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut u = self.lifting.clone();
        for (k, &d) in self.free_dofs.iter().enumerate() {
            u[d] = free[k];
        }
        u
    }

    /// Free-dof part of a full dof vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

/// Eliminates the Dirichlet dofs with prescribed nodal data.
pub fn constrain_system<D>(k: &CsrMatrix, f: &[f64], space: &FeSpace, dirichlet: D) -> Result<LinearSystem>
where
    D: Fn(Point) -> [f64; 2],
{
    let n = space.n_dofs();
    if k.n_rows() != n || f.len() != n {
        return Err(Error::InvalidInput("system size does not match the space".into()));
    }
    let mut lifting = vec![0.0; n];
    for (p, x) in space.nodes().iter().enumerate() {
        if space.node_class(p) == NodeClass::Dirichlet {
            let v = dirichlet(*x);
            lifting[2 * p] = v[0];
            lifting[2 * p + 1] = v[1];
        }
    }
    let free_dofs = space.free_dofs().to_vec();
    let kl = k.mul_vec(&lifting);
    let rhs = free_dofs.iter().map(|&d| f[d] - kl[d]).collect();
    Ok(LinearSystem { k: k.principal_submatrix(&free_dofs)?, f: rhs, lifting, free_dofs })
}

/// Discrete energy `1/2 u^T K u - F^T u` over all dofs.
pub fn energy(k: &CsrMatrix, f: &[f64], u: &[f64]) -> f64 {
    0.5 * k.quad_form(u) - f.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::solve_linear;
    use crate::mesh::{MarkerLayout, Mesh};

    fn unit(n: usize) -> FeSpace {
        FeSpace::new(Mesh::unit_square(n, MarkerLayout::clamped_top_contact_bottom()).unwrap()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lame_parameters() {
        let m = Material::from_young_poisson(500.0, 0.3).unwrap();
        assert!(close(m.mu, 192.307_692_307_692_3, 1e-9));
        assert!(close(m.chi, 288.461_538_461_538_5, 1e-9));
        let m = Material::from_young_poisson(2.6, 0.3).unwrap();
        assert!(close(m.mu, 1.0, 1e-15));
        assert!(Material::from_young_poisson(2.0, 0.0).is_err());
        assert!(Material::from_young_poisson(1.0, 0.5).is_err());
        assert!(Material::new(0.0, 1.0).is_err());
    }

    #[test]
    fn stress_law() {
        let m = Material::new(1.0, 1.0).unwrap();
        assert_eq!(m.stress(&[[1.0, 0.0], [0.0, 1.0]]), [[4.0, 0.0], [0.0, 4.0]]);
        assert_eq!(m.stress(&[[0.0; 2]; 2]), [[0.0; 2]; 2]);
        assert_eq!(m.stress(&[[1.0, 0.0], [0.0, 0.0]]), [[3.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn stiffness_energies_of_simple_fields() {
        let s = unit(3);
        let m = Material::new(1.0, 1.0).unwrap();
        let k = assemble_stiffness(&s, &m, Execution::Sequential);
        assert!(k.asymmetry() <= 1e-12 * k.max_abs());
        let stretch = s.interpolate(|x| [x[0], 0.0]);
        assert!(close(k.quad_form(&stretch), 3.0, 1e-12));
        let rot = s.interpolate(|x| [-x[1], x[0]]);
        assert!(k.quad_form(&rot).abs() < 1e-12);
        let par = assemble_stiffness(&s, &m, Execution::Parallel);
        assert_eq!(par, k);
    }

    #[test]
    fn load_partition_of_unity() {
        let s = unit(2);
        let f = assemble_load(&s, |_| [1.0, 0.0], |_, _| [0.0, 0.0], Execution::Sequential);
        let sx: f64 = f.iter().step_by(2).sum();
        let sy: f64 = f.iter().skip(1).step_by(2).sum();
        assert!(close(sx, 1.0, 1e-14) && sy.abs() < 1e-14);
        let zero = assemble_load(&s, |_| [0.0, 0.0], |_, _| [0.0, 0.0], Execution::Sequential);
        assert!(zero.iter().all(|&v| v == 0.0));
        // traction only on the right side (x = 1), which has length 1
        let g = assemble_load(
            &s,
            |_| [0.0, 0.0],
            |x, _| if x[0] == 1.0 { [1.0, 0.0] } else { [0.0, 0.0] },
            Execution::Sequential,
        );
        assert!(close(g.iter().step_by(2).sum::<f64>(), 1.0, 1e-14));
    }

    #[test]
    fn dirichlet_lifting_and_zero_solution() {
        let s = FeSpace::new(Mesh::unit_square(2, MarkerLayout::clamped_left_contact_right()).unwrap()).unwrap();
        let m = Material::new(1.0, 1.0).unwrap();
        let k = assemble_stiffness(&s, &m, Execution::Sequential);
        let f = vec![0.0; s.n_dofs()];
        let sys = constrain_system(&k, &f, &s, |_| [0.1, 0.0]).unwrap();
        for (p, x) in s.nodes().iter().enumerate() {
            let expect = if x[0] == 0.0 { 0.1 } else { 0.0 };
            assert_eq!(sys.lifting[2 * p], expect);
            assert_eq!(sys.lifting[2 * p + 1], 0.0);
        }
        let zero = constrain_system(&k, &f, &s, |_| [0.0, 0.0]).unwrap();
        assert!(zero.f.iter().all(|&v| v == 0.0));
        let u = solve_linear(&zero.k, &zero.f).unwrap();
        assert!(u.iter().all(|&v| v.abs() < 1e-14));
    }
}
