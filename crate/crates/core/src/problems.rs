//! Built-in benchmark problems and manufactured-solution plumbing.

use std::sync::Arc;

use crate::assembly::{Material, Tensor};
use crate::error::Result;
use crate::mesh::{BoundaryKind, MarkerLayout, Mesh, Point};

/// Value, gradient and Hessian of a vector field at a point.
/// `grad[i][j] = d_j u_i`, `hess[c][a][b] = d_a d_b u_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: [f64; 2],
    pub grad: Tensor,
    pub hess: [Tensor; 2],
}

pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type TractionField = Arc<dyn Fn(Point, Point) -> [f64; 2] + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type JetField = Arc<dyn Fn(Point) -> Jet + Send + Sync>;

/// Body force `-div sigma(u)` of a field given by its jet.
pub fn body_force(mat: &Material, jet: &Jet) -> [f64; 2] {
    let h = &jet.hess;
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let grad_div = h[0][0][i] + h[1][1][i];
        let lap = h[i][0][0] + h[i][1][1];
        *o = -((mat.chi + mat.mu) * grad_div + mat.mu * lap);
    }
    out
}

/// Traction `sigma(u) n`.
pub fn traction_of(mat: &Material, grad: &Tensor, n: Point) -> [f64; 2] {
    let s = mat.stress_of_gradient(grad);
    [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub material: Material,
    pub initial_mesh: Mesh,
    pub volume_force: VectorField,
    /// Neumann traction as a function of point and outward normal.
    pub traction: TractionField,
    pub dirichlet: VectorField,
    /// Obstacle `g` in `u.n <= g` on the contact part.
    pub obstacle: ScalarField,
    pub exact: Option<JetField>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("material", &self.material)
            .field("triangles", &self.initial_mesh.n_triangles())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl Problem {
    /// Problem whose data are generated from a known displacement: body
    /// force `-div sigma(u)`, traction `sigma(u) n`, Dirichlet data `u`.
    pub fn manufactured(name: &str, material: Material, mesh: Mesh, exact: JetField, obstacle: ScalarField) -> Problem {
        let (e1, e2, e3) = (exact.clone(), exact.clone(), exact.clone());
        Problem {
            name: name.to_string(),
            material,
            initial_mesh: mesh,
            volume_force: Arc::new(move |x| body_force(&material, &e1(x))),
            traction: Arc::new(move |x, n| traction_of(&material, &e2(x).grad, n)),
            dirichlet: Arc::new(move |x| e3(x).value),
            obstacle,
            exact: Some(exact),
        }
    }

    /// Unit square clamped on top, in frictionless contact with a flat
    /// foundation at `y = 0`, traction on the sides, `mu = chi = 1`, with
    /// known solution `u = (y^2 (y - 1), (x - 2) y (1 - y) e^y)`.
    pub fn contact_bottom() -> Result<Problem> {
        let mesh = Mesh::unit_square(2, MarkerLayout::clamped_top_contact_bottom())?;
        let mat = Material::new(1.0, 1.0)?;
        Ok(Problem::manufactured("example61", mat, mesh, Arc::new(contact_bottom_jet), Arc::new(|_| 0.0)))
    }

    /// Unit square pushed by `u = (0.1, 0)` on the left against the
    /// obstacle `g(y) = -0.2 + 0.5 |y - 0.5|` on the right, free top and
    /// bottom, no loads, `E = 500`, `nu = 0.3`.
    pub fn obstacle_right() -> Result<Problem> {
        let mesh = Mesh::unit_square(2, MarkerLayout::clamped_left_contact_right())?;
        Ok(Problem {
            name: "example62".to_string(),
            material: Material::from_young_poisson(500.0, 0.3)?,
            initial_mesh: mesh,
            volume_force: Arc::new(|_| [0.0, 0.0]),
            traction: Arc::new(|_, _| [0.0, 0.0]),
            dirichlet: Arc::new(|_| [0.1, 0.0]),
            obstacle: Arc::new(|x| -0.2 + 0.5 * (x[1] - 0.5).abs()),
            exact: None,
        })
    }

    /// Pure displacement-traction problem (no contact) with a vector
    /// quadratic solution, reproduced exactly by quadratic elements.
    pub fn quadratic_patch(n: usize) -> Result<Problem> {
        let layout = MarkerLayout {
            bottom: BoundaryKind::Neumann,
            right: BoundaryKind::Neumann,
            top: BoundaryKind::Dirichlet,
            left: BoundaryKind::Dirichlet,
        };
        let mesh = Mesh::unit_square(n, layout)?;
        let mat = Material::new(1.3, 0.7)?;
        Ok(Problem::manufactured("patch", mat, mesh, Arc::new(quadratic_jet), Arc::new(|_| 0.0)))
    }

    /// Smooth solution that is traction free on the bottom edge and stays
    /// away from the obstacle there, so the contact constraint never binds.
    pub fn smooth_uncontacted(n: usize) -> Result<Problem> {
        let mesh = Mesh::unit_square(n, MarkerLayout::clamped_top_contact_bottom())?;
        let mat = Material::new(1.0, 1.0)?;
        Ok(Problem::manufactured("smooth", mat, mesh, Arc::new(smooth_jet), Arc::new(|_| 0.5)))
    }

    /// Largest violation of the contact conditions by the exact solution at
    /// `samples` points per contact edge of the initial mesh: penetration,
    /// tension, tangential stress and complementarity. `None` without an
    /// exact solution or contact part.
    pub fn contact_consistency(&self, samples: usize) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let mesh = &self.initial_mesh;
        let mut worst: Option<f64> = None;
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.kind != Some(BoundaryKind::Contact) {
                continue;
            }
            let n = mesh.edge_normal(e);
            let [a, b] = mesh.oriented_edge(e);
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            for k in 0..=samples {
                let t = k as f64 / samples.max(1) as f64;
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let jet = exact(x);
                let sn = traction_of(&self.material, &jet.grad, n);
                let normal = sn[0] * n[0] + sn[1] * n[1];
                let tangential = -n[1] * sn[0] + n[0] * sn[1];
                let defect = jet.value[0] * n[0] + jet.value[1] * n[1] - (self.obstacle)(x);
                let v = defect.max(0.0).max(normal.max(0.0)).max(tangential.abs()).max((normal * defect).abs());
                worst = Some(worst.map_or(v, |w: f64| w.max(v)));
            }
        }
        worst
    }
}

fn contact_bottom_jet(x: Point) -> Jet {
    let (xx, y) = (x[0], x[1]);
    let ey = y.exp();
    let q = (y - y * y) * ey;
    let dq = (1.0 - y - y * y) * ey;
    let ddq = -(y * y + 3.0 * y) * ey;
    Jet {
        value: [y * y * (y - 1.0), (xx - 2.0) * q],
        grad: [[0.0, 3.0 * y * y - 2.0 * y], [q, (xx - 2.0) * dq]],
        hess: [[[0.0, 0.0], [0.0, 6.0 * y - 2.0]], [[0.0, dq], [dq, (xx - 2.0) * ddq]]],
    }
}

fn quadratic_jet(x: Point) -> Jet {
    let (a, b) = (x[0], x[1]);
    // u = (0.3 + a - 2b + a^2 - a b + 0.5 b^2, -0.1 + 0.5 a + b + 2 a^2 + a b - b^2)
    Jet {
        value: [
            0.3 + a - 2.0 * b + a * a - a * b + 0.5 * b * b,
            -0.1 + 0.5 * a + b + 2.0 * a * a + a * b - b * b,
        ],
        grad: [[1.0 + 2.0 * a - b, -2.0 - a + b], [0.5 + 4.0 * a + b, 1.0 + a - 2.0 * b]],
        hess: [[[2.0, -1.0], [-1.0, 1.0]], [[4.0, 1.0], [1.0, -2.0]]],
    }
}

fn smooth_jet(x: Point) -> Jet {
    // u = y^2 (cos(x + y), sin(2x) / 2); all first derivatives vanish at y = 0
    let (a, b) = (x[0], x[1]);
    let (c, s) = ((a + b).cos(), (a + b).sin());
    let (s2, c2) = ((2.0 * a).sin(), (2.0 * a).cos());
    let y2 = b * b;
    Jet {
        value: [y2 * c, 0.5 * y2 * s2],
        grad: [[-y2 * s, 2.0 * b * c - y2 * s], [y2 * c2, b * s2]],
        hess: [
            [[-y2 * c, -2.0 * b * s - y2 * c], [-2.0 * b * s - y2 * c, 2.0 * c - 4.0 * b * s - y2 * c]],
            [[-2.0 * y2 * s2, 2.0 * b * c2], [2.0 * b * c2, s2]],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference check of a jet's gradient and Hessian.
    fn check_jet(f: &dyn Fn(Point) -> Jet, x: Point) {
        let h = 1e-5;
        let j = f(x);
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let (p, m) = (f(xp), f(xm));
            for c in 0..2 {
                let fd = (p.value[c] - m.value[c]) / (2.0 * h);
                assert!((fd - j.grad[c][d]).abs() < 1e-8, "grad[{c}][{d}] at {x:?}: {fd} vs {}", j.grad[c][d]);
                for a in 0..2 {
                    let fd = (p.grad[c][a] - m.grad[c][a]) / (2.0 * h);
                    assert!((fd - j.hess[c][d][a]).abs() < 1e-7, "hess[{c}][{d}][{a}] at {x:?}");
                    assert_eq!(j.hess[c][a][d], j.hess[c][d][a]);
                }
            }
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        for x in [[0.1, 0.2], [0.7, 0.9], [0.5, 0.0], [0.33, 0.66]] {
            check_jet(&contact_bottom_jet, x);
            check_jet(&quadratic_jet, x);
            check_jet(&smooth_jet, x);
        }
    }

    #[test]
    fn body_force_balances_stress_divergence() {
        // independent route: finite-difference divergence of the traction
        let p = Problem::contact_bottom().unwrap();
        let mat = p.material;
        let exact = p.exact.clone().unwrap();
        let h = 1e-5;
        for x in [[0.2, 0.3], [0.8, 0.6]] {
            let sig = |y: Point| mat.stress_of_gradient(&exact(y).grad);
            let mut div = [0.0; 2];
            for d in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[d] += h;
                xm[d] -= h;
                let (sp, sm) = (sig(xp), sig(xm));
                for i in 0..2 {
                    div[i] += (sp[i][d] - sm[i][d]) / (2.0 * h);
                }
            }
            let f = (p.volume_force)(x);
            assert!((f[0] + div[0]).abs() < 1e-7 && (f[1] + div[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn contact_bottom_is_consistent() {
        let p = Problem::contact_bottom().unwrap();
        let r = p.contact_consistency(50).unwrap();
        assert!(r < 1e-14, "violation {r}");
        // compressive normal stress 3 (x - 2) on the foundation
        let jet = (p.exact.as_ref().unwrap())([0.5, 0.0]);
        let t = traction_of(&p.material, &jet.grad, [0.0, -1.0]);
        assert!((-t[1] - (-4.5)).abs() < 1e-14 && t[0].abs() < 1e-14);
        assert!(Problem::smooth_uncontacted(2).unwrap().contact_consistency(20).unwrap() < 1e-14);
        assert!(Problem::quadratic_patch(2).unwrap().contact_consistency(5).is_none());
    }

    #[test]
    fn obstacle_values() {
        let p = Problem::obstacle_right().unwrap();
        assert!(((p.obstacle)([1.0, 0.5]) + 0.2).abs() < 1e-15);
        assert!(((p.obstacle)([1.0, 0.0]) - 0.05).abs() < 1e-15);
        assert!((p.material.mu - 500.0 / 2.6).abs() < 1e-12);
    }
}
