//! Nodal contact force density recovered from the linear residual by a
//! lumped boundary mass, node classification, and the piecewise linear
//! density on the half-edge subdivision of the contact boundary.

use crate::contact_solver::ContactSolution;
use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::mesh::Point;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContactClass {
    /// The constraint is active on every node of the node's contact patch.
    FullContact,
    /// Active at the node but not on the whole patch.
    SemiContact,
    /// Inactive at the node.
    NoContact,
}

/// Density values per contact node, in [`FeSpace::contact_nodes`] order.
#[derive(Debug, Clone)]
pub struct ContactDensity {
    /// Normal component (compressive reaction is positive).
    pub s1: Vec<f64>,
    /// Tangential component; zero for frictionless contact.
    pub s2: Vec<f64>,
    pub weights: Vec<f64>,
    pub classes: Vec<ContactClass>,
}

/// Contact edges containing each contact node: the incident contact edges
/// of a vertex, the own edge of a midpoint.
pub fn contact_patches(space: &FeSpace) -> Vec<Vec<usize>> {
    let mut slot = vec![usize::MAX; space.n_nodes()];
    for (k, &p) in space.contact_nodes().iter().enumerate() {
        slot[p] = k;
    }
    let mut out = vec![Vec::new(); space.contact_nodes().len()];
    for &e in space.contact_edges() {
        for p in space.edge_nodes(e) {
            if slot[p] != usize::MAX {
                out[slot[p]].push(e);
            }
        }
    }
    out
}

/// Integral of each contact node's half-edge hat function over the contact
/// boundary: `h/4` per incident edge for a vertex, `h/2` for a midpoint.
pub fn lump_weights(space: &FeSpace) -> Vec<f64> {
    let nv = space.mesh().n_vertices();
    contact_patches(space)
        .iter()
        .zip(space.contact_nodes())
        .map(|(edges, &p)| {
            let share = if p >= nv { 0.5 } else { 0.25 };
            edges.iter().map(|&e| share * space.mesh().edge_length(e)).sum()
        })
        .collect()
}

/// Linear residual `F - K u` on all dofs.
pub fn residual(k: &CsrMatrix, f: &[f64], u: &[f64]) -> Vec<f64> {
    let ku = k.mul_vec(u);
    f.iter().zip(&ku).map(|(a, b)| a - b).collect()
}

/// Nodal density `s1 = R(psi_p n) / w_p`; `s2` is set to zero after checking
/// that the tangential residual vanishes. `k` and `f` are the unconstrained
/// full-dof stiffness and load.
pub fn discrete_contact_density(
    space: &FeSpace,
    solution: &ContactSolution,
    k: &CsrMatrix,
    f: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let weights = lump_weights(space);
    let Some(normal) = space.contact_normal() else {
        return Ok((Vec::new(), Vec::new(), weights));
    };
    let r = residual(k, f, &solution.coeffs);
    let scale = f
        .iter()
        .map(|v| v.abs())
        .chain(k.mul_vec(&solution.coeffs).iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tang = 1 - normal.axis;
    let mut s1 = Vec::with_capacity(weights.len());
    for (&p, &w) in space.contact_nodes().iter().zip(&weights) {
        let rt = r[2 * p + tang];
        if rt.abs() > 1e-8 * scale {
            return Err(Error::TangentialResidual { node: p, residual: rt });
        }
        s1.push(normal.sign * r[2 * p + normal.axis] / w);
    }
    let s2 = vec![0.0; s1.len()];
    Ok((s1, s2, weights))
}

/// Full / semi / no contact classification with absolute tolerance `tol`
/// on `u.n - g`.
pub fn classify_nodes<G: Fn(Point) -> f64>(
    space: &FeSpace,
    coeffs: &[f64],
    obstacle: G,
    tol: f64,
) -> Vec<ContactClass> {
    let Some(normal) = space.contact_normal() else {
        return Vec::new();
    };
    let defect = |p: usize| normal.sign * coeffs[2 * p + normal.axis] - obstacle(space.nodes()[p]);
    contact_patches(space)
        .iter()
        .zip(space.contact_nodes())
        .map(|(edges, &p)| {
            if defect(p) < -tol {
                return ContactClass::NoContact;
            }
            let full = edges.iter().all(|&e| space.edge_nodes(e).iter().all(|&q| defect(q).abs() <= tol));
            if full {
                ContactClass::FullContact
            } else {
                ContactClass::SemiContact
            }
        })
        .collect()
}

impl ContactDensity {
    /// Density, weights and classes of a converged contact solution.
    pub fn compute<G: Fn(Point) -> f64>(
        space: &FeSpace,
        solution: &ContactSolution,
        k: &CsrMatrix,
        f: &[f64],
        obstacle: G,
        tol: f64,
    ) -> Result<ContactDensity> {
        let (s1, s2, weights) = discrete_contact_density(space, solution, k, f)?;
        let classes = classify_nodes(space, &solution.coeffs, obstacle, tol);
        Ok(ContactDensity { s1, s2, weights, classes })
    }

    /// Piecewise linear density on the half-edge subdivision, at a point of
    /// the contact boundary. Nodes that are not contact nodes (e.g. shared
    /// with the Dirichlet part) carry zero.
    pub fn value_at(&self, space: &FeSpace, x: Point) -> Result<f64> {
        let mut slot = vec![usize::MAX; space.n_nodes()];
        for (k, &p) in space.contact_nodes().iter().enumerate() {
            slot[p] = k;
        }
        let s = |p: usize| if slot[p] == usize::MAX { 0.0 } else { self.s1[slot[p]] };
        let mesh = space.mesh();
        for &e in space.contact_edges() {
            let [a, b] = mesh.oriented_edge(e);
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = ((x[0] - pa[0]) * d[0] + (x[1] - pa[1]) * d[1]) / len2;
            let off = ((x[0] - pa[0]) * d[1] - (x[1] - pa[1]) * d[0]).abs() / len2.sqrt();
            let eps = 1e-12;
            if off > eps * len2.sqrt().max(1.0) || t < -eps || t > 1.0 + eps {
                continue;
            }
            let [na, nm, nb] = space.edge_nodes(e);
            let t = t.clamp(0.0, 1.0);
            return Ok(if t <= 0.5 {
                let r = 2.0 * t;
                (1.0 - r) * s(na) + r * s(nm)
            } else {
                let r = 2.0 * t - 1.0;
                (1.0 - r) * s(nm) + r * s(nb)
            });
        }
        Err(Error::InvalidInput(format!("point ({}, {}) is not on the contact boundary", x[0], x[1])))
    }
}
