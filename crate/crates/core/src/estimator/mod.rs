//! Residual error estimator for the contact problem.
//!
//! Seven contributions are computed, each a sum of squares over nodes:
//! 1. volume residual `h_p ||f + div sigma(u)||` on the node patch;
//! 2. stress jumps across interior edges containing the node;
//! 3. traction mismatch on Neumann edges containing the node;
//! 4. tangential contact stress on contact edges containing the node;
//! 5. normal contact stress on those edges (see [`ContactResidual`]);
//! 6. complementarity defect at semi-contact nodes;
//! 7. `H^{1/2}` norm of the penetration `(u.n - g)^+` on the contact boundary.
//!
//! Every patch term is an edge or element quantity times a node weight, so
//! it is also handed to the elements that produced it; the element
//! indicators therefore sum to `eta^2`.

pub mod hhalf;

use crate::assembly::{Material, Tensor};
use crate::contact_force::{contact_patches, ContactClass, ContactDensity};
use crate::error::{Error, Result};
use crate::fespace::{local_gradient, FeSpace, NodeClass};
use crate::linsolve::solve_linear;
use crate::mesh::{BoundaryKind, Point};
use crate::par::{map_indexed, Execution};
use crate::quadrature::{gauss3, triangle_degree4, LineRule};
use crate::sparse::Triplets;

use hhalf::{positive_part_norm, TraceSegment};

/// Which normal contact stress enters the fifth contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContactResidual {
    /// `sigma_n(u_h) + lambda_h`, where `lambda_h` is the quadratic contact
    /// pressure whose boundary mass moments equal the nodal reactions. It
    /// vanishes for the exact solution and keeps the estimator's rate.
    #[default]
    Balanced,
    /// `sigma_n(u_h)` alone. This does not vanish under active contact and
    /// decays like `h^{1/2}` only.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOptions {
    pub contact_residual: ContactResidual,
    pub exec: Execution,
}

/// Problem data the residuals are measured against.
pub struct ProblemData<'a> {
    pub material: Material,
    pub volume_force: &'a (dyn Fn(Point) -> [f64; 2] + Sync),
    /// Traction on the Neumann part as a function of point and outward normal.
    pub traction: &'a (dyn Fn(Point, Point) -> [f64; 2] + Sync),
    /// Obstacle (gap) function on the contact part.
    pub obstacle: &'a (dyn Fn(Point) -> f64 + Sync),
}

/// Per-node contributions `eta_{k,p}` for `k = 1..6` (not squared).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeContribution {
    pub node: usize,
    pub parts: [f64; 6],
}

#[derive(Debug, Clone)]
pub struct EstimatorReport {
    /// Nodes with at least one nonzero-weight contribution, ascending.
    pub per_node: Vec<NodeContribution>,
    /// `eta_1 .. eta_7`.
    pub eta: [f64; 7],
    pub total: f64,
    /// Squared element indicators for marking.
    pub element_indicators: Vec<f64>,
    pub osc_f: f64,
    pub osc_g: f64,
}

/// Barycentric coordinates of a physical point in triangle `t`.
fn barycentric(space: &FeSpace, t: usize, x: Point) -> [f64; 3] {
    let geo = space.geometry(t);
    let c = geo.corners;
    let centroid = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
    let d = [x[0] - centroid[0], x[1] - centroid[1]];
    let mut b = [0.0; 3];
    for (i, bi) in b.iter_mut().enumerate() {
        *bi = 1.0 / 3.0 + geo.grad_lambda[i][0] * d[0] + geo.grad_lambda[i][1] * d[1];
    }
    b
}

/// Stress of the discrete field at a point of triangle `t` (closure included).
pub fn stress_at(space: &FeSpace, coeffs: &[f64], mat: &Material, t: usize, x: Point) -> Tensor {
    let geo = space.geometry(t);
    let g = local_gradient(&geo.shape_gradients(barycentric(space, t, x)), &space.cell_nodes(t), coeffs);
    mat.stress_of_gradient(&g)
}

/// `div sigma(u_h)` on triangle `t`, constant for quadratic fields.
pub fn stress_divergence(space: &FeSpace, coeffs: &[f64], mat: &Material, t: usize) -> [f64; 2] {
    let hs = space.geometry(t).shape_hessians();
    // hess[c][a][b] = d_a d_b u_c
    let mut hess = [[[0.0; 2]; 2]; 2];
    for (k, &p) in space.cell_nodes(t).iter().enumerate() {
        for c in 0..2 {
            let u = coeffs[2 * p + c];
            for a in 0..2 {
                for b in 0..2 {
                    hess[c][a][b] += u * hs[k][a][b];
                }
            }
        }
    }
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let grad_div = hess[0][0][i] + hess[1][1][i];
        let lap = hess[i][0][0] + hess[i][1][1];
        *o = (mat.chi + mat.mu) * grad_div + mat.mu * lap;
    }
    out
}

/// `||f + div sigma(u_h)||_{L^2(T)}`.
pub fn interior_residual(
    space: &FeSpace,
    coeffs: &[f64],
    mat: &Material,
    f: &(dyn Fn(Point) -> [f64; 2] + Sync),
    t: usize,
) -> f64 {
    let div = stress_divergence(space, coeffs, mat, t);
    let geo = space.geometry(t);
    let rule = triangle_degree4();
    let mut acc = 0.0;
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let fx = f(geo.point(*b));
        acc += w * ((fx[0] + div[0]).powi(2) + (fx[1] + div[1]).powi(2));
    }
    (acc * geo.area).sqrt()
}

fn apply(s: &Tensor, n: Point) -> [f64; 2] {
    [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
}

/// Which edge residual to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Neumann,
    ContactTangential,
    ContactNormal,
}

fn edge_points(space: &FeSpace, e: usize, rule: &LineRule) -> Vec<(Point, f64, f64)> {
    let mesh = space.mesh();
    let [a, b] = mesh.oriented_edge(e);
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let len = mesh.edge_length(e);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| ([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])], *t, w * len))
        .collect()
}

/// `L^2(e)` norm of the requested edge residual. For
/// [`EdgeKind::ContactNormal`] the optional `pressure` (values at start,
/// midpoint, end of the oriented edge) is added to `sigma_n`.
pub fn edge_jump(
    space: &FeSpace,
    coeffs: &[f64],
    data: &ProblemData,
    e: usize,
    kind: EdgeKind,
    pressure: Option<[f64; 3]>,
) -> Result<f64> {
    let mesh = space.mesh();
    let edge = &mesh.edges()[e];
    let expected = match kind {
        EdgeKind::Interior => None,
        EdgeKind::Neumann => Some(BoundaryKind::Neumann),
        EdgeKind::ContactTangential | EdgeKind::ContactNormal => Some(BoundaryKind::Contact),
    };
    if edge.kind != expected {
        return Err(Error::InvalidInput(format!("edge {e} is {:?}, not {kind:?}", edge.kind)));
    }
    let mat = &data.material;
    let n = mesh.edge_normal(e);
    let t0 = edge.triangles[0];
    let mut acc = 0.0;
    for (x, t, w) in edge_points(space, e, &gauss3()) {
        let s = stress_at(space, coeffs, mat, t0, x);
        let sn = apply(&s, n);
        let r: [f64; 2] = match kind {
            EdgeKind::Interior => {
                let s2 = stress_at(space, coeffs, mat, edge.triangles[1], x);
                let sn2 = apply(&s2, n);
                [sn[0] - sn2[0], sn[1] - sn2[1]]
            }
            EdgeKind::Neumann => {
                let g = (data.traction)(x, n);
                [g[0] - sn[0], g[1] - sn[1]]
            }
            EdgeKind::ContactTangential => [-n[1] * sn[0] + n[0] * sn[1], 0.0],
            EdgeKind::ContactNormal => {
                let lam = pressure.map_or(0.0, |p| {
                    let phi = crate::fespace::edge_shape_values(t);
                    phi[0] * p[0] + phi[1] * p[1] + phi[2] * p[2]
                });
                [n[0] * sn[0] + n[1] * sn[1] + lam, 0.0]
            }
        };
        acc += w * (r[0] * r[0] + r[1] * r[1]);
    }
    Ok(acc.sqrt())
}

/// Quadratic contact pressure on the contact nodes whose boundary mass
/// moments equal the nodal reactions `s1_p w_p`.
pub fn consistent_pressure(space: &FeSpace, density: &ContactDensity) -> Result<Vec<f64>> {
    let nc = space.contact_nodes().len();
    if nc == 0 {
        return Ok(Vec::new());
    }
    let mut slot = vec![usize::MAX; space.n_nodes()];
    for (k, &p) in space.contact_nodes().iter().enumerate() {
        slot[p] = k;
    }
    let mut trip = Triplets::new(nc, nc);
    const LOCAL: [[f64; 3]; 3] = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
    for &e in space.contact_edges() {
        let h = space.mesh().edge_length(e);
        let nodes = space.edge_nodes(e);
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (slot[nodes[i]], slot[nodes[j]]);
                if a != usize::MAX && b != usize::MAX {
                    trip.push(a, b, h / 30.0 * LOCAL[i][j]);
                }
            }
        }
    }
    let rhs: Vec<f64> = density.s1.iter().zip(&density.weights).map(|(s, w)| s * w).collect();
    solve_linear(&trip.to_csr(), &rhs)
}

/// `int_{sub} (q)^+ phi ds` for `q` quadratic in the edge parameter and
/// `phi` linear, over parameter range `[a, b]` of an edge of length `len`.
fn positive_moment(q: [f64; 3], phi: impl Fn(f64) -> f64, a: f64, b: f64, len: f64) -> f64 {
    let c = [q[0], -3.0 * q[0] + 4.0 * q[1] - q[2], 2.0 * q[0] - 4.0 * q[1] + 2.0 * q[2]];
    let val = |t: f64| c[0] + t * (c[1] + t * c[2]);
    let mut cuts = vec![a];
    let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
    if c[2] != 0.0 && disc > 0.0 {
        for r in [(-c[1] - disc.sqrt()) / (2.0 * c[2]), (-c[1] + disc.sqrt()) / (2.0 * c[2])] {
            if r > a && r < b {
                cuts.push(r);
            }
        }
    } else if c[2] == 0.0 && c[1] != 0.0 {
        let r = -c[0] / c[1];
        if r > a && r < b {
            cuts.push(r);
        }
    }
    if a < 0.5 && b > 0.5 {
        // kink of the midpoint hat
        cuts.push(0.5);
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let rule = gauss3();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo || val(0.5 * (lo + hi)) <= 0.0 {
            continue;
        }
        for (s, ws) in rule.points.iter().zip(&rule.weights) {
            let t = lo + s * (hi - lo);
            acc += ws * (hi - lo) * val(t).max(0.0) * phi(t);
        }
    }
    acc * len
}

/// `d_p = int (g - u.n)^+ phi_p` over the middle third of the support of
/// `phi_p`, for each contact node (zero unless semi-contact), and the
/// corresponding `eta_{6,p} = (s1_p d_p)^{1/2}`.
pub fn eta_six(
    space: &FeSpace,
    coeffs: &[f64],
    density: &ContactDensity,
    obstacle: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let Some(normal) = space.contact_normal() else {
        return Ok(Vec::new());
    };
    let tol = 1e-10 * density.s1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let patches = contact_patches(space);
    let defect = |p: usize| obstacle(space.nodes()[p]) - normal.sign * coeffs[2 * p + normal.axis];
    let mut out = vec![0.0; space.contact_nodes().len()];
    for (k, &p) in space.contact_nodes().iter().enumerate() {
        if density.classes[k] != ContactClass::SemiContact {
            continue;
        }
        let s1 = density.s1[k];
        if s1 < -tol {
            return Err(Error::NegativeDensity { node: p, value: s1 });
        }
        let mut d = 0.0;
        for &e in &patches[k] {
            let nodes = space.edge_nodes(e);
            let q = [defect(nodes[0]), defect(nodes[1]), defect(nodes[2])];
            let len = space.mesh().edge_length(e);
            d += if nodes[1] == p {
                // midpoint: hat over the whole edge, middle third [1/3, 2/3]
                positive_moment(q, |t| 1.0 - (2.0 * t - 1.0).abs(), 1.0 / 3.0, 2.0 / 3.0, len)
            } else if nodes[0] == p {
                positive_moment(q, |t| 1.0 - 2.0 * t, 0.0, 1.0 / 6.0, len)
            } else {
                positive_moment(q, |t| 2.0 * t - 1.0, 5.0 / 6.0, 1.0, len)
            };
        }
        out[k] = (s1.max(0.0) * d).sqrt();
    }
    Ok(out)
}

/// Penetration trace `u.n - g` on the contact edges, in [`FeSpace::contact_edges`] order.
pub fn penetration_trace(space: &FeSpace, coeffs: &[f64], obstacle: &(dyn Fn(Point) -> f64 + Sync)) -> Vec<TraceSegment> {
    let Some(normal) = space.contact_normal() else {
        return Vec::new();
    };
    let mesh = space.mesh();
    space
        .contact_edges()
        .iter()
        .map(|&e| {
            let nodes = space.edge_nodes(e);
            let v = nodes.map(|p| normal.sign * coeffs[2 * p + normal.axis] - obstacle(space.nodes()[p]));
            let [a, b] = mesh.oriented_edge(e);
            TraceSegment { start: mesh.vertices()[a], end: mesh.vertices()[b], values: v }
        })
        .collect()
}

/// Assembles all contributions, element indicators and oscillations.
pub fn assemble_report(
    space: &FeSpace,
    coeffs: &[f64],
    density: &ContactDensity,
    data: &ProblemData,
    opts: &EstimatorOptions,
) -> Result<EstimatorReport> {
    let mesh = space.mesh();
    let nt = mesh.n_triangles();
    let ne = mesh.n_edges();
    let mat = &data.material;
    let exec = opts.exec;

    // element residuals and volume oscillation
    let rule = triangle_degree4();
    let elem: Vec<(f64, f64)> = map_indexed(exec, nt, |t| {
        let r = interior_residual(space, coeffs, mat, data.volume_force, t);
        let geo = space.geometry(t);
        let vals: Vec<[f64; 2]> = rule.points.iter().map(|b| (data.volume_force)(geo.point(*b))).collect();
        let mut mean = [0.0; 2];
        for (v, w) in vals.iter().zip(&rule.weights) {
            mean[0] += w * v[0];
            mean[1] += w * v[1];
        }
        let dev: f64 = vals
            .iter()
            .zip(&rule.weights)
            .map(|(v, w)| w * ((v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2)))
            .sum::<f64>()
            * geo.area;
        (r * r, mesh.diameter(t).powi(2) * dev)
    });

    let pressure = match (opts.contact_residual, space.contact_normal()) {
        (ContactResidual::Balanced, Some(_)) => Some(consistent_pressure(space, density)?),
        _ => None,
    };
    let mut slot = vec![usize::MAX; space.n_nodes()];
    for (k, &p) in space.contact_nodes().iter().enumerate() {
        slot[p] = k;
    }

    // squared edge residuals: (main, second) where second is the normal
    // contact part on contact edges
    let edge_terms: Vec<Result<(f64, f64, f64)>> = map_indexed(exec, ne, |e| {
        let edge = &mesh.edges()[e];
        match edge.kind {
            None => Ok((edge_jump(space, coeffs, data, e, EdgeKind::Interior, None)?.powi(2), 0.0, 0.0)),
            Some(BoundaryKind::Neumann) => {
                let j = edge_jump(space, coeffs, data, e, EdgeKind::Neumann, None)?;
                // traction oscillation on this edge
                let pts = edge_points(space, e, &gauss3());
                let n = mesh.edge_normal(e);
                let len = mesh.edge_length(e);
                let vals: Vec<[f64; 2]> = pts.iter().map(|(x, _, _)| (data.traction)(*x, n)).collect();
                let mut mean = [0.0; 2];
                for (v, (_, _, w)) in vals.iter().zip(&pts) {
                    mean[0] += w * v[0] / len;
                    mean[1] += w * v[1] / len;
                }
                let dev: f64 = vals
                    .iter()
                    .zip(&pts)
                    .map(|(v, (_, _, w))| w * ((v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2)))
                    .sum();
                Ok((j * j, 0.0, len * dev))
            }
            Some(BoundaryKind::Contact) => {
                let tang = edge_jump(space, coeffs, data, e, EdgeKind::ContactTangential, None)?;
                let p = pressure.as_ref().map(|pr| {
                    space.edge_nodes(e).map(|q| if slot[q] == usize::MAX { 0.0 } else { pr[slot[q]] })
                });
                let norm = edge_jump(space, coeffs, data, e, EdgeKind::ContactNormal, p)?;
                Ok((tang * tang, norm * norm, 0.0))
            }
            Some(BoundaryKind::Dirichlet) => Ok((0.0, 0.0, 0.0)),
        }
    });
    let edge_terms: Vec<(f64, f64, f64)> = edge_terms.into_iter().collect::<Result<_>>()?;

    // node patches
    let nv = mesh.n_vertices();
    let n_nodes = space.n_nodes();
    let mut node_tris: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for t in 0..nt {
        for p in space.cell_nodes(t) {
            node_tris[p].push(t);
        }
    }
    let mut node_edges: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (e, edge) in mesh.edges().iter().enumerate() {
        node_edges[edge.vertices[0]].push(e);
        node_edges[edge.vertices[1]].push(e);
        node_edges[nv + e].push(e);
    }
    let h_p: Vec<f64> =
        node_tris.iter().map(|ts| ts.iter().map(|&t| mesh.diameter(t)).fold(0.0, f64::max)).collect();

    let six = eta_six(space, coeffs, density, data.obstacle)?;

    let mut indicators = vec![0.0; nt];
    let mut sums = [0.0f64; 7];
    let mut per_node = Vec::new();
    for p in 0..n_nodes {
        let class = space.node_class(p);
        if class == NodeClass::Dirichlet {
            continue;
        }
        let h = h_p[p];
        let mut parts = [0.0f64; 6];
        for &t in &node_tris[p] {
            let v = h * h * elem[t].0;
            parts[0] += v;
            indicators[t] += v;
        }
        for &e in &node_edges[p] {
            let edge = &mesh.edges()[e];
            let (main, second, _) = edge_terms[e];
            match edge.kind {
                None => {
                    let v = h * main;
                    parts[1] += v;
                    indicators[edge.triangles[0]] += 0.5 * v;
                    indicators[edge.triangles[1]] += 0.5 * v;
                }
                Some(BoundaryKind::Neumann) if class == NodeClass::Neumann || class == NodeClass::Contact => {
                    let v = h * main;
                    parts[2] += v;
                    indicators[edge.triangles[0]] += v;
                }
                Some(BoundaryKind::Contact) if class == NodeClass::Contact => {
                    let (v4, v5) = (h * main, h * second);
                    parts[3] += v4;
                    parts[4] += v5;
                    indicators[edge.triangles[0]] += v4 + v5;
                }
                _ => {}
            }
        }
        if class == NodeClass::Contact {
            let v = six[slot[p]].powi(2);
            if v > 0.0 {
                parts[5] = v;
                let share = v / node_tris[p].len() as f64;
                for &t in &node_tris[p] {
                    indicators[t] += share;
                }
            }
        }
        for k in 0..6 {
            sums[k] += parts[k];
        }
        per_node.push(NodeContribution { node: p, parts: parts.map(f64::sqrt) });
    }

    let seven = positive_part_norm(&penetration_trace(space, coeffs, data.obstacle));
    for (k, &e) in space.contact_edges().iter().enumerate() {
        indicators[mesh.edges()[e].triangles[0]] += seven.per_segment[k];
    }
    sums[6] = seven.l2_sq + seven.semi_sq;

    let eta = sums.map(f64::sqrt);
    let total = sums.iter().sum::<f64>().sqrt();
    let osc_f = elem.iter().map(|e| e.1).sum::<f64>().sqrt();
    let osc_g = edge_terms.iter().map(|e| e.2).sum::<f64>().sqrt();
    Ok(EstimatorReport { per_node, eta, total, element_indicators: indicators, osc_f, osc_g })
}
