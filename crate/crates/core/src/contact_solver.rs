//! Primal-dual active set iteration for nodal unilateral constraints
//! `sign_k * u_k <= gap_k` on selected dofs of a symmetric positive
//! definite system.
//!
//! Active dofs are pinned by overwriting their rows and columns with a
//! scaled identity, which keeps the sparsity pattern fixed so the ordering
//! and elimination tree are computed once.

use std::sync::Arc;

use crate::assembly::LinearSystem;
use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::linsolve::{Ldlt, Symbolic};
use crate::sparse::CsrMatrix;

/// One unilateral constraint `sign * u[dof] <= gap` (`sign` is +1 or -1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub dof: usize,
    pub sign: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdasOptions {
    /// Weight of the primal term in the active-set indicator; it is further
    /// scaled by the matrix diagonal of each constrained dof.
    pub c: f64,
    pub max_iter: usize,
}

impl Default for PdasOptions {
    fn default() -> Self {
        PdasOptions { c: 1.0, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdasResult {
    pub u: Vec<f64>,
    /// Multiplier per constraint, `sign * (F - K u)` at the constrained dof.
    pub multipliers: Vec<f64>,
    pub active: Vec<bool>,
    /// Number of linear solves performed.
    pub iterations: usize,
}

/// Solves `min 1/2 u^T K u - f^T u` subject to the constraints.
pub fn pdas_solve(k: &CsrMatrix, f: &[f64], constraints: &[Constraint], opts: &PdasOptions) -> Result<PdasResult> {
    let n = k.n_rows();
    if f.len() != n {
        return Err(Error::InvalidInput(format!("rhs has length {}, matrix has {n} rows", f.len())));
    }
    if opts.c.is_nan() || opts.c <= 0.0 {
        return Err(Error::InvalidInput(format!("active-set weight must be positive, got {}", opts.c)));
    }
    let mut slot = vec![usize::MAX; n];
    for (j, c) in constraints.iter().enumerate() {
        if c.dof >= n {
            return Err(Error::OutOfRange { index: c.dof, len: n });
        }
        if slot[c.dof] != usize::MAX {
            return Err(Error::InvalidInput(format!("dof {} is constrained twice", c.dof)));
        }
        if c.sign.abs() != 1.0 || !c.gap.is_finite() {
            return Err(Error::InvalidInput(format!("bad constraint on dof {}", c.dof)));
        }
        slot[c.dof] = j;
    }
    let diag = k.diagonal();
    let symbolic: Arc<Symbolic> = Arc::new(Symbolic::analyze(k)?);

    let mut active = vec![false; constraints.len()];
    let mut iterations = 0;
    let mut last_delta = 0;
    loop {
        iterations += 1;
        let u = solve_with_active(k, f, constraints, &active, &diag, &symbolic)?;
        let r: Vec<f64> = {
            let ku = k.mul_vec(&u);
            f.iter().zip(&ku).map(|(a, b)| a - b).collect()
        };
        let multipliers: Vec<f64> = constraints
            .iter()
            .zip(&active)
            .map(|(c, &a)| if a { c.sign * r[c.dof] } else { 0.0 })
            .collect();
        let next: Vec<bool> = constraints
            .iter()
            .zip(&multipliers)
            .map(|(c, &lam)| lam + opts.c * diag[c.dof] * (c.sign * u[c.dof] - c.gap) > 0.0)
            .collect();
        let delta = next.iter().zip(&active).filter(|(a, b)| a != b).count();
        if delta == 0 {
            return Ok(PdasResult { u, multipliers, active, iterations });
        }
        if iterations >= opts.max_iter {
            return Err(Error::PdasNotConverged { iterations, last_delta: delta.max(last_delta) });
        }
        last_delta = delta;
        active = next;
    }
}

fn solve_with_active(
    k: &CsrMatrix,
    f: &[f64],
    constraints: &[Constraint],
    active: &[bool],
    diag: &[f64],
    symbolic: &Arc<Symbolic>,
) -> Result<Vec<f64>> {
    let n = k.n_rows();
    let mut pinned = vec![None; n];
    for (c, &a) in constraints.iter().zip(active) {
        if a {
            pinned[c.dof] = Some(c.sign * c.gap);
        }
    }
    if pinned.iter().all(Option::is_none) {
        let fac = Ldlt::factor_with(symbolic.clone(), k)?;
        return Ok(fac.solve_refined(k, f));
    }
    let mut m = k.clone();
    let mut rhs = f.to_vec();
    {
        let row_ptr = k.row_ptr().to_vec();
        let cols = k.col_idx().to_vec();
        let vals = m.values_mut();
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                let j = cols[p];
                match (pinned[i], pinned[j]) {
                    (Some(_), _) => vals[p] = if i == j { diag[i] } else { 0.0 },
                    (None, Some(uj)) => {
                        rhs[i] -= vals[p] * uj;
                        vals[p] = 0.0;
                    }
                    (None, None) => {}
                }
            }
        }
    }
    for i in 0..n {
        if let Some(ui) = pinned[i] {
            rhs[i] = diag[i] * ui;
        }
    }
    let fac = Ldlt::factor_with(symbolic.clone(), &m)?;
    let mut u = fac.solve_refined(&m, &rhs);
    for (ui, pin) in u.iter_mut().zip(&pinned) {
        if let Some(v) = pin {
            *ui = *v;
        }
    }
    Ok(u)
}

/// Converged contact problem on a finite element space.
#[derive(Debug, Clone)]
pub struct ContactSolution {
    /// Full dof vector, Dirichlet values included.
    pub coeffs: Vec<f64>,
    /// Nodal multiplier per contact node, in [`FeSpace::contact_nodes`] order.
    pub multipliers: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
}

/// Solves the discrete contact problem `u.n(p) <= gap(p)` at every contact node.
pub fn solve_contact(space: &FeSpace, system: &LinearSystem, gap: &[f64], opts: &PdasOptions) -> Result<ContactSolution> {
    let contact = space.contact_nodes();
    if gap.len() != contact.len() {
        return Err(Error::InvalidInput(format!(
            "{} gap values for {} contact nodes",
            gap.len(),
            contact.len()
        )));
    }
    let sign = space.contact_normal().map_or(1.0, |n| n.sign);
    let constraints = contact
        .iter()
        .zip(gap)
        .map(|(&p, &g)| {
            let dof = space.contact_dof(p);
            let free = space
                .free_index(dof)
                .ok_or_else(|| Error::InvalidInput(format!("contact node {p} has no free dof")))?;
            Ok(Constraint { dof: free, sign, gap: g })
        })
        .collect::<Result<Vec<_>>>()?;
    let res = pdas_solve(&system.k, &system.f, &constraints, opts)?;
    Ok(ContactSolution {
        coeffs: system.expand(&res.u),
        multipliers: res.multipliers,
        active: res.active,
        iterations: res.iterations,
    })
}
