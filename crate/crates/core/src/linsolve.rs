//! Sparse symmetric `L D L^T` factorization with a nested-dissection fill
//! reducing ordering.
//!
//! The symbolic phase (ordering, elimination tree, column counts) depends
//! only on the sparsity pattern and is reused when the values change, which
//! is what the active-set iteration does on every sweep.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Pattern-only part of the factorization.
#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
}

/// Numeric factors `P A P^T = L D L^T`, `L` unit lower triangular by columns.
#[derive(Debug, Clone)]
pub struct Ldlt {
    symbolic: Arc<Symbolic>,
    row_idx: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl Symbolic {
    /// Orders and analyzes a structurally symmetric matrix (both triangles stored).
    pub fn analyze(a: &CsrMatrix) -> Result<Symbolic> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::InvalidInput(format!("matrix is {}x{}, not square", a.n_rows(), a.n_cols())));
        }
        let n = a.n_rows();
        let perm = nested_dissection(a);
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut counts = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let (cols, _) = a.row(perm[k]);
            for &c in cols {
                let mut i = iperm[c];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        counts[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        Ok(Symbolic { n, perm, iperm, parent, col_ptr })
    }

    /// Number of off-diagonal entries of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.col_ptr[self.n]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

impl Ldlt {
    /// Analyzes and factors `a`.
    pub fn factor(a: &CsrMatrix) -> Result<Ldlt> {
        let sym = Arc::new(Symbolic::analyze(a)?);
        Ldlt::factor_with(sym, a)
    }

    /// Factors `a` reusing a symbolic analysis of the same pattern (entries
    /// outside the analyzed pattern must not appear).
    pub fn factor_with(symbolic: Arc<Symbolic>, a: &CsrMatrix) -> Result<Ldlt> {
        let s = &*symbolic;
        let n = s.n;
        if a.n_rows() != n || a.n_cols() != n {
            return Err(Error::InvalidInput("matrix size does not match its analysis".into()));
        }
        let nnz = s.factor_nnz();
        let mut row_idx = vec![0usize; nnz];
        let mut l = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut filled = vec![0usize; n];
        let mut scale: f64 = 0.0;

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = a.row(s.perm[k]);
            for (&c, &v) in cols.iter().zip(vals) {
                let mut i = s.iperm[c];
                if i > k {
                    continue;
                }
                y[i] += v;
                let mut len = 0;
                loop {
                    if i == NONE || i > k {
                        return Err(Error::InvalidInput("matrix pattern differs from its analysis".into()));
                    }
                    if flag[i] == k {
                        break;
                    }
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = s.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = s.col_ptr[i];
                let end = start + filled[i];
                for p in start..end {
                    y[row_idx[p]] -= l[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                row_idx[end] = k;
                l[end] = lki;
                filled[i] += 1;
            }
            scale = scale.max(dk.abs());
            if !dk.is_finite() || dk <= 1e-14 * scale {
                return Err(Error::Singular { row: s.perm[k] });
            }
            d[k] = dk;
        }
        Ok(Ldlt { symbolic, row_idx, l, d })
    }

    pub fn symbolic(&self) -> &Arc<Symbolic> {
        &self.symbolic
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &*self.symbolic;
        let n = s.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = s.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in s.col_ptr[j]..s.col_ptr[j + 1] {
                x[self.row_idx[p]] -= self.l[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut xj = x[j];
            for p in s.col_ptr[j]..s.col_ptr[j + 1] {
                xj -= self.l[p] * x[self.row_idx[p]];
            }
            x[j] = xj;
        }
        let mut out = vec![0.0; n];
        for (k, &p) in s.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }

    /// Solves and applies iterative refinement until `||A x - b|| <= 1e-12 ||b||`
    /// or three correction steps have been taken.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let bnorm = norm(b);
        for _ in 0..3 {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if norm(&r) <= 1e-12 * bnorm {
                break;
            }
            let dx = self.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct solve of a symmetric positive definite system.
pub fn solve_linear(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() {
        return Err(Error::InvalidInput(format!("rhs has length {}, matrix has {} rows", b.len(), a.n_rows())));
    }
    let f = Ldlt::factor(a)?;
    Ok(f.solve_refined(a, b))
}

const LEAF_SIZE: usize = 48;

/// Fill-reducing ordering by recursive level-structure bisection.
fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let mut ctx = Dissector {
        a,
        owner: vec![0; n],
        level: vec![0; n],
        next_id: 0,
        order: Vec::with_capacity(n),
        queue: Vec::with_capacity(n),
    };
    let all: Vec<usize> = (0..n).collect();
    ctx.dissect(all);
    ctx.order
}

struct Dissector<'a> {
    a: &'a CsrMatrix,
    owner: Vec<usize>,
    level: Vec<usize>,
    next_id: usize,
    order: Vec<usize>,
    queue: Vec<usize>,
}

impl Dissector<'_> {
    /// Breadth-first search inside the current set; fills `queue` in visit
    /// order and `level`, returns the number of levels.
    fn bfs(&mut self, start: usize, id: usize) -> usize {
        self.queue.clear();
        self.queue.push(start);
        // mark visited by flipping owner to id + 1
        self.owner[start] = id + 1;
        self.level[start] = 0;
        let mut head = 0;
        let mut depth = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            let (cols, _) = self.a.row(v);
            for &w in cols {
                if self.owner[w] == id {
                    self.owner[w] = id + 1;
                    self.level[w] = self.level[v] + 1;
                    depth = depth.max(self.level[w]);
                    self.queue.push(w);
                }
            }
        }
        for &v in &self.queue {
            self.owner[v] = id;
        }
        depth + 1
    }

    fn dissect(&mut self, set: Vec<usize>) {
        if set.len() <= LEAF_SIZE {
            self.order.extend(set);
            return;
        }
        // ids come in pairs: id marks membership, id + 1 marks "visited"
        let id = self.next_id + 1;
        self.next_id += 2;
        for &v in &set {
            self.owner[v] = id;
        }
        let mut start = set[0];
        let mut levels = self.bfs(start, id);
        for _ in 0..4 {
            let far = *self.queue.last().unwrap();
            if far == start {
                break;
            }
            let l = self.bfs(far, id);
            if l <= levels {
                break;
            }
            start = far;
            levels = l;
        }
        if self.queue.len() < set.len() {
            // disconnected: split off the reached component
            let reached: Vec<usize> = self.queue.clone();
            for &v in &reached {
                self.owner[v] = usize::MAX;
            }
            let rest: Vec<usize> = set.iter().copied().filter(|&v| self.owner[v] == id).collect();
            self.dissect(reached);
            self.dissect(rest);
            return;
        }
        if levels < 3 {
            self.order.extend(set);
            return;
        }
        let mut per_level = vec![0usize; levels];
        for &v in &set {
            per_level[self.level[v]] += 1;
        }
        let half = set.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (l, &c) in per_level.iter().enumerate() {
            acc += c;
            if acc >= half {
                mid = l;
                break;
            }
        }
        let mid = mid.clamp(1, levels - 2);
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut sep = Vec::new();
        for &v in &set {
            let l = self.level[v];
            if l < mid {
                left.push(v);
            } else if l > mid {
                right.push(v);
            } else {
                let (cols, _) = self.a.row(v);
                let touches_right = cols.iter().any(|&w| self.owner[w] == id && self.level[w] == mid + 1);
                if touches_right {
                    sep.push(v);
                } else {
                    left.push(v);
                }
            }
        }
        self.dissect(left);
        self.dissect(right);
        self.order.extend(sep);
    }
}
