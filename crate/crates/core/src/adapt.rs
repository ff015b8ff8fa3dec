//! SOLVE, ESTIMATE, MARK, REFINE.

use crate::assembly::{assemble_load, assemble_stiffness, constrain_system, strain, double_dot, Material};
use crate::contact_force::ContactDensity;
use crate::contact_solver::{solve_contact, ContactSolution, PdasOptions};
use crate::error::{Error, Result};
use crate::estimator::{assemble_report, EstimatorOptions, EstimatorReport, ProblemData};
use crate::fespace::{local_gradient, shape_values, FeSpace};
use crate::mesh::{Mesh, Point};
use crate::par::Execution;
use crate::problems::{Jet, Problem};
use crate::quadrature::triangle_degree6;

/// Minimal set of elements carrying at least `theta` of the total squared
/// indicator. Elements are taken by decreasing indicator, ties to the
/// lower index; the result is sorted by index.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidInput(format!("marking fraction must lie in (0, 1], got {theta}")));
    }
    if let Some(i) = indicators.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(format!("indicator {i} is {}", indicators[i])));
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| indicators[i]).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let goal = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        if acc >= goal || indicators[i] == 0.0 {
            break;
        }
        acc += indicators[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Error norms of a discrete field against an exact one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    /// `||grad(u - u_h)||`.
    pub h1_semi: f64,
    /// Full `H^1` norm.
    pub h1: f64,
    /// `a(u - u_h, u - u_h)^{1/2}`.
    pub energy: f64,
}

/// Errors by the degree-6 rule on every triangle.
pub fn energy_error(space: &FeSpace, coeffs: &[f64], mat: &Material, exact: &(dyn Fn(Point) -> Jet + Sync)) -> ErrorNorms {
    let rule = triangle_degree6();
    let (mut l2, mut semi, mut en) = (0.0, 0.0, 0.0);
    for t in 0..space.mesh().n_triangles() {
        let geo = space.geometry(t);
        let nodes = space.cell_nodes(t);
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(*bary);
            let jet = exact(x);
            let phi = shape_values(*bary);
            let mut uh = [0.0; 2];
            for (k, &p) in nodes.iter().enumerate() {
                uh[0] += phi[k] * coeffs[2 * p];
                uh[1] += phi[k] * coeffs[2 * p + 1];
            }
            let gh = local_gradient(&geo.shape_gradients(*bary), &nodes, coeffs);
            let mut ge = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    ge[i][j] = jet.grad[i][j] - gh[i][j];
                }
            }
            a += w * ((jet.value[0] - uh[0]).powi(2) + (jet.value[1] - uh[1]).powi(2));
            b += w * double_dot(&ge, &ge);
            c += w * double_dot(&mat.stress_of_gradient(&ge), &strain(&ge));
        }
        l2 += a * geo.area;
        semi += b * geo.area;
        en += c * geo.area;
    }
    ErrorNorms { l2: l2.sqrt(), h1_semi: semi.sqrt(), h1: (l2 + semi).sqrt(), energy: en.max(0.0).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOptions {
    pub theta: f64,
    /// Stop once the number of free dofs exceeds this.
    pub max_dof: usize,
    /// Hard cap on the number of levels.
    pub max_levels: usize,
    pub pdas: PdasOptions,
    pub estimator: EstimatorOptions,
    /// Relative tolerance for classifying contact nodes; scaled by the
    /// domain size.
    pub contact_tol: f64,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        AdaptOptions {
            theta: 0.4,
            max_dof: 20_000,
            max_levels: 60,
            pdas: PdasOptions::default(),
            estimator: EstimatorOptions::default(),
            contact_tol: 1e-8,
        }
    }
}

impl AdaptOptions {
    pub fn exec(&self) -> Execution {
        self.estimator.exec
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub level: usize,
    pub ndof: usize,
    pub eta: [f64; 7],
    pub total: f64,
    pub error: Option<f64>,
    pub effectivity: Option<f64>,
    pub pdas_iterations: usize,
    pub min_angle: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub rows: Vec<HistoryRow>,
}

/// Everything computed on one mesh.
#[derive(Debug, Clone)]
pub struct LevelState {
    pub level: usize,
    pub space: FeSpace,
    pub solution: ContactSolution,
    pub density: ContactDensity,
    pub report: EstimatorReport,
    pub error: Option<ErrorNorms>,
}

impl LevelState {
    pub fn row(&self) -> HistoryRow {
        let err = self.error.map(|e| e.h1);
        HistoryRow {
            level: self.level,
            ndof: self.space.n_free(),
            eta: self.report.eta,
            total: self.report.total,
            error: err,
            effectivity: err.filter(|e| *e > 0.0).map(|e| self.report.total / e),
            pdas_iterations: self.solution.iterations,
            min_angle: self.space.mesh().min_angle(),
        }
    }
}

/// Solve and estimate on a given mesh.
pub fn solve_level(problem: &Problem, mesh: Mesh, level: usize, opts: &AdaptOptions) -> Result<LevelState> {
    let exec = opts.exec();
    let space = FeSpace::new(mesh)?;
    let k = assemble_stiffness(&space, &problem.material, exec);
    let f = assemble_load(&space, &*problem.volume_force, &*problem.traction, exec);
    let system = constrain_system(&k, &f, &space, &*problem.dirichlet)?;
    let gap = space.contact_gap(&*problem.obstacle);
    let solution = solve_contact(&space, &system, &gap, &opts.pdas)?;
    let scale = space.mesh().vertices().iter().fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()));
    let density = ContactDensity::compute(
        &space,
        &solution,
        &k,
        &f,
        &*problem.obstacle,
        opts.contact_tol * scale.max(1.0),
    )?;
    let data = ProblemData {
        material: problem.material,
        volume_force: &*problem.volume_force,
        traction: &*problem.traction,
        obstacle: &*problem.obstacle,
    };
    let report = assemble_report(&space, &solution.coeffs, &density, &data, &opts.estimator)?;
    let error = problem.exact.as_ref().map(|e| energy_error(&space, &solution.coeffs, &problem.material, &**e));
    Ok(LevelState { level, space, solution, density, report, error })
}

/// Runs the adaptive loop from the problem's initial mesh until the free
/// dof count exceeds `max_dof`. `on_level` sees every level's state before
/// refinement.
pub fn adaptive_solve<F>(problem: &Problem, opts: &AdaptOptions, mut on_level: F) -> Result<ConvergenceHistory>
where
    F: FnMut(&LevelState) -> Result<()>,
{
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::InvalidInput(format!("marking fraction must lie in (0, 1], got {}", opts.theta)));
    }
    let mut history = ConvergenceHistory::default();
    let mut mesh = problem.initial_mesh.clone();
    for level in 0..opts.max_levels {
        let at = |e: Error| Error::AtLevel { level, source: Box::new(e) };
        let state = solve_level(problem, mesh, level, opts).map_err(at)?;
        history.rows.push(state.row());
        on_level(&state).map_err(at)?;
        if state.space.n_free() > opts.max_dof {
            break;
        }
        let marked = dorfler_mark(&state.report.element_indicators, opts.theta).map_err(at)?;
        if marked.is_empty() {
            break;
        }
        mesh = state.space.mesh().refine(&marked).map_err(|e| at(e.into()))?;
    }
    Ok(history)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MarkerLayout;

    #[test]
    fn marking_examples() {
        assert_eq!(dorfler_mark(&[16.0, 9.0, 4.0, 1.0], 0.4).unwrap(), vec![0]);
        assert_eq!(dorfler_mark(&[1.0, 1.0, 1.0, 1.0], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(dorfler_mark(&[0.0, 2.0, 0.0, 1.0], 1.0).unwrap(), vec![1, 3]);
        assert!(dorfler_mark(&[0.0; 3], 0.5).unwrap().is_empty());
        assert!(dorfler_mark(&[1.0], 1.3).is_err());
        assert!(dorfler_mark(&[1.0], 0.0).is_err());
        assert!(dorfler_mark(&[f64::NAN], 0.5).is_err());
    }

    #[test]
    fn error_of_linear_field_against_zero() {
        let s = FeSpace::new(Mesh::unit_square(2, MarkerLayout::clamped_top_contact_bottom()).unwrap()).unwrap();
        let mat = Material::new(1.0, 1.0).unwrap();
        let zero = vec![0.0; s.n_dofs()];
        let exact = |x: Point| Jet { value: [x[0], 0.0], grad: [[1.0, 0.0], [0.0, 0.0]], hess: [[[0.0; 2]; 2]; 2] };
        let e = energy_error(&s, &zero, &mat, &exact);
        assert!((e.h1_semi - 1.0).abs() < 1e-14);
        assert!((e.energy - 3f64.sqrt()).abs() < 1e-14);
        assert!((e.l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let own = s.interpolate(|x| [x[0] * x[1], x[1] * x[1]]);
        let exact = |x: Point| Jet {
            value: [x[0] * x[1], x[1] * x[1]],
            grad: [[x[1], x[0]], [0.0, 2.0 * x[1]]],
            hess: [[[0.0; 2]; 2]; 2],
        };
        assert!(energy_error(&s, &own, &mat, &exact).h1 < 1e-14);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn short_run_is_monotone() {
        let p = Problem::contact_bottom().unwrap();
        let opts = AdaptOptions { max_dof: 400, ..Default::default() };
        let mut levels = 0;
        let h = adaptive_solve(&p, &opts, |_| {
            levels += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(levels, h.rows.len());
        assert!(h.rows.windows(2).all(|w| w[0].ndof < w[1].ndof));
        assert!(h.rows.last().unwrap().ndof > 400);
        assert!(h.rows.iter().all(|r| r.total > 0.0 && r.error.is_some()));
        let bad = AdaptOptions { theta: 1.5, ..Default::default() };
        assert!(adaptive_solve(&p, &bad, |_| Ok(())).is_err());
    }
}
