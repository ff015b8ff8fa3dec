use contact_afem::adapt::{adaptive_solve, loglog_slope, solve_level, AdaptOptions, ConvergenceHistory};
use contact_afem::assembly::{assemble_load, assemble_stiffness, energy};
use contact_afem::contact_force::ContactClass;
use contact_afem::estimator::{edge_jump, ContactResidual, EdgeKind, EstimatorOptions, ProblemData};
use contact_afem::fespace::FeSpace;
use contact_afem::mesh::BoundaryKind;
use contact_afem::par::Execution;
use contact_afem::problems::Problem;
use contact_afem::quadrature::gauss_line;

fn opts(max_dof: usize, exec: Execution) -> AdaptOptions {
    AdaptOptions { max_dof, estimator: EstimatorOptions { exec, ..Default::default() }, ..Default::default() }
}

fn run(p: &Problem, o: &AdaptOptions) -> ConvergenceHistory {
    adaptive_solve(p, o, |_| Ok(())).unwrap()
}

#[test]
fn sequential_and_parallel_histories_agree() {
    let p = Problem::obstacle_right().unwrap();
    let a = run(&p, &opts(1500, Execution::Sequential));
    let b = run(&p, &opts(1500, Execution::Sequential));
    let c = run(&p, &opts(1500, Execution::Parallel));
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn density_matches_multipliers_and_complements_the_gap() {
    for p in [Problem::contact_bottom().unwrap(), Problem::obstacle_right().unwrap()] {
        adaptive_solve(&p, &opts(2500, Execution::Parallel), |s| {
            let normal = s.space.contact_normal().unwrap();
            let scale = s.density.s1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (k, &node) in s.space.contact_nodes().iter().enumerate() {
                let reaction = s.density.s1[k] * s.density.weights[k];
                assert!((reaction - s.solution.multipliers[k]).abs() <= 1e-9 * scale.max(1.0), "node {node}");
                let gap = (p.obstacle)(s.space.nodes()[node]);
                let defect = normal.sign * s.solution.coeffs[2 * node + normal.axis] - gap;
                assert!(defect <= 1e-12);
                assert!((s.solution.multipliers[k] * defect).abs() <= 1e-10 * scale);
            }
            Ok(())
        })
        .unwrap();
    }
}

#[test]
fn quasi_density_is_nonnegative_on_nonnegative_traces() {
    let rule = gauss_line(4);
    for p in [Problem::contact_bottom().unwrap(), Problem::obstacle_right().unwrap()] {
        adaptive_solve(&p, &opts(2000, Execution::Parallel), |s| {
            let mesh = s.space.mesh();
            let edges = s.space.contact_edges();
            // integrate against every piecewise-linear hat of the contact mesh
            let mut moments = vec![0.0; mesh.vertices().len()];
            let mut total = 0.0;
            for &e in edges {
                let [a, b] = mesh.oriented_edge(e);
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
                for (&t, &w) in rule.points.iter().zip(&rule.weights) {
                    let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                    let v = s.density.value_at(&s.space, x).unwrap() * w * len;
                    moments[a] += (1.0 - t) * v;
                    moments[b] += t * v;
                    total += v;
                }
            }
            assert!(moments.iter().all(|&m| m >= -1e-10), "level {}", s.level);
            // hats sum to one on the contact boundary
            let sum: f64 = moments.iter().sum();
            assert!((sum - total).abs() <= 1e-12 * total.abs().max(1.0));
            Ok(())
        })
        .unwrap();
    }
}

#[test]
fn discrete_energy_decreases_under_refinement() {
    let p = Problem::contact_bottom().unwrap();
    let mut energies = Vec::new();
    adaptive_solve(&p, &opts(4000, Execution::Parallel), |s| {
        let k = assemble_stiffness(&s.space, &p.material, Execution::Parallel);
        let f = assemble_load(&s.space, &*p.volume_force, &*p.traction, Execution::Parallel);
        energies.push(energy(&k, &f, &s.solution.coeffs));
        Ok(())
    })
    .unwrap();
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{energies:?}");
    }
}

#[test]
fn effectivity_stays_in_band() {
    let p = Problem::contact_bottom().unwrap();
    let h = run(&p, &opts(8000, Execution::Parallel));
    let eff: Vec<f64> = h.rows.iter().map(|r| r.effectivity.unwrap()).collect();
    assert!(eff.len() > 6);
    let (m, big_m) = eff[2..=4].iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(eff[2..].iter().all(|&e| e >= 0.5 * m && e <= 2.0 * big_m), "{eff:?}");
}

#[test]
fn estimator_structure_on_obstacle_example() {
    let p = Problem::obstacle_right().unwrap();
    let mut semi = false;
    adaptive_solve(&p, &opts(3000, Execution::Parallel), |s| {
        let r = &s.report;
        assert!(r.eta.iter().all(|&e| e <= r.total));
        let sum: f64 = r.element_indicators.iter().sum();
        assert!((sum - r.total * r.total).abs() <= 1e-10 * r.total * r.total);
        assert!(r.osc_f == 0.0 && r.osc_g == 0.0);
        semi |= s.density.classes.contains(&ContactClass::SemiContact);
        Ok(())
    })
    .unwrap();
    assert!(semi, "the obstacle creates a free boundary");
}

/// The literal normal-stress term does not vanish for the exact solution
/// when contact is active, which caps the estimator at `Ndof^{-1/2}`.
#[test]
fn raw_contact_residual_limits_the_rate() {
    let p = Problem::contact_bottom().unwrap();
    let mut o = opts(6000, Execution::Parallel);
    let balanced = run(&p, &o);
    o.estimator.contact_residual = ContactResidual::Raw;
    let raw = run(&p, &o);
    let slope = |h: &ConvergenceHistory| {
        let tail = &h.rows[h.rows.len() / 2..];
        let n: Vec<f64> = tail.iter().map(|r| r.ndof as f64).collect();
        let e: Vec<f64> = tail.iter().map(|r| r.total).collect();
        loglog_slope(&n, &e)
    };
    let (sb, sr) = (slope(&balanced), slope(&raw));
    assert!(sb < -0.85, "balanced slope {sb}");
    assert!(sr > -0.75, "raw slope {sr}");
    let last = raw.rows.last().unwrap();
    assert!(last.eta[4] > 0.5 * last.total, "normal stress term dominates: {:?}", last.eta);
}

#[test]
fn neumann_jump_of_exact_interpolant_decays() {
    let p = Problem::contact_bottom().unwrap();
    let exact = p.exact.clone().unwrap();
    let data = ProblemData {
        material: p.material,
        volume_force: &*p.volume_force,
        traction: &*p.traction,
        obstacle: &*p.obstacle,
    };
    let mut mesh = p.initial_mesh.clone();
    let mut norms = Vec::new();
    for _ in 0..4 {
        let space = FeSpace::new(mesh.clone()).unwrap();
        let u = space.interpolate(|x| exact(x).value);
        let sq: f64 = (0..mesh.n_edges())
            .filter(|&e| mesh.edges()[e].kind == Some(BoundaryKind::Neumann))
            .map(|e| edge_jump(&space, &u, &data, e, EdgeKind::Neumann, None).unwrap().powi(2))
            .sum();
        norms.push(sq.sqrt());
        mesh = mesh.refine_uniform().unwrap();
    }
    for w in norms.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.0, "{norms:?}");
    }
}

#[test]
fn adaptive_and_uniform_estimators_are_logged() {
    let p = Problem::obstacle_right().unwrap();
    let adaptive = run(&p, &opts(6000, Execution::Parallel));
    let o = opts(usize::MAX, Execution::Parallel);
    let mut mesh = p.initial_mesh.clone();
    let mut level = 0;
    loop {
        let s = solve_level(&p, mesh.clone(), level, &o).unwrap();
        let n = s.space.n_free();
        // adaptive estimator at the nearest larger dof count
        if let Some(a) = adaptive.rows.iter().find(|r| r.ndof >= n) {
            eprintln!("ndof {n}: uniform eta {:.4e}, adaptive eta {:.4e} at {}", s.report.total, a.total, a.ndof);
            assert!(a.total > 0.0 && s.report.total > 0.0);
        } else {
            break;
        }
        mesh = mesh.refine_uniform().unwrap();
        level += 1;
    }
}
