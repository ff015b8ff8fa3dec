//! Text output: convergence history, legacy VTK fields, contact density
//! profiles and flat estimator tables.

use std::fmt::Write as _;

use crate::adapt::ConvergenceHistory;
use crate::contact_force::ContactDensity;
use crate::estimator::EstimatorReport;
use crate::fespace::FeSpace;

pub const HISTORY_HEADER: &str = "level,ndof,eta1,eta2,eta3,eta4,eta5,eta6,eta7,eta,err,eff,iters,minangle";

/// History as CSV with [`HISTORY_HEADER`]; absent error columns are empty.
pub fn history_csv(history: &ConvergenceHistory) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in &history.rows {
        let _ = write!(out, "{},{}", r.level, r.ndof);
        for e in r.eta {
            let _ = write!(out, ",{e:e}");
        }
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        let _ = writeln!(
            out,
            ",{:e},{},{},{},{}",
            r.total,
            opt(r.error),
            opt(r.effectivity),
            r.pdas_iterations,
            r.min_angle
        );
    }
    out
}

/// Legacy ASCII VTK unstructured grid of quadratic triangles with the
/// displacement as point vectors.
pub fn vtk_field(space: &FeSpace, coeffs: &[f64], title: &str) -> String {
    let nodes = space.nodes();
    let nt = space.mesh().n_triangles();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.replace('\n', " "));
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", nodes.len());
    for p in nodes {
        let _ = writeln!(out, "{:?} {:?} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {nt} {}", nt * 7);
    for t in 0..nt {
        let c = space.cell_nodes(t);
        // VTK orders the midpoints (0,1), (1,2), (2,0); local edge i is opposite vertex i
        let _ = writeln!(out, "6 {} {} {} {} {} {}", c[0], c[1], c[2], c[5], c[3], c[4]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("22\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", nodes.len());
    let _ = writeln!(out, "VECTORS displacement double");
    for p in 0..nodes.len() {
        let _ = writeln!(out, "{:?} {:?} 0", coeffs[2 * p], coeffs[2 * p + 1]);
    }
    out
}

/// Contact density along the contact boundary: `arc_length value`
/// per contact node, ordered along the boundary.
pub fn density_profile(space: &FeSpace, density: &ContactDensity) -> String {
    let mut out = String::from("# arc_length density\n");
    let Some(normal) = space.contact_normal() else {
        return out;
    };
    let along = 1 - normal.axis;
    let mut rows: Vec<(f64, f64)> = space
        .contact_nodes()
        .iter()
        .zip(&density.s1)
        .map(|(&p, &s)| (space.nodes()[p][along], s))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let start = rows.first().map_or(0.0, |r| r.0);
    for (x, s) in rows {
        let _ = writeln!(out, "{:?} {:?}", x - start, s);
    }
    out
}

/// One row per contribution: `kind id term value`.
pub fn report_table(report: &EstimatorReport) -> String {
    let mut out = String::from("# kind id term value\n");
    for n in &report.per_node {
        for (k, v) in n.parts.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "node {} eta{} {v:e}", n.node, k + 1);
            }
        }
    }
    for (t, v) in report.element_indicators.iter().enumerate() {
        let _ = writeln!(out, "element {t} indicator {v:e}");
    }
    for (k, v) in report.eta.iter().enumerate() {
        let _ = writeln!(out, "total - eta{} {v:e}", k + 1);
    }
    let _ = writeln!(out, "total - eta {:e}", report.total);
    let _ = writeln!(out, "total - osc_f {:e}", report.osc_f);
    let _ = writeln!(out, "total - osc_g {:e}", report.osc_g);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::HistoryRow;
    use crate::mesh::{MarkerLayout, Mesh};

    #[test]
    fn csv_has_stable_schema() {
        let h = ConvergenceHistory {
            rows: vec![HistoryRow {
                level: 0,
                ndof: 10,
                eta: [1.0; 7],
                total: 2.0,
                error: None,
                effectivity: None,
                pdas_iterations: 3,
                min_angle: 45.0,
            }],
        };
        let csv = history_csv(&h);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(HISTORY_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), HISTORY_HEADER.split(',').count());
        assert_eq!(row[10], "");
        assert_eq!(row[12], "3");
    }

    #[test]
    fn vtk_counts() {
        let s = FeSpace::new(Mesh::unit_square(1, MarkerLayout::clamped_top_contact_bottom()).unwrap()).unwrap();
        let u = vec![0.5; s.n_dofs()];
        let v = vtk_field(&s, &u, "t");
        assert!(v.contains("POINTS 9 double"));
        assert!(v.contains("CELLS 2 14"));
        assert!(v.contains("POINT_DATA 9"));
        // the first midpoint listed joins the first two corners
        let cell: Vec<usize> = v.lines().find(|l| l.starts_with("6 ")).unwrap().split(' ').skip(1).map(|x| x.parse().unwrap()).collect();
        let (a, b, m) = (s.nodes()[cell[0]], s.nodes()[cell[1]], s.nodes()[cell[3]]);
        assert_eq!(m, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
    }
}
