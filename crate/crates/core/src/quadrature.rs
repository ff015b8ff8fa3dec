//! Symmetric triangle rules and Gauss–Legendre edge rules.
//!
//! Triangle points are barycentric triples; weights sum to 1 and are scaled
//! by the triangle area at the call site.

/// A rule on the reference simplex: barycentric points and weights summing to 1.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// A rule on `[0, 1]`: points in parameter space, weights summing to 1.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

fn push_orbit3(rule: &mut TriangleRule, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        rule.points.push(p);
        rule.weights.push(w);
    }
}

fn push_orbit6(rule: &mut TriangleRule, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        rule.points.push(p);
        rule.weights.push(w);
    }
}

/// Six-point rule, exact for polynomials of total degree 4.
pub fn triangle_degree4() -> TriangleRule {
    let mut r = TriangleRule { points: Vec::with_capacity(6), weights: Vec::with_capacity(6) };
    push_orbit3(&mut r, 0.445_948_490_915_965, 0.223_381_589_678_011);
    push_orbit3(&mut r, 0.091_576_213_509_771, 0.109_951_743_655_322);
    r
}

/// Twelve-point rule, exact for polynomials of total degree 6.
pub fn triangle_degree6() -> TriangleRule {
    let mut r = TriangleRule { points: Vec::with_capacity(12), weights: Vec::with_capacity(12) };
    push_orbit3(&mut r, 0.249_286_745_170_910, 0.116_786_275_726_379);
    push_orbit3(&mut r, 0.063_089_014_491_502, 0.050_844_906_370_207);
    push_orbit6(&mut r, 0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374);
    r
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`, nodes by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_line(n: usize) -> LineRule {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1], ascending order
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    LineRule { points, weights }
}

/// Three-point Gauss rule on `[0, 1]`, exact to degree 5.
pub fn gauss3() -> LineRule {
    let d = 0.5 * 0.6f64.sqrt();
    LineRule {
        points: vec![0.5 - d, 0.5, 0.5 + d],
        weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Integral of x^a y^b over the unit right triangle.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn integrate(rule: &TriangleRule, a: u32, b: u32) -> f64 {
        // vertices (0,0), (1,0), (0,1): x = l1, y = l2, area 1/2
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
            .sum::<f64>()
            * 0.5
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for (rule, deg) in [(triangle_degree4(), 4), (triangle_degree6(), 6)] {
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for p in &rule.points {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let q = integrate(&rule, a, b);
                    let e = monomial_exact(a, b);
                    assert!((q - e).abs() < 1e-13, "degree {deg}: x^{a} y^{b}: {q} vs {e}");
                }
            }
        }
    }

    #[test]
    fn degree4_rule_is_not_exact_at_degree6() {
        let r = triangle_degree4();
        assert!((integrate(&r, 6, 0) - monomial_exact(6, 0)).abs() > 1e-8);
    }

    #[test]
    fn gauss_rules_match_closed_forms() {
        let g = gauss_line(3);
        let h = gauss3();
        for i in 0..3 {
            assert!((g.points[i] - h.points[i]).abs() < 1e-15);
            assert!((g.weights[i] - h.weights[i]).abs() < 1e-15);
        }
        for n in 1..=10 {
            let r = gauss_line(n);
            for k in 0..2 * n {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
