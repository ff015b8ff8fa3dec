//! `H^{1/2}` norm of piecewise quadratic traces on a polygonal curve:
//! `||v||^2 = ||v||^2_{L^2} + int int |v(x) - v(y)|^2 / |x - y|^2 ds_x ds_y`.
//!
//! The curve is cut into pieces on which `v` is one polynomial. Pairs are
//! integrated as follows:
//! * a piece with itself: the difference quotient is a polynomial, so a
//!   tensor Gauss rule is exact;
//! * two pieces sharing an endpoint: the bounded but direction-dependent
//!   integrand is regularized with a Duffy substitution on an equal-length
//!   corner square, the remainder is treated as separated;
//! * separated pieces: tensor Gauss, after recursive bisection while the
//!   pieces are close compared with their size.

use crate::mesh::Point;
use crate::quadrature::{gauss_line, LineRule};

/// One straight segment of the trace with quadratic values at its start,
/// midpoint and end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSegment {
    pub start: Point,
    pub end: Point,
    pub values: [f64; 3],
}

/// Norm parts and a per-segment split of the squared norm: each segment gets
/// its own `L^2` part, its self-interaction, and half of every pair
/// interaction it takes part in.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfNorm {
    pub l2_sq: f64,
    pub semi_sq: f64,
    pub per_segment: Vec<f64>,
}

impl HalfNorm {
    pub fn norm(&self) -> f64 {
        (self.l2_sq + self.semi_sq).sqrt()
    }
}

/// Polynomial `c0 + c1 t + c2 t^2` on the straight piece `p0 -> p1`, `t` in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    p0: Point,
    p1: Point,
    c: [f64; 3],
    segment: usize,
}

impl Piece {
    fn len(&self) -> f64 {
        ((self.p1[0] - self.p0[0]).powi(2) + (self.p1[1] - self.p0[1]).powi(2)).sqrt()
    }

    fn at(&self, t: f64) -> (Point, f64) {
        let x = [self.p0[0] + t * (self.p1[0] - self.p0[0]), self.p0[1] + t * (self.p1[1] - self.p0[1])];
        (x, self.c[0] + t * (self.c[1] + t * self.c[2]))
    }

    fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// Restriction to `[a, b]`, reparametrized over `[0, 1]`.
    fn sub(&self, a: f64, b: f64) -> Piece {
        let d = b - a;
        let [c0, c1, c2] = self.c;
        let (p0, _) = self.at(a);
        let (p1, _) = self.at(b);
        Piece {
            p0,
            p1,
            c: [c0 + a * (c1 + a * c2), d * (c1 + 2.0 * a * c2), d * d * c2],
            segment: self.segment,
        }
    }

    fn flipped(&self) -> Piece {
        let [c0, c1, c2] = self.c;
        Piece { p0: self.p1, p1: self.p0, c: [c0 + c1 + c2, -c1 - 2.0 * c2, c2], segment: self.segment }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Monomial coefficients of the quadratic through `(0, v0), (1/2, vm), (1, v1)`.
fn monomial(v: [f64; 3]) -> [f64; 3] {
    let [v0, vm, v1] = v;
    [v0, -3.0 * v0 + 4.0 * vm - v1, 2.0 * v0 - 4.0 * vm + 2.0 * v1]
}

/// Sorted roots of `c0 + c1 t + c2 t^2` strictly inside `(0, 1)`.
fn interior_roots(c: [f64; 3]) -> Vec<f64> {
    let [c0, c1, c2] = c;
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    let mut roots = Vec::new();
    if scale == 0.0 {
        return roots;
    }
    if c2.abs() <= 1e-14 * scale {
        if c1 != 0.0 {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc > 0.0 {
            // numerically stable pair
            let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
            let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
            roots.push(q / c2);
            if q != 0.0 {
                roots.push(c0 / q);
            }
        }
    }
    roots.retain(|&t| t > 1e-14 && t < 1.0 - 1e-14);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup();
    roots
}

fn build_pieces(segments: &[TraceSegment], positive_part: bool) -> Vec<Piece> {
    let mut pieces = Vec::with_capacity(segments.len());
    for (s, seg) in segments.iter().enumerate() {
        let whole = Piece { p0: seg.start, p1: seg.end, c: monomial(seg.values), segment: s };
        if !positive_part {
            if whole.len() > 0.0 {
                pieces.push(whole);
            }
            continue;
        }
        let mut cuts = vec![0.0];
        cuts.extend(interior_roots(whole.c));
        cuts.push(1.0);
        let mut last_end = whole.p0;
        for w in cuts.windows(2) {
            let mut p = if w[0] == 0.0 && w[1] == 1.0 { whole } else { whole.sub(w[0], w[1]) };
            // share endpoints exactly between consecutive pieces
            p.p0 = last_end;
            if w[1] == 1.0 {
                p.p1 = whole.p1;
            }
            last_end = p.p1;
            if p.len() == 0.0 {
                continue;
            }
            let (_, mid) = p.at(0.5);
            if mid <= 0.0 {
                p.c = [0.0; 3];
            }
            pieces.push(p);
        }
    }
    pieces
}

struct Rules {
    self_rule: LineRule,
    duffy: LineRule,
    far: LineRule,
}

/// Norm of `v` itself.
pub fn h_half_norm(segments: &[TraceSegment]) -> HalfNorm {
    evaluate(segments, false)
}

/// Norm of the positive part `max(v, 0)`.
pub fn positive_part_norm(segments: &[TraceSegment]) -> HalfNorm {
    evaluate(segments, true)
}

fn evaluate(segments: &[TraceSegment], positive_part: bool) -> HalfNorm {
    let pieces = build_pieces(segments, positive_part);
    let rules = Rules { self_rule: gauss_line(3), duffy: gauss_line(10), far: gauss_line(10) };
    let mut per_segment = vec![0.0; segments.len()];
    let mut l2_sq = 0.0;
    let mut semi_sq = 0.0;
    for p in &pieces {
        if p.is_zero() {
            continue;
        }
        let l2: f64 =
            rules.self_rule.points.iter().zip(&rules.self_rule.weights).map(|(t, w)| w * p.at(*t).1.powi(2)).sum::<f64>()
                * p.len();
        let own = self_term(p, &rules.self_rule);
        l2_sq += l2;
        semi_sq += own;
        per_segment[p.segment] += l2 + own;
    }
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let (a, b) = (&pieces[i], &pieces[j]);
            if a.is_zero() && b.is_zero() {
                continue;
            }
            // both orders (x in a, y in b) and (x in b, y in a)
            let v = 2.0 * pair_term(a, b, &rules);
            semi_sq += v;
            per_segment[a.segment] += 0.5 * v;
            per_segment[b.segment] += 0.5 * v;
        }
    }
    HalfNorm { l2_sq, semi_sq, per_segment }
}

/// `int int (q(s) - q(t))^2 / (L |s - t|)^2 L^2 ds dt = int int (c1 + c2 (s + t))^2`.
fn self_term(p: &Piece, rule: &LineRule) -> f64 {
    let [_, c1, c2] = p.c;
    let mut acc = 0.0;
    for (s, ws) in rule.points.iter().zip(&rule.weights) {
        for (t, wt) in rule.points.iter().zip(&rule.weights) {
            acc += ws * wt * (c1 + c2 * (s + t)).powi(2);
        }
    }
    acc
}

fn pair_term(a: &Piece, b: &Piece, rules: &Rules) -> f64 {
    let shared = [(a.p0, false, b.p0, false), (a.p0, false, b.p1, true), (a.p1, true, b.p0, false), (a.p1, true, b.p1, true)]
        .into_iter()
        .find(|(x, _, y, _)| x == y);
    match shared {
        Some((_, flip_a, _, flip_b)) => {
            let a = if flip_a { a.flipped() } else { *a };
            let b = if flip_b { b.flipped() } else { *b };
            corner_term(&a, &b, rules)
        }
        None => separated_term(a, b, rules, 0),
    }
}

/// Both pieces start at the common point.
fn corner_term(a: &Piece, b: &Piece, rules: &Rules) -> f64 {
    let (la, lb) = (a.len(), b.len());
    let m = la.min(lb);
    let (ta, tb) = (m / la, m / lb);
    let sa = if ta < 1.0 { a.sub(0.0, ta) } else { *a };
    let sb = if tb < 1.0 { b.sub(0.0, tb) } else { *b };
    let mut acc = duffy_square(&sa, &sb, &rules.duffy);
    if ta < 1.0 {
        acc += separated_term(&a.sub(ta, 1.0), &sb, rules, 0);
    }
    if tb < 1.0 {
        acc += separated_term(&sa, &b.sub(tb, 1.0), rules, 0);
    }
    acc
}

/// Corner square of two equal-length pieces meeting at their starts,
/// split along the diagonal with `(s, t) = (u, u w)` and `(u w, u)`.
fn duffy_square(a: &Piece, b: &Piece, rule: &LineRule) -> f64 {
    let (la, lb) = (a.len(), b.len());
    let mut acc = 0.0;
    for (u, wu) in rule.points.iter().zip(&rule.weights) {
        for (w, ww) in rule.points.iter().zip(&rule.weights) {
            for (s, t) in [(*u, u * w), (u * w, *u)] {
                let (x, vx) = a.at(s);
                let (y, vy) = b.at(t);
                let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                if d2 > 0.0 {
                    acc += wu * ww * u * (vx - vy).powi(2) / d2;
                }
            }
        }
    }
    acc * la * lb
}

fn separated_term(a: &Piece, b: &Piece, rules: &Rules, depth: usize) -> f64 {
    if a.is_zero() && b.is_zero() {
        return 0.0;
    }
    let (la, lb) = (a.len(), b.len());
    let gap = segment_distance(a, b);
    if gap < la.max(lb) && depth < 48 {
        // bisect the longer piece
        return if la >= lb {
            separated_term(&a.sub(0.0, 0.5), b, rules, depth + 1) + separated_term(&a.sub(0.5, 1.0), b, rules, depth + 1)
        } else {
            separated_term(a, &b.sub(0.0, 0.5), rules, depth + 1) + separated_term(a, &b.sub(0.5, 1.0), rules, depth + 1)
        };
    }
    let r = &rules.far;
    let mut acc = 0.0;
    for (s, ws) in r.points.iter().zip(&r.weights) {
        let (x, vx) = a.at(*s);
        for (t, wt) in r.points.iter().zip(&r.weights) {
            let (y, vy) = b.at(*t);
            let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
            acc += ws * wt * (vx - vy).powi(2) / d2;
        }
    }
    acc * la * lb
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Distance between two non-crossing segments.
fn segment_distance(a: &Piece, b: &Piece) -> f64 {
    point_segment_distance(a.p0, b.p0, b.p1)
        .min(point_segment_distance(a.p1, b.p0, b.p1))
        .min(point_segment_distance(b.p0, a.p0, a.p1))
        .min(point_segment_distance(b.p1, a.p0, a.p1))
}
