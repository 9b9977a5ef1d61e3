//! Independent reference computations: exact integer geometry and
//! exhaustive threshold sweeps over integer-valued scores.

pub type P = (i64, i64);

pub fn orient(a: P, b: P, c: P) -> i128 {
    let (ax, ay, bx, by, cx, cy) = (a.0 as i128, a.1 as i128, b.0 as i128, b.1 as i128, c.0 as i128, c.1 as i128);
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Positive when `d` is strictly inside the circle through CCW `a, b, c`.
pub fn incircle(a: P, b: P, c: P, d: P) -> i128 {
    let row = |p: P| {
        let (x, y) = ((p.0 - d.0) as i128, (p.1 - d.1) as i128);
        (x, y, x * x + y * y)
    };
    let (ax, ay, aa) = row(a);
    let (bx, by, bb) = row(b);
    let (cx, cy, cc) = row(c);
    ax * (by * cc - bb * cy) - ay * (bx * cc - bb * cx) + aa * (bx * cy - by * cx)
}

/// Twice the convex hull area (monotone chain).
pub fn hull_area2(pts: &[P]) -> i128 {
    let mut v = pts.to_vec();
    v.sort();
    let mut hull: Vec<P> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &P>> = if pass == 0 { Box::new(v.iter()) } else { Box::new(v.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    (0..hull.len())
        .map(|k| {
            let (a, b) = (hull[k], hull[(k + 1) % hull.len()]);
            a.0 as i128 * b.1 as i128 - b.0 as i128 * a.1 as i128
        })
        .sum()
}

pub fn all_collinear(pts: &[P]) -> bool {
    pts.iter().all(|&c| orient(pts[0], pts[1], c) == 0)
}

/// Rates by direct counting.
pub fn rates(g: &[i32], i: &[i32], t: f64) -> (f64, f64) {
    let far = i.iter().filter(|&&s| f64::from(s) <= t).count() as f64 / i.len() as f64;
    let frr = g.iter().filter(|&&s| f64::from(s) > t).count() as f64 / g.len() as f64;
    (far, frr)
}

/// With integer scores every threshold is equivalent to one of: below
/// everything, a half-integer, or above everything.
pub fn grid(g: &[i32], i: &[i32]) -> Vec<f64> {
    let lo = *g.iter().chain(i).min().unwrap();
    let hi = *g.iter().chain(i).max().unwrap();
    let mut ts = vec![f64::NEG_INFINITY];
    ts.extend((lo..hi).map(|v| f64::from(v) + 0.5));
    ts.push(f64::INFINITY);
    ts
}

pub fn oracle_eer(g: &[i32], i: &[i32]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for t in grid(g, i) {
        let (far, frr) = rates(g, i, t);
        if (far - frr).abs() < best.0 {
            best = ((far - frr).abs(), (far + frr) / 2.0, t);
        }
    }
    (best.1, best.2)
}

/// Distinct `(FAR + FRR) / 2` values over every cut attaining the minimum gap.
pub fn minimizing_rates(g: &[i32], i: &[i32]) -> Vec<f64> {
    let all: Vec<(f64, f64)> = grid(g, i).into_iter().map(|t| rates(g, i, t)).collect();
    let min = all.iter().map(|(a, b)| (a - b).abs()).fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = all
        .iter()
        .filter(|(a, b)| (a - b).abs() == min)
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

pub fn oracle_frr_at(g: &[i32], i: &[i32], target: f64) -> (f64, f64) {
    let t = grid(g, i)
        .into_iter()
        .filter(|&t| rates(g, i, t).0 <= target)
        .fold(f64::NEG_INFINITY, f64::max);
    (rates(g, i, t).1, t)
}

pub fn f(xs: &[i32]) -> Vec<f64> {
    xs.iter().map(|&x| f64::from(x)).collect()
}

/// Both thresholds split the scores identically.
pub fn same_cut(g: &[i32], i: &[i32], a: f64, b: f64) -> bool {
    g.iter().chain(i).all(|&s| (f64::from(s) <= a) == (f64::from(s) <= b))
}

