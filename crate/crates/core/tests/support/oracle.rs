//! Brute-force reference implementations used to cross-check the optimized
//! MOEA routines. Written for clarity, not speed.
#![allow(dead_code)]

/// `a` is no worse everywhere and better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let no_worse = (0..a.len()).all(|k| a[k] >= b[k]);
    let better = (0..a.len()).any(|k| a[k] > b[k]);
    no_worse && better
}

/// Fronts by repeated peeling: the next front is everything left that no
/// remaining point dominates.
pub fn fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        out.push(front);
    }
    out
}

/// Crowding distance using explicit rank positions: position of `i` along
/// objective `k` is the number of members strictly below it plus the number
/// of equal members with a smaller index.
pub fn crowding(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    for k in 0..front[0].len() {
        let pos = |i: usize| {
            (0..n)
                .filter(|&j| front[j][k] < front[i][k] || (front[j][k] == front[i][k] && j < i))
                .count()
        };
        let at = |p: usize| (0..n).find(|&j| pos(j) == p).unwrap();
        let lo = front.iter().map(|f| f[k]).fold(f64::INFINITY, f64::min);
        let hi = front.iter().map(|f| f[k]).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            let p = pos(i);
            if p == 0 || p == n - 1 {
                dist[i] = f64::INFINITY;
            } else if hi > lo {
                dist[i] += (front[at(p + 1)][k] - front[at(p - 1)][k]) / (hi - lo);
            }
        }
    }
    dist
}

/// Indices kept by Top-N survival: whole fronts while they fit, then the
/// overflowing front by descending crowding, lower index first on ties.
pub fn survivors(points: &[Vec<f64>], n: usize) -> Vec<usize> {
    let mut keep = Vec::new();
    for front in fronts(points) {
        if keep.len() + front.len() <= n {
            keep.extend(front);
            continue;
        }
        let members: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        let d = crowding(&members);
        let mut order: Vec<usize> = (0..front.len()).collect();
        // selection by repeated maximum to stay independent of sort routines
        let mut picked = Vec::new();
        while keep.len() + picked.len() < n {
            let best = *order
                .iter()
                .max_by(|&&a, &&b| {
                    d[a].partial_cmp(&d[b]).unwrap().then(front[b].cmp(&front[a]))
                })
                .unwrap();
            order.retain(|&o| o != best);
            picked.push(front[best]);
        }
        keep.extend(picked);
        break;
    }
    keep
}

/// Exact hypervolume by coordinate compression: sum every grid cell whose
/// upper corner is dominated by some point.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = points.iter().map(|p| p[j]).chain([reference[j]]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    if axes.iter().any(|a| a.len() < 2) {
        return 0.0;
    }
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let upper: Vec<f64> = (0..d).map(|j| axes[j][idx[j] + 1]).collect();
        if points.iter().any(|p| (0..d).all(|j| p[j] >= upper[j])) {
            total += (0..d).map(|j| axes[j][idx[j] + 1] - axes[j][idx[j]]).product::<f64>();
        }
        let mut j = 0;
        loop {
            if j == d {
                return total;
            }
            idx[j] += 1;
            if idx[j] + 1 < axes[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}
