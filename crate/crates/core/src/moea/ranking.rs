//! Pareto dominance, non-dominated sorting and crowding distance.
//!
//! All fitness vectors use the maximize-every-objective convention.

use std::cmp::Ordering;

/// `a` dominates `b` when it is at least as good everywhere and the vectors
/// differ. Comparisons are exact; fitness values are finite by construction.
///
/// Panics if the lengths differ.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(a.len(), b.len(), "dominates: objective count mismatch");
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Returns fronts `F_1, F_2, ...` as index lists
/// (ascending within each front); together they partition `0..fitness.len()`.
pub fn non_dominated_sort<F: AsRef<[f64]>>(fitness: &[F]) -> Vec<Vec<usize>> {
    let n = fitness.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];

    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (fitness[i].as_ref(), fitness[j].as_ref());
            if dominates(a, b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(b, a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`.
///
/// Per objective the front is sorted ascending (ties broken by position in
/// `front`); the first and last members get `+inf`, interior members add
/// `(next - prev) / (max - min)`. Objectives with `max == min` add nothing.
/// Fronts of one or two members are all boundary.
pub fn crowding_distance<F: AsRef<[f64]>>(front: &[F]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let n_obj = front[0].as_ref().len();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..n_obj {
        let value = |i: usize| front[i].as_ref()[k];
        order.sort_by(|&a, &b| {
            value(a)
                .partial_cmp(&value(b))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let (min, max) = (value(order[0]), value(order[n - 1]));
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let span = max - min;
        if span <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let (prev, mid, next) = (w[0], w[1], w[2]);
            distance[mid] += (value(next) - value(prev)) / span;
        }
    }
    distance
}
