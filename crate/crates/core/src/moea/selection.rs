//! Ranked individuals, binary tournament and Top-N survival.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ranking::{crowding_distance, non_dominated_sort};
use crate::policy::Genome;
use crate::risk::RiskEstimate;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedIndividual {
    pub genome: Genome,
    pub fitness: Vec<f64>,
    /// Tail statistics when the individual was scored by CVaR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskEstimate>,
    /// 1-based front index; 0 until ranked.
    pub rank: usize,
    /// `null` in JSON when infinite.
    #[serde(with = "infinite_as_null")]
    pub crowding: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl EvaluatedIndividual {
    pub fn new(genome: Genome, fitness: Vec<f64>, risk: Option<RiskEstimate>) -> Self {
        Self {
            genome,
            fitness,
            risk,
            rank: 0,
            crowding: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub generation: usize,
    pub members: Vec<EvaluatedIndividual>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members of the first front.
    pub fn front(&self) -> impl Iterator<Item = &EvaluatedIndividual> {
        self.members.iter().filter(|m| m.rank == 1)
    }
}

/// Sorts `members` into fronts and writes `rank` and `crowding` in place.
/// Returns the fronts as index lists.
pub fn assign_rank_and_crowding(members: &mut [EvaluatedIndividual]) -> Vec<Vec<usize>> {
    let fronts = {
        let fits: Vec<&[f64]> = members.iter().map(|m| m.fitness.as_slice()).collect();
        non_dominated_sort(&fits)
    };
    for (r, front) in fronts.iter().enumerate() {
        let dist = {
            let pts: Vec<&[f64]> = front.iter().map(|&i| members[i].fitness.as_slice()).collect();
            crowding_distance(&pts)
        };
        for (&i, d) in front.iter().zip(dist) {
            members[i].rank = r + 1;
            members[i].crowding = d;
        }
    }
    fronts
}

/// Crowded comparison: lower rank wins, then larger crowding distance.
pub fn crowded_cmp(a: &EvaluatedIndividual, b: &EvaluatedIndividual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

/// Binary tournament on two distinct members drawn uniformly; exact ties are
/// settled by a fair coin. Returns the winner's index.
///
/// Panics on populations smaller than two.
pub fn tournament_select(members: &[EvaluatedIndividual], rng: &mut SimRng) -> usize {
    let n = members.len();
    assert!(n >= 2, "tournament needs at least two members");
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    match crowded_cmp(&members[a], &members[b]) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

/// Top-N survival over the union of parents and offspring.
///
/// Whole fronts are kept while they fit; the first front that overflows is
/// cut by descending crowding distance, ties going to the lower index in
/// `combined`. Ranks and crowding distances are those of the combined pool.
pub fn survival_select(mut combined: Vec<EvaluatedIndividual>, n: usize) -> Vec<EvaluatedIndividual> {
    let fronts = assign_rank_and_crowding(&mut combined);
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front);
            continue;
        }
        let mut rest = front;
        rest.sort_by(|&a, &b| {
            combined[b]
                .crowding
                .partial_cmp(&combined[a].crowding)
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        rest.truncate(n - keep.len());
        keep.extend(rest);
        break;
    }
    let mut slots: Vec<Option<EvaluatedIndividual>> = combined.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("each index kept once"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Architecture;
    use crate::rng::stream;

    fn ind(f: &[f64]) -> EvaluatedIndividual {
        let arch = Architecture::new(1, vec![], 1, 1);
        EvaluatedIndividual::new(Genome::zeros(&arch), f.to_vec(), None)
    }

    #[test]
    fn ranks_are_one_based() {
        let mut m = vec![ind(&[1.0, 1.0]), ind(&[2.0, 2.0]), ind(&[0.0, 3.0])];
        assign_rank_and_crowding(&mut m);
        assert_eq!(m.iter().map(|x| x.rank).collect::<Vec<_>>(), vec![2, 1, 1]);
    }

    #[test]
    fn tournament_prefers_better_rank() {
        let mut m = vec![ind(&[0.0, 0.0]), ind(&[5.0, 5.0])];
        assign_rank_and_crowding(&mut m);
        let mut rng = stream(1, &[]);
        for _ in 0..50 {
            assert_eq!(tournament_select(&m, &mut rng), 1);
        }
    }

    #[test]
    fn tournament_tie_is_a_coin_flip() {
        let mut m = vec![ind(&[0.0, 1.0]), ind(&[1.0, 0.0])];
        assign_rank_and_crowding(&mut m);
        let mut rng = stream(2, &[]);
        let wins = (0..4000).filter(|_| tournament_select(&m, &mut rng) == 0).count();
        assert!((1800..2200).contains(&wins), "{wins}");
    }

    #[test]
    fn survival_cuts_by_crowding() {
        // One front of five on a line plus a dominated point.
        let pts = [[0.0, 4.0], [1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [4.0, 0.0], [0.0, 0.0]];
        let combined: Vec<_> = pts.iter().map(|p| ind(p)).collect();
        let kept = survival_select(combined, 3);
        let fits: Vec<_> = kept.iter().map(|k| k.fitness.clone()).collect();
        // both extremes (infinite distance) then the lowest-index interior
        assert_eq!(fits, vec![vec![0.0, 4.0], vec![4.0, 0.0], vec![1.0, 3.0]]);
    }

    #[test]
    fn survival_keeps_whole_fronts_first() {
        let pts = [[0.0, 0.0], [3.0, 3.0], [1.0, 1.0], [2.0, 2.0]];
        let kept = survival_select(pts.iter().map(|p| ind(p)).collect(), 2);
        assert_eq!(kept[0].fitness, vec![3.0, 3.0]);
        assert_eq!(kept[1].fitness, vec![2.0, 2.0]);
        assert_eq!((kept[0].rank, kept[1].rank), (1, 2));
    }
}
