//! Simulated binary crossover and Gaussian mutation on flat genomes.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::PolicyError;
use crate::policy::Genome;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationParams {
    /// Probability that a parent pair is recombined at all.
    pub crossover_prob: f64,
    /// SBX distribution index.
    pub eta_c: f64,
    /// Per-weight mutation probability; `None` means `1 / n_params`.
    pub mutation_prob: Option<f64>,
    pub mutation_sigma: f64,
    /// Mutated weights are clipped to `[-limit, limit]`.
    pub weight_limit: f64,
}

impl Default for VariationParams {
    fn default() -> Self {
        Self {
            crossover_prob: 0.9,
            eta_c: 15.0,
            mutation_prob: None,
            mutation_sigma: 0.1,
            weight_limit: 10.0,
        }
    }
}

impl VariationParams {
    pub fn validate(&self) -> Result<(), String> {
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !prob(self.crossover_prob) {
            return Err(format!("crossover probability {} outside [0, 1]", self.crossover_prob));
        }
        if !(self.eta_c >= 0.0 && self.eta_c.is_finite()) {
            return Err(format!("eta_c must be finite and non-negative, got {}", self.eta_c));
        }
        if let Some(p) = self.mutation_prob {
            if !prob(p) {
                return Err(format!("mutation probability {p} outside [0, 1]"));
            }
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return Err(format!("mutation sigma must be finite and non-negative, got {}", self.mutation_sigma));
        }
        if !(self.weight_limit > 0.0) {
            return Err(format!("weight limit must be positive, got {}", self.weight_limit));
        }
        Ok(())
    }
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta_c: f64) -> f64 {
    let e = 1.0 / (eta_c + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// SBX on two parameter vectors of equal length.
///
/// With probability `crossover_prob` every coordinate is recombined; each
/// child pair then swaps with probability one half so neither child is biased
/// toward one parent. Otherwise the parents are copied. In both cases
/// `c1[i] + c2[i] == x1[i] + x2[i]` up to rounding.
pub fn sbx(x1: &[f64], x2: &[f64], params: &VariationParams, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(x1.len(), x2.len(), "sbx: parent length mismatch");
    if !rng.random_bool(params.crossover_prob) {
        return (x1.to_vec(), x2.to_vec());
    }
    let mut c1 = Vec::with_capacity(x1.len());
    let mut c2 = Vec::with_capacity(x1.len());
    for (&a, &b) in x1.iter().zip(x2) {
        let beta = sbx_beta(rng.random::<f64>(), params.eta_c);
        let mid = 0.5 * (a + b);
        let half = 0.5 * beta * (a - b);
        let (y1, y2) = (mid + half, mid - half);
        if rng.random_bool(0.5) {
            c1.push(y2);
            c2.push(y1);
        } else {
            c1.push(y1);
            c2.push(y2);
        }
    }
    (c1, c2)
}

/// Gaussian mutation in place: each weight is perturbed with probability
/// `mutation_prob` by `N(0, sigma^2)`, then clipped to the weight limit.
pub fn gaussian_mutation(x: &mut [f64], params: &VariationParams, rng: &mut SimRng) {
    if x.is_empty() {
        return;
    }
    let p = params.mutation_prob.unwrap_or(1.0 / x.len() as f64);
    let noise = Normal::new(0.0, params.mutation_sigma).expect("validated sigma");
    let lim = params.weight_limit;
    for w in x.iter_mut() {
        if rng.random_bool(p) {
            *w = (*w + noise.sample(rng)).clamp(-lim, lim);
        }
    }
}

pub fn crossover(
    a: &Genome,
    b: &Genome,
    params: &VariationParams,
    rng: &mut SimRng,
) -> Result<(Genome, Genome), PolicyError> {
    if a.architecture() != b.architecture() {
        return Err(PolicyError::ArchitectureMismatch);
    }
    let (c1, c2) = sbx(a.params(), b.params(), params, rng);
    Ok((Genome::decode(a.architecture(), c1)?, Genome::decode(a.architecture(), c2)?))
}

pub fn mutate(g: &Genome, params: &VariationParams, rng: &mut SimRng) -> Result<Genome, PolicyError> {
    let mut x = g.encode();
    gaussian_mutation(&mut x, params, rng);
    Genome::decode(g.architecture(), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn always() -> VariationParams {
        VariationParams { crossover_prob: 1.0, ..Default::default() }
    }

    #[test]
    fn beta_is_one_at_half() {
        assert_eq!(sbx_beta(0.5, 15.0), 1.0);
        assert_eq!(sbx_beta(0.0, 15.0), 0.0);
        assert!(sbx_beta(0.99, 15.0) > 1.0);
    }

    #[test]
    fn children_are_centered_on_parent_mean() {
        // E[c1] = E[c2] = (x1 + x2) / 2 for every coordinate.
        let (x1, x2) = ([1.0, -3.0, 0.5], [3.0, 1.0, 0.5]);
        let mut rng = stream(7, &[1]);
        let n = 40_000;
        let mut sums = [[0.0; 3]; 2];
        let mut sq = [[0.0; 3]; 2];
        for _ in 0..n {
            let (c1, c2) = sbx(&x1, &x2, &always(), &mut rng);
            for i in 0..3 {
                sums[0][i] += c1[i];
                sums[1][i] += c2[i];
                sq[0][i] += c1[i] * c1[i];
                sq[1][i] += c2[i] * c2[i];
            }
        }
        for c in 0..2 {
            for i in 0..3 {
                let mean = sums[c][i] / n as f64;
                let var = sq[c][i] / n as f64 - mean * mean;
                let target = 0.5 * (x1[i] + x2[i]);
                let se = (var / n as f64).sqrt();
                assert!((mean - target).abs() <= 4.0 * se + 1e-12, "child {c} coord {i}: {mean} vs {target}");
            }
        }
    }

    #[test]
    fn identical_parents_reproduce() {
        let x = [0.25, -1.5, 7.0];
        let mut rng = stream(3, &[]);
        let (c1, c2) = sbx(&x, &x, &always(), &mut rng);
        assert_eq!(c1, x);
        assert_eq!(c2, x);
    }

    #[test]
    fn no_crossover_copies_parents() {
        let p = VariationParams { crossover_prob: 0.0, ..Default::default() };
        let mut rng = stream(3, &[]);
        let (c1, c2) = sbx(&[1.0, 2.0], &[3.0, 4.0], &p, &mut rng);
        assert_eq!((c1, c2), (vec![1.0, 2.0], vec![3.0, 4.0]));
    }

    #[test]
    fn mutation_rate_defaults_to_one_over_n() {
        let n = 2000;
        let p = VariationParams::default();
        let mut rng = stream(11, &[]);
        let mut changed = 0usize;
        let trials = 200;
        for _ in 0..trials {
            let mut x = vec![0.0; n];
            gaussian_mutation(&mut x, &p, &mut rng);
            changed += x.iter().filter(|v| **v != 0.0).count();
        }
        // expected one mutation per call
        let mean = changed as f64 / trials as f64;
        assert!((mean - 1.0).abs() < 4.0 * (1.0 / trials as f64).sqrt(), "{mean}");
    }

    #[test]
    fn mutation_clips() {
        let p = VariationParams { mutation_prob: Some(1.0), mutation_sigma: 5.0, ..Default::default() };
        let mut rng = stream(5, &[]);
        let mut x = vec![9.9; 500];
        gaussian_mutation(&mut x, &p, &mut rng);
        assert!(x.iter().all(|v| v.abs() <= 10.0));
        assert!(x.iter().any(|v| *v == 10.0));
    }

    #[test]
    fn params_validation() {
        assert!(VariationParams::default().validate().is_ok());
        assert!(VariationParams { crossover_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(VariationParams { mutation_prob: Some(-0.1), ..Default::default() }.validate().is_err());
        assert!(VariationParams { weight_limit: 0.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn sbx_preserves_pair_sum(
            pair in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40),
            seed in any::<u64>(),
        ) {
            let (x1, x2): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let mut rng = stream(seed, &[]);
            let (c1, c2) = sbx(&x1, &x2, &always(), &mut rng);
            for i in 0..x1.len() {
                let lhs = c1[i] + c2[i];
                let rhs = x1[i] + x2[i];
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs() + (x1[i] - x2[i]).abs()));
            }
        }

        #[test]
        fn mutation_stays_in_bounds(
            x in proptest::collection::vec(-10.0f64..=10.0, 1..60),
            sigma in 0.0f64..20.0,
            seed in any::<u64>(),
        ) {
            let p = VariationParams { mutation_prob: Some(0.5), mutation_sigma: sigma, ..Default::default() };
            let mut y = x.clone();
            gaussian_mutation(&mut y, &p, &mut stream(seed, &[]));
            prop_assert!(y.iter().all(|v| v.abs() <= 10.0 && v.is_finite()));
        }
    }
}
