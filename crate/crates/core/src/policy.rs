//! Feed-forward inventory-control policy.
//!
//! One shared network maps an observation to, for every node/product cell,
//! a Gaussian order head `(mu, sigma)` and a categorical transport-mode head.
//! Hidden layers use ReLU. `mu = tanh(raw)`, `sigma = softplus(raw) + SIGMA_MIN`,
//! mode probabilities are `softmax(logits)`.
//!
//! Parameter layout of a [`Genome`]: for each layer in order, the weight
//! matrix row-major as `[out][in]`, followed by the `out` biases. The output
//! layer emits one block of `2 + n_modes` values per cell, cells in
//! node-major order: `[raw_mu, raw_sigma, logit_0, .., logit_{n_modes-1}]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{ActionSet, Network};
use crate::error::PolicyError;
use crate::grid::Grid;
use crate::rng::SimRng;

pub const SIGMA_MIN: f64 = 1e-3;

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Number of node/product cells (`nodes * products`).
    pub cells: usize,
    pub modes: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, cells: usize, modes: usize) -> Self {
        Self {
            input_dim,
            hidden,
            cells,
            modes,
        }
    }

    /// Architecture sized for `net`'s observations and action cells.
    pub fn for_network(net: &Network, hidden: &[usize]) -> Self {
        Self::new(net.observation_len(), hidden.to_vec(), net.n_cells(), net.n_modes())
    }

    pub fn output_dim(&self) -> usize {
        self.cells * (2 + self.modes)
    }

    /// `(fan_in, fan_out)` of every layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden);
        dims.push(self.output_dim());
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn check_network(&self, net: &Network) -> Result<(), PolicyError> {
        if self.input_dim != net.observation_len()
            || self.cells != net.n_cells()
            || self.modes != net.n_modes()
        {
            return Err(PolicyError::NetworkMismatch(format!(
                "architecture ({} inputs, {} cells, {} modes) vs network ({}, {}, {})",
                self.input_dim,
                self.cells,
                self.modes,
                net.observation_len(),
                net.n_cells(),
                net.n_modes()
            )));
        }
        Ok(())
    }
}

/// Flat parameter vector of a policy network plus its architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    arch: Architecture,
    params: Vec<f64>,
}

impl Genome {
    /// He initialization: weights `N(0, 2 / fan_in)`, biases zero.
    pub fn init(arch: &Architecture, rng: &mut SimRng) -> Self {
        let mut params = Vec::with_capacity(arch.n_params());
        for (fan_in, fan_out) in arch.layers() {
            let std = (2.0 / fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            }));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            arch: arch.clone(),
            params,
        }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            arch: arch.clone(),
            params: vec![0.0; arch.n_params()],
        }
    }

    /// Rebuilds a genome from its flat parameter vector.
    pub fn decode(arch: &Architecture, params: Vec<f64>) -> Result<Self, PolicyError> {
        let expected = arch.n_params();
        if params.len() != expected {
            return Err(PolicyError::GenomeLen {
                found: params.len(),
                expected,
            });
        }
        if let Some(index) = params.iter().position(|v| !v.is_finite()) {
            return Err(PolicyError::NonFinite { index });
        }
        Ok(Self {
            arch: arch.clone(),
            params,
        })
    }

    pub fn encode(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Offset of the output layer's biases within the flat vector.
    pub fn output_bias_offset(&self) -> usize {
        self.params.len() - self.arch.output_dim()
    }

    /// Mutable view of the output biases, one `2 + n_modes` block per cell.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let off = self.output_bias_offset();
        &mut self.params[off..]
    }

    /// A policy that ignores its input: cell `c` orders `fractions[c]` of its
    /// reorder limit (up to rounding and a `SIGMA_MIN` jitter) by `modes[c]`.
    pub fn constant(arch: &Architecture, fractions: &[f64], modes: &[usize]) -> Result<Self, PolicyError> {
        if fractions.len() != arch.cells || modes.len() != arch.cells {
            return Err(PolicyError::NetworkMismatch(format!(
                "constant policy needs {} cells, got {} fractions and {} modes",
                arch.cells,
                fractions.len(),
                modes.len()
            )));
        }
        if let Some(&m) = modes.iter().find(|&&m| m >= arch.modes) {
            return Err(PolicyError::NetworkMismatch(format!("mode {m} out of range")));
        }
        let mut g = Self::zeros(arch);
        let width = 2 + arch.modes;
        let out = g.output_bias_mut();
        for (c, (&f, &m)) in fractions.iter().zip(modes).enumerate() {
            let block = &mut out[c * width..(c + 1) * width];
            block[0] = (2.0 * f.clamp(0.0, 1.0) - 1.0).clamp(-0.999_999, 0.999_999).atanh();
            block[1] = -40.0;
            block[2 + m] = 40.0;
        }
        Ok(g)
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<Heads>, PolicyError> {
        if obs.len() != self.arch.input_dim {
            return Err(PolicyError::ObservationLen {
                found: obs.len(),
                expected: self.arch.input_dim,
            });
        }
        let layers = self.arch.layers();
        let last = layers.len() - 1;
        let mut act = obs.to_vec();
        let mut next = Vec::new();
        let mut offset = 0;
        for (li, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            next.clear();
            next.extend(weights.chunks_exact(fan_in).zip(biases).map(|(row, b)| {
                let z = row.iter().zip(&act).map(|(w, x)| w * x).sum::<f64>() + b;
                if li == last {
                    z
                } else {
                    z.max(0.0)
                }
            }));
            std::mem::swap(&mut act, &mut next);
        }
        Ok(act
            .chunks_exact(2 + self.arch.modes)
            .map(|block| Heads {
                mu: block[0].tanh(),
                sigma: softplus(block[1]) + SIGMA_MIN,
                mode_probs: softmax(&block[2..]),
            })
            .collect())
    }
}

/// Distribution parameters for one node/product cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Heads {
    pub mu: f64,
    pub sigma: f64,
    pub mode_probs: Vec<f64>,
}

/// An unscaled action: order signal in `[-1, 1]` and a transport mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawAction {
    pub order: f64,
    pub mode: usize,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Draws from a categorical distribution; zero-probability outcomes are never
/// returned.
pub fn sample_categorical(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples the order signal `N(mu, sigma^2)` clamped to `[-1, 1]` and the
/// transport mode from the categorical head.
pub fn sample_action(heads: &Heads, rng: &mut SimRng) -> RawAction {
    let z: f64 = StandardNormal.sample(rng);
    RawAction {
        order: (heads.mu + heads.sigma * z).clamp(-1.0, 1.0),
        mode: sample_categorical(&heads.mode_probs, rng),
    }
}

/// Min-max maps an order signal in `[-1, 1]` onto `[min, max]`.
///
/// Panics if `min > max`.
pub fn scale_order(signal: f64, min: f64, max: f64) -> f64 {
    assert!(min <= max, "scale_order: min {min} > max {max}");
    (signal + 1.0) / 2.0 * (max - min) + min
}

/// Maps observations to actions.
pub trait Policy {
    type Action;

    fn act(&self, obs: &[f64], rng: &mut SimRng) -> Result<Self::Action, PolicyError>;
}

/// A genome bound to the network whose actions it emits.
#[derive(Debug, Clone)]
pub struct GenomePolicy<'a> {
    genome: &'a Genome,
    reorder_max: Vec<u32>,
    products: usize,
}

impl<'a> GenomePolicy<'a> {
    pub fn new(genome: &'a Genome, net: &Network) -> Result<Self, PolicyError> {
        genome.architecture().check_network(net)?;
        Ok(Self {
            genome,
            reorder_max: net.config().nodes.iter().map(|n| n.reorder_max).collect(),
            products: net.n_products(),
        })
    }
}

impl Policy for GenomePolicy<'_> {
    type Action = ActionSet;

    fn act(&self, obs: &[f64], rng: &mut SimRng) -> Result<ActionSet, PolicyError> {
        let heads = self.genome.forward(obs)?;
        let (nodes, products) = (self.reorder_max.len(), self.products);
        let mut actions = ActionSet {
            orders: Grid::filled(nodes, products, 0),
            modes: Grid::filled(nodes, products, 0),
        };
        for (cell, h) in heads.iter().enumerate() {
            let (m, p) = (cell / products, cell % products);
            let raw = sample_action(h, rng);
            let max = f64::from(self.reorder_max[m]);
            actions.orders[(m, p)] = scale_order(raw.order, 0.0, max).round().clamp(0.0, max) as u32;
            actions.modes[(m, p)] = raw.mode;
        }
        Ok(actions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn arch() -> Architecture {
        Architecture::new(12, vec![16, 8], 4, 3)
    }

    #[test]
    fn param_count_matches_layout() {
        let a = arch();
        assert_eq!(a.output_dim(), 4 * 5);
        assert_eq!(a.n_params(), 12 * 16 + 16 + 16 * 8 + 8 + 8 * 20 + 20);
        assert_eq!(Genome::init(&a, &mut stream(0, &[])).len(), a.n_params());
    }

    #[test]
    fn he_init_biases_zero_and_deterministic() {
        let a = arch();
        let g = Genome::init(&a, &mut stream(1, &[]));
        let mut offset = 0;
        for (i, o) in a.layers() {
            assert!(g.params()[offset + i * o..offset + i * o + o].iter().all(|&b| b == 0.0));
            offset += i * o + o;
        }
        assert_eq!(g, Genome::init(&a, &mut stream(1, &[])));
        assert_ne!(g, Genome::init(&a, &mut stream(2, &[])));
    }

    #[test]
    fn he_init_variance() {
        // 64 inputs and enough outputs for >= 1e5 weights in the first layer.
        let a = Architecture::new(64, vec![1600], 1, 2);
        let g = Genome::init(&a, &mut stream(3, &[]));
        let w = &g.params()[..64 * 1600];
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let target = 2.0 / 64.0;
        assert!((var - target).abs() / target < 0.05, "var {var}");
    }

    #[test]
    fn zero_genome_outputs() {
        let g = Genome::zeros(&arch());
        let heads = g.forward(&[0.3; 12]).unwrap();
        assert_eq!(heads.len(), 4);
        for h in heads {
            assert_eq!(h.mu, 0.0);
            assert!(h.mode_probs.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
            assert!(h.sigma >= SIGMA_MIN);
        }
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let g = Genome::zeros(&arch());
        assert_eq!(
            g.forward(&[0.0; 11]),
            Err(PolicyError::ObservationLen {
                found: 11,
                expected: 12
            })
        );
    }

    #[test]
    fn narrow_gaussian_concentrates() {
        let h = Heads {
            mu: 0.5,
            sigma: SIGMA_MIN,
            mode_probs: vec![1.0, 0.0, 0.0],
        };
        let mut rng = stream(4, &[]);
        for _ in 0..10_000 {
            let a = sample_action(&h, &mut rng);
            assert!((a.order - 0.5).abs() <= 6.0 * SIGMA_MIN);
            assert_eq!(a.mode, 0);
        }
    }

    #[test]
    fn out_of_range_mean_is_clamped() {
        let h = Heads {
            mu: 2.0,
            sigma: SIGMA_MIN,
            mode_probs: vec![0.0, 1.0],
        };
        let mut rng = stream(5, &[]);
        let a = sample_action(&h, &mut rng);
        assert_eq!(a.order, 1.0);
        assert_eq!(a.mode, 1);
    }

    #[test]
    fn scale_order_endpoints() {
        assert_eq!(scale_order(-1.0, 0.0, 100.0), 0.0);
        assert_eq!(scale_order(1.0, 0.0, 100.0), 100.0);
        assert_eq!(scale_order(0.0, 0.0, 100.0), 50.0);
    }

    #[test]
    #[should_panic(expected = "min")]
    fn scale_order_rejects_inverted_bounds() {
        scale_order(0.0, 5.0, 1.0);
    }

    #[test]
    fn decode_validates() {
        let a = arch();
        assert!(matches!(
            Genome::decode(&a, vec![0.0; 3]),
            Err(PolicyError::GenomeLen { .. })
        ));
        let mut v = vec![0.0; a.n_params()];
        v[7] = f64::NAN;
        assert_eq!(Genome::decode(&a, v), Err(PolicyError::NonFinite { index: 7 }));
    }

    proptest! {
        #[test]
        fn heads_are_valid_distributions(
            seed in any::<u64>(),
            obs in proptest::collection::vec(0.0f64..=1.0, 12),
            scale in 0.1f64..20.0,
        ) {
            let a = arch();
            let mut g = Genome::init(&a, &mut stream(seed, &[]));
            let params: Vec<f64> = g.encode().iter().map(|v| v * scale).collect();
            g = Genome::decode(&a, params).unwrap();
            let heads = g.forward(&obs).unwrap();
            for h in &heads {
                prop_assert!((h.mode_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(h.sigma >= SIGMA_MIN);
                prop_assert!(h.mu > -1.0 - 1e-12 && h.mu < 1.0 + 1e-12);
            }
            prop_assert_eq!(heads, g.forward(&obs).unwrap());
        }

        #[test]
        fn codec_round_trip(seed in any::<u64>()) {
            let a = arch();
            let g = Genome::init(&a, &mut stream(seed, &[]));
            prop_assert_eq!(Genome::decode(&a, g.encode()).unwrap(), g);
        }

        #[test]
        fn scale_order_is_monotone(x in -1.0f64..=1.0, y in -1.0f64..=1.0, lo in 0.0f64..50.0, width in 0.0f64..100.0) {
            let (a, b) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(scale_order(a, lo, lo + width) <= scale_order(b, lo, lo + width));
        }

        #[test]
        fn softmax_permutation_equivariant(logits in proptest::collection::vec(-30.0f64..30.0, 2..6), rot in 0usize..6) {
            let n = logits.len();
            let k = rot % n;
            let mut rotated = logits.clone();
            rotated.rotate_left(k);
            let mut expected = softmax(&logits);
            expected.rotate_left(k);
            let got = softmax(&rotated);
            for (a, b) in got.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
