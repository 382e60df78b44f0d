mod support {
    pub mod oracle;
}

use morse::moea::*;
use morse::policy::{Architecture, Genome};
use morse::rng::stream;
use morse::EvalError;
use proptest::prelude::*;
use rand::Rng;
use support::oracle;

fn tagged(tag: usize, fitness: &[f64]) -> EvaluatedIndividual {
    let arch = Architecture::new(1, vec![], 1, 1);
    let mut p = vec![0.0; arch.n_params()];
    p[0] = tag as f64;
    EvaluatedIndividual::new(Genome::decode(&arch, p).unwrap(), fitness.to_vec(), None)
}

fn tag_of(ind: &EvaluatedIndividual) -> usize {
    ind.genome.params()[0] as usize
}

/// Small integer grid so ties and dominance both occur often.
fn arb_population(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-4i8..4, 3), 1..max)
        .prop_map(|v| v.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect())
}

#[test]
fn hypervolume_examples() {
    assert_eq!(hypervolume(&[[1.0, 1.0, 1.0]], &[0.0; 3]).unwrap(), 1.0);
    assert_eq!(hypervolume(&[[2.0, 1.0, 1.0], [1.0, 2.0, 1.0]], &[0.0; 3]).unwrap(), 3.0);
}

#[test]
fn tournament_crowding_tiebreak() {
    let mut a = tagged(0, &[0.0, 0.0, 0.0]);
    let mut b = tagged(1, &[0.0, 0.0, 0.0]);
    a.rank = 1;
    b.rank = 1;
    a.crowding = f64::INFINITY;
    b.crowding = 1.5;
    let pop = vec![a, b];
    let mut rng = stream(4, &[]);
    assert!((0..200).all(|_| tournament_select(&pop, &mut rng) == 0));
}

#[test]
fn tournament_identical_pair_is_fair() {
    let mut pop = vec![tagged(0, &[1.0, 1.0, 1.0]), tagged(1, &[1.0, 1.0, 1.0])];
    assign_rank_and_crowding(&mut pop);
    let mut rng = stream(8, &[]);
    let n = 10_000;
    let wins = (0..n).filter(|_| tournament_select(&pop, &mut rng) == 0).count() as f64;
    let sd = (n as f64 * 0.25).sqrt();
    assert!((wins - n as f64 * 0.5).abs() <= 3.0 * sd, "{wins}");
}

#[test]
fn sbx_offspring_mean_between_unit_parents() {
    let arch = Architecture::new(2, vec![], 1, 1);
    let n = arch.n_params();
    let zero = Genome::zeros(&arch);
    let one = Genome::decode(&arch, vec![1.0; n]).unwrap();
    let params = VariationParams { crossover_prob: 1.0, ..Default::default() };
    let mut rng = stream(21, &[]);
    let trials = 10_000;
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for _ in 0..trials {
        let (c1, _) = crossover(&zero, &one, &params, &mut rng).unwrap();
        for (i, v) in c1.params().iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    for i in 0..n {
        let mean = sum[i] / trials as f64;
        let sd = (sq[i] / trials as f64 - mean * mean).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * sd / (trials as f64).sqrt(), "coord {i}: {mean}");
    }
}

#[test]
fn crossover_rejects_mismatched_architectures() {
    let a = Genome::zeros(&Architecture::new(2, vec![], 1, 1));
    let b = Genome::zeros(&Architecture::new(3, vec![], 1, 1));
    let mut rng = stream(0, &[]);
    assert!(crossover(&a, &b, &VariationParams::default(), &mut rng).is_err());
}

#[test]
fn zero_sigma_mutation_is_identity() {
    let arch = Architecture::new(3, vec![4], 1, 2);
    let g = Genome::init(&arch, &mut stream(1, &[]));
    let p = VariationParams { mutation_prob: Some(1.0), mutation_sigma: 0.0, ..Default::default() };
    assert_eq!(mutate(&g, &p, &mut stream(2, &[])).unwrap(), g);
}

#[test]
fn scalar_mutation_spread_matches_sigma() {
    let p = VariationParams { mutation_prob: Some(1.0), mutation_sigma: 0.1, ..Default::default() };
    let mut rng = stream(3, &[]);
    let d: Vec<f64> = (0..10_000)
        .map(|_| {
            let mut x = [0.0];
            gaussian_mutation(&mut x, &p, &mut rng);
            x[0]
        })
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
    assert!((sd - 0.1).abs() <= 0.005, "{sd}");
}

#[test]
fn survival_exact_front_and_overflow_by_one() {
    // |F1| = N: the next population is exactly F1.
    let f1 = [[0.0, 3.0, 1.0], [1.0, 2.0, 1.0], [2.0, 1.0, 1.0], [3.0, 0.0, 1.0]];
    let mut combined: Vec<_> = f1.iter().enumerate().map(|(i, f)| tagged(i, f)).collect();
    combined.push(tagged(4, &[0.0, 0.0, 0.0]));
    let kept = survival_select(combined, 4);
    assert_eq!(kept.iter().map(tag_of).collect::<Vec<_>>(), vec![0, 1, 2, 3]);

    // |F1| = N + 1: the least crowded member is dropped.
    let f1 = [[0.0, 4.0, 0.0], [1.0, 3.0, 0.0], [1.5, 2.5, 0.0], [3.0, 1.0, 0.0], [4.0, 0.0, 0.0]];
    let combined: Vec<_> = f1.iter().enumerate().map(|(i, f)| tagged(i, f)).collect();
    let kept = survival_select(combined, 4);
    let mut tags: Vec<_> = kept.iter().map(tag_of).collect();
    tags.sort_unstable();
    // crowding: 1 -> 0.75, 2 -> 1.0, 3 -> 1.25
    assert_eq!(tags, vec![0, 2, 3, 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dominance_is_a_strict_partial_order(
        a in proptest::collection::vec(-3i8..3, 3),
        b in proptest::collection::vec(-3i8..3, 3),
        c in proptest::collection::vec(-3i8..3, 3),
    ) {
        let f = |v: Vec<i8>| v.into_iter().map(f64::from).collect::<Vec<_>>();
        let (a, b, c) = (f(a), f(b), f(c));
        prop_assert!(!dominates(&a, &a));
        prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
        if dominates(&a, &b) && dominates(&b, &c) {
            prop_assert!(dominates(&a, &c));
        }
        prop_assert_eq!(dominates(&a, &b), oracle::dominates(&a, &b));
    }

    #[test]
    fn sort_matches_peeling_oracle(pts in arb_population(64)) {
        let fronts = non_dominated_sort(&pts);
        let mut expected = oracle::fronts(&pts);
        for f in &mut expected {
            f.sort_unstable();
        }
        prop_assert_eq!(&fronts, &expected);
        for (k, front) in fronts.iter().enumerate() {
            for &i in front {
                prop_assert!(front.iter().all(|&j| !dominates(&pts[j], &pts[i])));
                if k > 0 {
                    prop_assert!(fronts[k - 1].iter().any(|&j| dominates(&pts[j], &pts[i])));
                }
            }
        }
    }

    #[test]
    fn crowding_matches_oracle(pts in arb_population(40)) {
        let got = crowding_distance(&pts);
        let want = oracle::crowding(&pts);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!(g == w || (g - w).abs() <= 1e-12, "{} vs {}", g, w);
        }
    }

    #[test]
    fn survival_matches_oracle(pts in arb_population(64), frac in 0.05f64..1.0) {
        let n = ((pts.len() as f64 * frac).ceil() as usize).clamp(1, pts.len());
        let combined: Vec<_> = pts.iter().enumerate().map(|(i, f)| tagged(i, f)).collect();
        let kept = survival_select(combined, n);
        prop_assert_eq!(kept.len(), n);
        prop_assert_eq!(kept.iter().map(tag_of).collect::<Vec<_>>(), oracle::survivors(&pts, n));

        let mut all: Vec<_> = pts.iter().enumerate().map(|(i, f)| tagged(i, f)).collect();
        assign_rank_and_crowding(&mut all);
        let kept_tags: Vec<usize> = kept.iter().map(tag_of).collect();
        let worst_kept = kept.iter().map(|k| k.rank).max().unwrap();
        for d in all.iter().filter(|d| !kept_tags.contains(&tag_of(d))) {
            prop_assert!(d.rank >= worst_kept);
        }
    }

    #[test]
    fn hypervolume_matches_grid_oracle(pts in arb_population(16)) {
        let r = [-5.0; 3];
        let hv = hypervolume(&pts, &r).unwrap();
        let want = oracle::hypervolume(&pts, &r);
        prop_assert!((hv - want).abs() <= 1e-9 * want.max(1.0));
    }
}

/// Cheap deterministic objective: three conflicting quadratic targets on the
/// first parameters plus seeded noise.
struct Quadratic;

impl FitnessEvaluator for Quadratic {
    fn evaluate(&self, g: &Genome, seed: u64) -> Result<Evaluation, EvalError> {
        let p = g.params();
        let noise: f64 = stream(seed, &[]).random_range(-0.01..0.01);
        let f = |t: f64| -(p[0] - t).powi(2) - (p[1] + t).powi(2) + noise;
        Ok(Evaluation { fitness: vec![f(1.0), f(-1.0), f(0.0)], risk: None })
    }
}

fn small_arch() -> Architecture {
    Architecture::new(2, vec![3], 1, 2)
}

#[test]
fn zero_generations_keeps_initial_front() {
    let params = EvoParams { population: 10, generations: 0, ..Default::default() };
    let s = run_nsga2(&Quadratic, &small_arch(), &params, 5, None, |_| {}).unwrap();
    assert_eq!(s.population.generation, 0);
    let front: Vec<Vec<f64>> = s.population.front().map(|m| m.fitness.clone()).collect();
    assert_eq!(front, s.initial_front);
    assert_eq!(s.metrics.len(), 1);
}

#[test]
fn evolution_improves_hypervolume_and_is_reproducible() {
    let params = EvoParams { population: 20, generations: 30, ..Default::default() };
    let mut seen = 0;
    let a = run_nsga2(&Quadratic, &small_arch(), &params, 9, None, |_| seen += 1).unwrap();
    let b = run_nsga2(&Quadratic, &small_arch(), &params, 9, None, |_| {}).unwrap();
    assert_eq!(seen, 31);
    assert_eq!(a, b);
    let front: Vec<Vec<f64>> = a.population.front().map(|m| m.fitness.clone()).collect();
    for x in &front {
        for y in &front {
            assert!(!dominates(x, y));
        }
    }
    let r = &a.reference_point;
    let keep = |v: &Vec<Vec<f64>>| v.iter().filter(|p| p.iter().zip(r).all(|(x, q)| x >= q)).cloned().collect::<Vec<_>>();
    let final_hv = oracle::hypervolume(&keep(&front), r);
    let initial_hv = oracle::hypervolume(&keep(&a.initial_front), r);
    assert!(final_hv >= initial_hv, "{final_hv} < {initial_hv}");
    assert!(a.population.members.iter().all(|m| m.rank >= 1 && m.crowding >= 0.0));
    assert_eq!(a.population.len(), 20);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let params = EvoParams { population: 8, generations: 6, ..Default::default() };
    let full = run_nsga2(&Quadratic, &small_arch(), &params, 13, None, |_| {}).unwrap();
    let mut snapshot = None;
    run_nsga2(&Quadratic, &small_arch(), &params, 13, None, |s| {
        if s.population.generation == 3 {
            snapshot = Some(s.clone());
        }
    })
    .unwrap();
    let json = serde_json::to_string(&snapshot.unwrap()).unwrap();
    let restored: EvolveState = serde_json::from_str(&json).unwrap();
    let resumed = run_nsga2(&Quadratic, &small_arch(), &params, 13, Some(restored), |_| {}).unwrap();
    assert_eq!(resumed, full);
}

#[test]
fn convergence_stops_early() {
    let params = EvoParams {
        population: 6,
        generations: 50,
        convergence: Some(Convergence { epsilon: f64::INFINITY, window: 2 }),
        ..Default::default()
    };
    let s = run_nsga2(&Quadratic, &small_arch(), &params, 1, None, |_| {}).unwrap();
    assert_eq!(s.population.generation, 2);
    assert!(s.converged);
}

struct Failing;

impl FitnessEvaluator for Failing {
    fn evaluate(&self, _g: &Genome, _seed: u64) -> Result<Evaluation, EvalError> {
        Err(EvalError::Invalid("boom".into()))
    }
}

#[test]
fn evaluation_errors_carry_context() {
    let params = EvoParams { population: 4, generations: 1, ..Default::default() };
    let err = run_nsga2(&Failing, &small_arch(), &params, 1, None, |_| {}).unwrap_err();
    assert!(matches!(err, morse::EvolveError::Evaluation { generation: 0, .. }));
}

#[test]
fn invalid_params_are_rejected() {
    let params = EvoParams { population: 1, ..Default::default() };
    assert!(params.validate().is_err());
    let params = EvoParams { episodes: Some(0), ..Default::default() };
    assert!(params.validate().is_err());
}

#[test]
fn metrics_csv_has_one_row_per_generation() {
    let params = EvoParams { population: 6, generations: 3, ..Default::default() };
    let s = run_nsga2(&Quadratic, &small_arch(), &params, 2, None, |_| {}).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&s.metrics, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "generation,front_sizes,hypervolume,best_profit,best_neg_emissions,best_neg_lead_time");
}
