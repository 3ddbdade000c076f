//! Semantic guarantees of exact and approximate reduction, cross-checked
//! against the brute-force reference implementations in the testkit.

use nnbisim::activation::ActivationKind::{Identity, Relu};
use nnbisim::approx::{
    check_delta_bisimulation, enumerate_delta_quotients, eps_abstraction_contains,
    global_error_bound_with, greedy_delta_partition, max_blockwise_gap, quotient_delta,
    BoundMode, BoundOptions, RepresentativePolicy,
};
use nnbisim::bisim::{abstract_valuation, check_bisimulation, quotient};
use nnbisim::io::{
    generate_planted, generate_planted_delta, generate_random, ActivationPool, GeneratorConfig,
    TwinGroup,
};
use nnbisim::minimize::{minimize, minimize_with, MinimizeOptions, Schedule};
use nnbisim::network::{Network, Valuation};
use nnbisim::partition::{is_consistent, is_eps_consistent, is_finer, NetPartition};
use nnbisim_testkit::{coarsest_by_enumeration, naive_is_bisimulation, oracle_eval};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn consistent_input(rng: &mut ChaCha8Rng, p: &NetPartition, scale: f64) -> Valuation {
    let lp = p.layer(0);
    let mut values = vec![0.0f64; lp.len()];
    for block in lp.blocks() {
        let x = rng.random_range(-scale..scale);
        for &node in block {
            values[node] = x;
        }
    }
    Valuation::new(0, values).unwrap()
}

// Evaluating one layer keeps block-constancy: a consistent valuation stays
// consistent. Bit-exact when merged nodes carry bit-identical columns.
#[test]
fn layer_step_preserves_consistency_on_planted_nets() {
    for seed in 0..40 {
        let cfg = GeneratorConfig {
            activations: ActivationPool::Mixed,
            ..GeneratorConfig::new(vec![3, 5, 4, 2], seed)
        };
        let twins = [TwinGroup { layer: 1, size: 2 }, TwinGroup { layer: 2, size: 3 }];
        let (net, p) = generate_planted(&cfg, &twins).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let v0 = consistent_input(&mut rng, &p, 2.0);
        let trace = net.eval_trace(&v0).unwrap();
        for i in 1..=net.depth() {
            assert!(is_consistent(&trace[i], p.layer(i)), "seed {seed}, layer {i}");
        }
    }
}

// With merged columns that sum equal but are not identical, consistency
// survives only up to reassociation error: 0.3x + 0.7x and 0.5x + 0.5x can
// disagree in the last bits. The guarantee is mathematical equality, and
// the implementation stays within ulps of it.
#[test]
fn layer_step_consistency_tolerates_reassociation() {
    let net = Network::from_parts(
        vec![2, 2, 1],
        vec![
            vec![vec![0.3, 0.5], vec![0.7, 0.5]],
            vec![vec![1.0], vec![1.0]],
        ],
        vec![vec![0.0, 0.0], vec![0.0]],
        vec![vec![Identity, Identity], vec![Identity]],
    )
    .unwrap();
    let p = NetPartition::from_blocks(vec![vec![vec![0, 1]], vec![vec![0, 1]], vec![vec![0]]])
        .unwrap();
    assert!(check_bisimulation(&net, &p).unwrap().ok);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let x: f64 = rng.random_range(-10.0..10.0);
        let v0 = Valuation::new(0, vec![x, x]).unwrap();
        let v1 = net.eval_layer(1, &v0).unwrap();
        assert!(is_eps_consistent(&v1, p.layer(1), 1e-12).unwrap(), "x = {x}");
    }
}

// Reducing then evaluating equals evaluating then reducing, for consistent
// inputs: the quotient computes the same function on block values.
#[test]
fn quotient_commutes_with_evaluation() {
    for seed in 0..60 {
        let cfg = GeneratorConfig {
            activations: ActivationPool::Mixed,
            ..GeneratorConfig::new(vec![4, 5, 5, 3], seed)
        };
        let twins = [
            TwinGroup { layer: 1, size: 2 },
            TwinGroup { layer: 2, size: 2 },
            TwinGroup { layer: 3, size: 2 },
        ];
        let (net, p) = generate_planted(&cfg, &twins).unwrap();
        let reduced = quotient(&net, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(77));
        for _ in 0..20 {
            let v0 = consistent_input(&mut rng, &p, 1.5);
            let out = net.eval(&v0).unwrap();
            let fold = abstract_valuation(&out, p.layer(net.depth())).unwrap();
            let v0_hat = abstract_valuation(&v0, p.layer(0)).unwrap();
            let hat_out = reduced.eval(&v0_hat).unwrap();
            assert_eq!(fold.len(), hat_out.len());
            for (a, b) in fold.values().iter().zip(hat_out.values()) {
                assert!((a - b).abs() <= 1e-9, "seed {seed}: {a} vs {b}");
            }
        }
    }
}

// The minimizer's result equals exhaustive search over all partitions on
// small networks whose values are quantized to make collisions common.
#[test]
fn minimizer_matches_exhaustive_coarsest_search() {
    for seed in 0..30 {
        let cfg = GeneratorConfig {
            weight_range: (0.0, 0.6),
            bias_range: (0.0, 0.3),
            quantize: Some(0.2),
            ..GeneratorConfig::new(vec![3, 4, 3], seed)
        };
        let net = generate_random(&cfg).unwrap();
        let mined = minimize(&net).partition;
        let brute = coarsest_by_enumeration(&net);
        assert_eq!(mined, brute, "seed {seed}");
    }
}

// Any bisimulation the brute-force enumerator finds refines the minimizer's
// output, and the minimizer's output is itself among them.
#[test]
fn minimizer_output_is_coarsest_among_enumerated() {
    for seed in 100..115 {
        let cfg = GeneratorConfig {
            weight_range: (0.0, 0.4),
            quantize: Some(0.2),
            ..GeneratorConfig::new(vec![2, 4, 2], seed)
        };
        let net = generate_random(&cfg).unwrap();
        let mined = minimize(&net).partition;
        assert!(naive_is_bisimulation(&net, &mined), "seed {seed}");
        for p in nnbisim_testkit::enumerate_all_bisimulations(&net) {
            assert!(is_finer(&p, &mined).unwrap(), "seed {seed}");
        }
    }
}

// Both rescan schedules land on the same partition.
#[test]
fn schedules_are_confluent() {
    for seed in 0..40 {
        let cfg = GeneratorConfig {
            quantize: Some(0.25),
            weight_range: (0.0, 0.75),
            ..GeneratorConfig::new(vec![3, 5, 4, 2], seed)
        };
        let net = generate_random(&cfg).unwrap();
        for preserve_io in [false, true] {
            let low = minimize_with(
                &net,
                &MinimizeOptions { preserve_io, schedule: Schedule::LowestFirst },
            );
            let high = minimize_with(
                &net,
                &MinimizeOptions { preserve_io, schedule: Schedule::HighestFirst },
            );
            assert_eq!(low.partition, high.partition, "seed {seed}, io {preserve_io}");
        }
    }
}

// Under an exact bisimulation the representative choice is irrelevant: the
// whole family of delta-quotients collapses to the one exact quotient.
#[test]
fn representative_choice_is_irrelevant_for_exact_merges() {
    for seed in 0..25 {
        let cfg = GeneratorConfig::new(vec![3, 4, 4, 2], seed);
        let twins = [TwinGroup { layer: 1, size: 2 }, TwinGroup { layer: 2, size: 3 }];
        let (net, p) = generate_planted(&cfg, &twins).unwrap();
        let exact = quotient(&net, &p).unwrap();
        for policy in RepresentativePolicy::named() {
            let q = quotient_delta(&net, &p, 0.0, &policy).unwrap();
            assert_eq!(q, exact, "seed {seed}, policy {policy:?}");
        }
        let family = enumerate_delta_quotients(&net, &p, 0.0, 1 << 20).unwrap();
        assert_eq!(family.len(), 1, "seed {seed}");
        assert_eq!(family[0], exact, "seed {seed}");
    }
}

// The certified bound really bounds the observed deviation, in both modes,
// for inputs within the stated norm. Uniform mode additionally needs a
// non-contracting network, which the generator enforces here.
#[test]
fn certified_bound_dominates_observed_deviation() {
    let mut worst_ratio = 0.0f64;
    for seed in 0..25 {
        let cfg = GeneratorConfig {
            bias_range: (0.0, 0.0),
            activations: ActivationPool::MixedZeroFixing,
            min_layer_gain: Some(1.25),
            ..GeneratorConfig::new(vec![3, 5, 4, 2], seed)
        };
        let twins = [TwinGroup { layer: 1, size: 2 }, TwinGroup { layer: 2, size: 2 }];
        let delta = 0.1;
        let (net, p) = generate_planted_delta(&cfg, &twins, delta).unwrap();
        let v0_inf = 1.0;
        for mode in [BoundMode::Uniform, BoundMode::PerLayerNorms] {
            let bound = global_error_bound_with(
                &net,
                &p,
                delta,
                0.0,
                v0_inf,
                &BoundOptions { mode, lipschitz_override: None },
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
            for policy in RepresentativePolicy::named() {
                let reduced = quotient_delta(&net, &p, delta, &policy).unwrap();
                for _ in 0..50 {
                    let v0 = consistent_input(&mut rng, &p, v0_inf);
                    let out = net.eval(&v0).unwrap();
                    let v0_hat = abstract_valuation(&v0, p.layer(0)).unwrap();
                    let hat_out = reduced.eval(&v0_hat).unwrap();
                    let gap = max_blockwise_gap(&hat_out, &out, p.layer(net.depth()));
                    assert!(
                        gap <= bound.eps_final,
                        "seed {seed} mode {mode:?}: observed {gap} > bound {}",
                        bound.eps_final
                    );
                    assert!(eps_abstraction_contains(
                        &hat_out,
                        &out,
                        p.layer(net.depth()),
                        bound.eps_final
                    ));
                    if bound.eps_final > 0.0 {
                        worst_ratio = worst_ratio.max(gap / bound.eps_final);
                    }
                }
            }
        }
    }
    // The bound must not be vacuously loose in the trivial sense of never
    // being approached; a sanity floor keeps this test honest.
    assert!(worst_ratio > 1e-9, "bound never exercised: ratio {worst_ratio}");
}

// Per-layer norms never give a worse certificate than the uniform fallback
// on non-contracting zero-bias networks.
#[test]
fn per_layer_bound_is_no_looser_than_uniform() {
    for seed in 0..20 {
        let cfg = GeneratorConfig {
            bias_range: (0.0, 0.0),
            activations: ActivationPool::MixedZeroFixing,
            min_layer_gain: Some(1.25),
            ..GeneratorConfig::new(vec![3, 4, 3], seed)
        };
        let twins = [TwinGroup { layer: 1, size: 2 }];
        let (net, p) = generate_planted_delta(&cfg, &twins, 0.05).unwrap();
        let uniform = global_error_bound_with(
            &net,
            &p,
            0.05,
            0.0,
            1.0,
            &BoundOptions { mode: BoundMode::Uniform, lipschitz_override: None },
        )
        .unwrap();
        let tight = global_error_bound_with(
            &net,
            &p,
            0.05,
            0.0,
            1.0,
            &BoundOptions { mode: BoundMode::PerLayerNorms, lipschitz_override: None },
        )
        .unwrap();
        assert!(
            tight.eps_final <= uniform.eps_final * (1.0 + 1e-12),
            "seed {seed}: {} vs {}",
            tight.eps_final,
            uniform.eps_final
        );
    }
}

// The greedy partition builder honors its own budget.
#[test]
fn greedy_partition_is_a_delta_bisimulation() {
    for seed in 0..30 {
        let cfg = GeneratorConfig {
            quantize: Some(0.1),
            activations: ActivationPool::Mixed,
            ..GeneratorConfig::new(vec![3, 6, 5, 2], seed)
        };
        let net = generate_random(&cfg).unwrap();
        for delta in [0.0, 0.05, 0.2, 0.5] {
            for preserve_io in [false, true] {
                let p = greedy_delta_partition(&net, delta, preserve_io);
                let report = check_delta_bisimulation(&net, &p, delta).unwrap();
                assert!(report.ok, "seed {seed}, delta {delta}: {:?}", report.witness);
                if preserve_io {
                    assert_eq!(p.layer(0).num_blocks(), net.layer_size(0));
                    assert_eq!(p.layer(net.depth()).num_blocks(), net.layer_size(net.depth()));
                }
            }
        }
    }
}

// Library evaluation agrees with the scalar reference oracle.
#[test]
fn evaluation_matches_oracle() {
    for seed in 0..40 {
        let piecewise = seed % 2 == 0;
        let cfg = GeneratorConfig {
            activations: if piecewise {
                ActivationPool::Fixed(Relu)
            } else {
                ActivationPool::Mixed
            },
            ..GeneratorConfig::new(vec![4, 6, 5, 3], seed)
        };
        let net = generate_random(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
        for _ in 0..10 {
            let input: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v = Valuation::new(0, input.clone()).unwrap();
            let ours = net.eval(&v).unwrap();
            let reference = oracle_eval(&net, &input);
            for (a, b) in ours.values().iter().zip(&reference) {
                if piecewise {
                    // Same summation order and exact arithmetic path.
                    assert_eq!(a.to_bits(), b.to_bits(), "seed {seed}");
                } else {
                    let tol = 1e-9 * b.abs().max(1.0);
                    assert!((a - b).abs() <= tol, "seed {seed}: {a} vs {b}");
                }
            }
        }
    }
}
