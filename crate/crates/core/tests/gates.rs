use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtm_core::decay_rates::annealed_weight;
use rtm_core::gates::*;
use rtm_core::numkernel::{c64, haar_unitary, unitarity_residual, Budget, DenseTensor, TensorNetwork, C64};

/// Mean linear entanglement of `g` on Haar product inputs, rescaled by
/// `(d + 1)/(d − 1)`: an independent Monte-Carlo estimate of `p`.
fn entangling_power_mc(g: &Gate, samples: usize, seed: u64) -> f64 {
    let d = g.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..samples {
        let a = haar_unitary(d, &mut rng);
        let b = haar_unitary(d, &mut rng);
        let input: Vec<C64> = (0..d * d).map(|k| a[(k / d, 0)] * b[(k % d, 0)]).collect();
        let m = g.matrix();
        let out: Vec<C64> = (0..d * d).map(|r| (0..d * d).map(|c| m[(r, c)] * input[c]).sum()).collect();
        // purity of the left reduced state
        let mut purity = 0.0;
        for i in 0..d {
            for j in 0..d {
                let rho: C64 = (0..d).map(|k| out[i * d + k] * out[j * d + k].conj()).sum();
                purity += rho.norm_sqr();
            }
        }
        acc += 1.0 - purity;
    }
    acc / samples as f64 * (d + 1) as f64 / (d - 1) as f64
}

#[test]
fn u_gate_examples() {
    for p in [0.0, 0.25, 0.5, 2.0 / 3.0] {
        let g = du_gate_u(p).unwrap();
        assert!(unitarity_residual(g.matrix()) < 1e-12);
        assert!(dual_unitarity_residual(&g) < 1e-12);
        assert!((entangling_power(&g).unwrap() - p).abs() < 1e-12);
    }
    assert!(du_gate_u(0.7).is_err());
    // p = 0 is a SWAP up to phases.
    let g = du_gate_u(0.0).unwrap();
    assert!((g.matrix()[(1, 2)].norm() - 1.0).abs() < 1e-12 && g.matrix()[(1, 1)].norm() < 1e-12);
}

#[test]
fn entangling_power_matches_monte_carlo() {
    for (p, seed) in [(0.2, 1), (0.625, 2)] {
        let g = du_gate_w(p, &Dressing::Fixed).unwrap();
        let mc = entangling_power_mc(&g, 20000, seed);
        assert!((mc - p).abs() < 0.01, "p={p}: MC {mc}");
    }
}

#[test]
fn entangling_power_matches_channel_weight() {
    for seed in 0..5 {
        let g = du_gate_w(0.4, &Dressing::Random { seed }).unwrap();
        let w = annealed_weight(&g).unwrap();
        let p = entangling_power(&g).unwrap();
        assert!((w[0] - (1.0 - p)).abs() < 1e-10 && (w[1] - (1.0 - p)).abs() < 1e-10);
    }
}

#[test]
fn fixture_dressings_are_unitary_after_projection() {
    for raw in fixed_dressings_raw() {
        let m = raw.to_single_site(FIXTURE_TOL).unwrap();
        assert!(unitarity_residual(m.as_ref()) < 1e-13);
    }
    let g = du_gate_w(0.625, &Dressing::Fixed).unwrap();
    assert!(is_dual_unitary(&g, TOL));
    assert!((entangling_power(&g).unwrap() - 0.625).abs() < 1e-12);
}

#[test]
fn haar_gate_is_unitary_but_not_dual_unitary() {
    let g = Gate::haar(2, 5);
    assert!(unitarity_residual(g.matrix()) < 1e-12);
    assert!(!is_dual_unitary(&g, TOL));
    assert_eq!(Gate::haar(2, 5), g);
    assert!(entangling_power(&g).is_err());
}

#[test]
fn gate_constructor_rejects_non_unitary() {
    let m = rtm_core::numkernel::Mat::from_fn(4, 4, |i, j| if i == j { c64(1.1, 0.0) } else { c64(0.0, 0.0) });
    assert!(Gate::new(2, m).is_err());
}

#[test]
fn swap_and_identity_folds() {
    let id = Gate::identity(2);
    let f = fold(&id, 1).unwrap().tensor;
    // identity: out legs equal in legs
    for a in 0..4 {
        for b in 0..4 {
            assert_eq!(f.get(&[a, b, a, b]), c64(1.0, 0.0));
        }
    }
    assert!(is_dual_unitary(&Gate::swap(2), 1e-12));
    assert!(!is_dual_unitary(&id, 1e-3));
}

#[test]
fn replica_states_pairings() {
    let d = 2;
    let s = ReplicaStates::new(d);
    let dot = |a: &DenseTensor, b: &DenseTensor| -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x.conj() * y).re).sum()
    };
    assert!((dot(&s.circle, &s.circle) - 4.0).abs() < 1e-12);
    assert!((dot(&s.circle, &s.square) - 2.0).abs() < 1e-12);
    assert!(dot(&s.circle, &s.bullet).abs() < 1e-12);
    assert!((dot(&s.bullet, &s.bullet) - 4.0).abs() < 1e-12);
}

#[test]
fn two_replica_fold_has_replica_structure() {
    // fold(g, 2) contracted with ○ on the outputs of both replicas gives ○ ⊗ ○ on the inputs (unitarity).
    let g = Gate::haar(2, 9);
    let f2 = fold(&g, 2).unwrap();
    let s = ReplicaStates::new(2);
    let mut net = TensorNetwork::new();
    net.push(f2.tensor.clone(), vec![0, 1, 2, 3]).unwrap();
    net.push(s.circle.clone(), vec![0]).unwrap();
    net.push(s.circle.clone(), vec![1]).unwrap();
    let out = net.contract(&[2, 3], &Budget::default()).unwrap();
    let want = s.circle.outer(&s.circle);
    assert!(out.max_abs_diff(&want) < 1e-12);
}

#[test]
fn averaged_gate_at_zero_and_critical() {
    let m = averaged_gate(2, 0.0);
    assert_eq!(m[1][2], 1.0);
    assert!((critical_p(2) - 0.75).abs() < 1e-15);
    assert!((critical_p(3) - 8.0 / 9.0).abs() < 1e-15);
}

#[test]
fn gate_spec_roundtrip_and_family_names() {
    let s = GateSpec::du_fixed(0.625);
    let js = serde_json::to_string(&s).unwrap();
    assert_eq!(serde_json::from_str::<GateSpec>(&js).unwrap(), s);
    for name in ["du-u", "du-fixed", "du-sym", "du-random", "haar"] {
        let f: GateFamily = name.parse().unwrap();
        assert_eq!(f.name(), name);
    }
    assert!("cz".parse::<GateFamily>().is_err());
    assert!(GateSpec::new(GateFamily::DuFixed, None, None).build().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dressing_preserves_dual_unitarity_and_power(p in 0.0f64..0.66, seed in any::<u64>()) {
        let g = du_gate_w(p, &Dressing::Random { seed }).unwrap();
        prop_assert!(dual_unitarity_residual(&g) < 1e-10);
        prop_assert!((entangling_power(&g).unwrap() - p).abs() < 1e-9);
    }

    #[test]
    fn fixture_roundtrip(seed in any::<u64>()) {
        let g = Gate::haar(2, seed);
        let back = g.to_fixture().to_gate(1e-12).unwrap();
        prop_assert!((back.matrix() - g.matrix()).norm_l2() < 1e-12);
    }
}
