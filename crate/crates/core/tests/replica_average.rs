use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtm_core::circuit::{bell_dimer, normalized, product_dimer};
use rtm_core::gates::critical_p;
use rtm_core::numkernel::{c64, C64};
use rtm_core::replica_average::*;

/// Purity of the left reduced state of a dimer, by explicit partial trace.
fn purity(psi: &[C64], d: usize) -> f64 {
    let mut p = 0.0;
    for i in 0..d {
        for j in 0..d {
            let rho: C64 = (0..d).map(|k| psi[i * d + k] * psi[j * d + k].conj()).sum();
            p += rho.norm_sqr();
        }
    }
    p
}

#[test]
fn contraction_equals_closed_form_on_the_grid() {
    for (d, c) in [(2, 1.37), (3, 0.81), (2, 2.0)] {
        let rows = replica_grid(d, c, 6).unwrap();
        assert_eq!(rows.len(), 7 * 28);
        let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
        assert!(worst < 1e-12, "d={d} c={c}: {worst:e}");
    }
}

#[test]
fn c_of_reference_states() {
    assert!((c_constant(&bell_dimer(2), 2).unwrap() - 1.0).abs() < 1e-14);
    assert!((c_constant(&bell_dimer(3), 3).unwrap() - 1.0).abs() < 1e-14);
    assert!((c_constant(&product_dimer(2), 2).unwrap() - 2.0).abs() < 1e-14);
}

#[test]
fn unit_c_gives_the_trivial_amplitude() {
    let p = critical_p(2);
    for (t0, t1) in [(0, 3), (2, 2), (4, 1)] {
        for k in 0..=t1 {
            let prm = AveragedNetworkParams::symmetric(2, p, 1.0, t0, t1, k);
            let a = averaged_ak_contract(&prm).unwrap();
            assert!((a - 2f64.powi(-(2 * t1 as i32))).abs() < 1e-14);
        }
    }
}

#[test]
fn k_differences_are_constant_at_criticality() {
    let prm = AveragedNetworkParams::symmetric(3, critical_p(3), 1.6, 2, 4, 0);
    let a: Vec<f64> = (0..=4).map(|k| averaged_ak_contract(&AveragedNetworkParams { k, ..prm }).unwrap()).collect();
    for w in a.windows(3) {
        assert!(((w[2] - w[1]) - (w[1] - w[0])).abs() < 1e-14);
    }
}

#[test]
fn helper_identities() {
    let (d, c) = (2, 1.4);
    assert!((b_x(d, c, 1) - c / d as f64).abs() < 1e-15);
    for t0 in 0..5 {
        assert!((c_y(d, c, t0, t0) - 1.0).abs() < 1e-15);
    }
    for (t0, t1) in [(0, 2), (3, 1), (2, 4)] {
        let prm = AveragedNetworkParams::symmetric(d, critical_p(d), c, t0, t1, 0);
        let e0 = closed_form_eak(&prm).unwrap();
        let via_c = c_y(d, c, t0, t1 + t0) / (d as f64).powi(t1 as i32);
        assert!((e0 - via_c).abs() < 1e-15);
        for k in 0..=t1 {
            let prm = AveragedNetworkParams { k, ..prm };
            assert!((recursion_eak(&prm).unwrap() - closed_form_eak(&prm).unwrap()).abs() < 1e-15);
        }
    }
}

#[test]
fn closed_form_requires_criticality() {
    let prm = AveragedNetworkParams::symmetric(2, 0.5, 1.2, 1, 1, 0);
    assert_eq!(closed_form_eak(&prm).unwrap_err().kind(), rtm_core::ErrorKind::Config);
    assert!(averaged_ak_contract(&prm).is_ok());
}

#[test]
fn prediction_matches_contracted_weights() {
    let prm = AveragedNetworkParams::symmetric(2, critical_p(2), 1.7, 3, 4, 0);
    let pred = predicted_pk_critical(&prm).unwrap().to_vec();
    let got = contracted_pk(&prm).unwrap();
    assert!((pred.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    for (a, b) in pred.iter().zip(&got) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((pred[1] - pred[4]).abs() < 1e-15);
}

#[test]
fn weights_decay_faster_below_the_magnon_crossover() {
    // Away from p_c the averaged network still contracts; p_{t1} decays in t0.
    let at = |p: f64, t0| {
        let prm = AveragedNetworkParams::symmetric(2, p, 1.5, t0, 2, 0);
        *contracted_pk(&prm).unwrap().last().unwrap()
    };
    for p in [0.3, 0.5] {
        assert!(at(p, 4) < at(p, 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn c_is_real_and_equals_d_times_purity(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<C64> = (0..d * d).map(|_| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let psi = normalized(&raw);
        let c = c_constant(&psi, d).unwrap();
        prop_assert!((c - d as f64 * purity(&psi, d)).abs() < 1e-12);
    }
}
