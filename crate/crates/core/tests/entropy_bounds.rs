use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtm_core::circuit::{reference_dimer, BrickworkSpec, GateField};
use rtm_core::entropy_bounds::*;
use rtm_core::gates::{du_gate_u, du_gate_w, Dressing, Gate};
use rtm_core::numkernel::{c64, identity, matmul_mat, Budget, Mat};
use rtm_core::replica_average::{averaged_ak_contract, c_constant, AveragedNetworkParams};

fn spec(t: usize, g: Gate) -> BrickworkSpec {
    BrickworkSpec::light_cone_complete(t, GateField::Uniform(g), reference_dimer()).unwrap()
}

#[test]
fn projectors_are_orthogonal_and_complete() {
    let fam = projector_family(2, 3).unwrap();
    let n = fam.dim();
    let ps: Vec<Mat<_>> = (0..fam.len()).map(|k| fam.dense(k).unwrap()).collect();
    let mut sum = Mat::zeros(n, n);
    for (i, pi) in ps.iter().enumerate() {
        sum += pi;
        for (j, pj) in ps.iter().enumerate() {
            let prod = matmul_mat(pi.as_ref(), pj.as_ref()).unwrap();
            let want = if i == j { pi.clone() } else { Mat::zeros(n, n) };
            assert!((&prod - &want).norm_l2() < 1e-12, "P{i} P{j}");
        }
    }
    assert!((&sum - &identity(n)).norm_l2() < 1e-12);
}

#[test]
fn projector_ranks() {
    let fam = projector_family(2, 3).unwrap();
    for k in 0..=3 {
        let p = fam.dense(k).unwrap();
        let tr: f64 = (0..p.nrows()).map(|i| p[(i, i)].re).sum();
        assert!((tr - fam.rank(k) as f64).abs() < 1e-10);
    }
    assert_eq!(fam.rank(1), 3);
    assert_eq!(fam.rank(3), 48);
    assert_eq!(projector_family(2, 1).unwrap().len(), 2);
    assert!(projector_family(2, 0).is_err());
}

#[test]
fn p0_is_the_infinite_temperature_projector() {
    let fam = projector_family(3, 1).unwrap();
    let p0 = fam.dense(0).unwrap();
    for i in 0..9 {
        for j in 0..9 {
            let want = if i % 4 == 0 && j % 4 == 0 { 1.0 / 3.0 } else { 0.0 };
            assert!((p0[(i, j)].re - want).abs() < 1e-14);
        }
    }
}

#[test]
fn amplitudes_reproduce_sector_weights() {
    let b = Budget::default();
    let s = spec(4, du_gate_w(0.625, &Dressing::Fixed).unwrap());
    for t0 in 0..=4 {
        let rep = bounds_for(&s, t0, &b).unwrap();
        let ell = projected_legs(4, t0);
        let a: Vec<f64> = (0..=ell).map(|k| amplitude_ak(&s, t0, k, &b).unwrap()).collect();
        for k in 0..=ell {
            let pk = (a[k] - if k > 0 { a[k - 1] } else { 0.0 }) / a[ell];
            assert!((pk - rep.p[k]).abs() < 1e-9, "t0={t0} k={k}");
        }
        // 𝒜_ℓ is the squared norm of the unscaled trapezoid state
        let rtm = rtm_core::influence::reduce_rtm_dual_unitary(&s, t0, &b).unwrap();
        let norm2: f64 = rtm.singular_values().unwrap().values.iter().map(|x| x * x).sum();
        assert!((a[ell] * 2f64.powi((5 - t0) as i32) - norm2).abs() < 1e-9 * norm2);
    }
}

#[test]
fn sandwich_and_dimension_bound() {
    let b = Budget::default();
    for g in [du_gate_w(0.625, &Dressing::Fixed).unwrap(), Gate::haar(2, 3)] {
        for t in 2..=5 {
            let s = spec(t, g.clone());
            for t0 in 0..=t {
                let r = bounds_for(&s, t0, &b).unwrap();
                let exact = r.exact.unwrap();
                assert!(r.lower <= exact + 1e-8 && exact <= r.upper + 1e-8, "t={t} t0={t0}");
                assert!((r.p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                for (k, s_k) in r.s_sigma.iter().enumerate() {
                    assert!(*s_k <= 2.0 * k as f64 * 2f64.ln() + 1e-10);
                }
            }
        }
    }
}

#[test]
fn non_normalizable_state_is_rejected() {
    let fam = projector_family(2, 1).unwrap();
    let zero = Mat::zeros(2, 4);
    assert!(decompose(zero.as_ref(), &fam).is_err());
}

#[test]
fn disorder_averaged_amplitudes_match_the_averaged_network() {
    // Random single-site dressings at every gate; p = 0.5 keeps the
    // dual-unitary family inside its domain.
    let (t, t0, p) = (3, 1, 0.5);
    let b = Budget::default();
    let psi = reference_dimer();
    let c = c_constant(&psi, 2).unwrap();
    let red = rtm_core::influence::ConeGeometry::new(t).reduce(t0);
    let (ell, u) = (red.a_bar.len(), red.a_prime.len());
    let samples = 1000;
    let mut mean = vec![0.0; ell + 1];
    let mut sq = vec![0.0; ell + 1];
    for seed in 0..samples {
        let field = GateField::Dressed { core: du_gate_u(p).unwrap(), seed };
        let s = BrickworkSpec::light_cone_complete(t, field, psi.clone()).unwrap();
        for k in 0..=ell {
            let a = amplitude_ak(&s, t0, k, &b).unwrap();
            mean[k] += a / samples as f64;
            sq[k] += a * a / samples as f64;
        }
    }
    for k in 0..=ell {
        let exact = averaged_ak_contract(&AveragedNetworkParams { d: 2, p, t0, t1: ell, k, c, a_prime: u }).unwrap();
        let se = ((sq[k] - mean[k] * mean[k]) / samples as f64).sqrt();
        assert!((mean[k] - exact).abs() < 4.0 * se + 1e-12, "k={k}: {} vs {exact} (se {se})", mean[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sandwich_on_random_states(seed in any::<u64>(), rows in 1usize..6, ell in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = projector_family(2, ell).unwrap();
        let m = Mat::from_fn(rows, fam.dim(), |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = decompose(m.as_ref(), &fam).unwrap();
        let exact = r.exact.unwrap();
        prop_assert!(r.lower <= exact + 1e-8 && exact <= r.upper + 1e-8);
        prop_assert!(r.p.iter().all(|&p| p >= -1e-12));
        prop_assert!((r.p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
