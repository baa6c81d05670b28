use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtm_core::numkernel::*;
use rtm_core::ErrorKind;

fn random_tensor(shape: Vec<usize>, seed: u64) -> DenseTensor {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(shape, |_| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Naive loop contraction of `a[i, k, j] * b[k, l]` over `k`.
fn naive_ikj_kl(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    let (i_n, k_n, j_n) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let l_n = b.shape()[1];
    DenseTensor::from_fn(vec![i_n, j_n, l_n], |ix| {
        (0..k_n).map(|k| a.get(&[ix[0], k, ix[1]]) * b.get(&[k, ix[2]])).sum()
    })
}

#[test]
fn contract_matches_naive_loops() {
    let a = random_tensor(vec![3, 4, 5], 1);
    let b = random_tensor(vec![4, 2], 2);
    let c = contract(&a, &b, &[(1, 0)]).unwrap();
    assert_eq!(c.shape(), &[3, 5, 2]);
    assert!(c.max_abs_diff(&naive_ikj_kl(&a, &b)) < 1e-13);
}

#[test]
fn network_matches_pairwise_contraction() {
    let a = random_tensor(vec![2, 3, 4], 3);
    let b = random_tensor(vec![4, 5], 4);
    let c = random_tensor(vec![5, 3], 5);
    let mut net = TensorNetwork::new();
    net.push(a.clone(), vec![10, 11, 12]).unwrap();
    net.push(b.clone(), vec![12, 13]).unwrap();
    net.push(c.clone(), vec![13, 11]).unwrap();
    let got = net.contract(&[10], &Budget::default()).unwrap();
    let want = DenseTensor::from_fn(vec![2], |ix| {
        let mut acc = c64(0.0, 0.0);
        for j in 0..3 {
            for k in 0..4 {
                for l in 0..5 {
                    acc += a.get(&[ix[0], j, k]) * b.get(&[k, l]) * c.get(&[l, j]);
                }
            }
        }
        acc
    });
    assert!(got.max_abs_diff(&want) < 1e-13);
}

#[test]
fn network_rejects_hyperedges_and_dangling_labels() {
    let v = random_tensor(vec![2], 6);
    let mut net = TensorNetwork::new();
    for _ in 0..3 {
        net.push(v.clone(), vec![1]).unwrap();
    }
    assert!(net.plan(&[]).is_err());
    let mut net = TensorNetwork::new();
    net.push(random_tensor(vec![2, 2], 7), vec![1, 2]).unwrap();
    assert!(net.plan(&[]).is_err());
    assert!(net.plan(&[1, 2]).is_ok());
}

#[test]
fn budget_violation_is_a_resource_error() {
    let mut net = TensorNetwork::new();
    net.push(random_tensor(vec![8, 8], 8), vec![1, 2]).unwrap();
    net.push(random_tensor(vec![8, 8], 9), vec![3, 4]).unwrap();
    let err = net.contract(&[1, 2, 3, 4], &Budget::from_bytes(16 * 100)).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Resource);
}

#[test]
fn svd_reconstructs_and_is_sorted() {
    let t = random_tensor(vec![6, 4], 10);
    let m = mat_from_row_major(t.data(), 6, 4);
    let dec = svd(m.as_ref()).unwrap();
    assert!(dec.s.values.windows(2).all(|w| w[0] >= w[1]));
    let us = Mat::from_fn(6, dec.s.len(), |i, j| dec.left[(i, j)] * dec.s.values[j]);
    let back = matmul_mat(us.as_ref(), dec.right_h.as_ref()).unwrap();
    assert!((&back - &m).norm_l2() < 1e-12);
}

#[test]
fn eigh_matches_quadratic_form() {
    let t = random_tensor(vec![5, 5], 11);
    let a = mat_from_row_major(t.data(), 5, 5);
    let h = Mat::from_fn(5, 5, |i, j| a[(i, j)] + a[(j, i)].conj());
    let (vals, vecs) = eigh(h.as_ref()).unwrap();
    for (j, &lam) in vals.iter().enumerate() {
        let v = Mat::from_fn(5, 1, |i, _| vecs[(i, j)]);
        let hv = matmul_mat(h.as_ref(), v.as_ref()).unwrap();
        let resid: f64 = (0..5).map(|i| (hv[(i, 0)] - v[(i, 0)] * lam).norm_sqr()).sum::<f64>().sqrt();
        assert!(resid < 1e-10, "eigenpair {j} residual {resid}");
    }
}

#[test]
fn haar_second_moment() {
    // E|U_00|² = 1/d and E|U_00|⁴ = 2/(d(d+1)).
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 20000;
    let (mut m2, mut m4) = (0.0, 0.0);
    for _ in 0..n {
        let u = haar_unitary(d, &mut rng);
        assert!(unitarity_residual(u.as_ref()) < 1e-12);
        let x = u[(0, 0)].norm_sqr();
        m2 += x;
        m4 += x * x;
    }
    m2 /= n as f64;
    m4 /= n as f64;
    assert!((m2 - 1.0 / 3.0).abs() < 0.01, "{m2}");
    assert!((m4 - 2.0 / 12.0).abs() < 0.01, "{m4}");
}

#[test]
fn derived_seeds_are_distinct_and_stable() {
    let a = derive_seed(7, &[1, 2]);
    assert_eq!(a, derive_seed(7, &[1, 2]));
    assert_ne!(a, derive_seed(7, &[2, 1]));
    assert_ne!(a, derive_seed(8, &[1, 2]));
}

#[test]
fn spectrum_tail_and_rank() {
    let s = Spectrum::from_raw(vec![0.1, 3.0, 1.0, 1e-20], SpectrumKind::Singular);
    assert_eq!(s.values[0], 3.0);
    assert_eq!(s.rank(), 3);
    assert!((s.tail(1) - 1.1).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permute_roundtrip(seed in any::<u64>(), perm_ix in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p = perms[perm_ix];
        let t = random_tensor(vec![2, 3, 4], seed);
        let q = t.permute(&p).unwrap();
        let mut inv = [0; 3];
        for (i, &x) in p.iter().enumerate() { inv[x] = i; }
        prop_assert_eq!(q.permute(&inv).unwrap(), t.clone());
        prop_assert_eq!(q.get(&[1, 0, 1].map(|_| 0)), t.get(&[0, 0, 0]));
    }

    #[test]
    fn contraction_is_bilinear(seed in any::<u64>(), s in -2.0f64..2.0) {
        let a = random_tensor(vec![3, 4], seed);
        let b = random_tensor(vec![4, 2], seed ^ 1);
        let lhs = contract(&a.scale(c64(s, 0.0)), &b, &[(1, 0)]).unwrap();
        let rhs = contract(&a, &b, &[(1, 0)]).unwrap().scale(c64(s, 0.0));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn operator_norm_of_unitary_is_one(seed in any::<u64>(), d in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = haar_unitary(d, &mut rng);
        prop_assert!((operator_norm(u.as_ref()).unwrap() - 1.0).abs() < 1e-12);
    }
}
