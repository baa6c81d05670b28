use rtm_core::circuit::{one_point_dense, paulis, reference_dimer, BrickworkSpec, GateField, LocalObservable};
use rtm_core::gates::{du_gate_u, Gate};
use rtm_core::influence::{build_influence, build_rtm, one_point_im, reduce_rtm_dual_unitary, ImSide};
use rtm_core::numkernel::Budget;

fn spec(t: usize, g: Gate) -> BrickworkSpec {
    BrickworkSpec::light_cone_complete(t, GateField::Uniform(g), reference_dimer()).unwrap()
}

#[test]
fn im_matches_dense_evolution() {
    let b = Budget::default();
    for t in 1..=4 {
        for g in [du_gate_u(0.4).unwrap(), Gate::haar(2, 11)] {
            let s = spec(t, g);
            let l = build_influence(&s, ImSide::Left, &b).unwrap();
            let r = build_influence(&s, ImSide::Right, &b).unwrap();
            for (name, op) in paulis() {
                let obs = LocalObservable::new(s.observable_site(), op.clone()).unwrap();
                let dense = one_point_dense(&s, &obs, &b).unwrap();
                let im = one_point_im(&l, &r, op.as_ref()).unwrap();
                assert!((dense - im).norm() < 1e-9, "t={t} {name}: {dense} vs {im}");
            }
        }
    }
}

#[test]
fn reduced_spectrum_matches_full() {
    let b = Budget::default();
    for t in 1..=4 {
        let s = spec(t, du_gate_u(0.5).unwrap());
        let l = build_influence(&s, ImSide::Left, &b).unwrap();
        let r = build_influence(&s, ImSide::Right, &b).unwrap();
        for t0 in 0..=t + 1 {
            let full = build_rtm(&l, &r, t0).unwrap().singular_values().unwrap();
            let red = reduce_rtm_dual_unitary(&s, t0, &b).unwrap().singular_values().unwrap();
            let k = full.rank();
            assert_eq!(k, red.rank(), "t={t} t0={t0}");
            for i in 0..k {
                assert!((full.values[i] - red.values[i]).abs() < 1e-9, "t={t} t0={t0} i={i}");
            }
        }
    }
}

#[test]
fn influence_overlap_is_one_and_chain_roundtrips() {
    let b = Budget::default();
    let s = spec(3, Gate::haar(2, 2));
    let l = build_influence(&s, ImSide::Left, &b).unwrap();
    let r = build_influence(&s, ImSide::Right, &b).unwrap();
    let one =
        rtm_core::numkernel::Mat::from_fn(2, 2, |i, j| rtm_core::numkernel::c64(if i == j { 1.0 } else { 0.0 }, 0.0));
    assert!((one_point_im(&l, &r, one.as_ref()).unwrap() - rtm_core::numkernel::c64(1.0, 0.0)).norm() < 1e-12);
    let chain = r.to_chain().unwrap();
    let back = rtm_core::influence::InfluenceMatrix::from_chain(ImSide::Right, 3, 2, &chain).unwrap();
    assert!(back.tensor.max_abs_diff(&r.tensor) < 1e-12);
    assert_eq!(r.bond_dimensions().unwrap().len(), 4);
}

#[test]
fn rtm_trace_reproduces_one_point_function() {
    let b = Budget::default();
    let s = spec(3, Gate::haar(2, 3));
    let l = build_influence(&s, ImSide::Left, &b).unwrap();
    let r = build_influence(&s, ImSide::Right, &b).unwrap();
    for (_, op) in paulis() {
        let want = one_point_im(&l, &r, op.as_ref()).unwrap();
        for t0 in 0..=3 {
            let got = build_rtm(&l, &r, t0).unwrap().trace_with_top(op.as_ref(), &b).unwrap();
            assert!((got - want).norm() < 1e-12, "t0={t0}");
        }
    }
}

#[test]
fn disordered_dual_unitary_reduction_matches_full() {
    let b = Budget::default();
    let field = GateField::Dressed { core: du_gate_u(0.6).unwrap(), seed: 17 };
    let s = BrickworkSpec::light_cone_complete(4, field, reference_dimer()).unwrap();
    let l = build_influence(&s, ImSide::Left, &b).unwrap();
    let r = build_influence(&s, ImSide::Right, &b).unwrap();
    for t0 in 0..=5 {
        let full = build_rtm(&l, &r, t0).unwrap().singular_values().unwrap();
        let red = reduce_rtm_dual_unitary(&s, t0, &b).unwrap().singular_values().unwrap();
        assert_eq!(full.rank(), red.rank());
        for i in 0..full.rank() {
            assert!((full.values[i] - red.values[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn both_reduction_routes_agree() {
    use rtm_core::influence::{reduce_rtm_dual_unitary_with, Route};
    let b = Budget::default();
    let s = spec(6, rtm_core::gates::du_gate_w(0.625, &rtm_core::gates::Dressing::Fixed).unwrap());
    for t0 in 0..=6 {
        let x = reduce_rtm_dual_unitary_with(&s, t0, &b, Some(Route::Factored)).unwrap().singular_values().unwrap();
        let y = reduce_rtm_dual_unitary_with(&s, t0, &b, Some(Route::Joined)).unwrap().singular_values().unwrap();
        assert_eq!(x.rank(), y.rank());
        for i in 0..x.rank() {
            assert!((x.values[i] - y.values[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn reduction_rejects_generic_gates() {
    let s = spec(2, Gate::haar(2, 1));
    assert!(reduce_rtm_dual_unitary(&s, 1, &Budget::default()).is_err());
}
