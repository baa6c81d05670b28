use rtm_core::circuit::*;
use rtm_core::gates::{du_gate_u, Gate, GateSpec};
use rtm_core::numkernel::{c64, Budget};

#[test]
fn evolution_preserves_norm() {
    let spec = BrickworkSpec::new(3, 4, GateField::Uniform(Gate::haar(2, 1)), reference_dimer()).unwrap();
    let psi = evolve_dense(&spec, &Budget::default()).unwrap();
    let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    assert!((n - 1.0).abs() < 1e-12);
}

#[test]
fn identity_gates_keep_the_product_state() {
    let spec = BrickworkSpec::new(2, 3, GateField::Uniform(Gate::identity(2)), product_dimer(2)).unwrap();
    let psi = evolve_dense(&spec, &Budget::default()).unwrap();
    assert!((psi[0] - c64(1.0, 0.0)).norm() < 1e-14);
    let z = paulis().remove(2).1;
    for site in 0..4 {
        let v = expectation(&psi, 2, 4, &LocalObservable::new(site, z.clone()).unwrap()).unwrap();
        assert!((v - c64(1.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn swap_circuit_moves_a_bell_pair() {
    // Bell dimers are maximally mixed on each site regardless of SWAP routing.
    let spec = BrickworkSpec::light_cone_complete(3, GateField::Uniform(Gate::swap(2)), bell_dimer(2)).unwrap();
    for (_, op) in paulis() {
        let obs = LocalObservable::new(spec.observable_site(), op).unwrap();
        assert!(one_point_dense(&spec, &obs, &Budget::default()).unwrap().norm() < 1e-12);
    }
}

#[test]
fn light_cone_geometry() {
    for t in 1..8 {
        let spec =
            BrickworkSpec::light_cone_complete(t, GateField::Uniform(du_gate_u(0.3).unwrap()), reference_dimer())
                .unwrap();
        assert!(spec.cone_fits());
        let x0 = spec.observable_site();
        assert_eq!(x0 % 2, t % 2, "top-row gate starts at the observable");
    }
}

#[test]
fn dense_budget_is_enforced() {
    let spec = BrickworkSpec::new(14, 1, GateField::Uniform(Gate::identity(2)), product_dimer(2)).unwrap();
    assert!(evolve_dense(&spec, &Budget::from_bytes(1 << 20)).is_err());
}

#[test]
fn invalid_inputs_are_rejected() {
    let g = GateField::Uniform(Gate::identity(2));
    assert!(BrickworkSpec::new(2, 1, g.clone(), vec![c64(1.0, 0.0); 4]).is_err());
    assert!(BrickworkSpec::new(2, 1, g, vec![c64(1.0, 0.0); 3]).is_err());
    let not_hermitian =
        rtm_core::numkernel::Mat::from_fn(2, 2, |i, j| if i < j { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
    assert!(LocalObservable::new(0, not_hermitian).is_err());
}

#[test]
fn dressed_field_is_deterministic_and_position_dependent() {
    let f = GateField::Dressed { core: du_gate_u(0.5).unwrap(), seed: 4 };
    assert_eq!(f.gate_at(2, 3), f.gate_at(2, 3));
    assert_ne!(f.gate_at(2, 3), f.gate_at(4, 3));
}

#[test]
fn config_roundtrip() {
    let cfg = BrickworkConfig {
        d: 2,
        l: 3,
        t: 2,
        init: reference_dimer().iter().map(|z| [z.re, z.im]).collect(),
        gates: GateSource::Named(GateSpec::du_fixed(0.625)),
        disorder: None,
    };
    let js = serde_json::to_string(&cfg).unwrap();
    assert!(js.contains("\"L\":3"));
    let back: BrickworkConfig = serde_json::from_str(&js).unwrap();
    assert_eq!(back, cfg);
    let spec = back.to_spec().unwrap();
    assert_eq!(spec.sites(), 6);
}
