use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rtm_core::circuit::{paulis, reference_dimer, BrickworkSpec, GateField};
use rtm_core::entropy_bounds::{bounds_for, sector_weights};
use rtm_core::gates::{critical_p, du_gate_w, Dressing, Gate};
use rtm_core::influence::{build_influence, reduce_rtm_dual_unitary, ImSide};
use rtm_core::numkernel::{contract, svd, Budget, DenseTensor, Mat, C64};
use rtm_core::replica_average::{averaged_ak_contract, replica_grid, AveragedNetworkParams};
use rtm_core::rtm_compress::{joint_sweep, Schedule};

fn spec(t: usize) -> BrickworkSpec {
    let g = du_gate_w(0.625, &Dressing::Fixed).unwrap();
    BrickworkSpec::light_cone_complete(t, GateField::Uniform(g), reference_dimer()).unwrap()
}

fn kernels(c: &mut Criterion) {
    let a = DenseTensor::from_fn(vec![16, 16, 16], |ix| C64::new((ix[0] + ix[1]) as f64, ix[2] as f64));
    let b = DenseTensor::from_fn(vec![16, 16, 16], |ix| C64::new(ix[0] as f64, (ix[1] * ix[2]) as f64));
    c.bench_function("contract 16^3 x 16^3 over two legs", |bch| {
        bch.iter(|| contract(black_box(&a), black_box(&b), &[(1, 0), (2, 1)]).unwrap())
    });
    let m = Mat::from_fn(256, 256, |i, j| C64::new(((i * 7 + j * 13) % 17) as f64, ((i + j) % 5) as f64));
    c.bench_function("svd 256x256", |bch| bch.iter(|| svd(black_box(m.as_ref())).unwrap()));
}

fn rtm(c: &mut Criterion) {
    let budget = Budget::default();
    let mut group = c.benchmark_group("reduced rtm");
    group.sample_size(10);
    for t in [6, 8, 10] {
        let s = spec(t);
        group.bench_with_input(BenchmarkId::new("reduce t0=2", t), &s, |bch, s| {
            bch.iter(|| reduce_rtm_dual_unitary(s, 2, &budget).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sector weights t0=2", t), &s, |bch, s| {
            bch.iter(|| sector_weights(s, 2, &budget).unwrap())
        });
    }
    let s = spec(8);
    group.bench_function("bounds t=8 t0=3", |bch| bch.iter(|| bounds_for(&s, 3, &budget).unwrap()));
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let budget = Budget::default();
    let s = BrickworkSpec::light_cone_complete(4, GateField::Uniform(Gate::haar(2, 3)), reference_dimer()).unwrap();
    let l = build_influence(&s, ImSide::Left, &budget).unwrap();
    let r = build_influence(&s, ImSide::Right, &budget).unwrap();
    let probes: Vec<(String, _)> = paulis().into_iter().map(|(n, m)| (n.to_string(), m)).collect();
    let mut group = c.benchmark_group("compression");
    group.sample_size(10);
    group.bench_function("influence t=6", |bch| {
        let s6 =
            BrickworkSpec::light_cone_complete(6, GateField::Uniform(Gate::haar(2, 3)), reference_dimer()).unwrap();
        bch.iter(|| build_influence(&s6, ImSide::Right, &budget).unwrap())
    });
    group.bench_function("joint sweep t=4 chi=4", |bch| {
        bch.iter(|| joint_sweep(&l, &r, &Schedule::Chi(vec![4; 4]), &probes, &budget).unwrap())
    });
    group.finish();
}

fn replica(c: &mut Criterion) {
    let prm = AveragedNetworkParams::symmetric(2, critical_p(2), 1.5, 6, 6, 3);
    c.bench_function("averaged amplitude t0=t1=6", |bch| bch.iter(|| averaged_ak_contract(black_box(&prm)).unwrap()));
    let mut group = c.benchmark_group("replica");
    group.sample_size(10);
    group.bench_function("grid d=2 max=6", |bch| bch.iter(|| replica_grid(2, 1.5, 6).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels, rtm, sweep, replica);
criterion_main!(benches);
