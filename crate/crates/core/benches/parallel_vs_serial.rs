use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wedge_ldp::burgers::{a_wedge_slice, track_shocks, Evolution, TrackOptions};
use wedge_ldp::envelope::e_bm_finite;
use wedge_ldp::measures::{Atom, PathMeasure};
use wedge_ldp::metric::{grid_height, grid_hopflax_bk, LatticeSpec};
use wedge_ldp::multiwedge::{multi_rate, MultiWedgeProblem, Source, Target};
use wedge_ldp::par::Exec;

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn lattice_dp(c: &mut Criterion) {
    let mut g = c.benchmark_group("grid_hopflax_bk");
    g.sample_size(10);
    let f = a_wedge_slice(0.0, 1.0, 1.0);
    let lat = LatticeSpec::symmetric(1e-3, 200, 2.0, 400, 12);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "200x400"), &exec, |b, &e| {
            b.iter(|| grid_hopflax_bk(black_box(&f), &lat, e).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("grid_height");
    g.sample_size(10);
    let mu = PathMeasure::new(
        vec![Atom::segment(0.0, 1.0, 0.0, 0.5, 1.0), Atom::segment(0.0, 1.0, 0.0, -0.5, 1.0)],
        0.0,
    )
    .unwrap();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "200x400"), &exec, |b, &e| {
            b.iter(|| grid_height(black_box(&mu), &lat, e).unwrap())
        });
    }
    g.finish();
}

fn shock_tracking(c: &mut Criterion) {
    let mut g = c.benchmark_group("track_shocks");
    let (_, f) = e_bm_finite(&[(-1.0, 3.0), (-0.3, 0.5), (0.0, 1.0), (0.6, 1.2), (1.0, 3.0)]).unwrap();
    let evo = Evolution::backward(&f).unwrap();
    let opts = TrackOptions::default();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "five_points"), &exec, |b, &e| {
            b.iter(|| track_shocks(black_box(&evo), &opts, e).unwrap())
        });
    }
    g.finish();
}

fn partitions(c: &mut Criterion) {
    let mut g = c.benchmark_group("multi_rate");
    let sources = vec![Source { z: -1.0, g: 0.0 }, Source { z: 0.0, g: 0.3 }, Source { z: 1.0, g: 0.0 }];
    let targets: Vec<Target> = (0..8).map(|k| {
        let y = -1.4 + 0.4 * k as f64;
        Target { y, f: 1.5 - 0.2 * y * y }
    }).collect();
    let p = MultiWedgeProblem::new(sources, targets).unwrap();
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, "3x8"), &exec, |b, &e| b.iter(|| multi_rate(black_box(&p), e).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, lattice_dp, shock_tracking, partitions);
criterion_main!(benches);
