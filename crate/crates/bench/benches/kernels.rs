use criterion::{black_box, criterion_group, criterion_main, Criterion};

use delab_core::analytic::explicit_U;
use delab_core::quadrature::{sphere_integral, SphereQuadrature};
use delab_core::wgrid::{apply_l, sample, weighted_energy, weighted_lp};
use delab_core::{GridSpec, ProblemParams};

fn grid_kernels(c: &mut Criterion) {
    let p = ProblemParams::explicit(3).unwrap();
    let u = explicit_U(&p).unwrap();
    for n in [32usize, 64] {
        let spec = GridSpec::cube(n, 8.0).unwrap();
        let g = sample(&u, &spec).unwrap();
        c.bench_function(&format!("apply_l {n}^3"), |b| b.iter(|| apply_l(black_box(&g), &p)));
        c.bench_function(&format!("weighted_energy {n}^3"), |b| b.iter(|| weighted_energy(black_box(&g), &p)));
        c.bench_function(&format!("weighted_lp {n}^3"), |b| b.iter(|| weighted_lp(black_box(&g), &p).unwrap()));
    }
}

fn sphere(c: &mut Criterion) {
    let q = SphereQuadrature::new(1.0, 16).unwrap();
    c.bench_function("sphere_integral deg16", |b| {
        b.iter(|| sphere_integral(|x| x[2].abs() * x[0] * x[0], black_box(&q)).unwrap())
    });
}

criterion_group!(benches, grid_kernels, sphere);
criterion_main!(benches);
