//! The same kernels inside a one-thread pool and the default pool. Built
//! without the `parallel` feature both groups run the sequential fallback.

use corner_gl::geometry::BoundaryTag;
use corner_gl::glmin::GlProblem;
use corner_gl::magspec::{assemble, truncated_mesh};
use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    let mesh = truncated_mesh(FRAC_PI_2, 12.0, 0.08).unwrap();
    let problem = GlProblem::homogeneous(&mesh, 0.55, &[BoundaryTag::Artificial]).unwrap();
    let psi: Vec<Complex64> = mesh.vertices.iter().map(|x| Complex64::from_polar((-0.1 * (x[0] + x[1])).exp(), 0.3 * x[0])).collect();
    let pools = [
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ];
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(*name, |b| b.iter(|| pool.install(|| assemble(black_box(&mesh), &[BoundaryTag::Artificial]).unwrap())));
    }
    g.finish();
    let mut g = c.benchmark_group("energy");
    for (name, pool) in &pools {
        g.bench_function(*name, |b| b.iter(|| pool.install(|| problem.energy(black_box(&psi)))));
    }
    g.finish();
    let mut g = c.benchmark_group("gradient");
    for (name, pool) in &pools {
        g.bench_function(*name, |b| b.iter(|| pool.install(|| problem.gradient(black_box(&psi)))));
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
